//! Scenario geometry: points, RIS panels, phase configurations and the
//! panel-local coordinate frame.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const UNIT_TOL: f64 = 1e-9;

/// A point or direction in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn zero() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Self {
        self * (1.0 / self.norm())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// One active RIS array.
///
/// Elements sit on a `rows x cols` grid in the panel's local x-z plane. Each
/// element applies the LNA field gain `c = 10^(lna_gain_db / 20)` followed by
/// a `phase_bits`-bit phase shifter, and injects amplifier noise of variance
/// `element_noise_power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RisPanel {
    pub id: String,
    pub center: Vec3,
    pub normal: Vec3,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub lna_gain_db: f64,
    pub phase_bits: u8,
    pub element_noise_power: f64,
    /// Explicit local element positions overriding the regular grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<Vec3>>,
}

impl RisPanel {
    /// Number of elements `K`.
    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// LNA field gain `c`.
    pub fn gain(&self) -> f64 {
        10f64.powf(self.lna_gain_db / 20.0)
    }

    /// Number of phase levels `2^B`.
    pub fn levels(&self) -> u16 {
        1u16 << self.phase_bits
    }

    /// Phase quantization step `2*pi / 2^B`.
    pub fn phase_step(&self) -> f64 {
        phase_step(self.phase_bits)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.id;
        if self.rows == 0 || self.cols == 0 {
            return Err(config_err(format!("panel {id}: rows and cols must be >= 1")));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(config_err(format!("panel {id}: spacing must be > 0")));
        }
        if !self.center.is_finite() || !self.normal.is_finite() {
            return Err(config_err(format!("panel {id}: non-finite center or normal")));
        }
        if (self.normal.norm() - 1.0).abs() > UNIT_TOL {
            return Err(config_err(format!("panel {id}: normal must be a unit vector")));
        }
        if !(1..=8).contains(&self.phase_bits) {
            return Err(config_err(format!("panel {id}: phase_bits must be in [1, 8]")));
        }
        if !(self.lna_gain_db.is_finite() && self.lna_gain_db >= 0.0) {
            return Err(config_err(format!("panel {id}: lna_gain_db must be >= 0")));
        }
        if !(self.element_noise_power.is_finite() && self.element_noise_power >= 0.0) {
            return Err(config_err(format!(
                "panel {id}: element_noise_power must be >= 0"
            )));
        }
        if let Some(elements) = &self.elements {
            if elements.len() != self.num_elements() {
                return Err(config_err(format!(
                    "panel {id}: {} explicit elements but rows*cols = {}",
                    elements.len(),
                    self.num_elements()
                )));
            }
            if elements.iter().any(|e| !e.is_finite() || e.y != 0.0) {
                return Err(config_err(format!(
                    "panel {id}: explicit elements must lie in the local x-z plane (y = 0)"
                )));
            }
        }
        upright_frame(self.normal).map(|_| ())
    }
}

pub fn phase_step(bits: u8) -> f64 {
    2.0 * PI / f64::from(1u32 << bits)
}

/// Local element positions `r_k` relative to the panel center.
///
/// Row-major order: rows run bottom-to-top along +z, columns left-to-right
/// along +x. The grid is centered on the origin.
pub fn element_positions(panel: &RisPanel) -> Vec<Vec3> {
    if let Some(elements) = &panel.elements {
        return elements.clone();
    }
    let x0 = (panel.cols as f64 - 1.0) / 2.0;
    let z0 = (panel.rows as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(panel.num_elements());
    for r in 0..panel.rows {
        for c in 0..panel.cols {
            out.push(Vec3::new(
                (c as f64 - x0) * panel.spacing,
                0.0,
                (r as f64 - z0) * panel.spacing,
            ));
        }
    }
    out
}

/// Orthonormal (x, y, z) axes of an upright panel facing `normal`.
fn upright_frame(normal: Vec3) -> Result<[Vec3; 3]> {
    let up = Vec3::new(0.0, 0.0, 1.0);
    let n = normal.normalized();
    let z_axis = up - n * up.dot(n);
    if z_axis.norm() < 1e-9 {
        return Err(config_err(
            "panel normal is parallel to the global z axis; panels must face horizontally",
        ));
    }
    let z_axis = z_axis.normalized();
    let x_axis = n.cross(z_axis);
    Ok([x_axis, n, z_axis])
}

/// Maps a panel-local point to global coordinates.
///
/// Local +y becomes the panel normal, local +z stays as close to global +z as
/// the normal allows, and the origin moves to the panel center.
pub fn local_to_global(panel: &RisPanel, p_local: Vec3) -> Result<Vec3> {
    let [ex, ey, ez] = upright_frame(panel.normal)?;
    Ok(panel.center + ex * p_local.x + ey * p_local.y + ez * p_local.z)
}

/// Global positions of every element of `panel`, in element order.
pub fn global_element_positions(panel: &RisPanel) -> Result<Vec<Vec3>> {
    let [ex, ey, ez] = upright_frame(panel.normal)?;
    Ok(element_positions(panel)
        .into_iter()
        .map(|p| panel.center + ex * p.x + ey * p.y + ez * p.z)
        .collect())
}

/// Per-element quantized phase indices for one panel; element `k` realizes
/// the phase `indices[k] * 2*pi / 2^B`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub panel_id: String,
    pub indices: Vec<u16>,
}

impl PhaseConfig {
    pub fn zeros(panel: &RisPanel) -> Self {
        Self {
            panel_id: panel.id.clone(),
            indices: vec![0; panel.num_elements()],
        }
    }

    /// Realized phases in radians.
    pub fn phases(&self, bits: u8) -> Vec<f64> {
        let step = phase_step(bits);
        self.indices.iter().map(|&q| f64::from(q) * step).collect()
    }

    pub fn validate_for(&self, panel: &RisPanel) -> Result<()> {
        if self.panel_id != panel.id {
            return Err(crate::Error::Dimension(format!(
                "config for panel {} supplied where panel {} expected",
                self.panel_id, panel.id
            )));
        }
        if self.indices.len() != panel.num_elements() {
            return Err(crate::Error::Dimension(format!(
                "panel {}: config has {} indices, panel has {} elements",
                panel.id,
                self.indices.len(),
                panel.num_elements()
            )));
        }
        if let Some(q) = self.indices.iter().find(|&&q| q >= panel.levels()) {
            return Err(config_err(format!(
                "panel {}: phase index {q} outside [0, {})",
                panel.id,
                panel.levels()
            )));
        }
        Ok(())
    }
}

/// Checks one config per panel, in panel order.
pub fn validate_configs(panels: &[RisPanel], configs: &[PhaseConfig]) -> Result<()> {
    if panels.len() != configs.len() {
        return Err(crate::Error::Dimension(format!(
            "{} configs for {} panels",
            configs.len(),
            panels.len()
        )));
    }
    panels
        .iter()
        .zip(configs)
        .try_for_each(|(p, c)| c.validate_for(p))
}

/// Node placement and propagation parameters for one scenario.
///
/// BS and UE carry uniform linear arrays along the global x axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGeometry {
    pub bs_position: Vec3,
    pub n_tx: usize,
    pub bs_antenna_spacing: f64,
    pub ue_position: Vec3,
    pub n_rx: usize,
    pub ue_antenna_spacing: f64,
    pub panels: Vec<RisPanel>,
    pub carrier_frequency_hz: f64,
    pub n_scatterers_per_link: usize,
    pub scatter_gain_db: f64,
    /// Extra loss in dB on the whole BS-UE link (walls, doors, bodies).
    #[serde(default)]
    pub direct_attenuation_db: f64,
    pub seed: u64,
}

impl ScenarioGeometry {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }

    pub fn total_elements(&self) -> usize {
        self.panels.iter().map(RisPanel::num_elements).sum()
    }

    pub fn panel(&self, id: &str) -> Option<&RisPanel> {
        self.panels.iter().find(|p| p.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency_hz.is_finite() && self.carrier_frequency_hz > 0.0) {
            return Err(config_err("carrier_frequency_hz must be > 0"));
        }
        if self.n_tx == 0 || self.n_rx == 0 {
            return Err(config_err("n_tx and n_rx must be >= 1"));
        }
        for (name, s) in [
            ("bs_antenna_spacing", self.bs_antenna_spacing),
            ("ue_antenna_spacing", self.ue_antenna_spacing),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(config_err(format!("{name} must be > 0")));
            }
        }
        if !self.scatter_gain_db.is_finite() {
            return Err(config_err("scatter_gain_db must be finite"));
        }
        if !(self.direct_attenuation_db.is_finite() && self.direct_attenuation_db >= 0.0) {
            return Err(config_err("direct_attenuation_db must be >= 0"));
        }
        if !self.bs_position.is_finite() || !self.ue_position.is_finite() {
            return Err(config_err("non-finite BS or UE position"));
        }
        let mut ids = std::collections::BTreeSet::new();
        for p in &self.panels {
            p.validate()?;
            if !ids.insert(p.id.as_str()) {
                return Err(config_err(format!("duplicate panel id {}", p.id)));
            }
        }
        let mut named = vec![("bs", self.bs_position), ("ue", self.ue_position)];
        named.extend(self.panels.iter().map(|p| (p.id.as_str(), p.center)));
        for (i, (a, pa)) in named.iter().enumerate() {
            for (b, pb) in &named[i + 1..] {
                if pa.distance(*pb) < 1e-9 {
                    return Err(config_err(format!("positions of {a} and {b} coincide")));
                }
            }
        }
        Ok(())
    }
}

/// Element positions of a uniform linear array along global x, centered on
/// `center`.
pub fn ula_positions(center: Vec3, n: usize, spacing: f64) -> Vec<Vec3> {
    let x0 = (n as f64 - 1.0) / 2.0;
    (0..n)
        .map(|i| center + Vec3::new((i as f64 - x0) * spacing, 0.0, 0.0))
        .collect()
}

//! Channel synthesis and link assembly.
//!
//! Channels come from a geometric model: every link carries one spherical-wave
//! line-of-sight ray plus a configurable number of single-bounce scatterer
//! rays. RIS elements radiate only into the half-space in front of the panel.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{
    global_element_positions, ula_positions, validate_configs, PhaseConfig, RisPanel,
    ScenarioGeometry, Vec3,
};

pub type CMatrix = DMatrix<Complex64>;

/// Minimum separation between two radiating points, m.
const MIN_LINK_DISTANCE: f64 = 1e-9;

/// Margin added around the node bounding box before placing scatterers, m.
const SCATTER_BOX_MARGIN: f64 = 1.0;

/// Channel matrices of one scenario realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Direct BS-UE channel, `N_r x N_t`.
    pub h_direct: CMatrix,
    /// RIS-UE channels, `N_r x K_l`.
    pub g_list: Vec<CMatrix>,
    /// BS-RIS channels, `K_l x N_t`.
    pub f_list: Vec<CMatrix>,
    pub wavelength: f64,
}

impl ChannelSet {
    pub fn n_rx(&self) -> usize {
        self.h_direct.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h_direct.ncols()
    }

    /// Checks dimensions against `panels` (in order).
    pub fn check_panels(&self, panels: &[RisPanel]) -> Result<()> {
        if self.g_list.len() != self.f_list.len() || self.g_list.len() != panels.len() {
            return Err(Error::Dimension(format!(
                "{} G, {} F matrices for {} panels",
                self.g_list.len(),
                self.f_list.len(),
                panels.len()
            )));
        }
        for ((g, f), p) in self.g_list.iter().zip(&self.f_list).zip(panels) {
            let k = p.num_elements();
            if g.nrows() != self.n_rx() || g.ncols() != k || f.nrows() != k || f.ncols() != self.n_tx()
            {
                return Err(Error::Dimension(format!(
                    "panel {}: G is {}x{}, F is {}x{}, expected {}x{k} and {k}x{}",
                    p.id,
                    g.nrows(),
                    g.ncols(),
                    f.nrows(),
                    f.ncols(),
                    self.n_rx(),
                    self.n_tx()
                )));
            }
        }
        Ok(())
    }
}

/// Front half-space of a panel.
#[derive(Clone, Copy)]
struct Aperture {
    center: Vec3,
    normal: Vec3,
}

impl Aperture {
    fn of(panel: &RisPanel) -> Self {
        Self {
            center: panel.center,
            normal: panel.normal,
        }
    }

    fn sees(&self, p: Vec3) -> bool {
        self.normal.dot(p - self.center) > 0.0
    }
}

fn visible(ap: Option<Aperture>, p: Vec3) -> bool {
    ap.is_none_or(|a| a.sees(p))
}

struct Scatterer {
    position: Vec3,
    gain: Complex64,
}

fn free_space(d: f64, wavelength: f64) -> Complex64 {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    Complex64::from_polar(wavelength / (4.0 * std::f64::consts::PI * d), -k * d)
}

/// Channel from `tx` points to `rx` points, `rx.len() x tx.len()`.
fn link_matrix(
    tx: &[Vec3],
    tx_ap: Option<Aperture>,
    rx: &[Vec3],
    rx_ap: Option<Aperture>,
    scatterers: &[Scatterer],
    wavelength: f64,
) -> Result<CMatrix> {
    let mut h = CMatrix::zeros(rx.len(), tx.len());
    for (i, &r) in rx.iter().enumerate() {
        for (j, &t) in tx.iter().enumerate() {
            let d = r.distance(t);
            if d < MIN_LINK_DISTANCE {
                return Err(Error::Config(format!(
                    "zero-distance link between {t:?} and {r:?}"
                )));
            }
            let mut acc = Complex64::new(0.0, 0.0);
            if visible(tx_ap, r) && visible(rx_ap, t) {
                acc += free_space(d, wavelength);
            }
            for s in scatterers {
                if !(visible(tx_ap, s.position) && visible(rx_ap, s.position)) {
                    continue;
                }
                let path = t.distance(s.position) + s.position.distance(r);
                if path < MIN_LINK_DISTANCE {
                    continue;
                }
                acc += s.gain * free_space(path, wavelength);
            }
            h[(i, j)] = acc;
        }
    }
    Ok(h)
}

struct ScatterSampler {
    rng: ChaCha8Rng,
    lo: Vec3,
    hi: Vec3,
    gain_std: f64,
    count: usize,
}

impl ScatterSampler {
    fn draw(&mut self) -> Vec<Scatterer> {
        (0..self.count)
            .map(|_| {
                let position = Vec3::new(
                    self.rng.random_range(self.lo.x..=self.hi.x),
                    self.rng.random_range(self.lo.y..=self.hi.y),
                    self.rng.random_range(self.lo.z..=self.hi.z),
                );
                let re: f64 = StandardNormal.sample(&mut self.rng);
                let im: f64 = StandardNormal.sample(&mut self.rng);
                Scatterer {
                    position,
                    gain: Complex64::new(re, im) * self.gain_std,
                }
            })
            .collect()
    }
}

fn bounding_box(points: impl Iterator<Item = Vec3>) -> (Vec3, Vec3) {
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for p in points {
        lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
        hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
    }
    let m = Vec3::new(SCATTER_BOX_MARGIN, SCATTER_BOX_MARGIN, SCATTER_BOX_MARGIN);
    (lo - m, hi + m)
}

/// Synthesizes `H_d`, `{G_l}` and `{F_l}` for `geom`.
///
/// Scatterers are drawn independently per link, in the order direct link,
/// then `F_l`, `G_l` for each panel, from a ChaCha8 stream seeded by
/// `geom.seed`. Scatterers are placed uniformly in the node bounding box
/// grown by one meter on every side; each has a circularly-symmetric
/// Gaussian gain of mean power `scatter_gain_db` relative to the LoS ray and
/// the free-space amplitude of the unfolded two-hop path. The direct link is
/// finally scaled down by `direct_attenuation_db`.
pub fn synth_channels(geom: &ScenarioGeometry) -> Result<ChannelSet> {
    geom.validate()?;
    let wavelength = geom.wavelength();
    let bs = ula_positions(geom.bs_position, geom.n_tx, geom.bs_antenna_spacing);
    let ue = ula_positions(geom.ue_position, geom.n_rx, geom.ue_antenna_spacing);
    let panel_points = geom
        .panels
        .iter()
        .map(global_element_positions)
        .collect::<Result<Vec<_>>>()?;

    let (lo, hi) = bounding_box(
        bs.iter()
            .chain(&ue)
            .chain(panel_points.iter().flatten())
            .copied(),
    );
    let mut sampler = ScatterSampler {
        rng: ChaCha8Rng::seed_from_u64(geom.seed),
        lo,
        hi,
        gain_std: (10f64.powf(geom.scatter_gain_db / 10.0) / 2.0).sqrt(),
        count: geom.n_scatterers_per_link,
    };

    let direct_scatter = sampler.draw();
    let h_direct = link_matrix(&bs, None, &ue, None, &direct_scatter, wavelength)?
        * Complex64::new(10f64.powf(-geom.direct_attenuation_db / 20.0), 0.0);
    let mut g_list = Vec::with_capacity(geom.panels.len());
    let mut f_list = Vec::with_capacity(geom.panels.len());
    for (panel, points) in geom.panels.iter().zip(&panel_points) {
        let ap = Some(Aperture::of(panel));
        let f_scatter = sampler.draw();
        f_list.push(link_matrix(&bs, None, points, ap, &f_scatter, wavelength)?);
        let g_scatter = sampler.draw();
        g_list.push(link_matrix(points, ap, &ue, None, &g_scatter, wavelength)?);
    }
    Ok(ChannelSet {
        h_direct,
        g_list,
        f_list,
        wavelength,
    })
}

/// Unit phasors `e^{j q dtheta}` for every level of a `bits`-bit shifter.
pub(crate) fn phasor_table(bits: u8) -> Vec<Complex64> {
    let step = crate::geometry::phase_step(bits);
    (0..1u32 << bits)
        .map(|q| Complex64::from_polar(1.0, f64::from(q) * step))
        .collect()
}

/// Adds `G diag(c e^{j theta}) F` to `acc`.
pub(crate) fn accumulate_reflection(
    acc: &mut CMatrix,
    g: &CMatrix,
    f: &CMatrix,
    gain: f64,
    phasors: &[Complex64],
    config: &PhaseConfig,
) {
    for (k, &q) in config.indices.iter().enumerate() {
        let phi = phasors[usize::from(q)] * gain;
        let gk = g.column(k);
        let fk = f.row(k);
        for c in 0..acc.ncols() {
            let w = phi * fk[c];
            for r in 0..acc.nrows() {
                acc[(r, c)] += gk[r] * w;
            }
        }
    }
}

/// Effective channel `H = (H_d + sum_l G_l Phi_l F_l) sqrt(P_t)` with
/// `Phi_l = c_l diag(e^{j theta_l,k})`.
pub fn effective_channel(
    cs: &ChannelSet,
    panels: &[RisPanel],
    configs: &[PhaseConfig],
    p_t: f64,
) -> Result<CMatrix> {
    cs.check_panels(panels)?;
    validate_configs(panels, configs)?;
    if !(p_t > 0.0 && p_t.is_finite()) {
        return Err(Error::Config("transmit power must be > 0".into()));
    }
    let mut h = cs.h_direct.clone();
    for (((g, f), panel), cfg) in cs.g_list.iter().zip(&cs.f_list).zip(panels).zip(configs) {
        accumulate_reflection(&mut h, g, f, panel.gain(), &phasor_table(panel.phase_bits), cfg);
    }
    Ok(h * Complex64::new(p_t.sqrt(), 0.0))
}

/// Noise covariance `R_n = sum_l c_l^2 sigma_z,l^2 G_l G_l^H + sigma_v^2 I`.
///
/// Independent of the phase configuration since `Q_l Q_l^H = I`.
pub fn noise_covariance(cs: &ChannelSet, panels: &[RisPanel], sigma_v2: f64) -> Result<CMatrix> {
    cs.check_panels(panels)?;
    if !(sigma_v2 > 0.0 && sigma_v2.is_finite()) {
        return Err(Error::Config("thermal noise variance must be > 0".into()));
    }
    let n = cs.n_rx();
    let mut r = CMatrix::identity(n, n) * Complex64::new(sigma_v2, 0.0);
    for (g, panel) in cs.g_list.iter().zip(panels) {
        let w = panel.gain().powi(2) * panel.element_noise_power;
        if w > 0.0 {
            r += (g * g.adjoint()) * Complex64::new(w, 0.0);
        }
    }
    Ok(r)
}

fn hermitian_power(r_n: &CMatrix, exponent: f64) -> Result<CMatrix> {
    if !r_n.is_square() {
        return Err(Error::Dimension(format!(
            "covariance must be square, got {}x{}",
            r_n.nrows(),
            r_n.ncols()
        )));
    }
    if r_n.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("covariance contains NaN or infinity".into()));
    }
    let trace: f64 = r_n.diagonal().iter().map(|z| z.re).sum();
    let eig = SymmetricEigen::new(r_n.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if trace <= 0.0 || min < 1e-15 * trace {
        return Err(Error::Singular(format!(
            "smallest eigenvalue {min:e} below 1e-15 * trace ({trace:e})"
        )));
    }
    let u = &eig.eigenvectors;
    let scaled = CMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
        u[(i, j)] * eig.eigenvalues[j].powf(exponent)
    });
    Ok(&scaled * u.adjoint())
}

/// Hermitian principal square root `R^{1/2}`.
pub fn hermitian_sqrt(r_n: &CMatrix) -> Result<CMatrix> {
    hermitian_power(r_n, 0.5)
}

/// `R^{-1/2}` from the Hermitian principal square root.
pub fn hermitian_inv_sqrt(r_n: &CMatrix) -> Result<CMatrix> {
    hermitian_power(r_n, -0.5)
}

/// Whitened channel `R_n^{-1/2} H`.
pub fn whiten(h: &CMatrix, r_n: &CMatrix) -> Result<CMatrix> {
    if r_n.ncols() != h.nrows() {
        return Err(Error::Dimension(format!(
            "covariance is {}x{}, channel has {} rows",
            r_n.nrows(),
            r_n.ncols(),
            h.nrows()
        )));
    }
    Ok(hermitian_inv_sqrt(r_n)? * h)
}

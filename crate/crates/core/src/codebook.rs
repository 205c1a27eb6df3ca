//! Angular codebooks built from quantized RIS steering vectors.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{element_positions, phase_step, PhaseConfig, RisPanel, Vec3};

/// Wave vector `(2 pi / lambda) [sin b cos a, sin b sin a, cos b]`.
///
/// `beta` enters as a polar angle measured from +z, which is how the formula
/// is written; with `beta` in `[-pi/2, pi/2]` the z component is never
/// negative.
pub fn wave_vector(alpha: f64, beta: f64, wavelength: f64) -> Vec3 {
    let k = TAU / wavelength;
    Vec3::new(
        k * beta.sin() * alpha.cos(),
        k * beta.sin() * alpha.sin(),
        k * beta.cos(),
    )
}

/// Raw element phases `u^T r_k` for a steering direction.
pub fn steering_phases(panel: &RisPanel, alpha: f64, beta: f64, wavelength: f64) -> Vec<f64> {
    let u = wave_vector(alpha, beta, wavelength);
    element_positions(panel).into_iter().map(|r| u.dot(r)).collect()
}

/// Steering vector `[e^{j u^T r_1}, ..., e^{j u^T r_K}]`.
pub fn steering_vector(panel: &RisPanel, alpha: f64, beta: f64, wavelength: f64) -> Vec<Complex64> {
    steering_phases(panel, alpha, beta, wavelength)
        .into_iter()
        .map(|p| Complex64::from_polar(1.0, p))
        .collect()
}

/// Index of the nearest `bits`-bit phase level, in `[0, 2^bits)`.
pub fn quantize_index(x: f64, bits: u8) -> u16 {
    let levels = 1u32 << bits;
    let q = (x.rem_euclid(TAU) / phase_step(bits) + 0.5).floor() as u32;
    // rem_euclid can round up to exactly 2 pi, and +0.5 can reach 2^bits
    (q % levels) as u16
}

/// `dtheta * floor(mod(x, 2 pi) / dtheta + 0.5)`, wrapped into `[0, 2 pi)`.
pub fn quantize_phase(x: f64, bits: u8) -> f64 {
    f64::from(quantize_index(x, bits)) * phase_step(bits)
}

/// Quantized steering vector expressed as phase indices.
pub fn quantized_steering(panel: &RisPanel, alpha: f64, beta: f64, wavelength: f64) -> PhaseConfig {
    PhaseConfig {
        panel_id: panel.id.clone(),
        indices: steering_phases(panel, alpha, beta, wavelength)
            .into_iter()
            .map(|p| quantize_index(p, panel.phase_bits))
            .collect(),
    }
}

/// Uniform angular search grid: `alpha = alpha0 + m pi / M'` for
/// `m < M`, `beta = beta0 + n pi / N'` for `n < N`. Angles in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub alpha0: f64,
    pub beta0: f64,
    pub m_steps: usize,
    pub n_steps: usize,
    pub m_resolution: usize,
    pub n_resolution: usize,
}

impl AngleGrid {
    /// Square `sqrt(T) x sqrt(T)` grid with `M' = N' = sqrt(T) - 1`, or
    /// `None` when `t` is not a perfect square of at least 4.
    pub fn square(alpha0: f64, beta0: f64, t: usize) -> Option<Self> {
        let m = (t as f64).sqrt().round() as usize;
        (m >= 2 && m * m == t).then_some(Self {
            alpha0,
            beta0,
            m_steps: m,
            n_steps: m,
            m_resolution: m - 1,
            n_resolution: m - 1,
        })
    }

    pub fn size(&self) -> usize {
        self.m_steps * self.n_steps
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0.is_finite() && self.beta0.is_finite()) {
            return Err(Error::Config("grid start angles must be finite".into()));
        }
        if self.m_steps == 0 || self.n_steps == 0 {
            return Err(Error::Config("grid step counts must be >= 1".into()));
        }
        if self.m_resolution == 0 || self.n_resolution == 0 {
            return Err(Error::Config("grid resolutions must be >= 1".into()));
        }
        if self.m_steps > self.m_resolution + 1 {
            return Err(Error::FieldOfView(format!(
                "M = {} > M' + 1 = {}",
                self.m_steps,
                self.m_resolution + 1
            )));
        }
        if self.n_steps > self.n_resolution + 1 {
            return Err(Error::FieldOfView(format!(
                "N = {} > N' + 1 = {}",
                self.n_steps,
                self.n_resolution + 1
            )));
        }
        Ok(())
    }

    pub fn alphas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.m_steps).map(|m| self.alpha0 + m as f64 * PI / self.m_resolution as f64)
    }

    pub fn betas(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_steps).map(|n| self.beta0 + n as f64 * PI / self.n_resolution as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub alpha: f64,
    pub beta: f64,
    pub config: PhaseConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub panel_id: String,
    pub entries: Vec<CodebookEntry>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV with columns `entry_index, alpha_deg, beta_deg, q_0 .. q_{K-1}`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let k = self.entries.first().map_or(0, |e| e.config.indices.len());
        write!(out, "entry_index,alpha_deg,beta_deg")?;
        for i in 0..k {
            write!(out, ",q_{i}")?;
        }
        writeln!(out)?;
        for (i, e) in self.entries.iter().enumerate() {
            write!(out, "{i},{},{}", e.alpha.to_degrees(), e.beta.to_degrees())?;
            for q in &e.config.indices {
                write!(out, ",{q}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Enumerates `grid` for `panel`, elevation outer and azimuth inner.
pub fn build_codebook(panel: &RisPanel, grid: &AngleGrid, wavelength: f64) -> Result<Codebook> {
    grid.validate()?;
    let t = grid.size();
    let bits = u32::from(panel.phase_bits) * panel.num_elements() as u32;
    if bits < usize::BITS && t > (1usize << bits) {
        return Err(Error::Oversampling { entries: t, bits });
    }
    let mut entries = Vec::with_capacity(t);
    for beta in grid.betas() {
        for alpha in grid.alphas() {
            entries.push(CodebookEntry {
                alpha,
                beta,
                config: quantized_steering(panel, alpha, beta, wavelength),
            });
        }
    }
    Ok(Codebook {
        panel_id: panel.id.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn panel(rows: usize, cols: usize, spacing: f64, bits: u8) -> RisPanel {
        RisPanel {
            id: "p".into(),
            center: Vec3::zero(),
            normal: Vec3::new(0.0, 1.0, 0.0),
            rows,
            cols,
            spacing,
            lna_gain_db: 0.0,
            phase_bits: bits,
            element_noise_power: 0.0,
            elements: None,
        }
    }

    #[test]
    fn wave_vector_examples() {
        let u = wave_vector(0.0, 0.0, 1.0);
        assert_eq!((u.x, u.y), (0.0, 0.0));
        assert!((u.z - TAU).abs() < 1e-15);
        let u = wave_vector(0.0, PI / 2.0, 1.0);
        assert!((u.x - TAU).abs() < 1e-15 && u.y == 0.0 && u.z.abs() < 1e-15);
        for (a, b) in [(0.3, -1.2), (2.9, 0.4), (-1.0, 1.5)] {
            assert!((wave_vector(a, b, 0.25).norm() - TAU / 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_examples() {
        assert_eq!(steering_vector(&panel(1, 1, 0.5, 2), 0.7, 0.2, 1.0), vec![Complex64::new(1.0, 0.0)]);
        let v = steering_vector(&panel(1, 2, 0.5, 2), 0.0, PI / 2.0, 1.0);
        assert!((v[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((v[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
        // u along y is orthogonal to every element of a panel in the x-z plane
        let v = steering_vector(&panel(3, 3, 0.5, 2), PI / 2.0, PI / 2.0, 1.0);
        assert!(v.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(quantize_phase(0.0, 2), 0.0);
        assert_eq!(quantize_phase(PI / 2.0 + 0.1, 2), PI / 2.0);
        assert_eq!(quantize_phase(TAU - 0.01, 2), 0.0);
        assert_eq!(quantize_index(-PI / 2.0, 2), 3);
    }

    #[test]
    fn one_bit_alphabet() {
        let p = panel(4, 4, 0.5, 1);
        for (a, b) in [(0.1, 0.2), (1.3, -0.7), (-2.0, 1.1)] {
            let cfg = quantized_steering(&p, a, b, 1.0);
            assert!(cfg.indices.iter().all(|&q| q < 2));
        }
        assert_eq!(quantized_steering(&panel(1, 1, 0.5, 3), 1.0, 1.0, 1.0).indices, vec![0]);
    }

    #[test]
    fn simulation_grid() {
        let grid = AngleGrid {
            alpha0: 0.0,
            beta0: -PI / 2.0,
            m_steps: 4,
            n_steps: 4,
            m_resolution: 3,
            n_resolution: 3,
        };
        let cb = build_codebook(&panel(4, 4, 0.5, 2), &grid, 1.0).unwrap();
        assert_eq!(cb.len(), 16);
        let deg = |x: f64| (x.to_degrees() * 1e9).round() / 1e9;
        let alphas: Vec<f64> = cb.entries[..4].iter().map(|e| deg(e.alpha)).collect();
        assert_eq!(alphas, vec![0.0, 60.0, 120.0, 180.0]);
        let betas: Vec<f64> = cb.entries.iter().step_by(4).map(|e| deg(e.beta)).collect();
        assert_eq!(betas, vec![-90.0, -30.0, 30.0, 90.0]);
    }

    #[test]
    fn field_of_view_and_oversampling() {
        let mut grid = AngleGrid {
            alpha0: 0.0,
            beta0: 0.0,
            m_steps: 6,
            n_steps: 2,
            m_resolution: 3,
            n_resolution: 3,
        };
        assert!(matches!(
            build_codebook(&panel(2, 2, 0.5, 1), &grid, 1.0),
            Err(Error::FieldOfView(_))
        ));
        grid.m_steps = 4;
        grid.n_steps = 4;
        assert!(build_codebook(&panel(2, 2, 0.5, 1), &grid, 1.0).is_ok());
        grid.m_resolution = 4;
        grid.m_steps = 5;
        assert!(matches!(
            build_codebook(&panel(2, 2, 0.5, 1), &grid, 1.0),
            Err(Error::Oversampling { entries: 20, bits: 4 })
        ));
    }

    #[test]
    fn square_grid_rule() {
        let g = AngleGrid::square(0.0, 0.0, 4).unwrap();
        assert_eq!((g.m_steps, g.n_steps, g.m_resolution, g.n_resolution), (2, 2, 1, 1));
        assert!(AngleGrid::square(0.0, 0.0, 5).is_none());
        assert!(AngleGrid::square(0.0, 0.0, 1).is_none());
    }

    #[test]
    fn csv_export() {
        let grid = AngleGrid::square(0.0, 0.0, 4).unwrap();
        let cb = build_codebook(&panel(1, 2, 0.5, 2), &grid, 1.0).unwrap();
        let mut buf = Vec::new();
        cb.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "entry_index,alpha_deg,beta_deg,q_0,q_1");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,0,0,"));
    }
}

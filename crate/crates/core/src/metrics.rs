//! Link metrics: capacity, reciprocal condition number, power draw, energy
//! efficiency and coverage statistics.

use serde::{Deserialize, Serialize};

use crate::channel::CMatrix;
use crate::error::{config_err, Error, Result};
use crate::geometry::{PhaseConfig, RisPanel};

/// Coverage level used for EE summaries: the value reached by at least this
/// fraction of samples.
pub const ICDF_COVERAGE_LEVEL: f64 = 0.68;

/// Default relative singular-value threshold of [`rank_proxy`].
pub const DEFAULT_RANK_TAU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Per-antenna transmit power, W.
    pub p_t: f64,
    /// Thermal noise variance per receive antenna, W.
    pub sigma_v2: f64,
    pub bandwidth_hz: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_t", self.p_t),
            ("sigma_v2", self.sigma_v2),
            ("bandwidth_hz", self.bandwidth_hz),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(config_err(format!("system.{name} must be > 0")));
            }
        }
        Ok(())
    }
}

/// Hardware power-consumption constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Reciprocal BS power-amplifier efficiency.
    pub upsilon_bs: f64,
    /// BS circuit power, W.
    pub p_c_bs: f64,
    /// Reciprocal LNA efficiency.
    pub upsilon_lna: f64,
    /// Static power of one phase shifter, W.
    pub p_ps: f64,
    /// Control board and other static RIS power, W.
    pub p_s_aris: f64,
    /// Transmit symbols are isotropic, `E[x x^H] = I / N_t`. Only the
    /// isotropic model is supported.
    pub tx_isotropic: bool,
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("upsilon_bs", self.upsilon_bs), ("upsilon_lna", self.upsilon_lna)] {
            if !(v.is_finite() && v >= 1.0) {
                return Err(config_err(format!("power.{name} must be >= 1")));
            }
        }
        for (name, v) in [
            ("p_c_bs", self.p_c_bs),
            ("p_ps", self.p_ps),
            ("p_s_aris", self.p_s_aris),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(config_err(format!("power.{name} must be >= 0")));
            }
        }
        if !self.tx_isotropic {
            return Err(config_err("power.tx_isotropic = false is not supported"));
        }
        Ok(())
    }
}

/// Metrics of one evaluated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub capacity_bpshz: f64,
    pub epsilon: f64,
    pub total_power_w: f64,
    pub ee_bits_per_joule: f64,
    pub rank_proxy: usize,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "capacity_bpshz,epsilon,total_power_w,ee_bits_per_joule,rank_proxy";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.capacity_bpshz,
            self.epsilon,
            self.total_power_w,
            self.ee_bits_per_joule,
            self.rank_proxy
        )
    }
}

fn ensure_finite(h: &CMatrix) -> Result<()> {
    if h.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("channel matrix contains NaN or infinity".into()))
    }
}

/// Singular values in descending order; `min(rows, cols)` of them.
pub fn singular_values(h: &CMatrix) -> Vec<f64> {
    if h.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = h.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `log2 det(I + H H^H)` in bits/s/Hz, evaluated as `sum log2(1 + s_i^2)`.
pub fn capacity(h_tilde: &CMatrix) -> Result<f64> {
    ensure_finite(h_tilde)?;
    let c: f64 = singular_values(h_tilde)
        .iter()
        .map(|s| (s * s).ln_1p() / std::f64::consts::LN_2)
        .sum();
    if c.is_finite() {
        Ok(c)
    } else {
        Err(Error::NonFinite("capacity overflows".into()))
    }
}

/// `sigma_min / sigma_max`.
pub fn reciprocal_condition(h_tilde: &CMatrix) -> Result<f64> {
    ensure_finite(h_tilde)?;
    let sv = singular_values(h_tilde);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => Ok((min / max).clamp(0.0, 1.0)),
        _ => Err(Error::UndefinedMetric(
            "reciprocal condition number of an all-zero matrix".into(),
        )),
    }
}

/// Number of singular values at or above `tau * sigma_max`.
pub fn rank_proxy(h_tilde: &CMatrix, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(config_err("rank threshold tau must lie in (0, 1)"));
    }
    ensure_finite(h_tilde)?;
    let sv = singular_values(h_tilde);
    let max = sv.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return Err(Error::UndefinedMetric("rank of an all-zero matrix".into()));
    }
    Ok(sv.iter().filter(|&&s| s >= tau * max).count())
}

/// BS power `upsilon_bs * N_t * P_t + P_c,BS`.
pub fn bs_power(pm: &PowerModel, sp: &SystemParams, n_tx: usize) -> f64 {
    pm.upsilon_bs * n_tx as f64 * sp.p_t + pm.p_c_bs
}

/// Active-RIS power with the amplifier term taken in expectation:
/// `upsilon_lna * (P_t ||Phi F||_F^2 / N_t + c^2 K sigma_z^2) + K P_PS + P_s,ARIS`.
///
/// `|Phi_kk| = c` for every element, so `||Phi F||_F^2 = c^2 ||F||_F^2` and the
/// result does not depend on `config` beyond its dimensions.
pub fn ris_power(
    pm: &PowerModel,
    sp: &SystemParams,
    panel: &RisPanel,
    f_mat: &CMatrix,
    config: &PhaseConfig,
) -> Result<f64> {
    config.validate_for(panel)?;
    let k = panel.num_elements();
    if f_mat.nrows() != k {
        return Err(Error::Dimension(format!(
            "panel {}: F has {} rows, panel has {k} elements",
            panel.id,
            f_mat.nrows()
        )));
    }
    let n_tx = f_mat.ncols();
    let c2 = panel.gain().powi(2);
    let amplified_signal = if n_tx == 0 {
        0.0
    } else {
        sp.p_t * c2 * f_mat.norm_squared() / n_tx as f64
    };
    let amplified_noise = c2 * k as f64 * panel.element_noise_power;
    Ok(pm.upsilon_lna * (amplified_signal + amplified_noise) + k as f64 * pm.p_ps + pm.p_s_aris)
}

/// `P_BS + sum_l P_ARIS,l`.
pub fn total_power(
    pm: &PowerModel,
    sp: &SystemParams,
    panels: &[RisPanel],
    f_list: &[CMatrix],
    configs: &[PhaseConfig],
    n_tx: usize,
) -> Result<f64> {
    if panels.len() != f_list.len() || panels.len() != configs.len() {
        return Err(Error::Dimension(format!(
            "{} panels, {} F matrices, {} configs",
            panels.len(),
            f_list.len(),
            configs.len()
        )));
    }
    let mut total = bs_power(pm, sp, n_tx);
    for ((panel, f), cfg) in panels.iter().zip(f_list).zip(configs) {
        total += ris_power(pm, sp, panel, f, cfg)?;
    }
    if total > 0.0 {
        Ok(total)
    } else {
        Err(Error::UndefinedMetric("total power must be positive".into()))
    }
}

/// `BW * C / P_c` in bits/J.
pub fn energy_efficiency(capacity_bpshz: f64, sp: &SystemParams, p_c: f64) -> f64 {
    sp.bandwidth_hz * capacity_bpshz / p_c
}

/// Largest sample value `v` such that at least `level` of the samples are
/// `>= v`.
pub fn icdf_at(samples: &[f64], level: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::UndefinedMetric("ICDF of an empty sample set".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(config_err("ICDF level must lie in (0, 1)"));
    }
    if samples.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN in ICDF samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    // Slack absorbs the representation error of products like 0.68 * 100.
    let needed = ((level * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[needed.min(n) - 1])
}

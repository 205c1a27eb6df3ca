//! A realized link: channels, panels and system constants bound together so
//! that configurations can be scored repeatedly.

use num_complex::Complex64;

use crate::channel::{
    accumulate_reflection, hermitian_inv_sqrt, noise_covariance, phasor_table, ChannelSet, CMatrix,
};
use crate::error::Result;
use crate::geometry::{validate_configs, PhaseConfig, RisPanel};
use crate::metrics::{
    capacity, energy_efficiency, rank_proxy, reciprocal_condition, total_power, MetricsReport,
    PowerModel, SystemParams,
};

/// Link ready for repeated evaluation.
///
/// The noise covariance does not depend on the phase configuration, so its
/// inverse square root is applied once to `H_d` and every `G_l` up front.
#[derive(Debug, Clone)]
pub struct LinkModel {
    channels: ChannelSet,
    panels: Vec<RisPanel>,
    system: SystemParams,
    power: PowerModel,
    noise_cov: CMatrix,
    white_direct: CMatrix,
    white_g: Vec<CMatrix>,
    phasors: Vec<Vec<Complex64>>,
}

impl LinkModel {
    pub fn new(
        channels: ChannelSet,
        panels: Vec<RisPanel>,
        system: SystemParams,
        power: PowerModel,
    ) -> Result<Self> {
        system.validate()?;
        power.validate()?;
        channels.check_panels(&panels)?;
        let noise_cov = noise_covariance(&channels, &panels, system.sigma_v2)?;
        let w = hermitian_inv_sqrt(&noise_cov)?;
        let white_direct = &w * &channels.h_direct;
        let white_g = channels.g_list.iter().map(|g| &w * g).collect();
        let phasors = panels.iter().map(|p| phasor_table(p.phase_bits)).collect();
        Ok(Self {
            channels,
            panels,
            system,
            power,
            noise_cov,
            white_direct,
            white_g,
            phasors,
        })
    }

    pub fn panels(&self) -> &[RisPanel] {
        &self.panels
    }

    pub fn channels(&self) -> &ChannelSet {
        &self.channels
    }

    pub fn system(&self) -> &SystemParams {
        &self.system
    }

    pub fn noise_covariance(&self) -> &CMatrix {
        &self.noise_cov
    }

    /// All-zero phase configuration for every panel.
    pub fn zero_configs(&self) -> Vec<PhaseConfig> {
        self.panels.iter().map(PhaseConfig::zeros).collect()
    }

    /// Effective channel `H` for `configs`.
    pub fn channel(&self, configs: &[PhaseConfig]) -> Result<CMatrix> {
        crate::channel::effective_channel(&self.channels, &self.panels, configs, self.system.p_t)
    }

    /// Whitened channel `R_n^{-1/2} H` for `configs`.
    pub fn whitened(&self, configs: &[PhaseConfig]) -> Result<CMatrix> {
        validate_configs(&self.panels, configs)?;
        let mut h = self.white_direct.clone();
        for (l, cfg) in configs.iter().enumerate() {
            accumulate_reflection(
                &mut h,
                &self.white_g[l],
                &self.channels.f_list[l],
                self.panels[l].gain(),
                &self.phasors[l],
                cfg,
            );
        }
        Ok(h * Complex64::new(self.system.p_t.sqrt(), 0.0))
    }

    pub fn capacity(&self, configs: &[PhaseConfig]) -> Result<f64> {
        capacity(&self.whitened(configs)?)
    }

    pub fn total_power(&self, configs: &[PhaseConfig]) -> Result<f64> {
        total_power(
            &self.power,
            &self.system,
            &self.panels,
            &self.channels.f_list,
            configs,
            self.channels.n_tx(),
        )
    }

    /// Full metrics for `configs`.
    pub fn report(&self, configs: &[PhaseConfig], rank_tau: f64) -> Result<MetricsReport> {
        let h = self.whitened(configs)?;
        let capacity_bpshz = capacity(&h)?;
        let total_power_w = self.total_power(configs)?;
        Ok(MetricsReport {
            capacity_bpshz,
            epsilon: reciprocal_condition(&h)?,
            total_power_w,
            ee_bits_per_joule: energy_efficiency(capacity_bpshz, &self.system, total_power_w),
            rank_proxy: rank_proxy(&h, rank_tau)?,
        })
    }
}

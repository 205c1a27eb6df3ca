#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use risforge_core::{CMatrix, ChannelSet, PhaseConfig, PowerModel, RisPanel, SystemParams, Vec3};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn panel(id: &str, rows: usize, cols: usize, bits: u8) -> RisPanel {
    RisPanel {
        id: id.into(),
        center: Vec3::new(0.0, 0.0, 1.0),
        normal: Vec3::new(0.0, 1.0, 0.0),
        rows,
        cols,
        spacing: 0.0428,
        lna_gain_db: 10.0,
        phase_bits: bits,
        element_noise_power: 0.02,
        elements: None,
    }
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

pub fn random_channels(rng: &mut impl Rng, n_rx: usize, n_tx: usize, panels: &[RisPanel]) -> ChannelSet {
    ChannelSet {
        h_direct: random_matrix(rng, n_rx, n_tx),
        g_list: panels.iter().map(|p| random_matrix(rng, n_rx, p.num_elements())).collect(),
        f_list: panels.iter().map(|p| random_matrix(rng, p.num_elements(), n_tx)).collect(),
        wavelength: 0.0857,
    }
}

pub fn random_config(rng: &mut impl Rng, panel: &RisPanel) -> PhaseConfig {
    PhaseConfig {
        panel_id: panel.id.clone(),
        indices: (0..panel.num_elements())
            .map(|_| rng.random_range(0..panel.levels()))
            .collect(),
    }
}

pub fn system() -> SystemParams {
    SystemParams {
        p_t: 1.0,
        sigma_v2: 0.5,
        bandwidth_hz: 9e7,
    }
}

pub fn power() -> PowerModel {
    PowerModel {
        upsilon_bs: 3.0,
        p_c_bs: 6.0,
        upsilon_lna: 3.0,
        p_ps: 1e-6,
        p_s_aris: 0.48,
        tx_isotropic: true,
    }
}

/// Hermitian positive definite `A A^H + shift I`.
pub fn random_hpd(rng: &mut impl Rng, n: usize, shift: f64) -> CMatrix {
    let a = random_matrix(rng, n, n);
    &a * a.adjoint() + CMatrix::identity(n, n) * Complex64::new(shift, 0.0)
}

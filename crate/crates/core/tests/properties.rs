mod common;

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;

use common::*;
use risforge_core::channel::{hermitian_sqrt, whiten};
use risforge_core::codebook::{quantize_index, quantize_phase, quantized_steering, steering_phases};
use risforge_core::geometry::phase_step;
use risforge_core::metrics::{capacity, energy_efficiency, icdf_at, reciprocal_condition, ris_power};
use risforge_core::{
    build_codebook, effective_channel, noise_covariance, synth_channels, AngleGrid, CMatrix,
    PhaseConfig, ScenarioGeometry, SystemParams, Vec3,
};

fn wrapped(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    r.min(TAU - r)
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn geometry(seed: u64, scatterers: usize) -> ScenarioGeometry {
    let mut p = panel("p", 2, 2, 2);
    p.center = Vec3::new(0.0, 0.0, 2.0);
    ScenarioGeometry {
        bs_position: Vec3::new(1.0, 4.0, 3.0),
        n_tx: 2,
        bs_antenna_spacing: 0.0428,
        ue_position: Vec3::new(-1.0, 3.0, 1.0),
        n_rx: 3,
        ue_antenna_spacing: 0.0428,
        panels: vec![p],
        carrier_frequency_hz: 3.5e9,
        n_scatterers_per_link: scatterers,
        scatter_gain_db: -6.0,
        direct_attenuation_db: 0.0,
        seed,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quantizer_is_on_grid_and_close(x in -60.0f64..60.0, bits in 1u8..=8) {
        let step = phase_step(bits);
        let q = quantize_phase(x, bits);
        prop_assert!((0.0..TAU).contains(&q));
        let idx = quantize_index(x, bits);
        prop_assert!(u32::from(idx) < 1u32 << bits);
        prop_assert_eq!(q, f64::from(idx) * step);
        prop_assert!(wrapped(q - x) <= step / 2.0 + 1e-12);
    }

    #[test]
    fn quantized_steering_tracks_raw_phases(
        alpha in -PI..PI, beta in -PI / 2.0..PI / 2.0, bits in 1u8..=4, rows in 1usize..4, cols in 1usize..4,
    ) {
        let p = panel("p", rows, cols, bits);
        let raw = steering_phases(&p, alpha, beta, 0.0857);
        let cfg = quantized_steering(&p, alpha, beta, 0.0857);
        prop_assert_eq!(cfg.indices.len(), p.num_elements());
        for (q, r) in cfg.phases(bits).iter().zip(&raw) {
            prop_assert!(wrapped(q - r) <= phase_step(bits) / 2.0 + 1e-12);
        }
        if bits == 1 {
            prop_assert!(cfg.indices.iter().all(|&i| i <= 1));
        }
    }

    #[test]
    fn codebook_size_is_grid_size(
        m in 1usize..5, n in 1usize..5, extra_m in 0usize..3, extra_n in 0usize..3,
        rows in 2usize..4, cols in 2usize..4, bits in 1u8..4,
    ) {
        let grid = AngleGrid {
            alpha0: 0.0,
            beta0: -PI / 2.0,
            m_steps: m,
            n_steps: n,
            m_resolution: (m + extra_m).saturating_sub(1).max(1),
            n_resolution: (n + extra_n).saturating_sub(1).max(1),
        };
        let p = panel("p", rows, cols, bits);
        let cb = build_codebook(&p, &grid, 0.0857).unwrap();
        prop_assert_eq!(cb.len(), m * n);
        prop_assert!(cb.entries.iter().all(|e| e.config.indices.iter().all(|&q| q < p.levels())));
        prop_assert_eq!(build_codebook(&p, &grid, 0.0857).unwrap(), cb);
    }

    #[test]
    fn channel_scales_with_sqrt_power(seed in any::<u64>(), p_t in 0.01f64..10.0) {
        let mut r = rng(seed);
        let panels = vec![panel("a", 2, 2, 2), panel("b", 1, 3, 1)];
        let cs = random_channels(&mut r, 3, 2, &panels);
        let cfgs: Vec<_> = panels.iter().map(|p| random_config(&mut r, p)).collect();
        let h1 = effective_channel(&cs, &panels, &cfgs, p_t).unwrap();
        let h4 = effective_channel(&cs, &panels, &cfgs, 4.0 * p_t).unwrap();
        prop_assert!(rel(&h4, &(h1 * Complex64::new(2.0, 0.0))) < 1e-12);
    }

    #[test]
    fn pi_flip_negates_one_rank_one_term(seed in any::<u64>(), bits in 1u8..=3, elem in 0usize..4) {
        let mut r = rng(seed);
        let panels = vec![panel("a", 2, 2, bits)];
        let cs = random_channels(&mut r, 3, 2, &panels);
        let cfg = random_config(&mut r, &panels[0]);
        let mut flipped = cfg.clone();
        let half = panels[0].levels() / 2;
        flipped.indices[elem] = (flipped.indices[elem] + half) % panels[0].levels();
        let p_t = 2.5;
        let h = effective_channel(&cs, &panels, std::slice::from_ref(&cfg), p_t).unwrap();
        let hf = effective_channel(&cs, &panels, &[flipped], p_t).unwrap();
        let theta = f64::from(cfg.indices[elem]) * phase_step(bits);
        let term = cs.g_list[0].column(elem) * cs.f_list[0].row(elem)
            * Complex64::from_polar(panels[0].gain() * p_t.sqrt(), theta);
        let expected = term * Complex64::new(-2.0, 0.0);
        prop_assert!(rel(&(hf - h), &expected) < 1e-9);
    }

    #[test]
    fn whitening_is_inverse_consistent(seed in any::<u64>(), n in 1usize..6, cols in 1usize..5) {
        let mut r = rng(seed);
        let r_n = random_hpd(&mut r, n, 0.5);
        let h = random_matrix(&mut r, n, cols);
        let ht = whiten(&h, &r_n).unwrap();
        prop_assert!(rel(&(hermitian_sqrt(&r_n).unwrap() * ht), &h) < 1e-9);
        prop_assert!(rel(&whiten(&h, &CMatrix::identity(n, n)).unwrap(), &h) < 1e-12);
    }

    #[test]
    fn capacity_matches_log_det(seed in any::<u64>(), rows in 1usize..=8, cols in 1usize..=8) {
        let mut r = rng(seed);
        let h = random_matrix(&mut r, rows, cols);
        let gram = CMatrix::identity(rows, rows) + &h * h.adjoint();
        let det = gram.determinant();
        prop_assert!(det.im.abs() < 1e-8 * det.re);
        let oracle = det.re.log2();
        let c = capacity(&h).unwrap();
        prop_assert!((c - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
    }

    #[test]
    fn reciprocal_condition_properties(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, s in 0.1f64..100.0) {
        let mut r = rng(seed);
        let h = random_matrix(&mut r, rows, cols);
        let e = reciprocal_condition(&h).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e));
        let scaled = reciprocal_condition(&(&h * Complex64::new(s, 0.0))).unwrap();
        prop_assert!((e - scaled).abs() < 1e-9);
        let eye = CMatrix::identity(rows, rows) * Complex64::new(s, 0.0);
        prop_assert!((reciprocal_condition(&eye).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ris_power_ignores_phases(seed in any::<u64>(), bits in 1u8..=3, n_tx in 1usize..5) {
        let mut r = rng(seed);
        let p = panel("a", 2, 3, bits);
        let f = random_matrix(&mut r, p.num_elements(), n_tx);
        let (pm, sp) = (power(), system());
        let cfg = random_config(&mut r, &p);
        let phi = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            p.num_elements(),
            cfg.phases(bits).into_iter().map(|t| Complex64::from_polar(p.gain(), t)),
        ));
        let k = p.num_elements() as f64;
        let c2 = p.gain().powi(2);
        let literal = pm.upsilon_lna
            * (sp.p_t * (&phi * &f).norm_squared() / n_tx as f64 + c2 * k * p.element_noise_power)
            + k * pm.p_ps
            + pm.p_s_aris;
        let got = ris_power(&pm, &sp, &p, &f, &cfg).unwrap();
        prop_assert!((got - literal).abs() <= 1e-9 * literal);
        let zero = ris_power(&pm, &sp, &p, &f, &PhaseConfig::zeros(&p)).unwrap();
        prop_assert!((got - zero).abs() <= 1e-12 * zero);
    }

    #[test]
    fn energy_efficiency_is_homogeneous(c in 0.0f64..100.0, bw in 1e3f64..1e9, p in 0.1f64..100.0, k in 0.1f64..10.0) {
        let sp = SystemParams { p_t: 1.0, sigma_v2: 1.0, bandwidth_hz: bw };
        let sp_k = SystemParams { bandwidth_hz: bw * k, ..sp };
        let base = energy_efficiency(c, &sp, p);
        prop_assert!((energy_efficiency(c, &sp_k, p) - k * base).abs() <= 1e-9 * (k * base).max(1.0));
        prop_assert!((energy_efficiency(k * c, &sp, p) - k * base).abs() <= 1e-9 * (k * base).max(1.0));
        prop_assert!((energy_efficiency(c, &sp, k * p) - base / k).abs() <= 1e-9 * (base / k).max(1.0));
    }

    #[test]
    fn icdf_is_a_coverage_quantile(
        samples in prop::collection::vec(-1e3f64..1e3, 1..60), l1 in 0.01f64..0.99, l2 in 0.01f64..0.99,
    ) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let v_lo = icdf_at(&samples, lo).unwrap();
        let v_hi = icdf_at(&samples, hi).unwrap();
        prop_assert!(v_lo >= v_hi);
        let n = samples.len() as f64;
        let covered = samples.iter().filter(|&&s| s >= v_hi).count() as f64;
        prop_assert!(covered >= hi * n - 1e-9);
        // No larger sample value would still cover the level.
        for &s in samples.iter().filter(|&&s| s > v_hi) {
            let c = samples.iter().filter(|&&x| x >= s).count() as f64;
            prop_assert!(c < hi * n - 1e-9);
        }
        prop_assert!(samples.contains(&v_hi));
    }

    #[test]
    fn synthesis_is_pure_in_seed(seed in any::<u64>()) {
        let a = synth_channels(&geometry(seed, 3)).unwrap();
        let b = synth_channels(&geometry(seed, 3)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn noise_covariance_is_hermitian_and_config_free() {
    let mut r = rng(3);
    let panels = vec![panel("a", 2, 2, 2), panel("b", 1, 2, 1)];
    let cs = random_channels(&mut r, 3, 2, &panels);
    let r1 = noise_covariance(&cs, &panels, 0.3).unwrap();
    assert_eq!(r1, noise_covariance(&cs, &panels, 0.3).unwrap());
    assert!((&r1 - r1.adjoint()).norm() < 1e-15);
    assert!(r1.clone().symmetric_eigenvalues().iter().all(|&e| e > 0.0));
}

mod common;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use common::*;
use risforge_core::optimizers::{
    blind_greedy, codebook_sequential, exhaustive_joint, exhaustive_sequential, greedy_budget, rms,
    scsm, CapacityObjective, FnObjective,
};
use risforge_core::{
    build_codebook, noise_covariance, AngleGrid, Budget, CMatrix, Codebook, LinkModel,
    ObjectiveContext, OptResult, PhaseConfig, RisPanel,
};

fn cn(rng: &mut impl Rng, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

#[test]
fn noise_covariance_matches_monte_carlo() {
    const DRAWS: usize = 100_000;
    for seed in 0..3 {
        let mut r = rng(100 + seed);
        let panels = vec![panel("a", 2, 2, 2), panel("b", 1, 3, 1)];
        let cs = random_channels(&mut r, 3, 2, &panels);
        let sigma_v2 = 0.05;
        let closed = noise_covariance(&cs, &panels, sigma_v2).unwrap();
        let phis: Vec<Vec<Complex64>> = panels
            .iter()
            .map(|p| {
                let cfg = random_config(&mut r, p);
                cfg.phases(p.phase_bits)
                    .into_iter()
                    .map(|t| Complex64::from_polar(p.gain(), t))
                    .collect()
            })
            .collect();
        let mut acc = CMatrix::zeros(3, 3);
        let mut n = nalgebra::DVector::<Complex64>::zeros(3);
        for _ in 0..DRAWS {
            for i in 0..3 {
                n[i] = cn(&mut r, sigma_v2);
            }
            for ((p, g), phi) in panels.iter().zip(&cs.g_list).zip(&phis) {
                for k in 0..p.num_elements() {
                    let z = phi[k] * cn(&mut r, p.element_noise_power);
                    for i in 0..3 {
                        n[i] += g[(i, k)] * z;
                    }
                }
            }
            acc += &n * n.adjoint();
        }
        let sample = acc / Complex64::new(DRAWS as f64, 0.0);
        let err = (&sample - &closed).norm() / closed.norm();
        assert!(err < 0.02, "seed {seed}: relative error {err}");
    }
}

fn link(seed: u64, panels: Vec<RisPanel>) -> LinkModel {
    let mut r = rng(seed);
    let cs = random_channels(&mut r, 3, 2, &panels);
    LinkModel::new(cs, panels, system(), power()).unwrap()
}

fn assert_monotone(res: &OptResult) {
    assert!(res.trace.windows(2).all(|w| w[0].best_value <= w[1].best_value));
    assert_eq!(res.best_value, res.trace.last().unwrap().best_value);
}

/// Coordinate pass over explicit candidate lists, first best wins.
fn coordinate_pass(
    link: &LinkModel,
    start: Vec<PhaseConfig>,
    candidates: &[Vec<PhaseConfig>],
) -> (Vec<PhaseConfig>, f64) {
    let mut current = start;
    let mut best_seen = f64::NEG_INFINITY;
    for (l, cands) in candidates.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in cands.iter().enumerate() {
            let mut trial = current.clone();
            trial[l] = c.clone();
            let v = link.capacity(&trial).unwrap();
            best_seen = best_seen.max(v);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        current[l] = cands[best.unwrap().0].clone();
    }
    (current, best_seen)
}

fn all_configs(p: &RisPanel) -> Vec<PhaseConfig> {
    let k = p.num_elements();
    let levels = u32::from(p.levels());
    (0..levels.pow(k as u32))
        .map(|mut i| PhaseConfig {
            panel_id: p.id.clone(),
            indices: (0..k)
                .map(|_| {
                    let q = (i % levels) as u16;
                    i /= levels;
                    q
                })
                .collect(),
        })
        .collect()
}

fn codebooks(panels: &[RisPanel]) -> Vec<Codebook> {
    let grid = AngleGrid {
        alpha0: 0.0,
        beta0: -std::f64::consts::FRAC_PI_2,
        m_steps: 3,
        n_steps: 3,
        m_resolution: 2,
        n_resolution: 2,
    };
    panels.iter().map(|p| build_codebook(p, &grid, 0.0857).unwrap()).collect()
}

#[test]
fn codebook_sequential_matches_oracle() {
    for seed in 0..5 {
        let panels = vec![panel("a", 2, 2, 2), panel("b", 2, 3, 1)];
        let lm = link(seed, panels.clone());
        let cbs = codebooks(&panels);
        let mut ctx = ObjectiveContext::new(CapacityObjective::new(&lm));
        let res = codebook_sequential(&mut ctx, &panels, &cbs, &[0, 1]).unwrap();
        let start = cbs.iter().map(|c| c.entries[0].config.clone()).collect();
        let cands: Vec<Vec<_>> = cbs
            .iter()
            .map(|c| c.entries.iter().map(|e| e.config.clone()).collect())
            .collect();
        let (configs, best) = coordinate_pass(&lm, start, &cands);
        assert_eq!(res.configs, configs);
        assert_eq!(res.best_value, best);
        assert_eq!(res.evaluations(), 18);
        assert_monotone(&res);
    }
}

#[test]
fn exhaustive_sequential_matches_oracle() {
    for seed in 0..5 {
        let panels = vec![panel("a", 1, 3, 2), panel("b", 2, 2, 1)];
        let lm = link(10 + seed, panels.clone());
        let mut ctx = ObjectiveContext::new(CapacityObjective::new(&lm));
        let res = exhaustive_sequential(&mut ctx, &panels, &[0, 1], None).unwrap();
        let cands: Vec<_> = panels.iter().map(all_configs).collect();
        let (configs, best) = coordinate_pass(&lm, lm.zero_configs(), &cands);
        assert_eq!(res.configs, configs);
        assert_eq!(res.best_value, best);
        assert_eq!(res.evaluations(), 64 + 16);
    }
}

#[test]
fn exhaustive_joint_is_the_global_max() {
    for seed in 0..5 {
        let panels = vec![panel("a", 1, 3, 1), panel("b", 2, 2, 1)];
        let lm = link(20 + seed, panels.clone());
        let mut ctx = ObjectiveContext::new(CapacityObjective::new(&lm));
        let res = exhaustive_joint(&mut ctx, &panels).unwrap();
        let mut best = f64::NEG_INFINITY;
        for a in all_configs(&panels[0]) {
            for b in all_configs(&panels[1]) {
                best = best.max(lm.capacity(&[a.clone(), b]).unwrap());
            }
        }
        assert_eq!(res.best_value, best);
        assert_eq!(lm.capacity(&res.configs).unwrap(), best);
        assert_eq!(res.evaluations(), 128);
    }
}

#[test]
fn blind_greedy_solves_separable_objectives() {
    // With one random sample and a full greedy pass, a separable objective
    // reaches its per-element optimum from any start.
    for (bits, seed) in [(1u8, 1u64), (2, 2), (3, 3)] {
        let panels = vec![panel("a", 2, 3, bits), panel("b", 1, 4, bits)];
        let weights: Vec<Vec<Vec<f64>>> = panels
            .iter()
            .map(|p| {
                let mut r = rng(seed * 7 + p.num_elements() as u64);
                (0..p.num_elements())
                    .map(|_| (0..p.levels()).map(|_| r.random_range(0.0..1.0)).collect())
                    .collect()
            })
            .collect();
        let w = weights.clone();
        let f = move |cfgs: &[PhaseConfig]| -> f64 {
            cfgs.iter()
                .zip(&w)
                .map(|(c, wl)| c.indices.iter().zip(wl).map(|(&q, we)| we[usize::from(q)]).sum::<f64>())
                .sum()
        };
        let optimum: f64 = weights
            .iter()
            .flatten()
            .map(|we| we.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .sum();
        let t = greedy_budget(&panels[0]).max(greedy_budget(&panels[1])) + 1;
        let mut ctx = ObjectiveContext::new(FnObjective(f));
        let res = blind_greedy(&mut ctx, &panels, Budget::new(t).unwrap(), seed).unwrap();
        assert!((res.best_value - optimum).abs() < 1e-12, "B={bits}");
        assert_eq!(res.evaluations(), 2 * t);
        assert_monotone(&res);
    }
}

#[test]
fn evaluation_accounting() {
    let panels = vec![panel("a", 2, 2, 2), panel("b", 2, 4, 1), panel("c", 1, 1, 3)];
    let lm = link(5, panels.clone());
    let run = |f: &dyn Fn(&mut ObjectiveContext<CapacityObjective>) -> OptResult| {
        let mut ctx = ObjectiveContext::new(CapacityObjective::new(&lm));
        let res = f(&mut ctx);
        assert_eq!(ctx.eval_count() as usize, res.evaluations());
        assert_monotone(&res);
        res
    };
    let b = Budget::new(11).unwrap();
    assert_eq!(run(&|c| rms(c, &panels, b, 4).unwrap()).evaluations(), 33);
    assert_eq!(run(&|c| scsm(c, &panels, b, 4).unwrap()).evaluations(), 36);
    assert_eq!(run(&|c| blind_greedy(c, &panels, b, 4).unwrap()).evaluations(), 33);

    let two = panels[..2].to_vec();
    let lm2 = link(6, two.clone());
    let cbs = codebooks(&two);
    let mut ctx = ObjectiveContext::new(CapacityObjective::new(&lm2));
    let res = codebook_sequential(&mut ctx, &two, &cbs, &[1, 0]).unwrap();
    assert_eq!((res.evaluations(), ctx.eval_count()), (18, 18));
    assert_monotone(&res);
}

#[test]
fn blind_greedy_degenerates_to_rms() {
    // B = 1, K = 8: greedy stage needs 8 evaluations, so T <= 8 is pure sampling.
    let panels = vec![panel("a", 2, 4, 1), panel("b", 2, 4, 1)];
    let lm = link(8, panels.clone());
    for t in 1..=8 {
        let mut c1 = ObjectiveContext::new(CapacityObjective::new(&lm));
        let mut c2 = ObjectiveContext::new(CapacityObjective::new(&lm));
        let b = Budget::new(t).unwrap();
        let r = rms(&mut c1, &panels, b, 77).unwrap();
        let g = blind_greedy(&mut c2, &panels, b, 77).unwrap();
        assert_eq!(r.configs, g.configs);
        assert_eq!(r.trace, g.trace);
    }
}

//! Batch experiments behind the CLI subcommands.
//!
//! A CLI seed `s` selects both the channel realization (scenario seed
//! `+ s`) and the optimizer random stream (`s`). Cells run in parallel and
//! are returned in a canonical order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use risforge_core::codebook::{build_codebook, quantized_steering};
use risforge_core::optimizers::{
    blind_greedy, codebook_sequential, default_order, exhaustive_joint, exhaustive_sequential,
    rms, scsm, CapacityObjective, NoisyObjective, Objective,
};
use risforge_core::scenario::{order_configs, ConfigSource, RecordWarning};
use risforge_core::{
    synth_channels, AngleGrid, Algorithm, Budget, Codebook, Error, LinkModel, MetricsReport,
    ObjectiveContext, OptResult, PhaseConfig, Result, RunRecord, ScenarioConfig, Vec3,
};

/// Stream offset separating objective measurement noise from the optimizer
/// stream of the same seed.
const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Synthesizes the link for CLI seed `seed`.
pub fn realize(scenario: &ScenarioConfig, seed: u64) -> Result<LinkModel> {
    let mut geometry = scenario.geometry.clone();
    geometry.seed = geometry.seed.wrapping_add(seed);
    let channels = synth_channels(&geometry)?;
    LinkModel::new(channels, geometry.panels, scenario.system, scenario.power)
}

/// Codebooks from the scenario's per-panel grids.
pub fn scenario_codebooks(scenario: &ScenarioConfig) -> Result<Vec<Codebook>> {
    let wavelength = scenario.geometry.wavelength();
    scenario
        .geometry
        .panels
        .iter()
        .map(|p| build_codebook(p, &scenario.grid(p.id.as_str())?, wavelength))
        .collect()
}

/// Square `sqrt(T) x sqrt(T)` codebooks with `M' = N' = sqrt(T) - 1`,
/// starting at each panel's configured angles (0 and -90 degrees when the
/// panel has no grid).
pub fn square_codebooks(scenario: &ScenarioConfig, t: usize) -> Result<Vec<Codebook>> {
    let wavelength = scenario.geometry.wavelength();
    scenario
        .geometry
        .panels
        .iter()
        .map(|p| {
            let (alpha0, beta0) = scenario
                .grids
                .get(&p.id)
                .map_or((0.0, -PI / 2.0), |g| (g.alpha0_deg.to_radians(), g.beta0_deg.to_radians()));
            let grid = AngleGrid::square(alpha0, beta0, t).ok_or_else(|| {
                Error::Config(format!(
                    "codebook search needs T to be a perfect square >= 4 (M = N = sqrt(T), \
                     M' = N' = sqrt(T) - 1); got T = {t}"
                ))
            })?;
            build_codebook(p, &grid, wavelength)
        })
        .collect()
}

/// How the codebook algorithm obtains its codebooks.
#[derive(Debug, Clone, Copy)]
pub enum CodebookSource {
    ScenarioGrids,
    Square(usize),
}

fn dispatch<O: Objective>(
    ctx: &mut ObjectiveContext<O>,
    algorithm: Algorithm,
    scenario: &ScenarioConfig,
    panels: &[risforge_core::RisPanel],
    t: Option<usize>,
    codebooks: CodebookSource,
    seed: u64,
) -> Result<OptResult> {
    let order = default_order(panels);
    let budget = || {
        t.ok_or_else(|| Error::Config(format!("algorithm {algorithm} needs a budget T")))
            .and_then(Budget::new)
    };
    match algorithm {
        Algorithm::Codebook => {
            let cbs = match codebooks {
                CodebookSource::ScenarioGrids => scenario_codebooks(scenario)?,
                CodebookSource::Square(t) => square_codebooks(scenario, t)?,
            };
            codebook_sequential(ctx, panels, &cbs, &order)
        }
        Algorithm::Rms => rms(ctx, panels, budget()?, seed),
        Algorithm::Scsm => scsm(ctx, panels, budget()?, seed),
        Algorithm::BlindGreedy => blind_greedy(ctx, panels, budget()?, seed),
        Algorithm::ExhaustiveSeq => exhaustive_sequential(ctx, panels, &order, None),
        Algorithm::ExhaustiveJoint => exhaustive_joint(ctx, panels),
    }
}

/// Runs one algorithm on a realized link, with the scenario's objective
/// noise applied when configured.
pub fn run_algorithm(
    algorithm: Algorithm,
    scenario: &ScenarioConfig,
    link: &LinkModel,
    t: Option<usize>,
    codebooks: CodebookSource,
    seed: u64,
) -> Result<OptResult> {
    let objective = CapacityObjective::new(link);
    let panels = link.panels();
    if scenario.noise_objective_std > 0.0 {
        let noisy = NoisyObjective::new(objective, scenario.noise_objective_std, seed ^ NOISE_STREAM)?;
        dispatch(&mut ObjectiveContext::new(noisy), algorithm, scenario, panels, t, codebooks, seed)
    } else {
        dispatch(&mut ObjectiveContext::new(objective), algorithm, scenario, panels, t, codebooks, seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapRow {
    pub alpha_deg: f64,
    pub beta_deg: f64,
    pub capacity_bpshz: f64,
}

#[derive(Debug, Clone)]
pub struct HeatmapParams {
    pub panel_id: String,
    pub alpha_deg: (f64, f64),
    pub beta_deg: (f64, f64),
    pub steps_alpha: usize,
    pub steps_beta: usize,
    pub bits: Option<u8>,
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Capacity over an azimuth/elevation scan with only `panel_id` active,
/// elevation outer and azimuth inner.
pub fn heatmap(scenario: &ScenarioConfig, params: &HeatmapParams, seed: u64) -> Result<Vec<HeatmapRow>> {
    if params.steps_alpha < 2 || params.steps_beta < 2 {
        return Err(Error::Config("heatmap needs at least 2 steps per axis".into()));
    }
    let mut single = scenario.clone();
    let mut panel = scenario
        .geometry
        .panel(&params.panel_id)
        .cloned()
        .ok_or_else(|| Error::Config(format!("panel {} not found", params.panel_id)))?;
    if let Some(bits) = params.bits {
        panel.phase_bits = bits;
        panel.validate()?;
    }
    single.geometry.panels = vec![panel.clone()];
    single.grids.retain(|id, _| *id == panel.id);
    let link = realize(&single, seed)?;
    let wavelength = single.geometry.wavelength();
    let points: Vec<(f64, f64)> = linspace(params.beta_deg.0, params.beta_deg.1, params.steps_beta)
        .into_iter()
        .flat_map(|b| {
            linspace(params.alpha_deg.0, params.alpha_deg.1, params.steps_alpha)
                .into_iter()
                .map(move |a| (a, b))
        })
        .collect();
    points
        .par_iter()
        .map(|&(a, b)| {
            let cfg = quantized_steering(&panel, a.to_radians(), b.to_radians(), wavelength);
            Ok(HeatmapRow {
                alpha_deg: a,
                beta_deg: b,
                capacity_bpshz: link.capacity(&[cfg])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub deployment: String,
    pub gain_db: f64,
    pub ee_icdf68: f64,
    pub epsilon_mean: f64,
}

/// Per-cell metrics from [`compare`], kept for inspection.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSample {
    pub deployment: String,
    pub gain_db: f64,
    pub ue_index: usize,
    pub seed: u64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub rows: Vec<CompareRow>,
    pub samples: Vec<CompareSample>,
    /// The deployments have different total element counts.
    pub unbalanced: bool,
}

/// Single- versus multi-panel sweep over LNA gain: codebook search on every
/// (UE position, seed) cell, summarized by EE at the coverage level and mean
/// reciprocal condition number.
pub fn compare(
    single: &ScenarioConfig,
    multi: &ScenarioConfig,
    gains_db: &[f64],
    seeds: &[u64],
    ue_positions: &[Vec3],
) -> Result<CompareOutcome> {
    if seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let unbalanced = single.geometry.total_elements() != multi.geometry.total_elements();
    let suffix = if unbalanced { ":unbalanced" } else { "" };
    let deployments = [
        (format!("single{suffix}"), single),
        (format!("multi{suffix}"), multi),
    ];
    let default_ue = [multi.geometry.ue_position];
    let ues = if ue_positions.is_empty() { &default_ue[..] } else { ue_positions };

    let mut cells = Vec::new();
    for (d, _) in deployments.iter().enumerate() {
        for (g, _) in gains_db.iter().enumerate() {
            for u in 0..ues.len() {
                for &s in seeds {
                    cells.push((d, g, u, s));
                }
            }
        }
    }
    let samples: Vec<CompareSample> = cells
        .par_iter()
        .map(|&(d, g, u, seed)| {
            let (label, base) = &deployments[d];
            let mut sc = (*base).clone();
            for p in &mut sc.geometry.panels {
                p.lna_gain_db = gains_db[g];
            }
            sc.geometry.ue_position = ues[u];
            let link = realize(&sc, seed)?;
            let res = run_algorithm(
                Algorithm::Codebook,
                &sc,
                &link,
                None,
                CodebookSource::ScenarioGrids,
                seed,
            )?;
            Ok(CompareSample {
                deployment: label.clone(),
                gain_db: gains_db[g],
                ue_index: u,
                seed,
                report: link.report(&res.configs, sc.rank_tau)?,
            })
        })
        .collect::<Result<_>>()?;

    let per_group = ues.len() * seeds.len();
    let rows = samples
        .chunks(per_group)
        .map(|group| {
            let level = deployments
                .iter()
                .find(|(l, _)| *l == group[0].deployment)
                .map_or(risforge_core::metrics::ICDF_COVERAGE_LEVEL, |(_, s)| s.icdf_level);
            let ee: Vec<f64> = group.iter().map(|s| s.report.ee_bits_per_joule).collect();
            Ok(CompareRow {
                deployment: group[0].deployment.clone(),
                gain_db: group[0].gain_db,
                ee_icdf68: risforge_core::metrics::icdf_at(&ee, level)?,
                epsilon_mean: group.iter().map(|s| s.report.epsilon).sum::<f64>() / group.len() as f64,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CompareOutcome {
        rows,
        samples,
        unbalanced,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergeRow {
    pub algorithm: String,
    pub total_iterations: usize,
    pub seed: u64,
    pub capacity_bpshz: f64,
}

/// Final capacity per (algorithm, T, seed). `total_iterations` is the
/// evaluation count of the run; `capacity_bpshz` is the noise-free capacity
/// of the returned configuration.
pub fn converge(
    scenario: &ScenarioConfig,
    t_values: &[usize],
    algorithms: &[Algorithm],
    seeds: &[u64],
) -> Result<Vec<ConvergeRow>> {
    if scenario.geometry.panels.is_empty() {
        return Err(Error::Config("scenario has no RIS panels to optimize".into()));
    }
    if algorithms.contains(&Algorithm::Codebook) {
        for &t in t_values {
            if AngleGrid::square(0.0, 0.0, t).is_none() {
                return Err(Error::Config(format!(
                    "T = {t} is not a perfect square >= 4; the codebook grid uses \
                     M = N = sqrt(T) and M' = N' = sqrt(T) - 1"
                )));
            }
        }
    }
    let links: Vec<LinkModel> = seeds
        .par_iter()
        .map(|&s| realize(scenario, s))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (a, &alg) in algorithms.iter().enumerate() {
        for &t in t_values {
            for (i, &s) in seeds.iter().enumerate() {
                cells.push((a, alg, t, i, s));
            }
        }
    }
    let mut rows: Vec<(usize, usize, usize, ConvergeRow)> = cells
        .par_iter()
        .map(|&(a, alg, t, i, seed)| {
            let link = &links[i];
            let res = run_algorithm(alg, scenario, link, Some(t), CodebookSource::Square(t), seed)?;
            Ok((
                a,
                t,
                i,
                ConvergeRow {
                    algorithm: alg.name().to_string(),
                    total_iterations: res.evaluations(),
                    seed,
                    capacity_bpshz: link.capacity(&res.configs)?,
                },
            ))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|(a, t, i, _)| (*a, *t, *i));
    Ok(rows.into_iter().map(|(.., r)| r).collect())
}

/// Provenance problems of a config source relative to `scenario`.
pub fn source_warnings(scenario: &ScenarioConfig, source: &ConfigSource) -> Vec<String> {
    let ConfigSource::Record(r, w) = source else {
        return Vec::new();
    };
    let mut warnings: Vec<String> = w.iter().map(RecordWarning::to_string).collect();
    if r.scenario_hash != scenario.hash() {
        warnings.push("run record was produced from a different scenario".into());
    }
    warnings
}

/// Metrics for explicit configurations. A run record supplies its own seed
/// unless `seed` overrides it.
pub fn eval(scenario: &ScenarioConfig, source: &ConfigSource, seed: Option<u64>) -> Result<MetricsReport> {
    let seed = match source {
        ConfigSource::Record(r, _) => seed.or(r.seed).unwrap_or(0),
        ConfigSource::List(_) => seed.unwrap_or(0),
    };
    let link = realize(scenario, seed)?;
    let configs = order_configs(link.panels(), source.configs())?;
    link.report(&configs, scenario.rank_tau)
}

/// Runs one algorithm and packages the outcome as a run record.
pub fn optimize(
    scenario: &ScenarioConfig,
    algorithm: Algorithm,
    t: Option<usize>,
    seed: u64,
    timestamp_unix_s: u64,
) -> Result<RunRecord> {
    if scenario.geometry.panels.is_empty() {
        return Err(Error::Config("scenario has no RIS panels to optimize".into()));
    }
    let link = realize(scenario, seed)?;
    let source = match t {
        Some(t) if algorithm == Algorithm::Codebook => CodebookSource::Square(t),
        _ => CodebookSource::ScenarioGrids,
    };
    let result = run_algorithm(algorithm, scenario, &link, t, source, seed)?;
    let metrics = link.report(&result.configs, scenario.rank_tau)?;
    Ok(RunRecord::new(scenario.hash(), Some(seed), result, metrics, timestamp_unix_s))
}

/// Configs for every panel, in panel order, from a loaded source.
pub fn configs_in_order(scenario: &ScenarioConfig, source: &ConfigSource) -> Result<Vec<PhaseConfig>> {
    order_configs(&scenario.geometry.panels, source.configs())
}

//! Black-box phase-configuration search over RIS panels.
//!
//! Every algorithm treats the objective as an opaque function of the full set
//! of per-panel configurations and optimizes panels one at a time, holding
//! the others fixed. Tie-breaking is always "first best wins" over a fixed
//! enumeration order.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::geometry::{PhaseConfig, RisPanel};
use crate::link::LinkModel;

/// Largest per-panel space enumerated by [`exhaustive_sequential`].
pub const MAX_PANEL_SPACE: u128 = 4096;
/// Largest joint space enumerated by [`exhaustive_joint`].
pub const MAX_JOINT_SPACE: u128 = 65536;

/// A black-box scalar objective over one configuration per panel.
pub trait Objective {
    fn value(&mut self, configs: &[PhaseConfig]) -> Result<f64>;

    /// Equal inputs always yield equal outputs.
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Whitened channel capacity of a link.
pub struct CapacityObjective<'a> {
    link: &'a LinkModel,
}

impl<'a> CapacityObjective<'a> {
    pub fn new(link: &'a LinkModel) -> Self {
        Self { link }
    }
}

impl Objective for CapacityObjective<'_> {
    fn value(&mut self, configs: &[PhaseConfig]) -> Result<f64> {
        self.link.capacity(configs)
    }
}

/// Adds zero-mean Gaussian measurement noise to another objective.
pub struct NoisyObjective<O> {
    inner: O,
    noise: Normal<f64>,
    rng: ChaCha8Rng,
}

impl<O: Objective> NoisyObjective<O> {
    pub fn new(inner: O, std_dev: f64, seed: u64) -> Result<Self> {
        let noise = Normal::new(0.0, std_dev)
            .map_err(|e| Error::Config(format!("objective noise std: {e}")))?;
        Ok(Self {
            inner,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }
}

impl<O: Objective> Objective for NoisyObjective<O> {
    fn value(&mut self, configs: &[PhaseConfig]) -> Result<f64> {
        Ok(self.inner.value(configs)? + self.noise.sample(&mut self.rng))
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Deterministic objective backed by a closure.
pub struct FnObjective<F>(pub F);

impl<F: FnMut(&[PhaseConfig]) -> f64> Objective for FnObjective<F> {
    fn value(&mut self, configs: &[PhaseConfig]) -> Result<f64> {
        Ok((self.0)(configs))
    }
}

/// Objective plus an evaluation counter.
pub struct ObjectiveContext<O> {
    objective: O,
    evals: u64,
}

impl<O: Objective> ObjectiveContext<O> {
    pub fn new(objective: O) -> Self {
        Self { objective, evals: 0 }
    }

    pub fn evaluate(&mut self, configs: &[PhaseConfig]) -> Result<f64> {
        self.evals += 1;
        self.objective.value(configs)
    }

    pub fn eval_count(&self) -> u64 {
        self.evals
    }

    pub fn is_deterministic(&self) -> bool {
        self.objective.is_deterministic()
    }

    pub fn into_inner(self) -> O {
        self.objective
    }
}

/// Evaluation budget per panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub t_per_panel: usize,
}

impl Budget {
    pub fn new(t_per_panel: usize) -> Result<Self> {
        if t_per_panel == 0 {
            return Err(Error::Config("budget T must be >= 1".into()));
        }
        Ok(Self { t_per_panel })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    /// 1-based cumulative evaluation index.
    pub eval_index: u64,
    pub best_value: f64,
}

/// Outcome of one optimizer run.
///
/// `trace` has one point per objective evaluation holding the best value
/// observed so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub configs: Vec<PhaseConfig>,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub algorithm: String,
    pub seed: Option<u64>,
}

impl OptResult {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }

    /// CSV with columns `eval_index, best_value`.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "eval_index,best_value")?;
        for p in &self.trace {
            writeln!(out, "{},{}", p.eval_index, p.best_value)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Codebook,
    Rms,
    Scsm,
    #[serde(rename = "bg")]
    BlindGreedy,
    ExhaustiveSeq,
    ExhaustiveJoint,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Codebook,
        Algorithm::Rms,
        Algorithm::Scsm,
        Algorithm::BlindGreedy,
        Algorithm::ExhaustiveSeq,
        Algorithm::ExhaustiveJoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Codebook => "codebook",
            Algorithm::Rms => "rms",
            Algorithm::Scsm => "scsm",
            Algorithm::BlindGreedy => "bg",
            Algorithm::ExhaustiveSeq => "exhaustive_seq",
            Algorithm::ExhaustiveJoint => "exhaustive_joint",
        }
    }

    pub fn is_randomized(self) -> bool {
        matches!(self, Algorithm::Rms | Algorithm::Scsm | Algorithm::BlindGreedy)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// Shared bookkeeping: current configs, running best and trace.
struct Search<'c, O> {
    ctx: &'c mut ObjectiveContext<O>,
    current: Vec<PhaseConfig>,
    /// Objective value of `current`, once measured.
    incumbent: Option<f64>,
    best: f64,
    trace: Vec<TracePoint>,
}

impl<'c, O: Objective> Search<'c, O> {
    fn new(ctx: &'c mut ObjectiveContext<O>, current: Vec<PhaseConfig>) -> Self {
        Self {
            ctx,
            current,
            incumbent: None,
            best: f64::NEG_INFINITY,
            trace: Vec::new(),
        }
    }

    fn record(&mut self, v: f64) {
        if v > self.best {
            self.best = v;
        }
        self.trace.push(TracePoint {
            eval_index: self.trace.len() as u64 + 1,
            best_value: self.best,
        });
    }

    /// Evaluates the current configs with panel `l` replaced by `candidate`.
    fn eval_with(&mut self, l: usize, candidate: &PhaseConfig) -> Result<f64> {
        let saved = std::mem::replace(&mut self.current[l], candidate.clone());
        let v = self.ctx.evaluate(&self.current);
        self.current[l] = saved;
        let v = v?;
        self.record(v);
        Ok(v)
    }

    fn eval_current(&mut self) -> Result<f64> {
        let v = self.ctx.evaluate(&self.current)?;
        self.record(v);
        Ok(v)
    }

    fn finish(self, algorithm: Algorithm, seed: Option<u64>) -> OptResult {
        OptResult {
            configs: self.current,
            best_value: self.trace.last().map_or(f64::NEG_INFINITY, |p| p.best_value),
            trace: self.trace,
            algorithm: algorithm.name().to_string(),
            seed,
        }
    }
}

fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::Config(format!("panel order has {} entries for {n} panels", order.len())));
    }
    for &i in order {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::Config(format!("panel order {order:?} is not a permutation")));
        }
    }
    Ok(())
}

/// Declaration order `0, 1, .., L-1`.
pub fn default_order(panels: &[RisPanel]) -> Vec<usize> {
    (0..panels.len()).collect()
}

/// Codebook-based sequential search.
///
/// All panels start at their codebook entry 0. Each panel in `panel_order`
/// then scans its whole codebook with the others held fixed and keeps the
/// best entry. Uses `sum_l T_l` evaluations.
pub fn codebook_sequential<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
    codebooks: &[Codebook],
    panel_order: &[usize],
) -> Result<OptResult> {
    if codebooks.len() != panels.len() {
        return Err(Error::Dimension(format!(
            "{} codebooks for {} panels",
            codebooks.len(),
            panels.len()
        )));
    }
    check_order(panel_order, panels.len())?;
    for (cb, p) in codebooks.iter().zip(panels) {
        if cb.is_empty() {
            return Err(Error::EmptyCodebook(p.id.clone()));
        }
        if cb.panel_id != p.id {
            return Err(Error::Dimension(format!(
                "codebook for {} supplied where panel {} expected",
                cb.panel_id, p.id
            )));
        }
        for e in &cb.entries {
            e.config.validate_for(p)?;
        }
    }
    let start = codebooks.iter().map(|cb| cb.entries[0].config.clone()).collect();
    let mut search = Search::new(obj, start);
    for &l in panel_order {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, entry) in codebooks[l].entries.iter().enumerate() {
            let v = search.eval_with(l, &entry.config)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        search.current[l] = codebooks[l].entries[best.0].config.clone();
        search.incumbent = Some(best.1);
    }
    Ok(search.finish(Algorithm::Codebook, None))
}

fn draw_config(rng: &mut ChaCha8Rng, panel: &RisPanel) -> PhaseConfig {
    let levels = panel.levels();
    PhaseConfig {
        panel_id: panel.id.clone(),
        indices: (0..panel.num_elements())
            .map(|_| rng.random_range(0..levels))
            .collect(),
    }
}

/// Draws `t` random configs for panel `l` and keeps the best, unless the
/// known incumbent value is at least as good.
fn random_stage<O: Objective>(
    search: &mut Search<'_, O>,
    rng: &mut ChaCha8Rng,
    panel: &RisPanel,
    l: usize,
    t: usize,
) -> Result<()> {
    let mut best_value = search.incumbent.unwrap_or(f64::NEG_INFINITY);
    let mut best_config = None;
    for _ in 0..t {
        let candidate = draw_config(rng, panel);
        let v = search.eval_with(l, &candidate)?;
        if v > best_value {
            best_value = v;
            best_config = Some(candidate);
        }
    }
    if let Some(c) = best_config {
        search.current[l] = c;
    }
    search.incumbent = Some(best_value);
    Ok(())
}

fn zeros(panels: &[RisPanel]) -> Vec<PhaseConfig> {
    panels.iter().map(PhaseConfig::zeros).collect()
}

/// Random maximum sampling: `T` uniform random configs per panel, best kept.
/// Uses `L * T` evaluations.
pub fn rms<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
    budget: Budget,
    rng_seed: u64,
) -> Result<OptResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut search = Search::new(obj, zeros(panels));
    for (l, panel) in panels.iter().enumerate() {
        random_stage(&mut search, &mut rng, panel, l, budget.t_per_panel)?;
    }
    Ok(search.finish(Algorithm::Rms, Some(rng_seed)))
}

/// Sequential conditional sample mean.
///
/// Per panel: `T` random configs are evaluated, then each element takes the
/// phase level with the largest mean objective over the samples in which it
/// held that level (levels never sampled are skipped). The resulting config
/// is committed and evaluated once, so each panel costs `T + 1` evaluations.
pub fn scsm<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
    budget: Budget,
    rng_seed: u64,
) -> Result<OptResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut search = Search::new(obj, zeros(panels));
    for (l, panel) in panels.iter().enumerate() {
        let k = panel.num_elements();
        let levels = usize::from(panel.levels());
        let mut sums = vec![0.0; k * levels];
        let mut counts = vec![0usize; k * levels];
        for _ in 0..budget.t_per_panel {
            let candidate = draw_config(&mut rng, panel);
            let v = search.eval_with(l, &candidate)?;
            for (e, &q) in candidate.indices.iter().enumerate() {
                sums[e * levels + usize::from(q)] += v;
                counts[e * levels + usize::from(q)] += 1;
            }
        }
        let indices = (0..k)
            .map(|e| {
                let mut best: Option<(u16, f64)> = None;
                for b in 0..levels {
                    let n = counts[e * levels + b];
                    if n == 0 {
                        continue;
                    }
                    let mean = sums[e * levels + b] / n as f64;
                    if best.is_none_or(|(_, m)| mean > m) {
                        best = Some((b as u16, mean));
                    }
                }
                best.map_or(0, |(b, _)| b)
            })
            .collect();
        search.current[l] = PhaseConfig {
            panel_id: panel.id.clone(),
            indices,
        };
        let v = search.eval_current()?;
        search.incumbent = Some(v);
    }
    Ok(search.finish(Algorithm::Scsm, Some(rng_seed)))
}

/// Greedy-stage size `(2^B - 1) K` for a panel.
pub fn greedy_budget(panel: &RisPanel) -> usize {
    (usize::from(panel.levels()) - 1) * panel.num_elements()
}

/// Blind greedy: best-of-random start, then one pass of per-element
/// exhaustive refinement.
///
/// With `T <= (2^B - 1) K` a panel gets pure random sampling, consuming the
/// random stream exactly like [`rms`]. Otherwise `T - (2^B - 1) K` random
/// samples pick the start and each element in index order tries its
/// `2^B - 1` other levels, keeping strict improvements at once. Uses `L * T`
/// evaluations.
pub fn blind_greedy<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
    budget: Budget,
    rng_seed: u64,
) -> Result<OptResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut search = Search::new(obj, zeros(panels));
    let t = budget.t_per_panel;
    for (l, panel) in panels.iter().enumerate() {
        let t_greedy = greedy_budget(panel);
        if t <= t_greedy {
            random_stage(&mut search, &mut rng, panel, l, t)?;
            continue;
        }
        random_stage(&mut search, &mut rng, panel, l, t - t_greedy)?;
        let mut best_value = search.incumbent.unwrap_or(f64::NEG_INFINITY);
        let mut config = search.current[l].clone();
        for e in 0..config.indices.len() {
            let original = config.indices[e];
            let mut keep = original;
            for level in (0..panel.levels()).filter(|&q| q != original) {
                config.indices[e] = level;
                let v = search.eval_with(l, &config)?;
                if v > best_value {
                    best_value = v;
                    keep = level;
                }
            }
            config.indices[e] = keep;
        }
        search.current[l] = config;
        search.incumbent = Some(best_value);
    }
    Ok(search.finish(Algorithm::BlindGreedy, Some(rng_seed)))
}

fn panel_space(panel: &RisPanel) -> u128 {
    let bits = u32::from(panel.phase_bits) * panel.num_elements() as u32;
    if bits >= 127 {
        u128::MAX
    } else {
        1u128 << bits
    }
}

/// Writes the `index`-th config of the panel space; element 0 is the least
/// significant digit.
fn decode_config(mut index: u128, levels: u16, out: &mut [u16]) {
    for q in out.iter_mut() {
        *q = (index % u128::from(levels)) as u16;
        index /= u128::from(levels);
    }
}

/// Per-panel exhaustive search in `panel_order`, starting from `initial`
/// (all-zeros when `None`). Uses `sum_l 2^(B K_l)` evaluations.
pub fn exhaustive_sequential<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
    panel_order: &[usize],
    initial: Option<&[PhaseConfig]>,
) -> Result<OptResult> {
    check_order(panel_order, panels.len())?;
    for p in panels {
        let size = panel_space(p);
        if size > MAX_PANEL_SPACE {
            return Err(Error::SearchSpaceTooLarge {
                size,
                limit: MAX_PANEL_SPACE,
            });
        }
    }
    let start = match initial {
        Some(cfgs) => {
            crate::geometry::validate_configs(panels, cfgs)?;
            cfgs.to_vec()
        }
        None => zeros(panels),
    };
    let mut search = Search::new(obj, start);
    for &l in panel_order {
        let panel = &panels[l];
        let mut candidate = PhaseConfig::zeros(panel);
        let mut best = (0u128, f64::NEG_INFINITY);
        for i in 0..panel_space(panel) {
            decode_config(i, panel.levels(), &mut candidate.indices);
            let v = search.eval_with(l, &candidate)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        decode_config(best.0, panel.levels(), &mut candidate.indices);
        search.current[l] = candidate;
        search.incumbent = Some(best.1);
    }
    Ok(search.finish(Algorithm::ExhaustiveSeq, None))
}

/// Global argmax over the joint configuration space, enumerated with panel 0
/// as the least significant position.
pub fn exhaustive_joint<O: Objective>(
    obj: &mut ObjectiveContext<O>,
    panels: &[RisPanel],
) -> Result<OptResult> {
    let sizes: Vec<u128> = panels.iter().map(panel_space).collect();
    let total = sizes
        .iter()
        .try_fold(1u128, |acc, &s| acc.checked_mul(s))
        .unwrap_or(u128::MAX);
    if total > MAX_JOINT_SPACE {
        return Err(Error::SearchSpaceTooLarge {
            size: total,
            limit: MAX_JOINT_SPACE,
        });
    }
    let mut configs = zeros(panels);
    let mut best = (0u128, f64::NEG_INFINITY);
    let mut search = Search::new(obj, zeros(panels));
    let decode_all = |mut index: u128, configs: &mut [PhaseConfig]| {
        for ((cfg, panel), &size) in configs.iter_mut().zip(panels).zip(&sizes) {
            decode_config(index % size, panel.levels(), &mut cfg.indices);
            index /= size;
        }
    };
    for i in 0..total {
        decode_all(i, &mut configs);
        search.current.clone_from(&configs);
        let v = search.eval_current()?;
        if v > best.1 {
            best = (i, v);
        }
    }
    decode_all(best.0, &mut configs);
    search.current = configs;
    Ok(search.finish(Algorithm::ExhaustiveJoint, None))
}

//! Scenario files and run records.
//!
//! Scenarios are TOML documents whose numeric keys carry their unit in the
//! name (`_m`, `_w`, `_hz`, `_deg`, `_db`). Angles are degrees on disk and
//! radians in memory. Run records are JSON.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::codebook::AngleGrid;
use crate::error::{config_err, Error, Result};
use crate::geometry::{PhaseConfig, RisPanel, ScenarioGeometry, Vec3, SPEED_OF_LIGHT};
use crate::metrics::{MetricsReport, PowerModel, SystemParams, DEFAULT_RANK_TAU, ICDF_COVERAGE_LEVEL};
use crate::optimizers::OptResult;

/// Version string stamped into run records.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Angular search grid as written in scenario files (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub alpha0_deg: f64,
    pub beta0_deg: f64,
    pub m: usize,
    pub n: usize,
    pub m_res: usize,
    pub n_res: usize,
}

impl GridSpec {
    pub fn to_angle_grid(&self) -> AngleGrid {
        AngleGrid {
            alpha0: self.alpha0_deg.to_radians(),
            beta0: self.beta0_deg.to_radians(),
            m_steps: self.m,
            n_steps: self.n,
            m_resolution: self.m_res,
            n_resolution: self.n_res,
        }
    }
}

/// A fully validated scenario with every default made explicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub description: String,
    pub geometry: ScenarioGeometry,
    pub system: SystemParams,
    pub power: PowerModel,
    pub grids: BTreeMap<String, GridSpec>,
    /// Standard deviation of measurement noise added to the objective.
    pub noise_objective_std: f64,
    pub rank_tau: f64,
    pub icdf_level: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.system.validate()?;
        self.power.validate()?;
        for (id, g) in &self.grids {
            if self.geometry.panel(id).is_none() {
                return Err(config_err(format!("grid for unknown panel {id}")));
            }
            g.to_angle_grid()
                .validate()
                .map_err(|e| config_err(format!("grid {id}: {e}")))?;
        }
        if !(self.noise_objective_std.is_finite() && self.noise_objective_std >= 0.0) {
            return Err(config_err("objective.noise_std must be >= 0"));
        }
        if !(self.rank_tau > 0.0 && self.rank_tau < 1.0) {
            return Err(config_err("metrics.rank_tau must lie in (0, 1)"));
        }
        if !(self.icdf_level > 0.0 && self.icdf_level < 1.0) {
            return Err(config_err("metrics.icdf_level must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Angle grid of a panel, in radians.
    pub fn grid(&self, panel_id: &str) -> Result<AngleGrid> {
        self.grids
            .get(panel_id)
            .map(GridSpec::to_angle_grid)
            .ok_or_else(|| config_err(format!("no angle grid for panel {panel_id}")))
    }

    /// Canonical byte form: compact JSON with fixed field order and sorted
    /// maps.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("scenario serializes")
    }

    /// SHA-256 of [`Self::canonical_bytes`], hex encoded.
    pub fn hash(&self) -> String {
        sha256_hex(&self.canonical_bytes())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile::from(self)).expect("scenario serializes to TOML")
    }
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// On-disk layout. Kept separate from the domain types so that units stay in
// key names and optional keys can be defaulted explicitly.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    description: String,
    geometry: GeometryFile,
    system: SystemFile,
    power: PowerFile,
    #[serde(default)]
    grids: BTreeMap<String, GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    objective: Option<ObjectiveFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metrics: Option<MetricsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    carrier_frequency_hz: f64,
    seed: u64,
    bs: ArrayFile,
    ue: ArrayFile,
    scatterers: ScatterFile,
    #[serde(default)]
    direct_attenuation_db: f64,
    #[serde(default)]
    panels: Vec<PanelFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayFile {
    position_m: [f64; 3],
    n_antennas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScatterFile {
    count: usize,
    gain_db: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PanelFile {
    id: String,
    center_m: [f64; 3],
    normal: [f64; 3],
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spacing_m: Option<f64>,
    lna_gain_db: f64,
    phase_bits: u8,
    element_noise_power_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    elements_m: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    p_t_w: f64,
    sigma_v2_w: f64,
    bandwidth_hz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PowerFile {
    upsilon_bs: f64,
    p_c_bs_w: f64,
    upsilon_lna: f64,
    p_ps_w: f64,
    p_s_aris_w: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tx_isotropic: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveFile {
    #[serde(default)]
    noise_std: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rank_tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    icdf_level: Option<f64>,
}

impl ScenarioFile {
    fn into_config(self) -> Result<ScenarioConfig> {
        let g = self.geometry;
        if !(g.carrier_frequency_hz.is_finite() && g.carrier_frequency_hz > 0.0) {
            return Err(config_err("geometry.carrier_frequency_hz must be > 0"));
        }
        let half_wave = SPEED_OF_LIGHT / g.carrier_frequency_hz / 2.0;
        let panels = g
            .panels
            .into_iter()
            .map(|p| RisPanel {
                id: p.id,
                center: p.center_m.into(),
                normal: p.normal.into(),
                rows: p.rows,
                cols: p.cols,
                spacing: p.spacing_m.unwrap_or(half_wave),
                lna_gain_db: p.lna_gain_db,
                phase_bits: p.phase_bits,
                element_noise_power: p.element_noise_power_w,
                elements: p.elements_m.map(|v| v.into_iter().map(Vec3::from).collect()),
            })
            .collect();
        let metrics = self.metrics.unwrap_or(MetricsFile {
            rank_tau: None,
            icdf_level: None,
        });
        let cfg = ScenarioConfig {
            description: self.description,
            geometry: ScenarioGeometry {
                bs_position: g.bs.position_m.into(),
                n_tx: g.bs.n_antennas,
                bs_antenna_spacing: g.bs.spacing_m.unwrap_or(half_wave),
                ue_position: g.ue.position_m.into(),
                n_rx: g.ue.n_antennas,
                ue_antenna_spacing: g.ue.spacing_m.unwrap_or(half_wave),
                panels,
                carrier_frequency_hz: g.carrier_frequency_hz,
                n_scatterers_per_link: g.scatterers.count,
                scatter_gain_db: g.scatterers.gain_db,
                direct_attenuation_db: g.direct_attenuation_db,
                seed: g.seed,
            },
            system: SystemParams {
                p_t: self.system.p_t_w,
                sigma_v2: self.system.sigma_v2_w,
                bandwidth_hz: self.system.bandwidth_hz,
            },
            power: PowerModel {
                upsilon_bs: self.power.upsilon_bs,
                p_c_bs: self.power.p_c_bs_w,
                upsilon_lna: self.power.upsilon_lna,
                p_ps: self.power.p_ps_w,
                p_s_aris: self.power.p_s_aris_w,
                tx_isotropic: self.power.tx_isotropic.unwrap_or(true),
            },
            grids: self.grids,
            noise_objective_std: self.objective.map_or(0.0, |o| o.noise_std),
            rank_tau: metrics.rank_tau.unwrap_or(DEFAULT_RANK_TAU),
            icdf_level: metrics.icdf_level.unwrap_or(ICDF_COVERAGE_LEVEL),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&ScenarioConfig> for ScenarioFile {
    fn from(c: &ScenarioConfig) -> Self {
        let g = &c.geometry;
        ScenarioFile {
            description: c.description.clone(),
            geometry: GeometryFile {
                carrier_frequency_hz: g.carrier_frequency_hz,
                seed: g.seed,
                bs: ArrayFile {
                    position_m: g.bs_position.into(),
                    n_antennas: g.n_tx,
                    spacing_m: Some(g.bs_antenna_spacing),
                },
                ue: ArrayFile {
                    position_m: g.ue_position.into(),
                    n_antennas: g.n_rx,
                    spacing_m: Some(g.ue_antenna_spacing),
                },
                scatterers: ScatterFile {
                    count: g.n_scatterers_per_link,
                    gain_db: g.scatter_gain_db,
                },
                direct_attenuation_db: g.direct_attenuation_db,
                panels: g
                    .panels
                    .iter()
                    .map(|p| PanelFile {
                        id: p.id.clone(),
                        center_m: p.center.into(),
                        normal: p.normal.into(),
                        rows: p.rows,
                        cols: p.cols,
                        spacing_m: Some(p.spacing),
                        lna_gain_db: p.lna_gain_db,
                        phase_bits: p.phase_bits,
                        element_noise_power_w: p.element_noise_power,
                        elements_m: p
                            .elements
                            .as_ref()
                            .map(|v| v.iter().map(|&e| e.into()).collect()),
                    })
                    .collect(),
            },
            system: SystemFile {
                p_t_w: c.system.p_t,
                sigma_v2_w: c.system.sigma_v2,
                bandwidth_hz: c.system.bandwidth_hz,
            },
            power: PowerFile {
                upsilon_bs: c.power.upsilon_bs,
                p_c_bs_w: c.power.p_c_bs,
                upsilon_lna: c.power.upsilon_lna,
                p_ps_w: c.power.p_ps,
                p_s_aris_w: c.power.p_s_aris,
                tx_isotropic: Some(c.power.tx_isotropic),
            },
            grids: c.grids.clone(),
            objective: Some(ObjectiveFile {
                noise_std: c.noise_objective_std,
            }),
            metrics: Some(MetricsFile {
                rank_tau: Some(c.rank_tau),
                icdf_level: Some(c.icdf_level),
            }),
        }
    }
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_config()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn save_scenario(config: &ScenarioConfig, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), config.to_toml_string().as_bytes())
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| config_err(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Provenance record of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario_hash: String,
    pub algorithm: String,
    pub seed: Option<u64>,
    pub result: OptResult,
    pub metrics: MetricsReport,
    pub timestamp_unix_s: u64,
    pub tool_version: String,
    /// SHA-256 over every other field, detecting edits after the fact.
    pub content_digest: String,
}

#[derive(Serialize)]
struct RecordContent<'a> {
    scenario_hash: &'a str,
    algorithm: &'a str,
    seed: Option<u64>,
    result: &'a OptResult,
    metrics: &'a MetricsReport,
    timestamp_unix_s: u64,
    tool_version: &'a str,
}

impl RunRecord {
    pub fn new(
        scenario_hash: String,
        seed: Option<u64>,
        result: OptResult,
        metrics: MetricsReport,
        timestamp_unix_s: u64,
    ) -> Self {
        let mut record = RunRecord {
            scenario_hash,
            algorithm: result.algorithm.clone(),
            seed,
            result,
            metrics,
            timestamp_unix_s,
            tool_version: TOOL_VERSION.to_string(),
            content_digest: String::new(),
        };
        record.content_digest = record.compute_digest();
        record
    }

    pub fn compute_digest(&self) -> String {
        let content = RecordContent {
            scenario_hash: &self.scenario_hash,
            algorithm: &self.algorithm,
            seed: self.seed,
            result: &self.result,
            metrics: &self.metrics,
            timestamp_unix_s: self.timestamp_unix_s,
            tool_version: &self.tool_version,
        };
        sha256_hex(&serde_json::to_vec(&content).expect("record serializes"))
    }

    /// Digest of the optimizer result alone.
    pub fn result_digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(&self.result).expect("result serializes"))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordWarning {
    VersionMismatch { found: String, expected: String },
    IntegrityMismatch,
}

impl std::fmt::Display for RecordWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RecordWarning::VersionMismatch { found, expected } => {
                write!(f, "run record written by version {found}, this is {expected}")
            }
            RecordWarning::IntegrityMismatch => {
                f.write_str("run record content does not match its digest")
            }
        }
    }
}

pub fn save_run(record: &RunRecord, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), record.to_json().as_bytes())
}

pub fn parse_run(text: &str) -> Result<(RunRecord, Vec<RecordWarning>)> {
    let record: RunRecord =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("run record: {e}")))?;
    let mut warnings = Vec::new();
    if record.tool_version != TOOL_VERSION {
        warnings.push(RecordWarning::VersionMismatch {
            found: record.tool_version.clone(),
            expected: TOOL_VERSION.to_string(),
        });
    }
    if record.compute_digest() != record.content_digest {
        warnings.push(RecordWarning::IntegrityMismatch);
    }
    Ok((record, warnings))
}

pub fn load_run(path: impl AsRef<Path>) -> Result<(RunRecord, Vec<RecordWarning>)> {
    parse_run(&fs::read_to_string(path)?)
}

/// Configurations supplied for evaluation: either a bare list or a run
/// record carrying them.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigSource {
    List(Vec<PhaseConfig>),
    Record(Box<RunRecord>, Vec<RecordWarning>),
}

impl ConfigSource {
    pub fn configs(&self) -> &[PhaseConfig] {
        match self {
            ConfigSource::List(c) => c,
            ConfigSource::Record(r, _) => &r.result.configs,
        }
    }
}

/// Parses a JSON list of `{panel_id, indices}` objects, or a run record.
pub fn parse_configs(text: &str) -> Result<ConfigSource> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("configs: {e}")))?;
    if value.is_object() {
        let (r, w) = parse_run(text)?;
        return Ok(ConfigSource::Record(Box::new(r), w));
    }
    serde_json::from_value(value)
        .map(ConfigSource::List)
        .map_err(|e| Error::Parse(format!("configs: {e}")))
}

/// Arranges `configs` in panel order, failing on missing or duplicate
/// panels.
pub fn order_configs(panels: &[RisPanel], configs: &[PhaseConfig]) -> Result<Vec<PhaseConfig>> {
    let mut by_id = BTreeMap::new();
    for c in configs {
        if by_id.insert(c.panel_id.as_str(), c).is_some() {
            return Err(config_err(format!("duplicate config for panel {}", c.panel_id)));
        }
    }
    if let Some(extra) = by_id.keys().find(|id| !panels.iter().any(|p| p.id == **id)) {
        return Err(config_err(format!("config for unknown panel {extra}")));
    }
    panels
        .iter()
        .map(|p| {
            let c = by_id
                .get(p.id.as_str())
                .ok_or_else(|| config_err(format!("missing config for panel {}", p.id)))?;
            c.validate_for(p)?;
            Ok((*c).clone())
        })
        .collect()
}

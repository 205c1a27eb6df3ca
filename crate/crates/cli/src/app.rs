//! Argument parsing and subcommand dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use risforge_core::codebook::build_codebook;
use risforge_core::scenario::{load_scenario, parse_configs, save_run, TOOL_VERSION};
use risforge_core::{Algorithm, Error, Result, ScenarioConfig, Vec3};

use crate::experiments::{self, HeatmapParams};
use crate::output::{emit, render, to_json, Format};
use crate::seeds::parse_seeds;

#[derive(Debug, Parser)]
#[command(name = "risforge", version = TOOL_VERSION, about = "Active multi-RIS MIMO link simulator and phase optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Capacity over an azimuth/elevation scan of one panel's steering.
    Heatmap(HeatmapArgs),
    /// Single- versus multi-panel deployment sweep over LNA gain.
    Compare(CompareArgs),
    /// Final capacity per algorithm, budget and seed.
    Converge(ConvergeArgs),
    /// Metrics of explicit phase configurations.
    Eval(EvalArgs),
    /// Run one optimizer and write a run record.
    Optimize(OptimizeArgs),
    /// Export a panel's codebook as CSV.
    Codebook(CodebookArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file, or `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    panel: String,
    /// Azimuth span in degrees, `lo,hi`.
    #[arg(long, default_value = "-180,180", allow_hyphen_values = true)]
    alpha_range: String,
    /// Elevation span in degrees, `lo,hi`.
    #[arg(long, default_value = "-90,90", allow_hyphen_values = true)]
    beta_range: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 61)]
    steps: usize,
    #[arg(long)]
    steps_alpha: Option<usize>,
    #[arg(long)]
    steps_beta: Option<usize>,
    /// Override the panel's phase bits.
    #[arg(long)]
    bits: Option<u8>,
    #[arg(long, alias = "seeds", default_value = "0")]
    seed: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    single: PathBuf,
    #[arg(long)]
    multi: PathBuf,
    /// Comma-separated LNA gains in dB.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    gains_db: Vec<f64>,
    #[arg(long, alias = "seed", default_value = "0..20")]
    seeds: String,
    /// UE position `x,y,z` in meters; repeat for several positions.
    #[arg(long = "ue", allow_hyphen_values = true)]
    ue_positions: Vec<String>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct ConvergeArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated per-panel budgets T.
    #[arg(long, value_delimiter = ',', required = true)]
    t_values: Vec<usize>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', default_value = "codebook,rms,scsm,bg")]
    algorithms: Vec<Algorithm>,
    #[arg(long, alias = "seed", default_value = "0..20")]
    seeds: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// JSON list of phase configs, or a run record.
    #[arg(long)]
    configs: PathBuf,
    /// Channel seed; defaults to the run record's seed, else 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct OptimizeArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    algorithm: Algorithm,
    /// Per-panel budget T (codebook: perfect square selecting a square grid;
    /// scenario grids are used when omitted).
    #[arg(long = "t")]
    t: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Also write the best-so-far trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CodebookArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    panel: String,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64)> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("{what}: expected `lo,hi`, got {s:?}")))?;
    match v[..] {
        [lo, hi] if lo.is_finite() && hi.is_finite() => Ok((lo, hi)),
        _ => Err(Error::Config(format!("{what}: expected `lo,hi`, got {s:?}"))),
    }
}

fn parse_vec3(s: &str) -> Result<Vec3> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("expected `x,y,z`, got {s:?}")))?;
    match v[..] {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3::new(x, y, z)),
        _ => Err(Error::Config(format!("expected `x,y,z`, got {s:?}"))),
    }
}

fn single_seed(spec: &str) -> Result<u64> {
    match parse_seeds(spec)?[..] {
        [s] => Ok(s),
        _ => Err(Error::Config("heatmap takes exactly one seed".into())),
    }
}

/// Unix time recorded in run records; `SOURCE_DATE_EPOCH` pins it for
/// reproducible output.
fn timestamp() -> Result<u64> {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("SOURCE_DATE_EPOCH is not an integer: {v:?}")));
    }
    Ok(std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs()))
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("RISFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("RISFORGE_THREADS must be a positive integer, got {v:?}")))?;
    // A pool may already exist when called more than once in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn warn(message: &str) {
    eprintln!("{}", serde_json::json!({ "warning": message }));
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Heatmap(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let params = HeatmapParams {
                panel_id: a.panel,
                alpha_deg: parse_pair(&a.alpha_range, "--alpha-range")?,
                beta_deg: parse_pair(&a.beta_range, "--beta-range")?,
                steps_alpha: a.steps_alpha.unwrap_or(a.steps),
                steps_beta: a.steps_beta.unwrap_or(a.steps),
                bits: a.bits,
            };
            let rows = experiments::heatmap(&scenario, &params, single_seed(&a.seed)?)?;
            emit(&a.output.out, &render(&rows, a.output.format)?)
        }
        Command::Compare(a) => {
            let single = load_scenario(&a.single)?;
            let multi = load_scenario(&a.multi)?;
            let ues = a
                .ue_positions
                .iter()
                .map(|s| parse_vec3(s))
                .collect::<Result<Vec<_>>>()?;
            let outcome = experiments::compare(&single, &multi, &a.gains_db, &parse_seeds(&a.seeds)?, &ues)?;
            if outcome.unbalanced {
                warn(&format!(
                    "deployments have different element counts ({} vs {}); rows are labeled unbalanced",
                    single.geometry.total_elements(),
                    multi.geometry.total_elements()
                ));
            }
            emit(&a.output.out, &render(&outcome.rows, a.output.format)?)
        }
        Command::Converge(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let rows = experiments::converge(&scenario, &a.t_values, &a.algorithms, &parse_seeds(&a.seeds)?)?;
            emit(&a.output.out, &render(&rows, a.output.format)?)
        }
        Command::Eval(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let source = parse_configs(&std::fs::read_to_string(&a.configs)?)?;
            for w in experiments::source_warnings(&scenario, &source) {
                warn(&w);
            }
            let report = experiments::eval(&scenario, &source, a.seed)?;
            emit(&a.out, &to_json(&report)?)
        }
        Command::Optimize(a) => {
            let scenario = load_scenario(&a.scenario)?;
            let record = experiments::optimize(&scenario, a.algorithm, a.t, a.seed, timestamp()?)?;
            if let Some(path) = &a.trace {
                let mut buf = Vec::new();
                record.result.write_trace_csv(&mut buf)?;
                emit(path, &String::from_utf8_lossy(&buf))?;
            }
            if a.out == Path::new("-") {
                emit(&a.out, &record.to_json())
            } else {
                save_run(&record, &a.out)
            }
        }
        Command::Codebook(a) => {
            let scenario: ScenarioConfig = load_scenario(&a.scenario)?;
            let panel = scenario
                .geometry
                .panel(&a.panel)
                .ok_or_else(|| Error::Config(format!("panel {} not found", a.panel)))?;
            let cb = build_codebook(panel, &scenario.grid(&a.panel)?, scenario.geometry.wavelength())?;
            let mut buf = Vec::new();
            cb.write_csv(&mut buf)?;
            emit(&a.out, &String::from_utf8_lossy(&buf))
        }
    }
}

/// Exit status for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numeric() {
        3
    } else {
        2
    }
}

/// Runs the CLI and returns the process exit code. Errors are reported as
/// one JSON object on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or_default();
            eprintln!(
                "{}",
                serde_json::json!({ "error": "usage", "exit_code": 2, "message": first.trim_start_matches("error: ") })
            );
            return 2;
        }
    };
    match configure_threads().and_then(|()| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "exit_code": code, "message": e.to_string() })
            );
            code
        }
    }
}

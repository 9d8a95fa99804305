//! Command-line front end. `dispatch` is the whole program minus process
//! exit, so it can be driven from tests.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bench::{self, BenchConfig, Dataset, Hyper, Regime};
use crate::density::{GridDensity, ReferenceDensity};
use crate::energy::{energy_sq, EnergyOrder, DEFAULT_MOMENT_TOL};
use crate::error::{DivError, Result};
use crate::fourier::{fourier_metric, FourierOrder, QuadratureSpec};
use crate::infodiv::{best_maxwellian, entropy_with_error, fisher_with_error, kl, relative_fisher, Density, DensityPair};
use crate::kinetics::{
    decay_fit, relaxation_trace, tail_index, ClampPolicy, EtaLaw, InitialCondition, Probe, RelaxationConfig, TradeParams,
};
use crate::report::{DivergenceReport, Family};
use crate::sample::{load_samples, Norm};
use crate::selftest;
use crate::transport::{wasserstein_1d, wasserstein_lp, DEFAULT_MAX_SUPPORT};
use crate::whitening::{
    common_frame_divergence, evaluate, fit_whitening, whitened_divergence, DivergenceSelector, WhiteningMethod,
};

#[derive(Debug, Parser)]
#[command(name = "divkit", version, about = "Energy, Fourier, Wasserstein and information divergences")]
pub struct Cli {
    /// Base seed for every randomized step (DIVKIT_SEED overrides it).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses the available parallelism.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long = "log-level", global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    pub fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Energy distance energy_sq of order alpha.
    Energy(EnergyArgs),
    /// Fourier-based metric F_s by quadrature.
    Fourier(FourierArgs),
    /// Wasserstein distance W_p.
    Wasserstein(WassersteinArgs),
    /// Fit a whitening map and write the whitened sample.
    Whiten(WhitenArgs),
    /// Any divergence, optionally after whitening.
    Div(DivArgs),
    /// Entropy, Fisher information, KL or relative Fisher of grid densities.
    Info(InfoArgs),
    /// Wealth-exchange relaxation trace.
    Kinetics(KineticsArgs),
    /// Model-comparison benchmark.
    Bench(BenchArgs),
    /// Embedded oracle suite.
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    L2,
    L1,
}

#[derive(Debug, Args, Serialize)]
pub struct PairArgs {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    /// Name of an optional weight column in both files.
    #[arg(long = "weight-column")]
    pub weight_column: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct EnergyArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = NormArg::L2)]
    pub norm: NormArg,
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long = "moment-tol", default_value_t = DEFAULT_MOMENT_TOL)]
    pub moment_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct QuadArgs {
    /// Truncation radius; chosen automatically when omitted.
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub radial: usize,
    #[arg(long, default_value_t = 32)]
    pub angular: usize,
    /// Standard deviation of a Gaussian smoothing applied to both measures.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct FourierArgs {
    #[arg(long)]
    pub s: f64,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long = "moment-tol", default_value_t = DEFAULT_MOMENT_TOL)]
    pub moment_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct WassersteinArgs {
    #[arg(long, default_value_t = 1.0)]
    pub p: f64,
    #[command(flatten)]
    pub pair: PairArgs,
    /// Write the optimal plan as a JSON list of {i, j, mass}.
    #[arg(long = "emit-plan")]
    pub emit_plan: Option<PathBuf>,
    #[arg(long = "max-support", default_value_t = DEFAULT_MAX_SUPPORT)]
    pub max_support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Cholesky,
    ZcaCor,
}

impl From<MethodArg> for WhiteningMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Cholesky => WhiteningMethod::Cholesky,
            MethodArg::ZcaCor => WhiteningMethod::ZcaCor,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct WhitenArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::ZcaCor)]
    pub method: MethodArg,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    #[arg(long = "weight-column")]
    pub weight_column: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyArg {
    Energy,
    Fourier,
    Wasserstein,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrameArg {
    /// One map per argument.
    PerInput,
    /// One map fitted on mu, applied to both.
    Common,
}

#[derive(Debug, Args, Serialize)]
pub struct DivArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long)]
    pub whitened: bool,
    #[arg(long, value_enum, default_value_t = MethodArg::ZcaCor)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = FrameArg::PerInput)]
    pub frame: FrameArg,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[command(flatten)]
    pub pair: PairArgs,
    #[command(flatten)]
    pub quad: QuadArgs,
    #[arg(long = "moment-tol", default_value_t = DEFAULT_MOMENT_TOL)]
    pub moment_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoWhat {
    Kl,
    Fisher,
    Relfisher,
    Entropy,
}

#[derive(Debug, Args, Serialize)]
pub struct InfoArgs {
    #[arg(long, value_enum)]
    pub what: InfoWhat,
    /// Grid density JSON.
    #[arg(long)]
    pub f: PathBuf,
    /// Grid density JSON or reference density JSON ({"kind": ...}); the best
    /// Maxwellian of f when omitted.
    #[arg(long)]
    pub g: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaArg {
    TwoPoint,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClampArg {
    Redraw,
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialArg {
    Delta,
    Equilibrium,
    /// independent equilibrium draws
    EquilibriumDraw,
}

#[derive(Debug, Args, Serialize)]
pub struct KineticsArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 20)]
    pub checkpoints: usize,
    #[arg(long, default_value = "energy:1,fourier:2,w1")]
    pub probes: String,
    #[arg(long, default_value_t = crate::kinetics::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = EtaArg::TwoPoint)]
    pub eta: EtaArg,
    #[arg(long, value_enum, default_value_t = ClampArg::Redraw)]
    pub clamp: ClampArg,
    #[arg(long, value_enum, default_value_t = InitialArg::Delta)]
    pub initial: InitialArg,
    /// Rescale the ensemble to its initial mean after every step batch.
    #[arg(long = "conserve-mean")]
    pub conserve_mean: bool,
    /// Quantile points discretizing the equilibrium law.
    #[arg(long = "equilibrium-points", default_value_t = crate::kinetics::EQUILIBRIUM_POINTS)]
    pub equilibrium_points: usize,
    /// Hill estimator order statistics at the final checkpoint (0 = N/50).
    #[arg(long = "hill-k", default_value_t = 0)]
    pub hill_k: usize,
    /// Trace JSON: array of {time, probe, value, error_estimate}.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Defaults to --seed.
    #[arg(long = "synth-seed")]
    pub synth_seed: Option<u64>,
    #[arg(long, default_value_t = bench::data::DEFAULT_ROWS)]
    pub rows: usize,
    #[arg(long, default_value = "sector_linear")]
    pub regime: String,
    #[arg(long, default_value = "0.5,1,1.5")]
    pub alphas: String,
    #[arg(long, value_enum, default_value_t = MethodArg::ZcaCor)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1000)]
    pub epochs: usize,
    #[arg(long = "learning-rate", default_value_t = 0.1)]
    pub learning_rate: f64,
    /// Scoreboard JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain-text scoreboard table.
    #[arg(long = "table-out")]
    pub table_out: Option<PathBuf>,
    /// User CSV instead of synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(long)]
    pub sector: Option<String>,
}

/// Exit code plus captured streams.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| DivError::InvalidInput(format!("'{s}' is not a number"))))
        .collect()
}

fn quad_spec(q: &QuadArgs, seed: u64) -> QuadratureSpec {
    QuadratureSpec {
        truncation_radius: q.rmax,
        radial_points: q.radial,
        angular_points: q.angular,
        seed,
        gaussian_smoothing: q.smoothing,
        ..QuadratureSpec::default()
    }
}

fn load_pair(p: &PairArgs) -> Result<(crate::WeightedSampleSet, crate::WeightedSampleSet)> {
    let w = p.weight_column.as_deref();
    Ok((load_samples(&p.mu, w)?, load_samples(&p.nu, w)?))
}

fn load_density(path: &Path) -> Result<Density> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    if v.get("kind").is_some() {
        Ok(Density::Reference(serde_json::from_value::<ReferenceDensity>(v)?))
    } else {
        Ok(Density::Grid(GridDensity::from_file(serde_json::from_value(v)?)?))
    }
}

fn report_value(r: &DivergenceReport) -> Result<Value> {
    Ok(serde_json::to_value(r)?)
}

fn run_energy(a: &EnergyArgs) -> Result<Value> {
    let (mu, nu) = load_pair(&a.pair)?;
    let norm = match a.norm {
        NormArg::L2 => Norm::Euclidean,
        NormArg::L1 => Norm::L1,
    };
    report_value(&energy_sq(&mu, &nu, EnergyOrder::new(a.alpha, norm)?, a.moment_tol)?)
}

fn run_fourier(a: &FourierArgs, seed: u64) -> Result<Value> {
    let (mu, nu) = load_pair(&a.pair)?;
    let order = FourierOrder::new(a.s, mu.dim())?;
    let mut r = fourier_metric(&mu, &nu, &order, &quad_spec(&a.quad, seed), a.moment_tol)?;
    r.note("admissible", true);
    r.note("required_matching", order.required_matching as u64);
    report_value(&r)
}

fn run_wasserstein(a: &WassersteinArgs) -> Result<Value> {
    let (mu, nu) = load_pair(&a.pair)?;
    let (report, plan) = if mu.dim() == 1 && a.emit_plan.is_none() {
        (wasserstein_1d(&mu, &nu, a.p)?, None)
    } else {
        let (r, p) = wasserstein_lp(&mu, &nu, a.p, a.max_support)?;
        (r, Some(p))
    };
    if let (Some(path), Some(plan)) = (&a.emit_plan, &plan) {
        let triples: Vec<Value> = plan.pairs.iter().map(|&(i, j, m)| json!({"i": i, "j": j, "mass": m})).collect();
        std::fs::write(path, serde_json::to_string_pretty(&triples)?)?;
    }
    report_value(&report)
}

fn run_whiten(a: &WhitenArgs) -> Result<Value> {
    let mu = load_samples(&a.input, a.weight_column.as_deref())?;
    let map = fit_whitening(&mu, a.method.into(), a.ridge)?;
    let white = map.apply(&mu)?;
    white.save_csv(&a.out)?;
    let residual = map.residual(&mu.covariance().matrix);
    Ok(json!({
        "method": map.method,
        "dim": map.dim,
        "matrix": map.entries,
        "condition_number": map.condition_number,
        "ridge": map.ridge,
        "scale_stable": map.scale_stable,
        "residual": residual,
        "points": white.len(),
    }))
}

fn run_div(a: &DivArgs, seed: u64) -> Result<Value> {
    let (mu, nu) = load_pair(&a.pair)?;
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| DivError::InvalidInput(format!("--{flag} is required for this family")));
    let sel = match a.family {
        FamilyArg::Energy => DivergenceSelector::Energy {
            order: EnergyOrder::euclidean(need(a.alpha, "alpha")?)?,
            moment_tol: a.moment_tol,
        },
        FamilyArg::Fourier => DivergenceSelector::Fourier {
            order: FourierOrder::new(need(a.s, "s")?, mu.dim())?,
            quad: quad_spec(&a.quad, seed),
            moment_tol: a.moment_tol,
        },
        FamilyArg::Wasserstein => DivergenceSelector::Wasserstein { p: a.p.unwrap_or(1.0) },
    };
    let r = match (a.whitened, a.frame) {
        (false, _) => evaluate(&sel, &mu, &nu)?,
        (true, FrameArg::PerInput) => whitened_divergence(&sel, &mu, &nu, a.method.into())?,
        (true, FrameArg::Common) => common_frame_divergence(&sel, &mu, &mu, &nu, a.method.into())?,
    };
    report_value(&r)
}

fn run_info(a: &InfoArgs) -> Result<Value> {
    let f = load_density(&a.f)?;
    let g = || -> Result<Density> {
        match &a.g {
            Some(p) => load_density(p),
            None => match &f {
                Density::Grid(grid) => Ok(Density::Reference(best_maxwellian(grid)?)),
                Density::Reference(_) => Err(DivError::InvalidInput("--g is required when f is a reference density".into())),
            },
        }
    };
    let r = match a.what {
        InfoWhat::Entropy => {
            let (v, e) = entropy_with_error(&f)?;
            // entropy may be negative, so it is reported outside DivergenceReport
            return Ok(json!({"quantity": "entropy", "value": v, "error_estimate": e}));
        }
        InfoWhat::Fisher => {
            let (v, e) = fisher_with_error(&f)?;
            DivergenceReport::new(Family::Fisher, 0.0, v, e)?.with("quantity", "fisher")
        }
        InfoWhat::Kl => kl(&DensityPair::new(f.clone(), g()?)?)?,
        InfoWhat::Relfisher => relative_fisher(&DensityPair::new(f.clone(), g()?)?)?,
    };
    report_value(&r)
}

fn run_kinetics(a: &KineticsArgs, seed: u64) -> Result<Value> {
    let params = TradeParams {
        lambda: a.lambda,
        sigma: a.sigma,
        eta_law: match a.eta {
            EtaArg::TwoPoint => EtaLaw::TwoPoint,
            EtaArg::Uniform => EtaLaw::UniformSymmetric,
        },
        clamp_negative: match a.clamp {
            ClampArg::Redraw => ClampPolicy::RejectRedraw,
            ClampArg::Truncate => ClampPolicy::Truncate,
        },
        epsilon: a.epsilon,
        conserve_mean: a.conserve_mean,
    };
    params.validate()?;
    let mut cfg = RelaxationConfig::new(a.n, a.horizon, a.checkpoints, seed);
    cfg.probes = Probe::parse_list(&a.probes)?;
    cfg.equilibrium_points = a.equilibrium_points;
    cfg.initial = match a.initial {
        InitialArg::Delta => InitialCondition::DeltaOne,
        InitialArg::Equilibrium => InitialCondition::Equilibrium,
        InitialArg::EquilibriumDraw => InitialCondition::EquilibriumDraw,
    };
    log::info!("kinetics: N = {}, horizon = {}, {} checkpoints", a.n, a.horizon, a.checkpoints);
    let trace = relaxation_trace(&params, &cfg)?;
    if let Some(path) = &a.out {
        std::fs::write(path, trace.entries_json()?)?;
    }
    let k = if a.hill_k == 0 { (a.n / 50).max(50) } else { a.hill_k };
    let hill = tail_index(&trace.final_wealths, k).ok();
    let mut fits = serde_json::Map::new();
    for p in &cfg.probes {
        let fit = decay_fit(&trace.series(p)).ok();
        fits.insert(p.label(), serde_json::to_value(fit)?);
    }
    Ok(json!({
        "pareto_index": trace.pareto_index,
        "decay_exponent_reference": trace.decay_exponent_reference,
        "clamp_policy": params.clamp_negative,
        "eta_law": params.eta_law,
        "epsilon": params.epsilon,
        "conserve_mean": params.conserve_mean,
        "redraws": trace.redraws,
        "truncations": trace.truncations,
        "final_mean": trace.means.last().map(|m| m.1),
        "tail_index": hill,
        "hill_k": k,
        "decay_fits": fits,
        "trace": trace.entries,
    }))
}

fn run_bench(a: &BenchArgs, seed: u64) -> Result<Value> {
    let alphas = parse_f64_list(&a.alphas)?;
    let hyper = Hyper { hidden: a.hidden, epochs: a.epochs, learning_rate: a.learning_rate, seed };
    let method: WhiteningMethod = a.method.into();
    let report = match &a.data {
        Some(path) => {
            let sector = a.sector.as_deref().ok_or_else(|| DivError::InvalidInput("--sector is required with --data".into()))?;
            if a.features.is_empty() || a.targets.is_empty() {
                return Err(DivError::InvalidInput("--features and --targets are required with --data".into()));
            }
            let ds = Dataset::load_csv(path, &a.features, &a.targets, sector, a.synth_seed.unwrap_or(seed))?;
            bench::run_on_dataset(&ds, &alphas, method, &hyper)?
        }
        None => {
            let cfg = BenchConfig {
                synth_seed: a.synth_seed.unwrap_or(seed),
                rows: a.rows,
                regime: a.regime.parse::<Regime>()?,
                alphas,
                whitening: method,
                hyper,
            };
            bench::run_bench(&cfg)?
        }
    };
    if let Some(p) = &a.out {
        std::fs::write(p, report.scoreboard.to_json()?)?;
    }
    if let Some(p) = &a.table_out {
        std::fs::write(p, report.scoreboard.to_table())?;
    }
    Ok(serde_json::to_value(&report)?)
}

fn run_selftest() -> (Value, bool) {
    let checks = selftest::run();
    let ok = checks.iter().all(|c| c.passed);
    (json!({"passed": ok, "checks": checks}), ok)
}

fn command_config(cmd: &Command) -> Result<Value> {
    Ok(match cmd {
        Command::Energy(a) => json!({"subcommand": "energy", "args": a}),
        Command::Fourier(a) => json!({"subcommand": "fourier", "args": a}),
        Command::Wasserstein(a) => json!({"subcommand": "wasserstein", "args": a}),
        Command::Whiten(a) => json!({"subcommand": "whiten", "args": a}),
        Command::Div(a) => json!({"subcommand": "div", "args": a}),
        Command::Info(a) => json!({"subcommand": "info", "args": a}),
        Command::Kinetics(a) => json!({"subcommand": "kinetics", "args": a}),
        Command::Bench(a) => json!({"subcommand": "bench", "args": a}),
        Command::Selftest => json!({"subcommand": "selftest", "args": {}}),
    })
}

/// Flattens JSON into `path<TAB>value` lines; the values are the same
/// tokens the JSON output carries.
pub fn to_table(v: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut String) {
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, x, out);
                }
            }
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), x, out);
                }
            }
            other => {
                out.push_str(prefix);
                out.push('\t');
                out.push_str(&other.to_string());
                out.push('\n');
            }
        }
    }
    let mut out = String::new();
    walk("", v, &mut out);
    out
}

fn render(v: &Value, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(v).unwrap_or_default() + "\n",
        Format::Table => to_table(v),
    }
}

/// Seed override from the environment.
fn env_seed() -> std::result::Result<Option<u64>, String> {
    match std::env::var("DIVKIT_SEED") {
        Ok(s) => s.trim().parse::<u64>().map(Some).map_err(|_| format!("DIVKIT_SEED='{s}' is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code with the captured output.
pub fn dispatch<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: 2, stdout: String::new(), stderr: text }
            } else {
                Outcome { code: 0, stdout: text, stderr: String::new() }
            };
        }
    };
    let seed = match env_seed() {
        Ok(s) => s.unwrap_or(cli.seed),
        Err(msg) => return Outcome { code: 2, stdout: String::new(), stderr: msg + "\n" },
    };
    let threads = if cli.threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        cli.threads
    };
    let config = match command_config(&cli.command) {
        Ok(c) => json!({
            "seed": seed,
            "threads": threads,
            "format": cli.format,
            "log_level": cli.log_level,
            "command": c,
        }),
        Err(e) => return error_outcome(&e, Value::Null, cli.format),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => return error_outcome(&DivError::InvalidInput(e.to_string()), config, cli.format),
    };
    let result = pool.install(|| -> Result<(Value, bool)> {
        Ok(match &cli.command {
            Command::Energy(a) => (run_energy(a)?, true),
            Command::Fourier(a) => (run_fourier(a, seed)?, true),
            Command::Wasserstein(a) => (run_wasserstein(a)?, true),
            Command::Whiten(a) => (run_whiten(a)?, true),
            Command::Div(a) => (run_div(a, seed)?, true),
            Command::Info(a) => (run_info(a)?, true),
            Command::Kinetics(a) => (run_kinetics(a, seed)?, true),
            Command::Bench(a) => (run_bench(a, seed)?, true),
            Command::Selftest => run_selftest(),
        })
    });
    match result {
        Ok((value, ok)) => {
            let out = json!({"config": config, "result": value});
            Outcome { code: if ok { 0 } else { 1 }, stdout: render(&out, cli.format), stderr: String::new() }
        }
        Err(e) => error_outcome(&e, config, cli.format),
    }
}

fn error_outcome(e: &DivError, config: Value, format: Format) -> Outcome {
    let out = json!({"config": config, "error": {"kind": e.kind(), "message": e.to_string()}});
    Outcome { code: 1, stdout: render(&out, format), stderr: format!("error: {e}\n") }
}

/// Log level requested on the command line, read before full parsing so
/// the logger is up before any work starts.
pub fn requested_log_level<I, T>(argv: I) -> log::LevelFilter
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let mut level = LogLevel::Warn;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        let value = if let Some(v) = s.strip_prefix("--log-level=") {
            Some(v.to_string())
        } else if s == "--log-level" {
            args.get(i + 1).map(|v| v.to_string_lossy().into_owned())
        } else {
            None
        };
        if let Some(v) = value.and_then(|v| LogLevel::from_str(&v, true).ok()) {
            level = v;
        }
    }
    level.filter()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        let o = dispatch(["divkit", "frobnicate"]);
        assert_eq!(o.code, 2);
        assert!(!o.stderr.is_empty());
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(dispatch(["divkit", "--help"]).code, 0);
    }

    #[test]
    fn table_flattening() {
        let v = json!({"a": {"b": 1.5, "c": [1, 2]}, "d": "x"});
        assert_eq!(to_table(&v), "a.b\t1.5\na.c[0]\t1\na.c[1]\t2\nd\t\"x\"\n");
    }

    #[test]
    fn log_level_prescan() {
        assert_eq!(requested_log_level(["divkit", "--log-level", "debug", "selftest"]), log::LevelFilter::Debug);
        assert_eq!(requested_log_level(["divkit", "--log-level=error"]), log::LevelFilter::Error);
        assert_eq!(requested_log_level(["divkit"]), log::LevelFilter::Warn);
    }
}

//! Command-line runner: seeded experiment orchestration, CSV/JSON/SVG
//! emission, and run manifests with content digests.
//!
//! Every parameter can come from an optional JSON config file; explicit
//! flags override it. All randomness derives from one master seed, and
//! outputs are byte-identical across reruns and thread counts.

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use stable_loewner::flow::{
    exit_probability_experiment, height_reach_experiment, FlowDirection,
};
use stable_loewner::geometry::{
    derivative_moment_experiment, dimension_estimate, modulus_estimate, rcll_check,
    rescaled_hull_experiment, DimensionFit, Region, RcllOptions,
};
use stable_loewner::io as artifacts;
use stable_loewner::loewner::{compute_trace, Driver, DEFAULT_TRACE_LIFT};
use stable_loewner::stable::{
    sample_recombined_path, sample_stable_path, sample_truncated_path, truncated_lk_exponent,
    LevyPath, StableParams, TruncationConfig,
};
use stable_loewner::{Error as CoreError, PathRng};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "stable-loewner",
    version,
    about = "Loewner hulls and backward flows driven by stable processes"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Master seed; all per-path randomness is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (fallback: STABLE_LOEWNER_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for emitted files and the run manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// JSON file of default parameters; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one driver path and write it as CSV.
    SamplePath(SamplePathArgs),
    /// Compute the boundary trace of a driver and write CSV plus SVG.
    Trace(TraceArgs),
    /// Rescaled-hull shrinkage experiment across scale factors.
    HullScaling(HullScalingArgs),
    /// Box-counting dimension of sampled traces.
    Dimension(DimensionArgs),
    /// Derivative-moment estimate for the backward flow.
    DerivMoments(DerivMomentsArgs),
    /// Probability that the backward flow lifts a point to height e^u.
    HeightReach(HeightReachArgs),
    /// Inner-vs-outer exit probability of the real-line flow.
    ExitProb(ExitProbArgs),
    /// Hoelder modulus probe of the backward map on a rectangle.
    Modulus(ModulusArgs),
    /// RCLL structure check of a trace with retained jumps.
    RcllCheck(RcllCheckArgs),
    /// Levy-Khintchine exponent of the truncated process over a theta grid.
    FracLaplacian(FracLaplacianArgs),
    /// Re-check the content digests recorded in a run manifest.
    VerifyManifest(VerifyManifestArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DriverKind {
    Constant,
    Stable,
    Truncated,
    Recombined,
    Custom,
}

impl DriverKind {
    fn name(self) -> &'static str {
        match self {
            DriverKind::Constant => "constant",
            DriverKind::Stable => "stable",
            DriverKind::Truncated => "truncated",
            DriverKind::Recombined => "recombined",
            DriverKind::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Direction {
    Forward,
    Backward,
}

#[derive(Args)]
struct SamplePathArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    /// Number of grid steps.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, value_enum)]
    driver: Option<DriverKind>,
    /// Small-jump truncation cutoff for the truncated driver.
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long, value_enum)]
    driver: Option<DriverKind>,
    /// Constant driver level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    /// Number of trace sample times.
    #[arg(long)]
    samples: Option<usize>,
    /// Imaginary lift of the anchor points.
    #[arg(long)]
    lift: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    /// CSV file (t,w[,is_large_jump]) for --driver custom.
    #[arg(long, value_name = "FILE")]
    custom: Option<PathBuf>,
}

#[derive(Args)]
struct HullScalingArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated scale factors, e.g. 0.2,0.1,0.05.
    #[arg(long, value_name = "LIST")]
    s_list: Option<String>,
    #[arg(long)]
    eps_h: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct DimensionArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    eps_min: Option<f64>,
    #[arg(long)]
    eps_max: Option<f64>,
    #[arg(long)]
    n_scales: Option<usize>,
}

#[derive(Args)]
struct DerivMomentsArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    z_re: Option<f64>,
    #[arg(long)]
    z_im: Option<f64>,
    /// Height level in log scale; the statistic is read at gamma_u.
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct HeightReachArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    z_re: Option<f64>,
    #[arg(long)]
    z_im: Option<f64>,
    #[arg(long)]
    u: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct ExitProbArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    /// Inner barrier radius.
    #[arg(long)]
    r: Option<f64>,
    /// Outer barrier radius.
    #[arg(long)]
    big_r: Option<f64>,
    #[arg(long, value_enum)]
    direction: Option<Direction>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
}

#[derive(Args)]
struct ModulusArgs {
    #[arg(long, value_enum)]
    driver: Option<DriverKind>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    re0: Option<f64>,
    #[arg(long)]
    re1: Option<f64>,
    #[arg(long)]
    im0: Option<f64>,
    #[arg(long)]
    im1: Option<f64>,
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long, value_name = "FILE")]
    custom: Option<PathBuf>,
}

#[derive(Args)]
struct RcllCheckArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long = "T", visible_alias = "horizon")]
    horizon: Option<f64>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    cutoff: Option<f64>,
}

#[derive(Args)]
struct FracLaplacianArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    theta_min: Option<f64>,
    #[arg(long)]
    theta_max: Option<f64>,
    #[arg(long)]
    n_theta: Option<usize>,
    #[arg(long)]
    quad_tol: Option<f64>,
}

#[derive(Args)]
struct VerifyManifestArgs {
    /// Path to a manifest.json produced by an earlier run.
    manifest: PathBuf,
}

/// Failure with the exit status mandated for its class: 2 for invalid
/// configuration, 3 for numerical failures and environment errors.
struct Failure {
    status: i32,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { status: 2, kind: "config", message: message.into() }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parameter(_) => Failure { status: 2, kind: "parameter", message: e.to_string() },
            CoreError::Io(_) => Failure { status: 3, kind: "io", message: e.to_string() },
            _ => Failure { status: 3, kind: "numerical", message: e.to_string() },
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { status: 3, kind: "io", message: e.to_string() }
    }
}

/// Resolves parameters from flag > config file > default and records the
/// resolved value, so the manifest echoes a complete, replayable config.
struct Resolver {
    file: Map<String, Value>,
    echo: BTreeMap<String, Value>,
}

impl Resolver {
    fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str::<Value>(&text)
                    .map_err(|e| Failure::config(format!("config {}: {e}", p.display())))?
                    .as_object()
                    .cloned()
                    .ok_or_else(|| Failure::config("config file must hold a JSON object"))?
            }
        };
        Ok(Resolver { file, echo: BTreeMap::new() })
    }

    fn f64(&mut self, key: &str, flag: Option<f64>, default: Option<f64>) -> Result<f64, Failure> {
        let v = flag
            .or_else(|| self.file.get(key).and_then(Value::as_f64))
            .or(default)
            .ok_or_else(|| Failure::config(format!("missing required parameter `{key}`")))?;
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn usize(&mut self, key: &str, flag: Option<usize>, default: Option<usize>) -> Result<usize, Failure> {
        let v = flag
            .or_else(|| self.file.get(key).and_then(Value::as_u64).map(|n| n as usize))
            .or(default)
            .ok_or_else(|| Failure::config(format!("missing required parameter `{key}`")))?;
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn string(&mut self, key: &str, flag: Option<String>, default: Option<&str>) -> Result<String, Failure> {
        let v = flag
            .or_else(|| self.file.get(key).and_then(Value::as_str).map(str::to_owned))
            .or_else(|| default.map(str::to_owned))
            .ok_or_else(|| Failure::config(format!("missing required parameter `{key}`")))?;
        self.echo.insert(key.into(), json!(v));
        Ok(v)
    }

    fn note(&mut self, key: &str, value: Value) {
        self.echo.insert(key.into(), value);
    }
}

#[derive(Serialize)]
struct OutputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    version: String,
    seed: u64,
    threads: usize,
    config: BTreeMap<String, Value>,
    duration_ms: u128,
    outputs: Vec<OutputDigest>,
}

/// Collects emitted files and writes the manifest last.
struct Emitter {
    out_dir: PathBuf,
    outputs: Vec<OutputDigest>,
}

impl Emitter {
    fn new(out_dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out_dir)?;
        Ok(Emitter { out_dir: out_dir.to_path_buf(), outputs: Vec::new() })
    }

    fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<(), Failure> {
        fs::write(self.out_dir.join(name), bytes)?;
        self.outputs.push(OutputDigest { path: name.into(), sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn emit_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure { status: 3, kind: "io", message: e.to_string() })?;
        text.push('\n');
        self.emit(name, text.as_bytes())
    }

    fn finish(self, mut manifest: RunManifest) -> Result<(), Failure> {
        manifest.outputs = self.outputs;
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Failure { status: 3, kind: "io", message: e.to_string() })?;
        text.push('\n');
        fs::write(self.out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

fn main() {
    let cli = Cli::parse();
    if let Err(f) = run(cli) {
        eprintln!(
            "{}",
            json!({ "kind": f.kind, "error": f.message })
        );
        std::process::exit(f.status);
    }
}

fn resolve_threads(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("STABLE_LOEWNER_THREADS").ok().and_then(|s| s.parse().ok())
    })
    .unwrap_or_else(|| {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    })
    .max(1)
}

fn run(cli: Cli) -> Result<(), Failure> {
    // Digest verification reads an existing run; it takes no pool, no
    // seed, and writes nothing.
    if let Command::VerifyManifest(args) = &cli.command {
        return verify_manifest(&args.manifest);
    }

    let started = Instant::now();
    let seed = cli.global.seed.unwrap_or(0);
    let threads = resolve_threads(cli.global.threads);
    let out_dir = cli.global.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut resolver = Resolver::load(cli.global.config.as_deref())?;
    let mut emitter = Emitter::new(&out_dir)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure { status: 3, kind: "io", message: e.to_string() })?;
    let command_name = command_name(&cli.command);
    pool.install(|| dispatch(&cli.command, seed, &mut resolver, &mut emitter))?;

    emitter.finish(RunManifest {
        command: command_name.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        threads,
        config: resolver.echo,
        duration_ms: started.elapsed().as_millis(),
        outputs: Vec::new(),
    })
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::SamplePath(_) => "sample-path",
        Command::Trace(_) => "trace",
        Command::HullScaling(_) => "hull-scaling",
        Command::Dimension(_) => "dimension",
        Command::DerivMoments(_) => "deriv-moments",
        Command::HeightReach(_) => "height-reach",
        Command::ExitProb(_) => "exit-prob",
        Command::Modulus(_) => "modulus",
        Command::RcllCheck(_) => "rcll-check",
        Command::FracLaplacian(_) => "frac-laplacian",
        Command::VerifyManifest(_) => "verify-manifest",
    }
}

fn dispatch(
    command: &Command,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    match command {
        Command::SamplePath(a) => run_sample_path(a, seed, res, em),
        Command::Trace(a) => run_trace(a, seed, res, em),
        Command::HullScaling(a) => run_hull_scaling(a, seed, res, em),
        Command::Dimension(a) => run_dimension(a, seed, res, em),
        Command::DerivMoments(a) => run_deriv_moments(a, seed, res, em),
        Command::HeightReach(a) => run_height_reach(a, seed, res, em),
        Command::ExitProb(a) => run_exit_prob(a, seed, res, em),
        Command::Modulus(a) => run_modulus(a, seed, res, em),
        Command::RcllCheck(a) => run_rcll_check(a, seed, res, em),
        Command::FracLaplacian(a) => run_frac_laplacian(a, res, em),
        Command::VerifyManifest(_) => unreachable!("handled before dispatch"),
    }
}

fn driver_kind(
    res: &mut Resolver,
    flag: Option<DriverKind>,
    default: DriverKind,
) -> Result<DriverKind, Failure> {
    let name = res.string(
        "driver",
        flag.map(|k| k.name().to_owned()),
        Some(default.name()),
    )?;
    match name.as_str() {
        "constant" => Ok(DriverKind::Constant),
        "stable" => Ok(DriverKind::Stable),
        "truncated" => Ok(DriverKind::Truncated),
        "recombined" => Ok(DriverKind::Recombined),
        "custom" => Ok(DriverKind::Custom),
        other => Err(Failure::config(format!("unknown driver kind `{other}`"))),
    }
}

/// Builds the requested driver, returning the underlying path when the
/// driver was sampled (for CSV emission).
#[allow(clippy::too_many_arguments)]
fn build_driver(
    kind: DriverKind,
    level: f64,
    alpha: f64,
    kappa: f64,
    cutoff: f64,
    horizon: f64,
    grid: usize,
    custom: Option<&Path>,
    seed: u64,
) -> Result<(Driver, Option<LevyPath>), Failure> {
    let mut rng = PathRng::new(seed, 0);
    match kind {
        DriverKind::Constant => Ok((Driver::constant(level, horizon), None)),
        DriverKind::Stable => {
            let params = StableParams::new(alpha, kappa)?;
            let path = sample_stable_path(&params, horizon, grid, &mut rng);
            Ok((Driver::from_levy_path(&path), Some(path)))
        }
        DriverKind::Truncated => {
            let params = StableParams::new(alpha, kappa)?;
            let trunc = TruncationConfig::new(cutoff)?;
            let path = sample_truncated_path(&params, &trunc, horizon, grid, &mut rng)?;
            Ok((Driver::from_levy_path(&path), Some(path)))
        }
        DriverKind::Recombined => {
            let params = StableParams::new(alpha, kappa)?;
            let trunc = TruncationConfig::new(cutoff)?;
            let path = sample_recombined_path(&params, &trunc, horizon, grid, &mut rng)?;
            Ok((Driver::from_levy_path(&path), Some(path)))
        }
        DriverKind::Custom => {
            let path = custom.ok_or_else(|| Failure::config("--driver custom needs --custom FILE"))?;
            Ok((read_driver_csv(path)?, None))
        }
    }
}

fn read_driver_csv(path: &Path) -> Result<Driver, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read driver {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut jump_times = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Failure::config(format!("driver csv line {}: need t,w", lineno + 1)));
        }
        let t: f64 = fields[0]
            .parse()
            .map_err(|_| Failure::config(format!("driver csv line {}: bad time", lineno + 1)))?;
        let w: f64 = fields[1]
            .parse()
            .map_err(|_| Failure::config(format!("driver csv line {}: bad level", lineno + 1)))?;
        if fields.len() > 2 && fields[2].trim() == "1" {
            jump_times.push(t);
        }
        times.push(t);
        values.push(w);
    }
    Ok(Driver::new(times, values, jump_times)?)
}

fn levy_path_csv(path: &LevyPath) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    artifacts::write_levy_path_csv(&mut buf, path)?;
    Ok(buf)
}

fn run_sample_path(
    a: &SamplePathArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let kind = driver_kind(res, a.driver, DriverKind::Stable)?;
    if kind == DriverKind::Constant || kind == DriverKind::Custom {
        return Err(Failure::config("sample-path needs a sampled driver kind"));
    }
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let horizon = res.f64("T", a.horizon, Some(1.0))?;
    let grid = res.usize("grid", a.grid, Some(1000))?;
    let cutoff = res.f64("cutoff", a.cutoff, Some(1e-3))?;
    let (_, path) = build_driver(kind, 0.0, alpha, kappa, cutoff, horizon, grid, None, seed)?;
    em.emit("path.csv", &levy_path_csv(&path.expect("sampled driver"))?)
}

fn run_trace(a: &TraceArgs, seed: u64, res: &mut Resolver, em: &mut Emitter) -> Result<(), Failure> {
    let kind = driver_kind(res, a.driver, DriverKind::Stable)?;
    let level = res.f64("level", a.level, Some(0.0))?;
    let needs_params = !matches!(kind, DriverKind::Constant | DriverKind::Custom);
    let alpha = if needs_params { res.f64("alpha", a.alpha, None)? } else { 0.0 };
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let horizon = res.f64("T", a.horizon, Some(1.0))?;
    let grid = res.usize("grid", a.grid, Some(1000))?;
    let samples = res.usize("samples", a.samples, Some(1000))?;
    let lift = res.f64("lift", a.lift, Some(DEFAULT_TRACE_LIFT))?;
    let cutoff = res.f64("cutoff", a.cutoff, Some(1e-3))?;
    if let Some(p) = &a.custom {
        res.note("custom", json!(p.display().to_string()));
    }
    let (driver, path) = build_driver(
        kind,
        level,
        alpha,
        kappa,
        cutoff,
        horizon,
        grid,
        a.custom.as_deref(),
        seed,
    )?;
    let horizon = driver.horizon();
    let sample_times: Vec<f64> = (1..=samples)
        .map(|j| horizon * j as f64 / samples as f64)
        .collect();
    let hull = compute_trace(&driver, &sample_times, lift);

    if let Some(path) = path {
        em.emit("path.csv", &levy_path_csv(&path)?)?;
    }
    let mut csv = Vec::new();
    artifacts::write_hull_csv(&mut csv, &hull)?;
    em.emit("hull.csv", &csv)?;
    let mut svg = Vec::new();
    artifacts::write_hull_svg(&mut svg, &hull)?;
    em.emit("hull.svg", &svg)
}

fn run_hull_scaling(
    a: &HullScalingArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let s_text = res.string("s_list", a.s_list.clone(), Some("0.2,0.1,0.05"))?;
    let eps_h = res.f64("eps_h", a.eps_h, Some(0.5))?;
    let paths = res.usize("paths", a.paths, Some(50))?;
    let grid = res.usize("grid", a.grid, Some(2000))?;
    let samples = res.usize("samples", a.samples, Some(1000))?;
    let s_values: Vec<f64> = s_text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::config(format!("bad s_list `{s_text}`")))?;
    let reports = rescaled_hull_experiment(alpha, &s_values, eps_h, paths, grid, samples, seed)?;
    em.emit_json("scaling.json", &reports)
}

#[derive(Serialize)]
struct DimensionSummary {
    slope: f64,
    r2_min: f64,
    fits: Vec<DimensionFit>,
}

fn run_dimension(
    a: &DimensionArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let horizon = res.f64("T", a.horizon, Some(1.0))?;
    let paths = res.usize("paths", a.paths, Some(10))?;
    let grid = res.usize("grid", a.grid, Some(10_000))?;
    let samples = res.usize("samples", a.samples, Some(10_000))?;
    let eps_min = res.f64("eps_min", a.eps_min, Some(1e-3))?;
    let eps_max = res.f64("eps_max", a.eps_max, Some(1e-1))?;
    let n_scales = res.usize("n_scales", a.n_scales, Some(12))?;
    if !(eps_min > 0.0 && eps_max > eps_min) || n_scales < 3 {
        return Err(Failure::config("need 0 < eps_min < eps_max and n_scales >= 3"));
    }
    let params = StableParams::new(alpha, kappa)?;
    let scales: Vec<f64> = (0..n_scales)
        .map(|k| eps_max * (eps_min / eps_max).powf(k as f64 / (n_scales - 1) as f64))
        .collect();
    // Sample times uniform in sqrt(t) so spatial resolution is even
    // along the trace.
    let sample_times: Vec<f64> = (1..=samples)
        .map(|j| horizon * (j as f64 / samples as f64).powi(2))
        .collect();
    let fits: Vec<DimensionFit> = (0..paths)
        .into_par_iter()
        .map(|k| {
            let mut rng = PathRng::new(seed, k as u64);
            let path = sample_stable_path(&params, horizon, grid, &mut rng);
            let hull = compute_trace(&Driver::from_levy_path(&path), &sample_times, DEFAULT_TRACE_LIFT);
            dimension_estimate(&hull, &scales)
        })
        .collect::<Result<_, _>>()?;
    let slope = fits.iter().map(|f| f.raw_slope).sum::<f64>() / fits.len() as f64;
    let r2_min = fits.iter().map(|f| f.r2).fold(f64::INFINITY, f64::min);
    em.emit_json("dimension.json", &DimensionSummary { slope, r2_min, fits })
}

fn run_deriv_moments(
    a: &DerivMomentsArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(0.01))?;
    let cutoff = res.f64("cutoff", a.cutoff, Some(1e-3))?;
    let beta = res.f64("beta", a.beta, Some(1.0))?;
    let delta = res.f64("delta", a.delta, Some(0.5))?;
    let z_re = res.f64("z_re", a.z_re, Some(0.2))?;
    let z_im = res.f64("z_im", a.z_im, Some(0.2))?;
    let u = res.f64("u", a.u, None)?;
    let rho = res.f64("rho", a.rho, Some(0.5))?;
    let paths = res.usize("paths", a.paths, Some(2000))?;
    let t_max = res.f64("t_max", a.t_max, Some(1000.0))?;
    let grid = res.usize("grid", a.grid, Some(100_000))?;
    let params = StableParams::new(alpha, kappa)?;
    let trunc = TruncationConfig::new(cutoff)?;
    let report = derivative_moment_experiment(
        &params,
        &trunc,
        beta,
        delta,
        Complex64::new(z_re, z_im),
        u,
        rho,
        paths,
        t_max,
        grid,
        seed,
    )?;
    em.emit_json("report.json", &report)
}

fn run_height_reach(
    a: &HeightReachArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let z_re = res.f64("z_re", a.z_re, Some(0.0))?;
    let z_im = res.f64("z_im", a.z_im, Some(0.5))?;
    let u = res.f64("u", a.u, Some(1.0))?;
    let paths = res.usize("paths", a.paths, Some(2000))?;
    let t_max = res.f64("t_max", a.t_max, Some(50.0))?;
    let grid = res.usize("grid", a.grid, Some(5000))?;
    let params = StableParams::new(alpha, kappa)?;
    let report = height_reach_experiment(
        &params,
        Complex64::new(z_re, z_im),
        u,
        paths,
        t_max,
        grid,
        seed,
    )?;
    em.emit_json("report.json", &report)
}

fn run_exit_prob(
    a: &ExitProbArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let x0 = res.f64("x0", a.x0, None)?;
    let r = res.f64("r", a.r, None)?;
    let big_r = res.f64("big_r", a.big_r, Some(1e4))?;
    let dir_name = res.string(
        "direction",
        a.direction.map(|d| match d {
            Direction::Forward => "forward".to_owned(),
            Direction::Backward => "backward".to_owned(),
        }),
        Some("backward"),
    )?;
    let direction = match dir_name.as_str() {
        "forward" => FlowDirection::Forward,
        "backward" => FlowDirection::Backward,
        other => return Err(Failure::config(format!("unknown direction `{other}`"))),
    };
    let paths = res.usize("paths", a.paths, Some(500))?;
    let t_max = res.f64("t_max", a.t_max, Some(200.0))?;
    let grid = res.usize("grid", a.grid, Some(2000))?;
    let params = StableParams::new(alpha, kappa)?;
    let report =
        exit_probability_experiment(&params, direction, x0, r, big_r, paths, t_max, grid, seed)?;
    em.emit_json("report.json", &report)
}

fn run_modulus(
    a: &ModulusArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let kind = driver_kind(res, a.driver, DriverKind::Constant)?;
    let level = res.f64("level", a.level, Some(0.0))?;
    let needs_params = !matches!(kind, DriverKind::Constant | DriverKind::Custom);
    let alpha = if needs_params { res.f64("alpha", a.alpha, None)? } else { 0.0 };
    let kappa = res.f64("kappa", a.kappa, Some(1.0))?;
    let horizon = res.f64("T", a.horizon, Some(1.0))?;
    let grid = res.usize("grid", a.grid, Some(1000))?;
    let cutoff = res.f64("cutoff", a.cutoff, Some(1e-3))?;
    let re0 = res.f64("re0", a.re0, Some(-2.0))?;
    let re1 = res.f64("re1", a.re1, Some(2.0))?;
    let im0 = res.f64("im0", a.im0, Some(0.0))?;
    let im1 = res.f64("im1", a.im1, Some(1.0))?;
    let mesh = res.f64("mesh", a.mesh, Some(1.0 / 16.0))?;
    let (driver, _) = build_driver(
        kind,
        level,
        alpha,
        kappa,
        cutoff,
        horizon,
        grid,
        a.custom.as_deref(),
        seed,
    )?;
    let report = modulus_estimate(&driver, Region { re: (re0, re1), im: (im0, im1) }, mesh)?;
    em.emit_json("modulus.json", &report)
}

fn run_rcll_check(
    a: &RcllCheckArgs,
    seed: u64,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let kappa = res.f64("kappa", a.kappa, Some(0.05))?;
    let horizon = res.f64("T", a.horizon, Some(2.0))?;
    let grid = res.usize("grid", a.grid, Some(2000))?;
    let samples = res.usize("samples", a.samples, Some(800))?;
    let cutoff = res.f64("cutoff", a.cutoff, Some(1e-3))?;
    let params = StableParams::new(alpha, kappa)?;
    let trunc = TruncationConfig::new(cutoff)?;
    let mut rng = PathRng::new(seed, 0);
    let path = sample_recombined_path(&params, &trunc, horizon, grid, &mut rng)?;
    let driver = Driver::from_levy_path(&path);
    let sample_times: Vec<f64> = (1..=samples)
        .map(|j| horizon * j as f64 / samples as f64)
        .collect();
    let hull = compute_trace(&driver, &sample_times, DEFAULT_TRACE_LIFT);
    let report = rcll_check(&hull, &driver, &RcllOptions::default())?;

    em.emit("path.csv", &levy_path_csv(&path)?)?;
    let mut svg = Vec::new();
    artifacts::write_hull_svg(&mut svg, &hull)?;
    em.emit("hull.svg", &svg)?;
    em.emit_json("rcll.json", &report)
}

fn run_frac_laplacian(
    a: &FracLaplacianArgs,
    res: &mut Resolver,
    em: &mut Emitter,
) -> Result<(), Failure> {
    let alpha = res.f64("alpha", a.alpha, None)?;
    let theta_min = res.f64("theta_min", a.theta_min, Some(-5.0))?;
    let theta_max = res.f64("theta_max", a.theta_max, Some(5.0))?;
    let n_theta = res.usize("n_theta", a.n_theta, Some(101))?;
    let quad_tol = res.f64("quad_tol", a.quad_tol, Some(1e-6))?;
    if n_theta < 2 || !(theta_max > theta_min) {
        return Err(Failure::config("need n_theta >= 2 and theta_max > theta_min"));
    }
    let mut csv = String::from("theta,log_cf\n");
    for k in 0..n_theta {
        let theta = theta_min + (theta_max - theta_min) * k as f64 / (n_theta - 1) as f64;
        let log_cf = truncated_lk_exponent(theta, alpha, quad_tol)?;
        let _ = writeln!(csv, "{theta},{log_cf}");
    }
    em.emit("exponent.csv", csv.as_bytes())
}

#[derive(Serialize)]
struct VerifyOutcome {
    manifest: String,
    checked: usize,
    mismatched: Vec<String>,
    missing: Vec<String>,
}

fn verify_manifest(path: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read manifest {}: {e}", path.display())))?;
    let manifest: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::config(format!("manifest {}: {e}", path.display())))?;
    let outputs = manifest
        .get("outputs")
        .and_then(Value::as_array)
        .ok_or_else(|| Failure::config("manifest has no outputs array"))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let mut outcome = VerifyOutcome {
        manifest: path.display().to_string(),
        checked: 0,
        mismatched: Vec::new(),
        missing: Vec::new(),
    };
    for entry in outputs {
        let (Some(rel), Some(want)) = (
            entry.get("path").and_then(Value::as_str),
            entry.get("sha256").and_then(Value::as_str),
        ) else {
            return Err(Failure::config("manifest output entry lacks path/sha256"));
        };
        outcome.checked += 1;
        match fs::read(base.join(rel)) {
            Err(_) => outcome.missing.push(rel.to_owned()),
            Ok(bytes) => {
                if sha256_hex(&bytes) != want {
                    outcome.mismatched.push(rel.to_owned());
                }
            }
        }
    }
    println!("{}", serde_json::to_string(&outcome).expect("serializable outcome"));
    if outcome.mismatched.is_empty() && outcome.missing.is_empty() {
        Ok(())
    } else {
        Err(Failure { status: 1, kind: "digest", message: "manifest digests do not match".into() })
    }
}

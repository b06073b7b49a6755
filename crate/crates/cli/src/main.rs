use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use faultwatch::faults::{inject_fault, FaultKind, FaultMode, FaultSpec, DEFAULT_POST_NOISE_STD};
use faultwatch::pipeline::{evaluate_debounced, offline_train_with_report};
use faultwatch::simulators::{flight_simulate, gk_simulate};
use faultwatch::timeseries::{read_binary_csv, read_csv, write_binary_csv, write_csv};
use faultwatch::{
    load_model, online_detect, save_model, DelayConfig, Error, FlightSimConfig, GkConfig, RankPolicy, RecordedSeries,
    TrainConfig,
};

#[derive(Parser)]
#[command(name = "faultwatch", version, about = "Sensor fault detection from innovation statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Corrupt one channel of a CSV with a fault and write labels.
    Inject(InjectArgs),
    /// Fit the plant model and the fault classifier.
    Train(TrainArgs),
    /// Run a trained detector over a CSV, one flag per sample.
    Detect(DetectArgs),
    /// Score flags against labels.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Dataset {
    /// Goman-Khrabrov dynamic stall (deterministic; --seed has no effect).
    Gk,
    /// Longitudinal flight surrogate with turbulence.
    Flight,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(value_enum)]
    dataset: Dataset,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run length in seconds (GK: 2000, flight: 600).
    #[arg(long)]
    duration: Option<f64>,
    /// Sample spacing in seconds (GK: 0.2, flight: 0.1).
    #[arg(long)]
    dt: Option<f64>,
    /// Gust standard deviation in m/s (flight only).
    #[arg(long)]
    turbulence: Option<f64>,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    channel: String,
    #[arg(long, value_parser = parse_mode)]
    mode: FaultKind,
    /// Fault onset time in seconds.
    #[arg(long)]
    onset: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplier on the additive fault magnitudes.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = DEFAULT_POST_NOISE_STD)]
    post_noise_std: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    labels_out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Fault-free recording used to identify the plant.
    #[arg(long)]
    clean: PathBuf,
    /// Labeled recording as `data.csv+labels.csv`; repeatable.
    #[arg(long, required = true, value_parser = parse_labeled)]
    labeled: Vec<(PathBuf, PathBuf)>,
    /// JSON training configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    monitored: Option<String>,
    /// Comma-separated input channels.
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<String>>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    /// Number of delays in the embedding.
    #[arg(long)]
    delays: Option<usize>,
    /// Samples between consecutive delays.
    #[arg(long)]
    stride: Option<usize>,
    /// `full`, `energy:<fraction>` or `fixed:<r>`.
    #[arg(long, value_parser = parse_rank)]
    rank: Option<RankPolicy>,
    /// Inclusive tree-depth range, e.g. `1..7`.
    #[arg(long, value_parser = parse_depth_grid)]
    depth_grid: Option<DepthGrid>,
    /// Draw this many labeled rows at random instead of using all of them.
    #[arg(long)]
    train_samples: Option<usize>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    flags: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Sample rate in Hz, for the lag time.
    #[arg(long)]
    rate: f64,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report: ReportFormat,
    /// Extra consecutive flags required before a detection counts.
    #[arg(long, default_value_t = 0)]
    debounce: usize,
}

#[derive(Debug, Serialize)]
struct Failure {
    category: String,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { category: e.category().into(), message: e.to_string() }
    }
}

impl Failure {
    fn new(category: &str, message: impl Into<String>) -> Self {
        Failure { category: category.into(), message: message.into() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn parse_mode(s: &str) -> Result<FaultKind, String> {
    match s.parse::<FaultKind>() {
        Ok(FaultKind::None) | Err(_) => Err(format!("`{s}` is not one of catastrophic, oscillation, noise, drift")),
        Ok(k) => Ok(k),
    }
}

fn parse_labeled(s: &str) -> Result<(PathBuf, PathBuf), String> {
    match s.split_once('+') {
        Some((data, labels)) if !data.is_empty() && !labels.is_empty() => Ok((data.into(), labels.into())),
        _ => Err(format!("expected `data.csv+labels.csv`, got `{s}`")),
    }
}

fn parse_rank(s: &str) -> Result<RankPolicy, String> {
    let bad = || format!("expected full, energy:<fraction> or fixed:<r>, got `{s}`");
    match s.split_once(':') {
        None if s == "full" => Ok(RankPolicy::Full),
        Some(("energy", v)) => v.parse().map(RankPolicy::Energy).map_err(|_| bad()),
        Some(("fixed", v)) => v.parse().map(RankPolicy::Fixed).map_err(|_| bad()),
        _ => Err(bad()),
    }
}

#[derive(Clone)]
struct DepthGrid(Vec<usize>);

fn parse_depth_grid(s: &str) -> Result<DepthGrid, String> {
    let bad = || format!("expected `a..b` with 1 <= a <= b, got `{s}`");
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    if a == 0 || a > b {
        return Err(bad());
    }
    Ok(DepthGrid((a..=b).collect()))
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let series = match args.dataset {
        Dataset::Gk => {
            if args.turbulence.is_some() {
                return Err(Failure::new("usage", "--turbulence applies to the flight dataset only"));
            }
            let d = GkConfig::default();
            gk_simulate(&GkConfig { duration: args.duration.unwrap_or(d.duration), dt: args.dt.unwrap_or(d.dt), ..d })?
        }
        Dataset::Flight => {
            let d = FlightSimConfig::default();
            flight_simulate(&FlightSimConfig {
                duration: args.duration.unwrap_or(d.duration),
                dt: args.dt.unwrap_or(d.dt),
                turbulence_intensity: args.turbulence.unwrap_or(d.turbulence_intensity),
                seed: args.seed,
                ..d
            })?
        }
    };
    Ok(write_csv(&series, &args.out)?)
}

fn inject(args: InjectArgs) -> CliResult<()> {
    let series = read_csv(&args.input)?;
    let spec = FaultSpec {
        post_noise_std: args.post_noise_std,
        ..FaultSpec::new(FaultMode::with_defaults(args.mode, args.scale), args.onset)
    };
    let (out, labels) = inject_fault(&series, &args.channel, &spec, args.seed)?;
    write_csv(&out, &args.out)?;
    Ok(write_binary_csv(&args.labels_out, "label", &labels, out.sample_rate_hz(), out.t0())?)
}

fn read_config(path: &Path) -> CliResult<TrainConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("i/o error on {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Failure::new("parse", format!("parse error in {}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })
}

#[derive(Serialize)]
struct TrainSummary {
    model: String,
    labeled_rows: usize,
    train_rows: usize,
    depth: usize,
    cv_accuracy: f64,
    importances: Vec<(String, f64)>,
}

fn train(args: TrainArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(m) = args.monitored {
        cfg.monitored = m;
    }
    if let Some(i) = args.inputs {
        cfg.inputs = i.into_iter().filter(|s| !s.is_empty()).collect();
    }
    if cfg.monitored.is_empty() {
        return Err(Failure::new("usage", "no monitored channel: pass --monitored or set it in --config"));
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(g) = args.gain {
        cfg.observer.gain = g;
    }
    if let Some(w) = args.window {
        cfg.observer.window = w;
    }
    if args.delays.is_some() || args.stride.is_some() {
        cfg.delay = DelayConfig::new(args.stride.unwrap_or(cfg.delay.stride), args.delays.unwrap_or(cfg.delay.delays))?;
    }
    if let Some(r) = args.rank {
        cfg.rank = r;
    }
    if let Some(DepthGrid(g)) = args.depth_grid {
        cfg.depth_grid = g;
    }
    if args.train_samples.is_some() {
        cfg.train_samples = args.train_samples;
    }
    let load = |p: &Path| -> CliResult<RecordedSeries> { Ok(read_csv(p)?.select(&cfg.monitored, &cfg.inputs)?) };
    let clean = load(&args.clean)?;
    let mut labeled = Vec::with_capacity(args.labeled.len());
    for (data, label_path) in &args.labeled {
        let series = load(data)?;
        let labels = read_binary_csv(label_path)?;
        if labels.len() != series.len() {
            return Err(Failure::new(
                "shape",
                format!("{} has {} rows but {} has {}", data.display(), series.len(), label_path.display(), labels.len()),
            ));
        }
        labeled.push((series, labels));
    }
    let (model, report) = offline_train_with_report(&clean, &labeled, &cfg)?;
    save_model(&model, &args.out)?;
    let mut importances: Vec<(String, f64)> =
        model.feature_schema.iter().cloned().zip(model.tree.importances.iter().copied()).collect();
    importances.sort_by(|a, b| b.1.total_cmp(&a.1));
    let summary = TrainSummary {
        model: args.out.display().to_string(),
        labeled_rows: report.labeled_rows,
        train_rows: report.train_rows,
        depth: report.cv.best_depth,
        cv_accuracy: report.cv.accuracy,
        importances,
    };
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    Ok(())
}

fn detect(args: DetectArgs) -> CliResult<()> {
    let model = load_model(&args.model)?;
    let series = read_csv(&args.input)?;
    let flags = online_detect(&model, &series)?;
    Ok(write_binary_csv(&args.out, "flag", &flags, series.sample_rate_hz(), series.t0())?)
}

fn evaluate(args: EvaluateArgs) -> CliResult<()> {
    let flags = read_binary_csv(&args.flags)?;
    let labels = read_binary_csv(&args.labels)?;
    let report = evaluate_debounced(&flags, &labels, args.rate, args.debounce)?;
    match args.report {
        ReportFormat::Json => println!("{}", serde_json::to_string(&report).expect("report serializes")),
        ReportFormat::Text => println!("{report}"),
    }
    Ok(())
}

fn fail(f: &Failure, code: u8) -> ExitCode {
    eprintln!("{}", serde_json::to_string(f).expect("failure serializes"));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let text = e.to_string();
            let message = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            return fail(&Failure::new("usage", message.trim_start_matches("error: ")), 2);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Inject(a) => inject(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(&f, 1),
    }
}

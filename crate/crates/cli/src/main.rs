//! `tsad`: train, detect, evaluate and benchmark from the command line.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 training
//! failure. Errors are reported as one JSON object on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tsad::detection::{read_anomalies, write_anomalies};
use tsad::evaluation::{confusion, prf1};
use tsad::model::ModelBundle;
use tsad::pipeline::{detect_signal, train_signal, PipelineConfig};
use tsad::runner::{load_manifest, run_ablation, run_benchmark, ManifestEntry, RunOptions, RunReport};
use tsad::scoring::{ErrorMethod, FusionMode};
use tsad::signal::{load_labels, load_signal, SignalFormat};
use tsad::synth::{generate, labels_json, signal_csv, Profile, Shape, SynthConfig};
use tsad::{Error, Result};

/// Name of the effective configuration stored next to a trained model.
const MODEL_CONFIG: &str = "config.json";

#[derive(Debug, Parser)]
#[command(name = "tsad", version, about = "Adversarial reconstruction-based anomaly detection for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic signals with injected anomalies, labels and a manifest.
    Synth(SynthArgs),
    /// Train a model on one signal.
    #[command(after_help = config_help())]
    Train(TrainArgs),
    /// Score a signal with a trained model; writes anomalies.json and scores.csv.
    #[command(after_help = config_help())]
    Detect(DetectArgs),
    /// Compare detected anomalies with labelled windows.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every signal of a manifest under one scoring variant.
    #[command(after_help = config_help())]
    Benchmark(RunArgs),
    /// Evaluate all ten scoring variants, one trained model per signal.
    #[command(after_help = config_help())]
    Ablate(RunArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Config file: a JSON object or `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for all randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Window length t.
    #[arg(long)]
    window_size: Option<usize>,
    /// Latent dimension k.
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Training iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Reconstruction error: point, area or dtw.
    #[arg(long)]
    error: Option<ErrorMethod>,
    /// Score fusion: critic, error, convex or product.
    #[arg(long)]
    fusion: Option<FusionMode>,
    /// Weight of the reconstruction score in convex fusion.
    #[arg(long)]
    alpha: Option<f64>,
    /// Pruning threshold on relative drops between peak scores.
    #[arg(long)]
    theta: Option<f64>,
}

impl ConfigArgs {
    /// Layers the config file and then the flags over `base`.
    fn resolve(&self, base: PipelineConfig) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => base.with_file(path)?,
            None => base,
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.window_size {
            cfg.window_size = v;
        }
        if let Some(v) = self.latent_dim {
            cfg.latent_dim = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.error {
            cfg.error = v;
        }
        if let Some(v) = self.fusion {
            cfg.fusion = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.theta {
            cfg.theta = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "sine")]
    shape: Shape,
    /// mixed (2 spikes, 3 collective anomalies), spike or clean.
    #[arg(long, default_value = "mixed")]
    profile: Profile,
    #[arg(long, default_value_t = 2000)]
    length: usize,
    /// Period in samples.
    #[arg(long, default_value_t = 50.0)]
    period: f64,
    /// Standard deviation of the additive noise.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Number of signals; signal i uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Signal CSV (`timestamp,value[,value...]`).
    #[arg(long)]
    signal: PathBuf,
    /// Model output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    signal: PathBuf,
    /// Directory written by `train`. Its stored config is the base layer.
    #[arg(long)]
    model: PathBuf,
    /// Output directory for anomalies.json and scores.csv.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// anomalies.json written by `detect`.
    #[arg(long)]
    anomalies: PathBuf,
    /// Labels JSON: `[[start, end], ...]` in timestamp units.
    #[arg(long)]
    labels: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Manifest JSON: `[{"dataset", "signal_csv", "labels_json"}, ...]`.
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory; per-signal results are cached there.
    #[arg(long)]
    out: PathBuf,
    /// Signals processed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

/// Settings with a published reference value.
const REFERENCE: &[(&str, &str)] = &[
    ("window_size", "t = 100"),
    ("latent_dim", "k = 20"),
    ("batch_size", "m = 64"),
    ("iterations", "2000"),
    ("alpha", "0.5"),
    ("theta", "0.1"),
    ("sigmas", "4"),
    ("window_fraction", "T/3"),
    ("step_fraction", "T/30"),
];

fn config_help() -> String {
    let defaults = serde_json::to_value(PipelineConfig::default()).expect("config serializes");
    let mut out = String::from(
        "Config keys (precedence: flags, then --config file, then these defaults):\n",
    );
    for (key, value) in defaults.as_object().expect("config is an object") {
        out.push_str(&format!("  {key:<18} {value}"));
        if let Some((_, r)) = REFERENCE.iter().find(|(k, _)| k == key) {
            out.push_str(&format!("  [reference: {r}]"));
        }
        out.push('\n');
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::Data(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn print(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut manifest = Vec::new();
    let dataset = format!("synthetic-{}", serde_json::to_value(args.profile).expect("json").as_str().unwrap_or("x"));
    for i in 0..args.count {
        let cfg = SynthConfig {
            shape: args.shape,
            profile: args.profile,
            length: args.length,
            period: args.period,
            amplitude: 1.0,
            noise: args.noise,
            seed: args.seed + i,
        };
        let (ts, labels) = generate(&cfg)?;
        let signal = format!("signal-{i:03}.csv");
        let label = format!("signal-{i:03}.labels.json");
        write(&args.out.join(&signal), &signal_csv(&ts))?;
        write(&args.out.join(&label), &(labels_json(&labels) + "\n"))?;
        manifest.push(ManifestEntry {
            dataset: dataset.clone(),
            signal_csv: signal.into(),
            labels_json: label.into(),
        });
    }
    let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
    let path = args.out.join("manifest.json");
    write(&path, &text)?;
    print(&json!({ "manifest": path, "signals": args.count }));
    Ok(())
}

fn train(args: &TrainArgs) -> Result<()> {
    let cfg = args.config.resolve(PipelineConfig::default())?;
    let ts = load_signal(&args.signal, SignalFormat::Csv)?;
    let bundle = train_signal(&ts, &cfg, |r| {
        if r.iteration % 100 == 0 {
            log::info!("iteration {} cycle {:.5} vx {:.5} vz {:.5}", r.iteration, r.cycle, r.vx, r.vz);
        }
    })?;
    bundle.save(&args.out)?;
    let text = serde_json::to_string_pretty(&cfg).expect("json") + "\n";
    write(&args.out.join(MODEL_CONFIG), &text)?;
    let last = bundle.training_log.records.last();
    print(&json!({
        "model": args.out,
        "iterations": bundle.training_log.records.len(),
        "final_cycle_loss": last.map(|r| r.cycle),
    }));
    Ok(())
}

fn detect(args: &DetectArgs) -> Result<()> {
    let stored = args.model.join(MODEL_CONFIG);
    let base = if stored.exists() {
        PipelineConfig::default().with_file(&stored)?
    } else {
        PipelineConfig::default()
    };
    let cfg = args.config.resolve(base)?;
    let ts = load_signal(&args.signal, SignalFormat::Csv)?;
    let bundle = ModelBundle::load(&args.model)?;
    let det = detect_signal(&ts, &bundle, &cfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::Data(format!("{}: {e}", args.out.display())))?;
    let anomalies = args.out.join("anomalies.json");
    write_anomalies(&anomalies, &det.anomalies)?;
    det.table.write_csv(&args.out.join("scores.csv"))?;
    print(&json!({ "anomalies": anomalies, "count": det.anomalies.len() }));
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let anomalies = read_anomalies(&args.anomalies)?;
    let labels = load_labels(&args.labels)?;
    let pred: Vec<(i64, i64)> = anomalies.iter().map(|a| (a.start_timestamp, a.end_timestamp)).collect();
    let counts = confusion(labels.windows(), &pred);
    let s = prf1(&counts);
    let report = json!({
        "tp": counts.tp,
        "fp": counts.fp,
        "fn": counts.fn_,
        "precision": s.precision,
        "recall": s.recall,
        "f1": s.f1,
    });
    if let Some(out) = &args.out {
        write(out, &(serde_json::to_string_pretty(&report).expect("json") + "\n"))?;
    }
    print(&report);
    Ok(())
}

fn run(args: &RunArgs, ablate: bool) -> Result<()> {
    let cfg = args.config.resolve(PipelineConfig::default())?;
    let manifest = load_manifest(&args.manifest)?;
    let opts = RunOptions { jobs: args.jobs };
    let report: RunReport = if ablate {
        run_ablation(&manifest, &cfg, &args.out, &opts)?
    } else {
        run_benchmark(&manifest, &cfg, &args.out, &opts)?
    };
    let datasets: Vec<Value> = report
        .datasets
        .iter()
        .map(|d| json!({ "dataset": d.dataset, "variant": d.variant, "micro_f1": d.micro.f1, "macro_f1": d.macro_f1, "failed": d.failed }))
        .collect();
    print(&json!({
        "report": args.out.join("report.csv"),
        "datasets": datasets,
        "failures": report.failures.len(),
        "trained": report.trainings,
    }));
    Ok(())
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Detect(a) => detect(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Benchmark(a) => run(a, false),
        Command::Ablate(a) => run(a, true),
    }
}

fn fail(kind: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("config", 1, e.to_string().trim_end().to_string()),
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            let code = match kind {
                tsad::error::ErrorKind::Config => 1,
                tsad::error::ErrorKind::Data => 2,
                tsad::error::ErrorKind::Training => 3,
            };
            fail(kind.as_str(), code, e.to_string())
        }
    }
}

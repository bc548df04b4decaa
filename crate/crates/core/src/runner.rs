//! Benchmark and ablation runs over a manifest of labelled signals.
//!
//! Per-signal results are cached under the output directory so interrupted
//! runs resume where they stopped. Signals run on a pool of `jobs` threads;
//! results are merged in manifest order so reports do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::write_anomalies;
use crate::error::{Error, Result};
use crate::evaluation::{confusion, mean_std, prf1, summarize, DatasetReport, SignalResult};
use crate::model::ModelBundle;
use crate::pipeline::{detect_from_outputs, model_outputs, train_signal, PipelineConfig};
use crate::scoring::{ErrorMethod, FusionMode};
use crate::signal::{load_labels, load_signal, GroundTruthWindows, SignalFormat, TimeSeries};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub dataset: String,
    pub signal_csv: PathBuf,
    pub labels_json: PathBuf,
}

impl ManifestEntry {
    /// File stem of the signal CSV.
    pub fn signal_name(&self) -> String {
        self.signal_csv
            .file_stem()
            .map_or_else(|| "signal".to_string(), |s| s.to_string_lossy().into_owned())
    }
}

/// Reads a manifest; relative paths are resolved against its directory.
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut entries: Vec<ManifestEntry> = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    for e in &mut entries {
        if e.signal_csv.is_relative() {
            e.signal_csv = base.join(&e.signal_csv);
        }
        if e.labels_json.is_relative() {
            e.labels_json = base.join(&e.labels_json);
        }
    }
    Ok(entries)
}

/// One scoring variant: the critic alone, an error alone, or a fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub fusion: FusionMode,
    pub error: ErrorMethod,
}

impl Variant {
    /// Critic only, the three errors alone, then convex and product fusion
    /// of the critic with each error.
    pub fn all() -> Vec<Variant> {
        let errors = [ErrorMethod::Point, ErrorMethod::Area, ErrorMethod::Dtw];
        let mut out = vec![Variant {
            fusion: FusionMode::Critic,
            error: ErrorMethod::Dtw,
        }];
        for mode in [FusionMode::Error, FusionMode::Convex, FusionMode::Product] {
            out.extend(errors.iter().map(|&error| Variant { fusion: mode, error }));
        }
        out
    }

    pub fn name(&self) -> String {
        match self.fusion {
            FusionMode::Critic => "critic".to_string(),
            FusionMode::Error => self.error.to_string(),
            FusionMode::Convex => format!("critic+{}", self.error),
            FusionMode::Product => format!("critic*{}", self.error),
        }
    }

    /// File-name friendly form of [`Variant::name`].
    pub fn slug(&self) -> String {
        self.name().replace('*', "-x-").replace('+', "-plus-")
    }

    pub fn apply(&self, cfg: &PipelineConfig) -> PipelineConfig {
        PipelineConfig {
            fusion: self.fusion,
            error: self.error,
            ..cfg.clone()
        }
    }
}

/// Everything a run produced, in manifest order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub results: Vec<SignalResult>,
    pub datasets: Vec<DatasetReport>,
    /// `(dataset, signal, message)` of every failed signal.
    pub failures: Vec<(String, String, String)>,
    /// Number of models trained during this run (cached models excluded).
    pub trainings: usize,
}

impl RunReport {
    /// Micro F1 of every `(variant, dataset)` pair.
    pub fn f1_table(&self) -> BTreeMap<(String, String), f64> {
        self.datasets
            .iter()
            .map(|d| ((d.variant.clone(), d.dataset.clone()), d.micro.f1))
            .collect()
    }

    /// Rows are variants (in the given order), columns the datasets followed
    /// by the mean and standard deviation over datasets of the micro F1.
    pub fn to_csv(&self, variants: &[String]) -> String {
        let mut datasets: Vec<&str> = Vec::new();
        for d in &self.datasets {
            if !datasets.contains(&d.dataset.as_str()) {
                datasets.push(&d.dataset);
            }
        }
        let table = self.f1_table();
        let mut out = String::from("variant");
        for d in &datasets {
            out.push(',');
            out.push_str(d);
        }
        out.push_str(",mean±std\n");
        for v in variants {
            let scores: Vec<f64> = datasets
                .iter()
                .filter_map(|d| table.get(&(v.clone(), d.to_string())).copied())
                .collect();
            out.push_str(v);
            for s in &scores {
                out.push_str(&format!(",{s:.4}"));
            }
            let (mean, sd) = mean_std(&scores);
            out.push_str(&format!(",{mean:.4}±{sd:.4}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub jobs: usize,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn load_entry(entry: &ManifestEntry) -> Result<(TimeSeries, GroundTruthWindows)> {
    let ts = load_signal(&entry.signal_csv, SignalFormat::Csv)?;
    let labels = load_labels(&entry.labels_json)?;
    labels.check_span(&ts)?;
    Ok((ts, labels))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn signal_dir(out: &Path, entry: &ManifestEntry, index: usize) -> PathBuf {
    // The index disambiguates equal file stems within a dataset.
    out.join("signals")
        .join(&entry.dataset)
        .join(format!("{index:04}-{}", entry.signal_name()))
}

/// Loads the cached model of a signal or trains and caches a new one.
fn model_for(
    entry: &ManifestEntry,
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    dir: &Path,
    counter: &AtomicUsize,
) -> Result<ModelBundle> {
    let model_dir = dir.join("model");
    if model_dir.join("spec.json").exists() {
        if let Ok(b) = ModelBundle::load(&model_dir) {
            if b.seed == cfg.seed {
                return Ok(b);
            }
        }
    }
    log::info!("training {}/{}", entry.dataset, entry.signal_name());
    counter.fetch_add(1, Ordering::SeqCst);
    let bundle = train_signal(ts, cfg, |_| {})?;
    bundle.save(&model_dir)?;
    Ok(bundle)
}

/// Evaluates `variants` on one signal from a single (cached) model and writes
/// each variant's `anomalies-<slug>.json` next to the model.
fn run_signal(
    entry: &ManifestEntry,
    index: usize,
    cfg: &PipelineConfig,
    variants: &[Variant],
    out: &Path,
    counter: &AtomicUsize,
) -> Result<Vec<SignalResult>> {
    let dir = signal_dir(out, entry, index);
    let cache = dir.join("results.json");
    if let Some(cached) = read_json::<Vec<SignalResult>>(&cache) {
        let names: Vec<String> = variants.iter().map(Variant::name).collect();
        if cached.iter().map(|r| &r.variant).eq(names.iter()) {
            return Ok(cached);
        }
    }
    let (ts, labels) = load_entry(entry)?;
    let bundle = model_for(entry, &ts, cfg, &dir, counter)?;
    let outputs = model_outputs(&ts, &bundle, cfg)?;
    let (critic_raw, critic_smoothed) = outputs.critic_series(cfg.critic_smoothing)?;
    let mut errors = BTreeMap::new();
    let mut results = Vec::with_capacity(variants.len());
    for v in variants {
        let vcfg = v.apply(cfg);
        if let std::collections::btree_map::Entry::Vacant(e) = errors.entry(v.error as u8) {
            e.insert(outputs.error(&vcfg.error_config())?);
        }
        let comps = crate::pipeline::Components {
            error: errors[&(v.error as u8)].clone(),
            critic_raw: critic_raw.clone(),
            critic_smoothed: critic_smoothed.clone(),
        };
        let det = detect_from_outputs(&outputs, &comps, &vcfg)?;
        write_anomalies(&dir.join(format!("anomalies-{}.json", v.slug())), &det.anomalies)?;
        let pred: Vec<(i64, i64)> = det.anomalies.iter().map(|a| (a.start_timestamp, a.end_timestamp)).collect();
        let counts = confusion(labels.windows(), &pred);
        results.push(SignalResult {
            dataset: entry.dataset.clone(),
            signal: entry.signal_name(),
            variant: v.name(),
            counts,
            scores: prf1(&counts),
        });
    }
    write_json(&cache, &results)?;
    Ok(results)
}

fn run(
    manifest: &[ManifestEntry],
    cfg: &PipelineConfig,
    variants: &[Variant],
    out: &Path,
    opts: &RunOptions,
) -> Result<RunReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let counter = AtomicUsize::new(0);
    let outcomes: Vec<Result<Vec<SignalResult>>> = pool(opts.jobs)?.install(|| {
        manifest
            .par_iter()
            .enumerate()
            .map(|(i, e)| run_signal(e, i, cfg, variants, out, &counter))
            .collect()
    });

    let mut report = RunReport::default();
    for (entry, outcome) in manifest.iter().zip(outcomes) {
        match outcome {
            Ok(rs) => report.results.extend(rs),
            Err(e) => {
                log::error!("{}/{} failed: {e}", entry.dataset, entry.signal_name());
                report
                    .failures
                    .push((entry.dataset.clone(), entry.signal_name(), e.to_string()));
            }
        }
    }
    let mut datasets: Vec<&str> = Vec::new();
    for e in manifest {
        if !datasets.contains(&e.dataset.as_str()) {
            datasets.push(&e.dataset);
        }
    }
    for v in variants {
        let name = v.name();
        for d in &datasets {
            let rs: Vec<&SignalResult> = report
                .results
                .iter()
                .filter(|r| r.dataset == *d && r.variant == name)
                .collect();
            let failed = report.failures.iter().filter(|f| f.0 == *d).count();
            report.datasets.push(summarize(d, &name, &rs, failed));
        }
    }
    report.trainings = counter.load(Ordering::SeqCst);
    if !report.failures.is_empty() {
        let lines: Vec<String> = report
            .failures
            .iter()
            .map(|(d, s, m)| format!("{d}/{s}: {m}"))
            .collect();
        let path = out.join("failures.log");
        std::fs::write(&path, lines.join("\n") + "\n").map_err(|e| Error::io(&path, e))?;
    }
    Ok(report)
}

/// Trains and evaluates every signal under the configured scoring variant.
/// Writes `report.csv` and `report.json` into `out`.
pub fn run_benchmark(
    manifest: &[ManifestEntry],
    cfg: &PipelineConfig,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunReport> {
    let variant = Variant {
        fusion: cfg.fusion,
        error: cfg.error,
    };
    let report = run(manifest, cfg, &[variant], out, opts)?;
    write_reports(&report, &[variant], out)?;
    Ok(report)
}

/// Evaluates all ten scoring variants, training one model per signal.
pub fn run_ablation(
    manifest: &[ManifestEntry],
    cfg: &PipelineConfig,
    out: &Path,
    opts: &RunOptions,
) -> Result<RunReport> {
    let variants = Variant::all();
    let report = run(manifest, cfg, &variants, out, opts)?;
    write_reports(&report, &variants, out)?;
    Ok(report)
}

fn write_reports(report: &RunReport, variants: &[Variant], out: &Path) -> Result<()> {
    let names: Vec<String> = variants.iter().map(Variant::name).collect();
    let csv = out.join("report.csv");
    std::fs::write(&csv, report.to_csv(&names)).map_err(|e| Error::io(&csv, e))?;
    let mut persisted = report.clone();
    // Training counts depend on the cache state, not on the inputs.
    persisted.trainings = 0;
    write_json(&out.join("report.json"), &persisted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_variants_with_distinct_names() {
        let names: Vec<String> = Variant::all().iter().map(Variant::name).collect();
        assert_eq!(names.len(), 10);
        assert_eq!(names[0], "critic");
        assert!(names.contains(&"critic*dtw".to_string()));
        assert!(names.contains(&"critic+area".to_string()));
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
    }

    #[test]
    fn empty_manifest_gives_empty_report() {
        let dir = tempfile::tempdir().unwrap();
        let report = run_ablation(&[], &PipelineConfig::default(), dir.path(), &RunOptions { jobs: 1 }).unwrap();
        assert!(report.results.is_empty() && report.datasets.is_empty());
        assert_eq!(report.trainings, 0);
    }
}

//! End-to-end composition: preprocessing, training, scoring and detection of
//! one signal under a single flat configuration.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::detection::{
    adaptive_threshold, extract_sequences, prune, AnomalousSequence, DetectedAnomaly, PruneConfig, ThresholdConfig,
};
use crate::error::{Error, Result};
use crate::model::{self, LatentConfig, ModelBundle, NetworkSpec, TrainConfig, TrainingRecord};
use crate::scoring::{
    aggregate_reconstructions, collect_critic, fuse, lower_median, reconstruction_error, smooth_critic, zscore,
    CriticSmoothing, Direction, ErrorConfig, ErrorMethod, FusionConfig, FusionMode, ScoreKind, ScoreSeries,
    ScoreTable,
};
use crate::signal::{aggregate, apply_norm, detrend, make_windows, normalize, TimeSeries, WindowConfig};

/// Every tunable of the pipeline as one flat record. Missing keys take the
/// defaults below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // preprocessing
    pub target_length: usize,
    pub detrend: bool,
    pub train_fraction: f64,
    // windows and latent space
    pub window_size: usize,
    pub step_size: usize,
    pub latent_dim: usize,
    // networks
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub critic_filters: usize,
    pub critic_kernel: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    // training
    pub batch_size: usize,
    pub iterations: usize,
    pub n_critic: usize,
    pub learning_rate: f64,
    pub gp_weight: f64,
    pub beta1: f64,
    pub beta2: f64,
    // scoring
    pub error: ErrorMethod,
    pub half_window: usize,
    pub critic_smoothing: CriticSmoothing,
    pub fusion: FusionMode,
    pub alpha: f64,
    pub product_scale: f64,
    // detection
    pub window_fraction: f64,
    pub step_fraction: f64,
    pub sigmas: f64,
    pub merge_gap: usize,
    pub theta: f64,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let w = WindowConfig::default();
        let n = NetworkSpec::default();
        let t = TrainConfig::default();
        let e = ErrorConfig::default();
        let f = FusionConfig::default();
        let th = ThresholdConfig::default();
        PipelineConfig {
            target_length: 10_000,
            detrend: false,
            train_fraction: 1.0,
            window_size: w.window_size,
            step_size: w.step_size,
            latent_dim: LatentConfig::default().latent_dim,
            encoder_hidden: n.encoder_hidden,
            decoder_hidden: n.decoder_hidden,
            critic_filters: n.critic_filters,
            critic_kernel: n.critic_kernel,
            dropout: n.dropout,
            leaky_slope: n.leaky_slope,
            batch_size: t.batch_size,
            iterations: t.iterations,
            n_critic: t.n_critic,
            learning_rate: t.learning_rate,
            gp_weight: t.gp_weight,
            beta1: t.beta1,
            beta2: t.beta2,
            error: e.method,
            half_window: e.half_window,
            critic_smoothing: CriticSmoothing::default(),
            fusion: f.mode,
            alpha: f.alpha,
            product_scale: f.product_scale,
            window_fraction: th.window_fraction,
            step_fraction: th.step_fraction,
            sigmas: th.sigmas,
            merge_gap: th.merge_gap,
            theta: PruneConfig::default().theta,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            window_size: self.window_size,
            step_size: self.step_size,
        }
    }

    pub fn latent(&self) -> LatentConfig {
        LatentConfig {
            latent_dim: self.latent_dim,
        }
    }

    pub fn network(&self) -> NetworkSpec {
        NetworkSpec {
            encoder_hidden: self.encoder_hidden,
            decoder_hidden: self.decoder_hidden,
            critic_filters: self.critic_filters,
            critic_kernel: self.critic_kernel,
            dropout: self.dropout,
            leaky_slope: self.leaky_slope,
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            iterations: self.iterations,
            n_critic: self.n_critic,
            learning_rate: self.learning_rate,
            gp_weight: self.gp_weight,
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    pub fn error_config(&self) -> ErrorConfig {
        ErrorConfig {
            method: self.error,
            half_window: self.half_window,
        }
    }

    pub fn fusion_config(&self) -> FusionConfig {
        FusionConfig {
            mode: self.fusion,
            alpha: self.alpha,
            product_scale: self.product_scale,
        }
    }

    pub fn threshold(&self) -> ThresholdConfig {
        ThresholdConfig {
            window_fraction: self.window_fraction,
            step_fraction: self.step_fraction,
            sigmas: self.sigmas,
            merge_gap: self.merge_gap,
        }
    }

    pub fn prune(&self) -> PruneConfig {
        PruneConfig { theta: self.theta }
    }

    /// Checks every section before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.target_length < 2 {
            return Err(Error::Config("target_length must be at least 2".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1]".into()));
        }
        self.window().validate()?;
        self.latent().validate()?;
        self.network().validate()?;
        self.train().validate()?;
        self.error_config().validate()?;
        self.fusion_config().validate()?;
        self.threshold().validate()?;
        self.prune().validate()
    }

    /// Overlays `overrides` (a JSON object) on `self`; unknown keys and
    /// ill-typed values are configuration errors.
    pub fn merged(&self, overrides: &Map<String, Value>) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in overrides {
            if !obj.contains_key(k) {
                return Err(Error::Config(format!("unknown config key {k:?}")));
            }
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a JSON object or `key = value` lines (`#` starts a comment).
    pub fn parse_overrides(text: &str) -> Result<Map<String, Value>> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            return match serde_json::from_str::<Value>(text) {
                Ok(Value::Object(map)) => Ok(map),
                Ok(_) => Err(Error::Config("config JSON must be an object".into())),
                Err(e) => Err(Error::Config(format!("config JSON: {e}"))),
            };
        }
        let mut map = Map::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
            map.insert(key.trim().to_string(), parse_scalar(value.trim()));
        }
        Ok(map)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::default().with_file(path)
    }

    /// Overlays the keys set in a config file on `self`. An unreadable file
    /// is a configuration error.
    pub fn with_file(&self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.merged(&Self::parse_overrides(&text)?)
    }
}

/// JSON literal if it parses as one, otherwise a bare string.
fn parse_scalar(s: &str) -> Value {
    serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string()))
}

/// Aggregation onto a uniform grid (when needed), optional detrending and
/// normalization. Returns the fitted scaling when `norm` is `None`.
pub fn preprocess(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    norm: Option<&crate::signal::NormParams>,
) -> Result<(TimeSeries, crate::signal::NormParams)> {
    let mut series = if ts.len() > cfg.target_length || !ts.is_uniform() {
        aggregate(ts, cfg.target_length.min(ts.len()))?
    } else {
        ts.clone()
    };
    if cfg.detrend {
        series = detrend(&series)?;
    }
    match norm {
        Some(p) => Ok((apply_norm(&series, p)?, p.clone())),
        None => normalize(&series),
    }
}

/// Preprocesses `ts`, trains on (the leading `train_fraction` of) it and
/// returns the bundle with its normalization.
pub fn train_signal(
    ts: &TimeSeries,
    cfg: &PipelineConfig,
    observer: impl FnMut(&TrainingRecord),
) -> Result<ModelBundle> {
    cfg.validate()?;
    let (series, norm) = preprocess(ts, cfg, None)?;
    let n_train = ((series.len() as f64 * cfg.train_fraction).round() as usize).max(1);
    let train_part = if n_train < series.len() {
        TimeSeries::new(
            series.timestamps()[..n_train].to_vec(),
            series.values().slice(ndarray::s![..n_train, ..]).to_owned(),
        )?
    } else {
        series
    };
    let windows = make_windows(&train_part, &cfg.window())?;
    let mut bundle = model::train_with_observer(
        &windows,
        &cfg.network(),
        &cfg.latent(),
        &cfg.train(),
        cfg.seed,
        observer,
    )?;
    bundle.norm_params = Some(norm);
    Ok(bundle)
}

/// Network outputs on one signal; every scoring variant is derived from it
/// without touching the networks again.
#[derive(Debug, Clone)]
pub struct ModelOutputs {
    pub timestamps: Vec<i64>,
    /// Preprocessed input, `(T, M)`.
    pub x: Array2<f64>,
    /// Per-step lower median of the window reconstructions.
    pub x_hat: Array2<f64>,
    /// Raw critic scores covering each step.
    pub critic: Vec<Vec<f64>>,
}

/// Windows the signal with unit step and runs the encoder, decoder and
/// `C_x` over every window.
pub fn model_outputs(ts: &TimeSeries, bundle: &ModelBundle, cfg: &PipelineConfig) -> Result<ModelOutputs> {
    let norm = bundle
        .norm_params
        .as_ref()
        .ok_or_else(|| Error::Model("bundle has no normalization parameters".into()))?;
    let (series, _) = preprocess(ts, cfg, Some(norm))?;
    let window = WindowConfig {
        window_size: bundle.window.window_size,
        step_size: 1,
    };
    let windows = make_windows(&series, &window)?;
    let input = windows.windows.mapv(|v| v as f32);
    let (recon, critic) = model::reconstruct_and_critique(&bundle.networks, input.view(), 64)?;
    let recon = recon.mapv(f64::from);
    let critic: Array1<f64> = critic.mapv(f64::from);
    let len = series.len();
    let x_hat = aggregate_reconstructions(recon.view(), &windows.start_indices, len)?;
    let critic = collect_critic(critic.view(), &windows.start_indices, window.window_size, len)?;
    Ok(ModelOutputs {
        timestamps: series.timestamps().to_vec(),
        x: series.values().clone(),
        x_hat,
        critic,
    })
}

/// Reconstruction-error and critic series of one signal before fusion.
#[derive(Debug, Clone)]
pub struct Components {
    pub error: ScoreSeries,
    pub critic_raw: ScoreSeries,
    pub critic_smoothed: ScoreSeries,
}

impl ModelOutputs {
    pub fn error(&self, cfg: &ErrorConfig) -> Result<ScoreSeries> {
        reconstruction_error(self.x.view(), self.x_hat.view(), cfg)
    }

    pub fn critic_series(&self, mode: CriticSmoothing) -> Result<(ScoreSeries, ScoreSeries)> {
        let raw: Vec<f64> = self.critic.iter().map(|c| lower_median(&mut c.clone())).collect();
        Ok((ScoreSeries::new(raw, ScoreKind::Critic)?, smooth_critic(&self.critic, mode)?))
    }

    pub fn components(&self, cfg: &PipelineConfig) -> Result<Components> {
        let error = self.error(&cfg.error_config())?;
        let (critic_raw, critic_smoothed) = self.critic_series(cfg.critic_smoothing)?;
        Ok(Components {
            error,
            critic_raw,
            critic_smoothed,
        })
    }
}

/// z-scores the components and fuses them. A z-score that is not needed by
/// the fusion mode is still reported but may be all zeros if degenerate.
pub fn score_table(outputs: &ModelOutputs, comps: &Components, fusion: &FusionConfig) -> Result<ScoreTable> {
    let needs_error = fusion.mode != FusionMode::Critic;
    let needs_critic = fusion.mode != FusionMode::Error;
    let z = |s: &ScoreSeries, dir, needed: bool| match zscore(s, dir) {
        Ok(z) => Ok(z),
        Err(e) if needed => Err(e),
        Err(_) => ScoreSeries::new(vec![0.0; s.len()], s.kind),
    };
    let z_re = z(&comps.error, Direction::HighIsAnomalous, needs_error)?;
    let z_c = z(&comps.critic_smoothed, Direction::LowIsAnomalous, needs_critic)?;
    let fused = fuse(&z_re, &z_c, fusion)?;
    Ok(ScoreTable {
        x: outputs.x.clone(),
        x_hat: outputs.x_hat.clone(),
        error: comps.error.clone(),
        critic_raw: comps.critic_raw.clone(),
        critic_smoothed: comps.critic_smoothed.clone(),
        z_re,
        z_c,
        fused,
    })
}

/// Thresholds, extracts and prunes sequences from fused scores.
pub fn detect_sequences(fused: &ScoreSeries, cfg: &PipelineConfig) -> Vec<AnomalousSequence> {
    let th = cfg.threshold();
    let mask = adaptive_threshold(&fused.values, &th);
    let seqs = extract_sequences(&mask, &fused.values, th.merge_gap);
    prune(&seqs, &cfg.prune())
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub table: ScoreTable,
    pub sequences: Vec<AnomalousSequence>,
    pub anomalies: Vec<DetectedAnomaly>,
}

/// Scores one variant from precomputed outputs and detects anomalies.
pub fn detect_from_outputs(outputs: &ModelOutputs, comps: &Components, cfg: &PipelineConfig) -> Result<Detection> {
    let table = score_table(outputs, comps, &cfg.fusion_config())?;
    let sequences = detect_sequences(&table.fused, cfg);
    let anomalies = sequences
        .iter()
        .map(|s| DetectedAnomaly::from_sequence(s, &outputs.timestamps))
        .collect();
    Ok(Detection {
        table,
        sequences,
        anomalies,
    })
}

pub fn detect_signal(ts: &TimeSeries, bundle: &ModelBundle, cfg: &PipelineConfig) -> Result<Detection> {
    cfg.validate()?;
    let outputs = model_outputs(ts, bundle, cfg)?;
    let comps = outputs.components(cfg)?;
    detect_from_outputs(&outputs, &comps, cfg)
}

/// Mean `|x - x_hat|` over all steps and channels of a scored signal.
pub fn mean_abs_reconstruction_error(outputs: &ModelOutputs) -> f64 {
    let d = &outputs.x - &outputs.x_hat;
    d.mapv(f64::abs).mean().unwrap_or(0.0)
}

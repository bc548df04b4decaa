//! Synthetic periodic signals with injected anomalies and matching labels.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{GroundTruthWindows, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sine,
    Square,
}

impl std::str::FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sine" => Ok(Shape::Sine),
            "square" => Ok(Shape::Square),
            _ => Err(Error::Config(format!("unknown shape {s:?} (sine, square)"))),
        }
    }
}

/// Which anomalies to inject.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Two point spikes and three collective anomalies (level up, frequency
    /// shift, level down).
    Mixed,
    /// One large point spike.
    Spike,
    /// No anomalies.
    Clean,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Profile::Mixed),
            "spike" => Ok(Profile::Spike),
            "clean" => Ok(Profile::Clean),
            _ => Err(Error::Config(format!("unknown profile {s:?} (mixed, spike, clean)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub shape: Shape,
    pub profile: Profile,
    pub length: usize,
    /// Period in samples.
    pub period: f64,
    pub amplitude: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            shape: Shape::Sine,
            profile: Profile::Mixed,
            length: 2000,
            period: 50.0,
            amplitude: 1.0,
            noise: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Injection {
    /// Adds `delta` at a single step.
    Spike { at: f64, delta: f64 },
    /// Adds `delta` over `len` steps.
    Level { at: f64, len: usize, delta: f64 },
    /// Multiplies the local frequency by `factor` over `len` steps.
    Frequency { at: f64, len: usize, factor: f64 },
}

fn injections(profile: Profile) -> Vec<Injection> {
    // Positions are fractions of the series length.
    match profile {
        Profile::Mixed => vec![
            Injection::Spike { at: 0.125, delta: 3.0 },
            Injection::Level { at: 0.325, len: 40, delta: 1.5 },
            Injection::Frequency { at: 0.525, len: 60, factor: 3.0 },
            Injection::Spike { at: 0.725, delta: -2.5 },
            Injection::Level { at: 0.9, len: 40, delta: -1.5 },
        ],
        Profile::Spike => vec![Injection::Spike { at: 0.5, delta: 4.0 }],
        Profile::Clean => Vec::new(),
    }
}

fn wave(shape: Shape, phase: f64) -> f64 {
    let s = phase.sin();
    match shape {
        Shape::Sine => s,
        Shape::Square => {
            if s >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    }
}

/// Signal with index timestamps `0..length` and the labels of its injected
/// anomalies.
pub fn generate(cfg: &SynthConfig) -> Result<(TimeSeries, GroundTruthWindows)> {
    if cfg.length < 200 {
        return Err(Error::Config("synthetic length must be at least 200".into()));
    }
    if !(cfg.period > 1.0) || !(cfg.noise >= 0.0) {
        return Err(Error::Config("period must exceed 1 and noise must be non-negative".into()));
    }
    let n = cfg.length;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise).map_err(|e| Error::Config(e.to_string()))?;

    // Frequency multipliers per step; the phase is integrated so a frequency
    // change does not introduce a jump.
    let mut freq = vec![1.0; n];
    let mut offset = vec![0.0; n];
    let mut labels = Vec::new();
    for inj in injections(cfg.profile) {
        match inj {
            Injection::Spike { at, delta } => {
                let i = (at * n as f64) as usize;
                offset[i] += delta;
                labels.push((i as i64, i as i64));
            }
            Injection::Level { at, len, delta } => {
                let i = (at * n as f64) as usize;
                let end = (i + len).min(n);
                offset[i..end].iter_mut().for_each(|o| *o += delta);
                labels.push((i as i64, end as i64 - 1));
            }
            Injection::Frequency { at, len, factor } => {
                let i = (at * n as f64) as usize;
                let end = (i + len).min(n);
                freq[i..end].iter_mut().for_each(|f| *f = factor);
                labels.push((i as i64, end as i64 - 1));
            }
        }
    }

    let step = 2.0 * std::f64::consts::PI / cfg.period;
    let mut phase = 0.0;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let v = cfg.amplitude * wave(cfg.shape, phase) + offset[i] + noise.sample(&mut rng);
        values.push(v);
        phase += step * freq[i];
    }
    let ts = TimeSeries::new((0..n as i64).collect(), Array2::from_shape_vec((n, 1), values).unwrap())?;
    Ok((ts, GroundTruthWindows::new(labels)?))
}

/// Writes `timestamp,value` rows with a header.
pub fn signal_csv(ts: &TimeSeries) -> String {
    let mut out = String::from("timestamp,value\n");
    for (t, v) in ts.timestamps().iter().zip(ts.channel(0)) {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

pub fn labels_json(labels: &GroundTruthWindows) -> String {
    serde_json::to_string(labels).expect("labels serialize")
}

//! Per-time-step anomaly scores: reconstruction errors, smoothed critic
//! outputs, z-scoring and fusion.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayView3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMethod {
    Point,
    Area,
    Dtw,
}

impl std::str::FromStr for ErrorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(ErrorMethod::Point),
            "area" => Ok(ErrorMethod::Area),
            "dtw" => Ok(ErrorMethod::Dtw),
            _ => Err(Error::Config(format!("unknown error method {s:?} (point, area, dtw)"))),
        }
    }
}

impl std::fmt::Display for ErrorMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorMethod::Point => "point",
            ErrorMethod::Area => "area",
            ErrorMethod::Dtw => "dtw",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorConfig {
    pub method: ErrorMethod,
    /// Half width `l` of the local segment used by the area and DTW errors.
    pub half_window: usize,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig {
            method: ErrorMethod::Dtw,
            half_window: 10,
        }
    }
}

impl ErrorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_window == 0 {
            return Err(Error::Config("half_window must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Critic z-scores alone.
    Critic,
    /// Reconstruction-error z-scores alone.
    Error,
    Convex,
    Product,
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "critic" => Ok(FusionMode::Critic),
            "error" => Ok(FusionMode::Error),
            "convex" => Ok(FusionMode::Convex),
            "product" => Ok(FusionMode::Product),
            _ => Err(Error::Config(format!(
                "unknown fusion mode {s:?} (critic, error, convex, product)"
            ))),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FusionMode::Critic => "critic",
            FusionMode::Error => "error",
            FusionMode::Convex => "convex",
            FusionMode::Product => "product",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub mode: FusionMode,
    /// Weight of the reconstruction z-score in the convex combination.
    pub alpha: f64,
    /// Multiplier of the product fusion.
    pub product_scale: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            mode: FusionMode::Product,
            alpha: 0.5,
            product_scale: 1.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config("alpha must lie in [0, 1]".into()));
        }
        if !self.product_scale.is_finite() {
            return Err(Error::Config("product_scale must be finite".into()));
        }
        Ok(())
    }
}

/// How the critic scores collected at one time step are reduced to a value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticSmoothing {
    /// Collection value with the highest Gaussian kernel density estimate.
    #[default]
    KdeMode,
    /// Largest collected value.
    Max,
    /// Lower median of the collection.
    Median,
}

impl std::str::FromStr for CriticSmoothing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kde_mode" => Ok(CriticSmoothing::KdeMode),
            "max" => Ok(CriticSmoothing::Max),
            "median" => Ok(CriticSmoothing::Median),
            _ => Err(Error::Config(format!(
                "unknown critic smoothing {s:?} (kde_mode, max, median)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    ReconstructionError,
    Critic,
    Fused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HighIsAnomalous,
    LowIsAnomalous,
}

/// One score per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
}

impl ScoreSeries {
    pub fn new(values: Vec<f64>, kind: ScoreKind) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Scoring(format!("non-finite score at step {i}")));
        }
        Ok(ScoreSeries { values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Lower median: element of rank `(n - 1) / 2`. Reorders `values`.
pub fn lower_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty collection");
    let k = (values.len() - 1) / 2;
    *values.select_nth_unstable_by(k, f64::total_cmp).1
}

/// Per step, the values contributed by every window covering it. Window `i`
/// starts at `starts[i]` and contributes `values[i][q]` to step
/// `starts[i] + q`.
fn collect_per_step<'a>(
    len: usize,
    starts: &[usize],
    width: usize,
    mut value: impl FnMut(usize, usize) -> f64 + 'a,
) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); len];
    for (i, &s) in starts.iter().enumerate() {
        for q in 0..width {
            if let Some(step) = out.get_mut(s + q) {
                step.push(value(i, q));
            }
        }
    }
    if let Some(j) = out.iter().position(Vec::is_empty) {
        return Err(Error::Coverage(j));
    }
    Ok(out)
}

/// Per-step lower median of the reconstructed values of all windows covering
/// the step. `recon` is `(windows, t, channels)`; the result is `(len, channels)`.
pub fn aggregate_reconstructions(recon: ArrayView3<'_, f64>, starts: &[usize], len: usize) -> Result<Array2<f64>> {
    let (n, t, m) = recon.dim();
    if n != starts.len() {
        return Err(Error::Contract(format!("{n} windows but {} start indices", starts.len())));
    }
    let mut out = Array2::zeros((len, m));
    for c in 0..m {
        let plane = recon.index_axis(Axis(2), c);
        let mut steps = collect_per_step(len, starts, t, |i, q| plane[[i, q]])?;
        for (j, vals) in steps.iter_mut().enumerate() {
            out[[j, c]] = lower_median(vals);
        }
    }
    Ok(out)
}

/// Per step, the critic scores of every window covering it.
pub fn collect_critic(scores: ArrayView1<'_, f64>, starts: &[usize], window: usize, len: usize) -> Result<Vec<Vec<f64>>> {
    if scores.len() != starts.len() {
        return Err(Error::Contract(format!(
            "{} critic scores but {} start indices",
            scores.len(),
            starts.len()
        )));
    }
    collect_per_step(len, starts, window, |i, _| scores[i])
}

/// Collection value with maximal Gaussian KDE density (Scott bandwidth
/// `sigma * n^(-1/5)`, sample standard deviation). Ties go to the earliest
/// value in sorted order.
pub fn kde_mode(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mode of empty collection");
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if var <= 0.0 {
        return sorted[0];
    }
    let h = var.sqrt() * (n as f64).powf(-0.2);
    let inv = 1.0 / (2.0 * h * h);
    let mut best = (f64::NEG_INFINITY, sorted[0]);
    for &v in &sorted {
        let density: f64 = sorted.iter().map(|&u| (-(v - u).powi(2) * inv).exp()).sum();
        if density > best.0 {
            best = (density, v);
        }
    }
    best.1
}

/// Reduces each step's critic collection to one value.
pub fn smooth_critic(collections: &[Vec<f64>], mode: CriticSmoothing) -> Result<ScoreSeries> {
    let mut values = Vec::with_capacity(collections.len());
    for (j, c) in collections.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::Coverage(j));
        }
        values.push(match mode {
            CriticSmoothing::KdeMode => kde_mode(c),
            CriticSmoothing::Max => c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            CriticSmoothing::Median => lower_median(&mut c.clone()),
        });
    }
    ScoreSeries::new(values, ScoreKind::Critic)
}

fn check_pair(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>) -> Result<()> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Contract(format!(
            "series shapes {:?} and {:?} differ",
            x.dim(),
            x_hat.dim()
        )));
    }
    Ok(())
}

fn check_half_window(len: usize, l: usize) -> Result<()> {
    if l == 0 || 2 * l >= len {
        return Err(Error::Contract(format!(
            "half window {l} needs 0 < 2l < series length {len}"
        )));
    }
    Ok(())
}

/// Averages a per-channel error over channels.
fn channel_mean(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>, f: impl Fn(&[f64], &[f64]) -> Vec<f64>) -> Vec<f64> {
    let (len, m) = x.dim();
    let mut acc = vec![0.0; len];
    for c in 0..m {
        let a = x.column(c).to_vec();
        let b = x_hat.column(c).to_vec();
        for (s, v) in acc.iter_mut().zip(f(&a, &b)) {
            *s += v;
        }
    }
    acc.iter_mut().for_each(|v| *v /= m as f64);
    acc
}

/// `|x_t - x_hat_t|`, averaged over channels.
pub fn error_pointwise(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>) -> Result<ScoreSeries> {
    check_pair(x, x_hat)?;
    let values = channel_mean(x, x_hat, |a, b| a.iter().zip(b).map(|(p, q)| (p - q).abs()).collect());
    ScoreSeries::new(values, ScoreKind::ReconstructionError)
}

/// Absolute trapezoid integral of `x - x_hat` over `[t - l, t + l]`
/// (clipped to the series) divided by the interval length.
pub fn area_1d(x: &[f64], x_hat: &[f64], l: usize) -> Vec<f64> {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(x_hat).map(|(a, b)| a - b).collect();
    // prefix[i] = integral over [0, i]
    let mut prefix = vec![0.0; n];
    for i in 1..n {
        prefix[i] = prefix[i - 1] + 0.5 * (d[i - 1] + d[i]);
    }
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(l);
            let hi = (t + l).min(n - 1);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).abs()
        })
        .collect()
}

pub fn error_area(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>, l: usize) -> Result<ScoreSeries> {
    check_pair(x, x_hat)?;
    check_half_window(x.nrows(), l)?;
    let values = channel_mean(x, x_hat, |a, b| area_1d(a, b, l));
    ScoreSeries::new(values, ScoreKind::ReconstructionError)
}

/// Dynamic time warping score `min over paths (sqrt(sum w_k) / K)` with
/// `w = (a_i - b_j)^2` and `K` the path length.
///
/// The cost is not additive in the path length, so the minimum is taken over
/// the cheapest path of every possible length: `best[i][j][k]` is the least
/// squared cost of a path from `(0, 0)` to `(i, j)` with `k + 1` cells.
#[derive(Debug, Default)]
pub struct Dtw {
    best: Vec<f64>,
}

impl Dtw {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn distance(&mut self, a: &[f64], b: &[f64]) -> f64 {
        let (n, m) = (a.len(), b.len());
        assert!(n > 0 && m > 0, "empty DTW segment");
        let depth = n + m - 1;
        let idx = |i: usize, j: usize, k: usize| (i * m + j) * depth + k;
        self.best.clear();
        self.best.resize(n * m * depth, f64::INFINITY);
        let best = &mut self.best;
        for i in 0..n {
            for j in 0..m {
                let w = (a[i] - b[j]).powi(2);
                if i == 0 && j == 0 {
                    best[idx(0, 0, 0)] = w;
                    continue;
                }
                // A path to (i, j) has between max(i, j) + 1 and i + j + 1 cells.
                for k in i.max(j)..=i + j {
                    let mut prev = f64::INFINITY;
                    if i > 0 {
                        prev = prev.min(best[idx(i - 1, j, k - 1)]);
                    }
                    if j > 0 {
                        prev = prev.min(best[idx(i, j - 1, k - 1)]);
                    }
                    if i > 0 && j > 0 {
                        prev = prev.min(best[idx(i - 1, j - 1, k - 1)]);
                    }
                    best[idx(i, j, k)] = prev + w;
                }
            }
        }
        (n.max(m) - 1..depth)
            .map(|k| best[idx(n - 1, m - 1, k)].sqrt() / (k + 1) as f64)
            .fold(f64::INFINITY, f64::min)
    }
}

/// DTW score between the segments `[t - l, t + l)` of `x` and `x_hat`, clipped
/// to the series.
pub fn dtw_1d(x: &[f64], x_hat: &[f64], l: usize) -> Vec<f64> {
    let n = x.len();
    let mut dtw = Dtw::new();
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(l);
            let hi = (t + l).min(n);
            dtw.distance(&x[lo..hi], &x_hat[lo..hi])
        })
        .collect()
}

pub fn error_dtw(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>, l: usize) -> Result<ScoreSeries> {
    check_pair(x, x_hat)?;
    check_half_window(x.nrows(), l)?;
    let values = channel_mean(x, x_hat, |a, b| dtw_1d(a, b, l));
    ScoreSeries::new(values, ScoreKind::ReconstructionError)
}

pub fn reconstruction_error(x: ArrayView2<'_, f64>, x_hat: ArrayView2<'_, f64>, cfg: &ErrorConfig) -> Result<ScoreSeries> {
    match cfg.method {
        ErrorMethod::Point => error_pointwise(x, x_hat),
        ErrorMethod::Area => error_area(x, x_hat, cfg.half_window),
        ErrorMethod::Dtw => error_dtw(x, x_hat, cfg.half_window),
    }
}

/// Standardizes with the population mean and standard deviation of the
/// whole series; `LowIsAnomalous` flips the sign.
pub fn zscore(series: &ScoreSeries, direction: Direction) -> Result<ScoreSeries> {
    let n = series.len();
    if n == 0 {
        return Err(Error::Scoring("z-score of an empty series".into()));
    }
    let mean = series.values.iter().sum::<f64>() / n as f64;
    let var = series.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::Scoring(format!("{:?} scores have zero variance", series.kind)));
    }
    let sign = match direction {
        Direction::HighIsAnomalous => 1.0,
        Direction::LowIsAnomalous => -1.0,
    };
    let values = series.values.iter().map(|v| sign * (v - mean) / sd).collect();
    ScoreSeries::new(values, series.kind)
}

/// Combines the reconstruction and critic z-scores.
pub fn fuse(z_re: &ScoreSeries, z_c: &ScoreSeries, cfg: &FusionConfig) -> Result<ScoreSeries> {
    if z_re.len() != z_c.len() {
        return Err(Error::Contract(format!(
            "score lengths {} and {} differ",
            z_re.len(),
            z_c.len()
        )));
    }
    let pairs = z_re.values.iter().zip(&z_c.values);
    let values = match cfg.mode {
        FusionMode::Critic => z_c.values.clone(),
        FusionMode::Error => z_re.values.clone(),
        FusionMode::Convex => pairs.map(|(r, c)| cfg.alpha * r + (1.0 - cfg.alpha) * c).collect(),
        FusionMode::Product => pairs.map(|(r, c)| cfg.product_scale * (r * c)).collect(),
    };
    ScoreSeries::new(values, ScoreKind::Fused)
}

/// All intermediate per-step quantities of one scored signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub x: Array2<f64>,
    pub x_hat: Array2<f64>,
    pub error: ScoreSeries,
    /// Lower median of the raw critic scores covering each step.
    pub critic_raw: ScoreSeries,
    pub critic_smoothed: ScoreSeries,
    pub z_re: ScoreSeries,
    pub z_c: ScoreSeries,
    pub fused: ScoreSeries,
}

impl ScoreTable {
    /// Writes `index,x,x_hat,err,critic_raw,critic_smoothed,z_re,z_c,fused`.
    /// Multichannel signals get one `x_<c>,x_hat_<c>` pair per channel.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let m = self.x.ncols();
        let mut header = vec!["index".to_string()];
        if m == 1 {
            header.extend(["x".into(), "x_hat".into()]);
        } else {
            for c in 0..m {
                header.extend([format!("x_{c}"), format!("x_hat_{c}")]);
            }
        }
        header.extend(
            ["err", "critic_raw", "critic_smoothed", "z_re", "z_c", "fused"].map(String::from),
        );
        let mut out = header.join(",");
        out.push('\n');
        for j in 0..self.x.nrows() {
            let mut row = vec![j.to_string()];
            for c in 0..m {
                row.push(self.x[[j, c]].to_string());
                row.push(self.x_hat[[j, c]].to_string());
            }
            for s in [
                &self.error,
                &self.critic_raw,
                &self.critic_smoothed,
                &self.z_re,
                &self.z_c,
                &self.fused,
            ] {
                row.push(s.values[j].to_string());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

//! Locally adaptive thresholding of fused scores, extraction of anomalous
//! sequences and pruning of low-ranked ones.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Sliding window length as a fraction of the series length.
    pub window_fraction: f64,
    /// Step between windows as a fraction of the series length.
    pub step_fraction: f64,
    /// Points above `mean + sigmas * std` of a window are flagged.
    pub sigmas: f64,
    /// Flagged runs separated by at most this many unflagged steps are merged.
    pub merge_gap: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            window_fraction: 1.0 / 3.0,
            step_fraction: 1.0 / 30.0,
            sigmas: 4.0,
            merge_gap: 0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_fraction > 0.0
            && self.step_fraction <= self.window_fraction
            && self.window_fraction <= 1.0;
        if !ok {
            return Err(Error::Config(
                "need 0 < step_fraction <= window_fraction <= 1".into(),
            ));
        }
        if !(self.sigmas > 0.0) {
            return Err(Error::Config("sigmas must be positive".into()));
        }
        Ok(())
    }

    /// Window length and step in samples for a series of length `len`.
    pub fn extents(&self, len: usize) -> (usize, usize) {
        let w = ((len as f64 * self.window_fraction).floor() as usize).clamp(1, len.max(1));
        let s = ((len as f64 * self.step_fraction).floor() as usize).clamp(1, w);
        (w, s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub theta: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { theta: 0.1 }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::Config("theta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Inclusive run `[start, end]` of flagged steps and its peak score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalousSequence {
    pub start: usize,
    pub end: usize,
    pub max_score: f64,
}

/// Flags every point that exceeds `mean + sigmas * std` (population std) of
/// at least one sliding window containing it. Windows start at 0 and advance
/// by the step; the last one is truncated at the end of the series.
pub fn adaptive_threshold(scores: &[f64], cfg: &ThresholdConfig) -> Vec<bool> {
    let n = scores.len();
    let mut mask = vec![false; n];
    if n == 0 {
        return mask;
    }
    let (w, step) = cfg.extents(n);
    let mut start = 0;
    loop {
        let end = (start + w).min(n);
        let win = &scores[start..end];
        let len = win.len() as f64;
        let mean = win.iter().sum::<f64>() / len;
        let sd = (win.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / len).sqrt();
        let threshold = mean + cfg.sigmas * sd;
        for (flag, &v) in mask[start..end].iter_mut().zip(win) {
            *flag |= v > threshold;
        }
        if end == n {
            break;
        }
        start += step;
    }
    mask
}

/// Maximal runs of flagged points, merging runs separated by at most
/// `merge_gap` unflagged steps.
pub fn extract_sequences(mask: &[bool], scores: &[f64], merge_gap: usize) -> Vec<AnomalousSequence> {
    assert_eq!(mask.len(), scores.len(), "mask and scores differ in length");
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if !mask[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < mask.len() && mask[i] {
            i += 1;
        }
        match runs.last_mut() {
            Some(last) if start - last.1 - 1 <= merge_gap => last.1 = i - 1,
            _ => runs.push((start, i - 1)),
        }
    }
    runs.into_iter()
        .map(|(start, end)| AnomalousSequence {
            start,
            end,
            max_score: scores[start..=end].iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
        .collect()
}

/// Removes sequences ranked at or below the first relative drop `p <= theta`
/// between consecutive peak scores (sorted descending). Keeps the input order.
pub fn prune(seqs: &[AnomalousSequence], cfg: &PruneConfig) -> Vec<AnomalousSequence> {
    if seqs.len() <= 1 {
        return seqs.to_vec();
    }
    if seqs.iter().any(|s| !(s.max_score > 0.0)) {
        log::warn!("non-positive peak scores, pruning skipped");
        return seqs.to_vec();
    }
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    // Stable sort: equal peaks keep their start order.
    order.sort_by(|&a, &b| seqs[b].max_score.total_cmp(&seqs[a].max_score));
    let cut = (1..order.len()).find(|&r| {
        let prev = seqs[order[r - 1]].max_score;
        let cur = seqs[order[r]].max_score;
        (prev - cur) / prev <= cfg.theta
    });
    let Some(cut) = cut else {
        return seqs.to_vec();
    };
    let mut keep = vec![false; seqs.len()];
    for &i in &order[..cut] {
        keep[i] = true;
    }
    seqs.iter()
        .zip(keep)
        .filter_map(|(s, k)| k.then_some(*s))
        .collect()
}

/// Entry of `anomalies.json`: indices into the scored series and the
/// corresponding timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectedAnomaly {
    pub start: usize,
    pub end: usize,
    pub score: f64,
    pub start_timestamp: i64,
    pub end_timestamp: i64,
}

impl DetectedAnomaly {
    pub fn from_sequence(seq: &AnomalousSequence, timestamps: &[i64]) -> Self {
        DetectedAnomaly {
            start: seq.start,
            end: seq.end,
            score: seq.max_score,
            start_timestamp: timestamps[seq.start],
            end_timestamp: timestamps[seq.end],
        }
    }
}

pub fn write_anomalies(path: &Path, anomalies: &[DetectedAnomaly]) -> Result<()> {
    let text = serde_json::to_string_pretty(anomalies).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_anomalies(path: &Path) -> Result<Vec<DetectedAnomaly>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(maxes: &[f64]) -> Vec<AnomalousSequence> {
        maxes
            .iter()
            .enumerate()
            .map(|(i, &m)| AnomalousSequence {
                start: 10 * i,
                end: 10 * i + 2,
                max_score: m,
            })
            .collect()
    }

    fn whole_series() -> ThresholdConfig {
        ThresholdConfig {
            window_fraction: 1.0,
            step_fraction: 1.0,
            ..ThresholdConfig::default()
        }
    }

    #[test]
    fn constant_scores_flag_nothing() {
        assert!(adaptive_threshold(&[3.0; 50], &ThresholdConfig::default()).iter().all(|f| !f));
    }

    #[test]
    fn single_spike_is_flagged() {
        let mut s = vec![0.0; 100];
        s[37] = 100.0;
        let mask = adaptive_threshold(&s, &whole_series());
        assert_eq!(mask.iter().filter(|&&f| f).count(), 1);
        assert!(mask[37]);
        let shifted: Vec<f64> = s.iter().map(|v| v - 12.5).collect();
        assert_eq!(adaptive_threshold(&shifted, &whole_series()), mask);
    }

    #[test]
    fn windows_cover_tail() {
        let cfg = ThresholdConfig::default();
        assert_eq!(cfg.extents(2000), (666, 66));
        let mut s = vec![0.0; 2000];
        s[1999] = 50.0;
        assert!(adaptive_threshold(&s, &cfg)[1999]);
    }

    #[test]
    fn extraction_examples() {
        let b = |s: &str| s.chars().map(|c| c == '1').collect::<Vec<_>>();
        let scores = [1.0, 2.0, 3.0, 5.0, 4.0, 0.0, 0.0];
        let out = extract_sequences(&b("0011100"), &scores, 0);
        assert_eq!(out, vec![AnomalousSequence { start: 2, end: 4, max_score: 5.0 }]);
        let out = extract_sequences(&b("0101"), &scores[..4], 0);
        assert_eq!(out.len(), 2);
        assert_eq!((out[0].start, out[0].end, out[1].start, out[1].end), (1, 1, 3, 3));
        assert!(extract_sequences(&b("0000"), &scores[..4], 0).is_empty());
        let merged = extract_sequences(&b("0101"), &scores[..4], 1);
        assert_eq!(merged.len(), 1);
        assert_eq!((merged[0].start, merged[0].end), (1, 3));
    }

    #[test]
    fn prune_examples() {
        let cfg = PruneConfig::default();
        let kept = prune(&seqs(&[10.0, 5.0, 4.9, 4.8]), &cfg);
        assert_eq!(kept.iter().map(|s| s.max_score).collect::<Vec<_>>(), vec![10.0, 5.0]);
        assert_eq!(prune(&seqs(&[10.0, 5.0, 2.0]), &cfg).len(), 3);
        assert_eq!(prune(&seqs(&[0.3]), &cfg).len(), 1);
    }

    #[test]
    fn prune_keeps_start_order() {
        let kept = prune(&seqs(&[2.0, 10.0, 1.0, 5.0]), &PruneConfig::default());
        assert_eq!(kept.iter().map(|s| s.start).collect::<Vec<_>>(), vec![0, 10, 20, 30]);
        let kept = prune(&seqs(&[4.8, 10.0, 4.9, 5.0]), &PruneConfig::default());
        assert_eq!(kept.iter().map(|s| s.start).collect::<Vec<_>>(), vec![10, 30]);
    }

    #[test]
    fn non_positive_peaks_skip_pruning() {
        let input = seqs(&[10.0, 9.9, -1.0]);
        assert_eq!(prune(&input, &PruneConfig::default()), input);
    }
}

//! Brute-force reference implementations.

use rand::Rng;

/// Every monotone warp path from `(0, 0)` to `(n-1, m-1)`, scored as
/// `sqrt(sum of squared differences) / path length`; returns the minimum.
/// Costs are accumulated in path order.
pub fn dtw_brute(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, sum: f64, len: usize, best: &mut f64) {
        let sum = sum + (a[i] - b[j]).powi(2);
        let len = len + 1;
        if i + 1 == a.len() && j + 1 == b.len() {
            *best = best.min(sum.sqrt() / len as f64);
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, sum, len, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, sum, len, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, sum, len, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, 0, &mut best);
    best
}

/// Continuous piecewise-linear function through `(knots[i], values[i])`.
#[derive(Debug, Clone)]
pub struct PiecewiseLinear {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
}

impl PiecewiseLinear {
    /// Knots at 0, n-1 and a random subset of the integers in between.
    pub fn random(rng: &mut impl Rng, n: usize) -> Self {
        let mut knots = vec![0.0];
        for i in 1..n - 1 {
            if rng.random_bool(0.3) {
                knots.push(i as f64);
            }
        }
        knots.push((n - 1) as f64);
        let values = knots.iter().map(|_| rng.random_range(-3.0..3.0)).collect();
        PiecewiseLinear { knots, values }
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = self.knots.partition_point(|&q| q <= s).clamp(1, self.knots.len() - 1);
        let (s0, s1) = (self.knots[k - 1], self.knots[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (s - s0) / (s1 - s0)
    }

    /// Exact integral over `[lo, hi]` from the antiderivative of each piece.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        for k in 1..self.knots.len() {
            let (s0, s1) = (self.knots[k - 1], self.knots[k]);
            let (a, b) = (s0.max(lo), s1.min(hi));
            if a >= b {
                continue;
            }
            let slope = (self.values[k] - self.values[k - 1]) / (s1 - s0);
            let intercept = self.values[k - 1] - slope * s0;
            let anti = |s: f64| intercept * s + 0.5 * slope * s * s;
            total += anti(b) - anti(a);
        }
        total
    }
}

/// Per-truth-window overlap counting by enumerating the integer points of
/// every interval.
pub fn confusion_brute(truth: &[(i64, i64)], pred: &[(i64, i64)]) -> (usize, usize, usize) {
    use std::collections::HashSet;
    let points = |w: &(i64, i64)| (w.0..=w.1).collect::<HashSet<i64>>();
    let pred_sets: Vec<HashSet<i64>> = pred.iter().map(points).collect();
    let truth_sets: Vec<HashSet<i64>> = truth.iter().map(points).collect();
    let tp = truth_sets
        .iter()
        .filter(|t| pred_sets.iter().any(|p| !t.is_disjoint(p)))
        .count();
    let fp = pred_sets
        .iter()
        .filter(|p| truth_sets.iter().all(|t| t.is_disjoint(p)))
        .count();
    (tp, fp, truth.len() - tp)
}

/// Random closed intervals inside `[0, span)`.
pub fn random_intervals(rng: &mut impl Rng, count: usize, span: i64) -> Vec<(i64, i64)> {
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..span);
            let len = rng.random_range(0..span / 5 + 1);
            (a, (a + len).min(span - 1))
        })
        .collect()
}

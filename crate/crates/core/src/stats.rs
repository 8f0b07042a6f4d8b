//! Summary statistics and paired comparisons.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::env::{Action, Layout};
use crate::trajectory::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {0} observations")]
    TooFew(usize),
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn sem(xs: &[f64]) -> f64 {
    sd(xs) / (xs.len() as f64).sqrt()
}

/// `mean ± 1.96 · SE`.
pub fn ci95(xs: &[f64]) -> (f64, f64) {
    let (m, h) = (mean(xs), 1.96 * sem(xs));
    (m - h, m + h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub n: usize,
    pub mean_diff: f64,
    pub sd_diff: f64,
    pub t: f64,
    /// Two-sided, Student's t with `n - 1` degrees of freedom.
    pub p: f64,
    /// Cohen's d for paired samples, `mean / sd` of the differences.
    pub d: f64,
    /// The differences have zero spread, so `d` is undefined and reported as 0.
    pub degenerate: bool,
}

/// Paired t-test of `a - b`.
pub fn paired_compare(a: &[f64], b: &[f64]) -> Result<PairedComparison, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFew(2));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let (m, s) = (mean(&diffs), sd(&diffs));
    if s == 0.0 || !s.is_finite() {
        let (t, p) = if m == 0.0 { (0.0, 1.0) } else { (m.signum() * f64::INFINITY, 0.0) };
        return Ok(PairedComparison { n, mean_diff: m, sd_diff: 0.0, t, p, d: 0.0, degenerate: true });
    }
    let t = m / (s / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive dof");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    Ok(PairedComparison { n, mean_diff: m, sd_diff: s, t, p, d: m / s, degenerate: false })
}

/// Counts of integer values, indexed by value.
pub fn histogram(values: impl IntoIterator<Item = usize>) -> Vec<usize> {
    let mut h = Vec::new();
    for v in values {
        if h.len() <= v {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}

/// Per-trajectory behavioral measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Behavior {
    pub trials: usize,
    pub attempts: usize,
    pub observes: usize,
    /// Attempts that repeat the immediately preceding failed attempt.
    pub repeats: usize,
    pub completed: bool,
    /// The first attempt pairs a key with the box of its color.
    pub first_attempt_color_match: Option<bool>,
}

pub fn behavior(traj: &Trajectory, layout: &Layout) -> Behavior {
    let mut repeats = 0;
    let mut last_failed: Option<Action> = None;
    for r in &traj.records {
        if r.action.is_attempt() {
            if last_failed == Some(r.action) {
                repeats += 1;
            }
            last_failed = (!r.outcome.success()).then_some(r.action);
        }
    }
    let first_attempt_color_match = traj.records.iter().find_map(|r| match r.action {
        Action::Attempt { box_, key } => Some(layout.key(key).color == layout.boxdef(box_).color),
        Action::Observe { .. } => None,
    });
    Behavior {
        trials: traj.len(),
        attempts: traj.n_attempts(),
        observes: traj.n_observes(),
        repeats,
        completed: traj.n_opened() == layout.n_boxes(),
        first_attempt_color_match,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hand_values() {
        let r = paired_compare(&[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.mean_diff, 2.0);
        assert_abs_diff_eq!(r.sd_diff, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.d, 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.t, 2.0, epsilon = 1e-12);
        // t = 2 on one degree of freedom: p = 1 - 2 atan(2) / pi.
        assert_abs_diff_eq!(r.p, 1.0 - 2.0 * 2f64.atan() / std::f64::consts::PI, epsilon = 1e-9);
        assert!(!r.degenerate);
    }

    #[test]
    fn degenerate_cases() {
        let same = paired_compare(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((same.t, same.d, same.p, same.degenerate), (0.0, 0.0, 1.0, true));
        let shift = paired_compare(&[2.0; 4], &[1.0; 4]).unwrap();
        assert!(shift.degenerate);
        assert_eq!(shift.d, 0.0);
        assert_eq!(paired_compare(&[1.0], &[1.0, 2.0]), Err(StatsError::LengthMismatch(1, 2)));
        assert_eq!(paired_compare(&[1.0], &[1.0]), Err(StatsError::TooFew(2)));
    }

    #[test]
    fn summaries() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), 2.0);
        assert_abs_diff_eq!(sd(&[1.0, 2.0, 3.0]), 1.0);
        let (lo, hi) = ci95(&[1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(hi - 2.0, 1.96 / 3f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(2.0 - lo, hi - 2.0, epsilon = 1e-12);
        assert_eq!(histogram([0, 2, 2, 5]), vec![1, 0, 2, 0, 0, 1]);
    }
}

//! Accuracy of decoded output against simulated ground truth.

use thiserror::Error;

use crate::simulator::GroundTruth;
use crate::traceback::StatePath;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("decoded path has {decoded} states but the truth has {truth}")]
pub struct LengthMismatch {
    pub decoded: usize,
    pub truth: usize,
}

/// Mean accuracy over `n_samples` decoded streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub state_accuracy: f64,
    pub base_identity: f64,
    pub n_samples: usize,
}

impl AccuracyReport {
    /// Averages per-sample reports, weighting each equally.
    pub fn mean(reports: &[AccuracyReport]) -> AccuracyReport {
        AccuracyReport {
            state_accuracy: mean(reports.iter().map(|r| r.state_accuracy)),
            base_identity: mean(reports.iter().map(|r| r.base_identity)),
            n_samples: reports.iter().map(|r| r.n_samples).sum(),
        }
    }
}

/// Fraction of positions where the states agree.
pub fn state_accuracy(decoded: &[u32], truth: &[u32]) -> Result<f64, LengthMismatch> {
    if decoded.len() != truth.len() || truth.is_empty() {
        return Err(LengthMismatch {
            decoded: decoded.len(),
            truth: truth.len(),
        });
    }
    let hits = decoded.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `1 - levenshtein(decoded, truth) / len(truth)`, floored at 0.
pub fn base_identity(decoded: &str, truth: &str) -> f64 {
    if truth.is_empty() {
        return if decoded.is_empty() { 1.0 } else { 0.0 };
    }
    let d = strsim::levenshtein(decoded, truth) as f64;
    (1.0 - d / truth.chars().count() as f64).max(0.0)
}

/// Scores one decoded stream.
pub fn score(path: &StatePath, read: &str, truth: &GroundTruth) -> Result<AccuracyReport, LengthMismatch> {
    Ok(AccuracyReport {
        state_accuracy: state_accuracy(&path.states, &truth.true_states)?,
        base_identity: base_identity(read, &truth.bases),
        n_samples: 1,
    })
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Standard error of the mean (sample standard deviation over `sqrt(n)`).
pub fn standard_error(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values.iter().copied());
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(states: Vec<u32>, bases: &str) -> GroundTruth {
        GroundTruth {
            bases: bases.into(),
            events: vec![0.0; states.len()],
            moves: Vec::new(),
            true_states: states,
        }
    }

    #[test]
    fn perfect_decode_scores_one() {
        let t = truth(vec![6, 27], "ACGT");
        let r = score(&StatePath::from_states(vec![6, 27]), "ACGT", &t).unwrap();
        assert_eq!((r.state_accuracy, r.base_identity, r.n_samples), (1.0, 1.0, 1));
    }

    #[test]
    fn metrics_are_independent() {
        let t = truth(vec![6, 27], "ACGT");
        let r = score(&StatePath::from_states(vec![1, 2]), "ACGA", &t).unwrap();
        assert_eq!(r.state_accuracy, 0.0);
        assert_eq!(r.base_identity, 0.75);
    }

    #[test]
    fn identity_is_clamped() {
        assert_eq!(base_identity("TTTTTTTT", "AC"), 0.0);
        assert_eq!(base_identity("", ""), 1.0);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = truth(vec![6, 27], "ACGT");
        assert_eq!(
            score(&StatePath::from_states(vec![6]), "ACG", &t),
            Err(LengthMismatch { decoded: 1, truth: 2 })
        );
    }

    #[test]
    fn mean_and_standard_error() {
        assert_eq!(mean([1.0, 2.0, 3.0]), 2.0);
        assert!((standard_error(&[1.0, 2.0, 3.0]) - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(standard_error(&[5.0]), 0.0);
        let r = AccuracyReport::mean(&[
            AccuracyReport { state_accuracy: 1.0, base_identity: 0.5, n_samples: 1 },
            AccuracyReport { state_accuracy: 0.0, base_identity: 1.0, n_samples: 1 },
        ]);
        assert_eq!((r.state_accuracy, r.base_identity, r.n_samples), (0.5, 0.75, 2));
    }
}

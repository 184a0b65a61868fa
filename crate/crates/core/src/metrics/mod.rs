//! Quantitative verification and evaluation formulas.

mod partial;
mod scorecard;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::expr::{CausalEdge, ScmGraph};

pub use partial::{ci_score, partial_correlation, CiScore, PartialCorrelation};
pub use scorecard::{CiOrientation, RubricScores, ScoreCard, ScoreDetail};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("column {column} of the truth is constant and the prediction differs")]
    DegenerateColumn { column: usize },
    #[error("empty input")]
    Empty,
    #[error("entry {value} at row {row}, column {col} is not binary")]
    NonBinary { row: usize, col: usize, value: u8 },
    #[error("{found} samples are too few, need more than {needed}")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("zero variance")]
    ZeroVariance,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Mean over dimensions of the coefficient of determination.
pub fn r_squared(truth: &Trajectory, pred: &Trajectory) -> Result<f64, MetricError> {
    if truth.len() != pred.len() || truth.dim() != pred.dim() {
        return Err(MetricError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            truth.len(),
            truth.dim(),
            pred.len(),
            pred.dim()
        )));
    }
    let flat = |t: &Trajectory| t.values().iter().flatten().copied().collect::<Vec<_>>();
    r_squared_flat(&flat(truth), &flat(pred), truth.dim())
}

/// [`r_squared`] over row-major flattened matrices with `dim` columns.
pub fn r_squared_flat(truth: &[f64], pred: &[f64], dim: usize) -> Result<f64, MetricError> {
    if truth.len() != pred.len() || dim == 0 || truth.len() % dim != 0 {
        return Err(MetricError::ShapeMismatch(format!(
            "{} vs {} values with {dim} columns",
            truth.len(),
            pred.len()
        )));
    }
    let rows = truth.len() / dim;
    if rows == 0 {
        return Err(MetricError::Empty);
    }
    let mut total = 0.0;
    for j in 0..dim {
        let col = |v: &[f64], k: usize| v[k * dim + j];
        let mean = (0..rows).map(|k| col(truth, k)).sum::<f64>() / rows as f64;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for k in 0..rows {
            ss_res += (col(truth, k) - col(pred, k)).powi(2);
            ss_tot += (col(truth, k) - mean).powi(2);
        }
        if ss_tot == 0.0 {
            if ss_res == 0.0 {
                total += 1.0;
                continue;
            }
            return Err(MetricError::DegenerateColumn { column: j });
        }
        total += 1.0 - ss_res / ss_tot;
    }
    Ok(total / dim as f64)
}

/// Symbolic-regression score and thresholded accuracy, both as fractions.
///
/// Non-finite entries stand for failed samples and count as non-positive.
pub fn sr2_and_acc(per_sample: &[f64], threshold: f64) -> Result<(f64, f64), MetricError> {
    if per_sample.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = per_sample.len() as f64;
    let sr2 = per_sample
        .iter()
        .map(|&r| if r > 0.0 && r.is_finite() { r } else { 0.0 })
        .sum::<f64>()
        / n;
    let acc = per_sample.iter().filter(|&&r| r > threshold).count() as f64 / n;
    Ok((sr2, acc))
}

/// Fraction of scores strictly above `threshold`.
pub fn accuracy_above(scores: &[f64], threshold: f64) -> Result<f64, MetricError> {
    sr2_and_acc(scores, threshold).map(|(_, a)| a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub bookmaker: f64,
}

/// Transition agreement between two binary matrices (rows are time steps,
/// columns are nodes).
///
/// F1 follows the per-node, per-transition double sum; a cell with no
/// positives on either side counts as 1. Precision, recall, specificity and
/// bookmaker informedness pool the counts over all cells, with an empty
/// denominator read as perfect unless the complementary error occurred.
pub fn bn_transition_scores(truth: &[Vec<u8>], pred: &[Vec<u8>]) -> Result<BnScores, MetricError> {
    if truth.len() != pred.len() {
        return Err(MetricError::ShapeMismatch(format!(
            "{} vs {} transitions",
            truth.len(),
            pred.len()
        )));
    }
    if truth.is_empty() {
        return Err(MetricError::Empty);
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    let mut f1_sum = 0.0;
    let mut cells = 0usize;
    for (row, (t, p)) in truth.iter().zip(pred).enumerate() {
        if t.len() != p.len() || t.len() != truth[0].len() {
            return Err(MetricError::ShapeMismatch(format!("row {row} lengths differ")));
        }
        for (col, (&a, &b)) in t.iter().zip(p).enumerate() {
            for v in [a, b] {
                if v > 1 {
                    return Err(MetricError::NonBinary { row, col, value: v });
                }
            }
            let (ctp, cfp, cfn) = (
                usize::from(a == 1 && b == 1),
                usize::from(a == 0 && b == 1),
                usize::from(a == 1 && b == 0),
            );
            let denom = 2 * ctp + cfp + cfn;
            f1_sum += if denom == 0 {
                1.0
            } else {
                2.0 * ctp as f64 / denom as f64
            };
            cells += 1;
            tp += ctp;
            fp += cfp;
            fn_ += cfn;
            tn += usize::from(a == 0 && b == 0);
        }
    }
    let ratio = |num: usize, den: usize, other_error: usize| {
        if den == 0 {
            if other_error == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, fn_);
    let recall = ratio(tp, tp + fn_, fp);
    let specificity = ratio(tn, tn + fp, fn_);
    Ok(BnScores {
        precision,
        recall,
        f1: f1_sum / cells as f64,
        accuracy: (tp + tn) as f64 / cells as f64,
        bookmaker: recall + specificity - 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScmScores {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub fdr: f64,
    pub shd: usize,
    pub complexity: usize,
}

/// Classification metrics over `(source, lag, target)` triples.
///
/// An empty prediction has precision 1 (it makes no false discovery); F1 is
/// 1 only when both sets are empty.
pub fn scm_edge_metrics(pred: &ScmGraph, truth: &ScmGraph) -> Result<ScmScores, MetricError> {
    if pred.dim() != truth.dim() {
        return Err(MetricError::DimensionMismatch(pred.dim(), truth.dim()));
    }
    let p: &BTreeSet<CausalEdge> = pred.edges();
    let t: &BTreeSet<CausalEdge> = truth.edges();
    let tp = p.intersection(t).count();
    let precision = if p.is_empty() {
        1.0
    } else {
        tp as f64 / p.len() as f64
    };
    let recall = if t.is_empty() {
        1.0
    } else {
        tp as f64 / t.len() as f64
    };
    let f1 = if p.is_empty() && t.is_empty() {
        1.0
    } else if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ScmScores {
        f1,
        precision,
        recall,
        fdr: 1.0 - precision,
        shd: structural_hamming_distance(pred, truth),
        complexity: p.len(),
    })
}

/// Size of the symmetric difference of the lagged edge sets.
pub fn structural_hamming_distance(a: &ScmGraph, b: &ScmGraph) -> usize {
    a.edges().symmetric_difference(b.edges()).count()
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::ShapeMismatch(format!("{} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(MetricError::InsufficientSamples {
            found: x.len(),
            needed: 1,
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson correlation between candidate complexity and OOD success
/// (1 for success, 0 otherwise). Needs at least three records.
pub fn complexity_accuracy_correlation(records: &[(f64, f64)]) -> Result<f64, MetricError> {
    if records.len() < 3 {
        return Err(MetricError::InsufficientSamples {
            found: records.len(),
            needed: 2,
        });
    }
    let (c, s): (Vec<f64>, Vec<f64>) = records.iter().copied().unzip();
    pearson(&c, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(cols: &[&[f64]]) -> Trajectory {
        let n = cols[0].len();
        Trajectory::new(
            (0..n).map(|k| k as f64).collect(),
            (0..n).map(|k| cols.iter().map(|c| c[k]).collect()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn r_squared_cases() {
        let t = traj(&[&[1.0, 2.0, 3.0]]);
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        assert_eq!(r_squared(&t, &traj(&[&[2.0, 2.0, 2.0]])).unwrap(), 0.0);
        assert_eq!(r_squared(&t, &traj(&[&[1.0, 2.0, 4.0]])).unwrap(), 0.5);
    }

    #[test]
    fn r_squared_constant_column() {
        let t = traj(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]]);
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        let p = traj(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.1]]);
        assert_eq!(
            r_squared(&t, &p),
            Err(MetricError::DegenerateColumn { column: 1 })
        );
        assert!(r_squared(&t, &traj(&[&[1.0, 2.0]])).is_err());
    }

    #[test]
    fn aggregation_cases() {
        assert_eq!(sr2_and_acc(&[1.0, 1.0], 0.9).unwrap(), (1.0, 1.0));
        assert_eq!(sr2_and_acc(&[-2.0, 0.5], 0.9).unwrap(), (0.25, 0.0));
        assert_eq!(sr2_and_acc(&[0.95], 0.9).unwrap(), (0.95, 1.0));
        assert_eq!(sr2_and_acc(&[f64::NAN, 1.0], 0.9).unwrap(), (0.5, 0.5));
        assert_eq!(sr2_and_acc(&[], 0.9), Err(MetricError::Empty));
        let (sr2, acc) = sr2_and_acc(&[0.95, -0.5], 0.9).unwrap();
        assert!((sr2 * 100.0 - 47.5).abs() < 1e-12);
        assert_eq!(acc * 100.0, 50.0);
    }

    #[test]
    fn bn_identical_and_all_ones() {
        let t = vec![vec![1, 0, 1], vec![0, 0, 1]];
        let s = bn_transition_scores(&t, &t).unwrap();
        assert_eq!((s.f1, s.bookmaker, s.accuracy), (1.0, 1.0, 1.0));
        let ones = vec![vec![1, 1, 1]; 2];
        let s = bn_transition_scores(&t, &ones).unwrap();
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.bookmaker, 0.0);
    }

    #[test]
    fn bn_two_by_two_by_hand() {
        // cells: (1,1) TP, (0,1) FP, (0,0) TN, (1,1) TP
        let s = bn_transition_scores(&[vec![1, 0], vec![0, 1]], &[vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(s.f1, 0.75);
        assert_eq!(s.precision, 2.0 / 3.0);
        assert_eq!(s.recall, 1.0);
        assert_eq!(s.bookmaker, 0.5);
        assert!(bn_transition_scores(&[vec![2]], &[vec![1]]).is_err());
        assert!(bn_transition_scores(&[vec![1]], &[vec![1], vec![0]]).is_err());
    }

    #[test]
    fn scm_metric_cases() {
        let t = ScmGraph::new(3, 2, [(0, 1, 1), (1, 2, 2)]).unwrap();
        let s = scm_edge_metrics(&t, &t).unwrap();
        assert_eq!((s.f1, s.shd), (1.0, 0));
        let sup = ScmGraph::new(3, 2, [(0, 1, 1), (1, 2, 2), (2, 1, 0), (0, 2, 0)]).unwrap();
        let s = scm_edge_metrics(&sup, &t).unwrap();
        assert_eq!((s.shd, s.recall, s.precision, s.complexity), (2, 1.0, 0.5, 4));
        assert_eq!(s.fdr, 0.5);
        let empty = ScmGraph::new(3, 2, []).unwrap();
        let s = scm_edge_metrics(&empty, &t).unwrap();
        assert_eq!((s.recall, s.shd, s.f1), (0.0, 2, 0.0));
        let other = ScmGraph::new(4, 2, []).unwrap();
        assert!(scm_edge_metrics(&other, &t).is_err());
    }

    #[test]
    fn correlation_cases() {
        let r = complexity_accuracy_correlation(&[(1.0, 1.0), (2.0, 0.0), (3.0, -1.0)]).unwrap();
        assert!((r + 1.0).abs() < 1e-12);
        assert_eq!(
            complexity_accuracy_correlation(&[(2.0, 1.0), (2.0, 0.0), (2.0, 1.0)]),
            Err(MetricError::ZeroVariance)
        );
    }
}

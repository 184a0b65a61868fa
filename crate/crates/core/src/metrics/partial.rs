use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::dynamics::Trajectory;
use crate::expr::{CausalEdge, ScmGraph};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialCorrelation {
    pub value: f64,
    /// A residual vanished, so the correlation was defined as 0.
    pub degenerate: bool,
    /// The conditioning design was rank deficient and solved by pseudo-inverse.
    pub rank_deficient: bool,
}

/// Correlation of `x` and `y` after regressing both on `conditioning` plus an
/// intercept.
pub fn partial_correlation(
    x: &[f64],
    y: &[f64],
    conditioning: &[&[f64]],
) -> Result<PartialCorrelation, MetricError> {
    let n = x.len();
    if y.len() != n || conditioning.iter().any(|c| c.len() != n) {
        return Err(MetricError::ShapeMismatch(
            "all vectors must have equal length".into(),
        ));
    }
    let k = conditioning.len();
    if n <= k + 2 {
        return Err(MetricError::InsufficientSamples {
            found: n,
            needed: k + 2,
        });
    }
    let design = DMatrix::from_fn(n, k + 1, |r, c| if c == 0 { 1.0 } else { conditioning[c - 1][r] });
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * n.max(k + 1) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| MetricError::ShapeMismatch(e.to_string()))?;

    let residual = |v: &[f64]| {
        let v = DVector::from_column_slice(v);
        let beta = &pinv * &v;
        let fitted = &design * beta;
        (v.norm(), v - fitted)
    };
    let (nx, rx) = residual(x);
    let (ny, ry) = residual(y);
    let rank_deficient = rank < k + 1;
    let vanishing = |norm: f64, r: &DVector<f64>| r.norm() <= 1e-10 * norm.max(f64::MIN_POSITIVE);
    if vanishing(nx, &rx) || vanishing(ny, &ry) {
        return Ok(PartialCorrelation {
            value: 0.0,
            degenerate: true,
            rank_deficient,
        });
    }
    // residuals are mean-zero by construction of the intercept column
    let value = (rx.dot(&ry) / (rx.norm() * ry.norm())).clamp(-1.0, 1.0);
    Ok(PartialCorrelation {
        value,
        degenerate: false,
        rank_deficient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiScore {
    /// Mean absolute partial correlation over edges.
    pub score: f64,
    pub per_edge: Vec<(CausalEdge, f64)>,
    pub degenerate_edges: usize,
}

/// Mean over edges `(j, l) -> i` of `|corr(x_j[t-l], x_i[t] | other parents)|`,
/// where the other parents are the parents of `i` whose source differs from
/// `j`, each at its own lag. The first `max_lag` rows are dropped so every
/// lagged column is aligned.
pub fn ci_score(graph: &ScmGraph, traj: &Trajectory) -> Result<CiScore, MetricError> {
    if graph.is_empty() {
        return Err(MetricError::EmptyGraph);
    }
    if graph.dim() != traj.dim() {
        return Err(MetricError::DimensionMismatch(graph.dim(), traj.dim()));
    }
    let m = graph.max_lag();
    let n = traj.len();
    if n <= m {
        return Err(MetricError::InsufficientSamples {
            found: n,
            needed: m,
        });
    }
    let columns: Vec<Vec<f64>> = (0..traj.dim()).map(|j| traj.column(j)).collect();
    let lagged = |var: usize, lag: usize| &columns[var][m - lag..n - lag];

    let mut per_edge = Vec::with_capacity(graph.len());
    let mut degenerate = 0;
    let mut total = 0.0;
    for e in graph.edges() {
        let others: Vec<&[f64]> = graph
            .parents(e.target)
            .into_iter()
            .filter(|&(src, _)| src != e.source)
            .map(|(src, lag)| lagged(src, lag))
            .collect();
        let pc = partial_correlation(lagged(e.source, e.lag), lagged(e.target, 0), &others)?;
        degenerate += usize::from(pc.degenerate);
        total += pc.value.abs();
        per_edge.push((*e, pc.value));
    }
    Ok(CiScore {
        score: total / graph.len() as f64,
        per_edge,
        degenerate_edges: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::pearson;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn empty_conditioning_is_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = normals(&mut rng, 50);
        let y: Vec<f64> = x.iter().zip(normals(&mut rng, 50)).map(|(a, b)| a + b).collect();
        let pc = partial_correlation(&x, &y, &[]).unwrap();
        assert!((pc.value - pearson(&x, &y).unwrap()).abs() < 1e-12);
        assert!(!pc.degenerate);
    }

    #[test]
    fn exact_dependence_on_conditioner_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = normals(&mut rng, 40);
        let x = normals(&mut rng, 40);
        let pc = partial_correlation(&x, &z, &[&z]).unwrap();
        assert_eq!(pc.value, 0.0);
        assert!(pc.degenerate);
    }

    #[test]
    fn duplicated_conditioner_is_flagged() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = normals(&mut rng, 40);
        let x = normals(&mut rng, 40);
        let y = normals(&mut rng, 40);
        let a = partial_correlation(&x, &y, &[&z, &z]).unwrap();
        let b = partial_correlation(&x, &y, &[&z]).unwrap();
        assert!(a.rank_deficient);
        assert!((a.value - b.value).abs() < 1e-10);
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            partial_correlation(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0], &[&[0.0, 1.0, 0.5]]),
            Err(MetricError::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn single_edge_reduces_to_lagged_pearson() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200;
        let a = normals(&mut rng, n);
        let mut b = normals(&mut rng, n);
        for t in 1..n {
            b[t] += 0.8 * a[t - 1];
        }
        let traj = Trajectory::new(
            (0..n).map(|t| t as f64).collect(),
            (0..n).map(|t| vec![a[t], b[t]]).collect(),
        )
        .unwrap();
        let g = ScmGraph::new(2, 1, [(0, 1, 1)]).unwrap();
        let s = ci_score(&g, &traj).unwrap();
        let expect = pearson(&a[..n - 1], &b[1..]).unwrap().abs();
        assert!((s.score - expect).abs() < 1e-12);
        assert!(matches!(
            ci_score(&ScmGraph::new(2, 1, []).unwrap(), &traj),
            Err(MetricError::EmptyGraph)
        ));
    }
}

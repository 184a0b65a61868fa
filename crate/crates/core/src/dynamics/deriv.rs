use super::{DynamicsError, Trajectory};

/// Three-point finite differences on a possibly non-uniform grid.
///
/// Interior points use the centered non-uniform stencil, both ends use the
/// second-order one-sided stencil through the two nearest neighbours. All
/// three formulas are exact for quadratics.
pub fn estimate_derivatives(traj: &Trajectory) -> Result<Vec<Vec<f64>>, DynamicsError> {
    let n = traj.len();
    if n < 3 {
        return Err(DynamicsError::TooShort { found: n, min: 3 });
    }
    let t = traj.times();
    let x = traj.values();
    let dim = traj.dim();
    let mut out = vec![vec![0.0; dim]; n];
    for k in 0..n {
        let (i0, i1, i2) = if k == 0 {
            (0, 1, 2)
        } else if k == n - 1 {
            (n - 3, n - 2, n - 1)
        } else {
            (k - 1, k, k + 1)
        };
        let w = lagrange_slope_weights(t[i0], t[i1], t[i2], t[k]);
        for j in 0..dim {
            out[k][j] = w[0] * x[i0][j] + w[1] * x[i1][j] + w[2] * x[i2][j];
        }
    }
    Ok(out)
}

/// Weights of the derivative at `at` of the quadratic interpolating the
/// three nodes.
fn lagrange_slope_weights(a: f64, b: f64, c: f64, at: f64) -> [f64; 3] {
    [
        ((at - b) + (at - c)) / ((a - b) * (a - c)),
        ((at - a) + (at - c)) / ((b - a) * (b - c)),
        ((at - a) + (at - b)) / ((c - a) * (c - b)),
    ]
}

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{estimate_derivatives, DynamicsError, Trajectory};
use crate::expr::{AlgebraicSystem, CompiledSystem};

thread_local! {
    static FIT_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of coefficient fits performed on the current thread.
pub fn fit_call_count() -> u64 {
    FIT_CALLS.with(Cell::get)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Levenberg-Marquardt iteration cap per start.
    pub max_iterations: usize,
    /// Total starts: the fixed values ±1, ±0.1 first, random ones after.
    pub starts: usize,
    pub seed: u64,
    /// Stop a start once an accepted step lowers the cost by less than this
    /// fraction.
    pub gain_tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 200,
            starts: 6,
            seed: 0,
            gain_tolerance: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Mean squared derivative residual at the returned coefficients.
    pub mse: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub system: AlgebraicSystem,
    pub coefficients: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    /// A model with given coefficients and no fit history.
    pub fn with_coefficients(system: AlgebraicSystem, coefficients: Vec<f64>) -> Self {
        assert_eq!(coefficients.len(), system.num_coefficients());
        FittedModel {
            system,
            coefficients,
            diagnostics: FitDiagnostics {
                mse: f64::NAN,
                iterations: 0,
                converged: true,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// Right-hand side closure suitable for the integrator.
    pub fn rhs(&self) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        let compiled = self.system.compile();
        let mut stack = Vec::new();
        move |x, out| compiled.eval_into(x, &self.coefficients, out, &mut stack)
    }

    /// Model derivatives at every state of `target`, flattened row-major.
    pub fn predict_derivatives(&self, target: &DerivativeTarget) -> Vec<f64> {
        let compiled = self.system.compile();
        let mut out = vec![0.0; target.derivs.len()];
        let mut stack = Vec::new();
        let d = target.dim;
        for (k, x) in target.states.chunks(d).enumerate() {
            compiled.eval_into(x, &self.coefficients, &mut out[k * d..(k + 1) * d], &mut stack);
        }
        out
    }
}

/// States and finite-difference derivatives, flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeTarget {
    dim: usize,
    states: Vec<f64>,
    derivs: Vec<f64>,
}

impl DerivativeTarget {
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self, DynamicsError> {
        let derivs = estimate_derivatives(traj)?;
        Ok(DerivativeTarget {
            dim: traj.dim(),
            states: traj.values().iter().flatten().copied().collect(),
            derivs: derivs.into_iter().flatten().collect(),
        })
    }

    /// Concatenates several trajectories of the same dimension.
    pub fn from_trajectories(trajs: &[Trajectory]) -> Result<Self, DynamicsError> {
        let mut parts = trajs.iter().map(Self::from_trajectory);
        let mut acc = match parts.next() {
            Some(first) => first?,
            None => return Err(DynamicsError::TooShort { found: 0, min: 3 }),
        };
        for p in parts {
            let p = p?;
            if p.dim != acc.dim {
                return Err(DynamicsError::DimensionMismatch {
                    expected: acc.dim,
                    found: p.dim,
                });
            }
            acc.states.extend(p.states);
            acc.derivs.extend(p.derivs);
        }
        Ok(acc)
    }

    /// Builds a target from known states and derivatives, row-major.
    pub fn from_samples(states: &[Vec<f64>], derivs: &[Vec<f64>]) -> Result<Self, DynamicsError> {
        let dim = states.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(DynamicsError::TooShort { found: 0, min: 1 });
        }
        if states.len() != derivs.len() {
            return Err(DynamicsError::DimensionMismatch {
                expected: states.len(),
                found: derivs.len(),
            });
        }
        for (row, (s, d)) in states.iter().zip(derivs).enumerate() {
            for r in [s, d] {
                if r.len() != dim {
                    return Err(DynamicsError::RaggedRow {
                        row,
                        expected: dim,
                        found: r.len(),
                    });
                }
            }
            if let Some(col) = s.iter().chain(d).position(|v| !v.is_finite()) {
                return Err(DynamicsError::NonFiniteValue { row, col: col % dim });
            }
        }
        Ok(DerivativeTarget {
            dim,
            states: states.concat(),
            derivs: derivs.concat(),
        })
    }

    /// Keeps at most `rows` rows at evenly spaced indices.
    pub fn subsample(&self, rows: usize) -> Self {
        let n = self.len();
        if rows == 0 || rows >= n {
            return self.clone();
        }
        let d = self.dim;
        let mut out = DerivativeTarget {
            dim: d,
            states: Vec::with_capacity(rows * d),
            derivs: Vec::with_capacity(rows * d),
        };
        for k in 0..rows {
            let i = if rows == 1 {
                0
            } else {
                (k as f64 * (n - 1) as f64 / (rows - 1) as f64).round() as usize
            };
            out.states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            out.derivs.extend_from_slice(&self.derivs[i * d..(i + 1) * d]);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn derivatives(&self) -> &[f64] {
        &self.derivs
    }
}

/// Fits placeholder values so the system reproduces the finite-difference
/// derivatives of `traj` in the least-squares sense.
pub fn fit_coefficients(
    system: &AlgebraicSystem,
    traj: &Trajectory,
    cfg: &FitConfig,
) -> Result<FittedModel, DynamicsError> {
    if system.dim() != traj.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: system.dim(),
            found: traj.dim(),
        });
    }
    fit_to_target(system, &DerivativeTarget::from_trajectory(traj)?, cfg)
}

/// Same as [`fit_coefficients`] with derivatives already estimated.
pub fn fit_to_target(
    system: &AlgebraicSystem,
    target: &DerivativeTarget,
    cfg: &FitConfig,
) -> Result<FittedModel, DynamicsError> {
    FIT_CALLS.with(|c| c.set(c.get() + 1));
    if system.dim() != target.dim {
        return Err(DynamicsError::DimensionMismatch {
            expected: system.dim(),
            found: target.dim,
        });
    }
    let compiled = system.compile();
    let p = compiled.num_coefficients();
    let mut problem = Problem {
        compiled: &compiled,
        target,
        stack: Vec::new(),
    };
    let m = target.derivs.len();

    if p == 0 {
        let mut r = vec![0.0; m];
        if !problem.residuals(&[], &mut r) {
            return Err(DynamicsError::NonFiniteFit);
        }
        return Ok(FittedModel {
            system: system.clone(),
            coefficients: Vec::new(),
            diagnostics: FitDiagnostics {
                mse: sq_norm(&r) / m as f64,
                iterations: 0,
                converged: true,
            },
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<LmOutcome> = None;
    for s in 0..cfg.starts.max(1) {
        let x0: Vec<f64> = match s {
            0 => vec![1.0; p],
            1 => vec![-1.0; p],
            2 => vec![0.1; p],
            3 => vec![-0.1; p],
            _ => (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        if let Some(out) = levenberg_marquardt(&mut problem, x0, m, cfg) {
            if best.as_ref().map_or(true, |b| out.cost < b.cost) {
                best = Some(out);
            }
        }
    }
    let best = best.ok_or(DynamicsError::NonFiniteFit)?;
    Ok(FittedModel {
        system: system.clone(),
        coefficients: best.x,
        diagnostics: FitDiagnostics {
            mse: best.cost / m as f64,
            iterations: best.iterations,
            converged: best.converged,
        },
    })
}

struct Problem<'a> {
    compiled: &'a CompiledSystem,
    target: &'a DerivativeTarget,
    stack: Vec<f64>,
}

impl Problem<'_> {
    /// Writes model minus observed derivatives; false on any non-finite entry.
    fn residuals(&mut self, coefs: &[f64], out: &mut [f64]) -> bool {
        let d = self.target.dim;
        for (k, x) in self.target.states.chunks(d).enumerate() {
            let row = &mut out[k * d..(k + 1) * d];
            self.compiled.eval_into(x, coefs, row, &mut self.stack);
            for (r, obs) in row.iter_mut().zip(&self.target.derivs[k * d..(k + 1) * d]) {
                *r -= obs;
                if !r.is_finite() {
                    return false;
                }
            }
        }
        true
    }
}

struct LmOutcome {
    x: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

fn levenberg_marquardt(
    problem: &mut Problem<'_>,
    mut x: Vec<f64>,
    m: usize,
    cfg: &FitConfig,
) -> Option<LmOutcome> {
    let p = x.len();
    let mut r = vec![0.0; m];
    if !problem.residuals(&x, &mut r) {
        return None;
    }
    let mut cost = sq_norm(&r);
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * p];
    let mut scratch = vec![0.0; m];
    let mut trial = vec![0.0; p];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations && !converged {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        // forward differences, falling back to a backward step on overflow
        for k in 0..p {
            let h = f64::EPSILON.sqrt() * x[k].abs().max(1.0);
            trial.copy_from_slice(&x);
            trial[k] += h;
            let mut step = h;
            if !problem.residuals(&trial, &mut scratch) {
                trial[k] = x[k] - h;
                step = -h;
                if !problem.residuals(&trial, &mut scratch) {
                    return finish(x, cost, iterations, false);
                }
            }
            let col = &mut jac[k * m..(k + 1) * m];
            for i in 0..m {
                col[i] = (scratch[i] - r[i]) / step;
            }
        }
        let a = DMatrix::from_fn(p, p, |i, j| {
            let (ci, cj) = (&jac[i * m..(i + 1) * m], &jac[j * m..(j + 1) * m]);
            ci.iter().zip(cj).map(|(u, v)| u * v).sum::<f64>()
        });
        let g = DVector::from_fn(p, |i, _| {
            jac[i * m..(i + 1) * m]
                .iter()
                .zip(&r)
                .map(|(u, v)| u * v)
                .sum::<f64>()
        });
        if g.amax() <= 1e-14 * cost.sqrt().max(1e-300) {
            converged = true;
            break;
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..p {
                damped[(i, i)] += lambda * a[(i, i)].max(1e-12);
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => match damped.lu().solve(&(-&g)) {
                    Some(d) => d,
                    None => {
                        lambda *= 4.0;
                        continue;
                    }
                },
            };
            for i in 0..p {
                trial[i] = x[i] + delta[i];
            }
            if problem.residuals(&trial, &mut scratch) {
                let new_cost = sq_norm(&scratch);
                if new_cost < cost {
                    let small_step = (0..p).all(|i| delta[i].abs() <= 1e-10 * (x[i].abs() + 1e-10));
                    let small_gain = cost - new_cost <= cfg.gain_tolerance * cost;
                    x.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut scratch);
                    cost = new_cost;
                    lambda = (lambda / 3.0).max(1e-12);
                    accepted = true;
                    converged = small_step || small_gain;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
        }
    }
    finish(x, cost, iterations, converged)
}

fn finish(x: Vec<f64>, cost: f64, iterations: usize, converged: bool) -> Option<LmOutcome> {
    Some(LmOutcome {
        x,
        cost,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate_with;
    use crate::dynamics::IntegratorConfig;

    fn uniform(t1: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t1 * k as f64 / (n - 1) as f64).collect()
    }

    fn simulate(src: &str, coefs: &[f64], x0: &[f64], t1: f64) -> Trajectory {
        let sys = AlgebraicSystem::parse(src, x0.len()).unwrap();
        let model = FittedModel::with_coefficients(sys, coefs.to_vec());
        integrate_with(model.rhs(), x0, &uniform(t1, 150), &IntegratorConfig::default())
            .unwrap()
            .0
    }

    #[test]
    fn recovers_exponential_rate() {
        let traj = simulate("c*x_0", &[0.23], &[4.78], 10.0);
        let sys = AlgebraicSystem::parse("c*x_0", 1).unwrap();
        let fit = fit_coefficients(&sys, &traj, &FitConfig::default()).unwrap();
        assert!((fit.coefficients[0] / 0.23 - 1.0).abs() < 0.01, "{:?}", fit);
        assert!(fit.diagnostics.converged);
    }

    #[test]
    fn recovers_logistic_pair() {
        let traj = simulate("c*x_0*(1 - x_0/c)", &[0.79, 74.3], &[7.3], 10.0);
        let sys = AlgebraicSystem::parse("c*x_0*(1 - x_0/c)", 1).unwrap();
        let fit = fit_coefficients(&sys, &traj, &FitConfig::default()).unwrap();
        assert!((fit.coefficients[0] / 0.79 - 1.0).abs() < 0.02, "{:?}", fit);
        assert!((fit.coefficients[1] / 74.3 - 1.0).abs() < 0.02, "{:?}", fit);
    }

    #[test]
    fn zero_placeholders_is_evaluation_only() {
        let traj = simulate("c*x_0", &[0.0], &[1.0], 1.0);
        let sys = AlgebraicSystem::parse("x_0 - x_0", 1).unwrap();
        let fit = fit_coefficients(&sys, &traj, &FitConfig::default()).unwrap();
        assert!(fit.coefficients.is_empty());
        assert!(fit.diagnostics.mse < 1e-20);
    }

    #[test]
    fn always_non_finite_is_an_error() {
        let traj = simulate("c*x_0", &[0.5], &[1.0], 1.0);
        let sys = AlgebraicSystem::parse("log(-x_0*x_0 - c*c - 1)", 1).unwrap();
        assert_eq!(
            fit_coefficients(&sys, &traj, &FitConfig::default()),
            Err(DynamicsError::NonFiniteFit)
        );
    }

    #[test]
    fn dimension_mismatch() {
        let traj = simulate("c*x_0", &[0.5], &[1.0], 1.0);
        let sys = AlgebraicSystem::parse("c | c", 2).unwrap();
        assert!(matches!(
            fit_coefficients(&sys, &traj, &FitConfig::default()),
            Err(DynamicsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_and_counted() {
        let traj = simulate("c*x_0 + c", &[-0.3, 0.2], &[2.0], 5.0);
        let sys = AlgebraicSystem::parse("c*x_0*x_0 + c*sin(x_0)", 1).unwrap();
        let before = fit_call_count();
        let a = fit_coefficients(&sys, &traj, &FitConfig::default()).unwrap();
        let b = fit_coefficients(&sys, &traj, &FitConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(fit_call_count() - before, 2);
    }
}

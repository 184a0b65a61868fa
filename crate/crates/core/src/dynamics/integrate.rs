//! Adaptive integration with automatic stiffness switching.
//!
//! Non-stiff stretches use the Dormand–Prince 5(4) pair. When its step size
//! is repeatedly limited by stability rather than accuracy (Hairer's
//! `h·λ` estimate), the solver switches to the L-stable Rosenbrock 2(3)
//! method with a finite-difference Jacobian, and switches back once the
//! Jacobian no longer constrains the step.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DynamicsError, FittedModel, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Hard cap on attempted steps (accepted plus rejected).
    pub max_steps: usize,
    /// Any state component beyond this magnitude aborts the run.
    pub blowup: f64,
    pub stiffness_switching: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-6,
            atol: 1e-8,
            max_steps: 100_000,
            blowup: 1e12,
            stiffness_switching: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub stiff_steps: usize,
    pub switches: usize,
}

/// Integrates a fitted model from `x0` at `times[0]`, reporting the state at
/// every requested time.
pub fn integrate_ode(
    model: &FittedModel,
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    if x0.len() != model.dim() {
        return Err(DynamicsError::DimensionMismatch {
            expected: model.dim(),
            found: x0.len(),
        });
    }
    integrate_with(model.rhs(), x0, times, cfg).map(|(t, _)| t)
}

/// Integrates an autonomous system given as `rhs(state, out)`.
pub fn integrate_with(
    rhs: impl FnMut(&[f64], &mut [f64]),
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, SolverStats), DynamicsError> {
    if times.is_empty() {
        return Err(DynamicsError::TooShort { found: 0, min: 1 });
    }
    for k in 1..times.len() {
        if !(times[k] > times[k - 1]) {
            return Err(DynamicsError::NonIncreasingTimes { index: k });
        }
    }
    if let Some(col) = x0.iter().position(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteValue { row: 0, col });
    }
    let mut solver = Solver::new(rhs, x0, times[0], cfg);
    let mut rows = Vec::with_capacity(times.len());
    rows.push(x0.to_vec());
    for &target in &times[1..] {
        solver.advance_to(target)?;
        rows.push(solver.y.clone());
    }
    let stats = solver.stats.clone();
    Ok((Trajectory::new(times.to_vec(), rows)?, stats))
}

// Dormand–Prince coefficients; the system is autonomous so the nodes are unused
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const STIFF_HLAMBDA: f64 = 3.25;
const STIFF_COUNT: usize = 15;
const NONSTIFF_RESET: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Explicit,
    Rosenbrock,
}

enum Attempt {
    Accepted { err: f64 },
    Rejected { err: f64 },
    NonFinite,
}

struct Solver<'c, F> {
    rhs: F,
    cfg: &'c IntegratorConfig,
    dim: usize,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    mode: Mode,
    stiff_hits: usize,
    nonstiff_hits: usize,
    explicit_ok: usize,
    last_rejected: bool,
    stats: SolverStats,
    k: [Vec<f64>; 7],
    ynew: Vec<f64>,
    ystage: Vec<f64>,
    jac: DMatrix<f64>,
}

impl<'c, F: FnMut(&[f64], &mut [f64])> Solver<'c, F> {
    fn new(rhs: F, x0: &[f64], t0: f64, cfg: &'c IntegratorConfig) -> Self {
        let dim = x0.len();
        let z = vec![0.0; dim];
        let mut s = Solver {
            rhs,
            cfg,
            dim,
            t: t0,
            y: x0.to_vec(),
            f: z.clone(),
            h: 0.0,
            mode: Mode::Explicit,
            stiff_hits: 0,
            nonstiff_hits: 0,
            explicit_ok: 0,
            last_rejected: false,
            stats: SolverStats::default(),
            k: std::array::from_fn(|_| z.clone()),
            ynew: z.clone(),
            ystage: z,
            jac: DMatrix::zeros(dim, dim),
        };
        let y = s.y.clone();
        let mut f = vec![0.0; dim];
        s.eval(&y, &mut f);
        s.f = f;
        s
    }

    fn eval(&mut self, y: &[f64], out: &mut [f64]) {
        self.stats.rhs_evals += 1;
        (self.rhs)(y, out);
    }

    fn scale(&self, i: f64, j: f64) -> f64 {
        self.cfg.atol + self.cfg.rtol * i.abs().max(j.abs())
    }

    fn initial_step(&mut self, span: f64) -> f64 {
        let n = self.dim as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..self.dim {
            let sk = self.scale(self.y[i], self.y[i]);
            d0 += (self.y[i] / sk).powi(2);
            d1 += (self.f[i] / sk).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let h0 = h0.min(span);
        let y1: Vec<f64> = (0..self.dim).map(|i| self.y[i] + h0 * self.f[i]).collect();
        let mut f1 = vec![0.0; self.dim];
        self.eval(&y1, &mut f1);
        let mut d2 = 0.0;
        for i in 0..self.dim {
            let sk = self.scale(self.y[i], self.y[i]);
            d2 += ((f1[i] - self.f[i]) / sk).powi(2);
        }
        let d2 = (d2 / n).sqrt() / h0;
        let h1 = if d1.max(d2) <= 1e-15 || !d2.is_finite() {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    fn advance_to(&mut self, target: f64) -> Result<(), DynamicsError> {
        if self.h == 0.0 {
            self.h = self.initial_step(target - self.t);
        }
        while self.t < target {
            if self.stats.accepted + self.stats.rejected >= self.cfg.max_steps {
                return Err(DynamicsError::StepBudget {
                    t: self.t,
                    steps: self.cfg.max_steps,
                });
            }
            let remaining = target - self.t;
            let proposed = self.h;
            let landing = proposed >= remaining * (1.0 - 1e-12);
            let h = if landing { remaining } else { proposed };
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(DynamicsError::StepUnderflow { t: self.t });
            }
            let attempt = match self.mode {
                Mode::Explicit => self.dopri_step(h),
                Mode::Rosenbrock => self.rosenbrock_step(h),
            };
            let (order, safety) = match self.mode {
                Mode::Explicit => (5.0, 0.9),
                Mode::Rosenbrock => (3.0, 0.8),
            };
            match attempt {
                Attempt::Accepted { err } => {
                    self.stats.accepted += 1;
                    if self.mode == Mode::Rosenbrock {
                        self.stats.stiff_steps += 1;
                    }
                    self.t = if landing { target } else { self.t + h };
                    std::mem::swap(&mut self.y, &mut self.ynew);
                    self.check_state()?;
                    let mut fac = if err == 0.0 {
                        5.0
                    } else {
                        (safety * err.powf(-1.0 / order)).clamp(0.2, 5.0)
                    };
                    if self.last_rejected {
                        fac = fac.min(1.0);
                    }
                    self.last_rejected = false;
                    let next = h * fac;
                    self.h = if landing { next.max(proposed) } else { next };
                }
                Attempt::Rejected { err } => {
                    self.stats.rejected += 1;
                    self.last_rejected = true;
                    self.h = h * (safety * err.powf(-1.0 / order)).clamp(0.2, 1.0);
                }
                Attempt::NonFinite => {
                    self.stats.rejected += 1;
                    self.last_rejected = true;
                    self.h = h * 0.2;
                    if self.h <= 1e-14 * self.t.abs().max(1.0) {
                        return Err(DynamicsError::NonFiniteState { t: self.t });
                    }
                }
            }
        }
        Ok(())
    }

    fn check_state(&self) -> Result<(), DynamicsError> {
        for i in 0..self.dim {
            if !self.y[i].is_finite() || !self.f[i].is_finite() {
                return Err(DynamicsError::NonFiniteState { t: self.t });
            }
            if self.y[i].abs() > self.cfg.blowup {
                return Err(DynamicsError::BlowUp {
                    t: self.t,
                    threshold: self.cfg.blowup,
                });
            }
        }
        Ok(())
    }

    fn error_norm(&self, err: &[f64]) -> f64 {
        let s: f64 = (0..self.dim)
            .map(|i| (err[i] / self.scale(self.y[i], self.ynew[i])).powi(2))
            .sum();
        (s / self.dim as f64).sqrt()
    }

    fn stage(&mut self, h: f64, idx: usize, weights: &[(usize, f64)]) {
        for i in 0..self.dim {
            let mut acc = 0.0;
            for &(j, a) in weights {
                acc += a * if j == 0 { self.f[i] } else { self.k[j][i] };
            }
            self.ystage[i] = self.y[i] + h * acc;
        }
        let ys = std::mem::take(&mut self.ystage);
        let mut out = std::mem::take(&mut self.k[idx]);
        self.eval(&ys, &mut out);
        self.k[idx] = out;
        self.ystage = ys;
    }

    fn dopri_step(&mut self, h: f64) -> Attempt {
        self.stage(h, 1, &[(0, A21)]);
        self.stage(h, 2, &[(0, A31), (1, A32)]);
        self.stage(h, 3, &[(0, A41), (1, A42), (2, A43)]);
        self.stage(h, 4, &[(0, A51), (1, A52), (2, A53), (3, A54)]);
        self.stage(h, 5, &[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)]);
        // ystage now holds the sixth-stage point, used for stiffness detection
        let ysti = self.ystage.clone();
        for i in 0..self.dim {
            self.ynew[i] = self.y[i]
                + h * (A71 * self.f[i]
                    + A73 * self.k[2][i]
                    + A74 * self.k[3][i]
                    + A75 * self.k[4][i]
                    + A76 * self.k[5][i]);
        }
        let yn = std::mem::take(&mut self.ynew);
        let mut f7 = std::mem::take(&mut self.k[6]);
        self.eval(&yn, &mut f7);
        self.ynew = yn;
        self.k[6] = f7;
        if self.ynew.iter().chain(&self.k[6]).any(|v| !v.is_finite()) {
            return Attempt::NonFinite;
        }
        let err: Vec<f64> = (0..self.dim)
            .map(|i| {
                h * (E1 * self.f[i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i])
            })
            .collect();
        let e = self.error_norm(&err);
        if !e.is_finite() {
            return Attempt::NonFinite;
        }
        if e > 1.0 {
            return Attempt::Rejected { err: e };
        }
        if self.cfg.stiffness_switching {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..self.dim {
                num += (self.k[6][i] - self.k[5][i]).powi(2);
                den += (self.ynew[i] - ysti[i]).powi(2);
            }
            if den > 0.0 && h * (num / den).sqrt() > STIFF_HLAMBDA {
                self.nonstiff_hits = 0;
                self.stiff_hits += 1;
                if self.stiff_hits >= STIFF_COUNT {
                    self.mode = Mode::Rosenbrock;
                    self.stats.switches += 1;
                    self.stiff_hits = 0;
                    self.explicit_ok = 0;
                }
            } else {
                self.nonstiff_hits += 1;
                if self.nonstiff_hits >= NONSTIFF_RESET {
                    self.stiff_hits = 0;
                }
            }
        }
        self.f.copy_from_slice(&self.k[6]);
        Attempt::Accepted { err: e }
    }

    fn jacobian(&mut self) {
        let mut yp = self.y.clone();
        let mut fp = vec![0.0; self.dim];
        for j in 0..self.dim {
            let delta = f64::EPSILON.sqrt() * self.y[j].abs().max(1e-5);
            yp[j] = self.y[j] + delta;
            self.eval(&yp, &mut fp);
            for i in 0..self.dim {
                self.jac[(i, j)] = (fp[i] - self.f[i]) / delta;
            }
            yp[j] = self.y[j];
        }
    }

    fn rosenbrock_step(&mut self, h: f64) -> Attempt {
        let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
        let e32 = 6.0 + std::f64::consts::SQRT_2;
        let n = self.dim;
        self.jacobian();
        if self.jac.iter().any(|v| !v.is_finite()) {
            return Attempt::NonFinite;
        }
        let w = DMatrix::identity(n, n) - &self.jac * (h * d);
        let lu = w.lu();
        let solve = |rhs: DVector<f64>| lu.solve(&rhs);

        let f0 = DVector::from_column_slice(&self.f);
        let Some(k1) = solve(f0.clone()) else {
            return Attempt::NonFinite;
        };
        let mid: Vec<f64> = (0..n).map(|i| self.y[i] + 0.5 * h * k1[i]).collect();
        let mut f1 = vec![0.0; n];
        self.eval(&mid, &mut f1);
        let f1 = DVector::from_vec(f1);
        let Some(k2) = solve(&f1 - &k1).map(|v| v + &k1) else {
            return Attempt::NonFinite;
        };
        for i in 0..n {
            self.ynew[i] = self.y[i] + h * k2[i];
        }
        let yn = self.ynew.clone();
        let mut f2 = vec![0.0; n];
        self.eval(&yn, &mut f2);
        let f2 = DVector::from_vec(f2);
        let Some(k3) = solve(&f2 - (&k2 - &f1) * e32 - (&k1 - &f0) * 2.0) else {
            return Attempt::NonFinite;
        };
        let err: Vec<f64> = (0..n)
            .map(|i| h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]))
            .collect();
        if self.ynew.iter().chain(f2.iter()).any(|v| !v.is_finite()) {
            return Attempt::NonFinite;
        }
        let e = self.error_norm(&err);
        if !e.is_finite() {
            return Attempt::NonFinite;
        }
        if e > 1.0 {
            return Attempt::Rejected { err: e };
        }
        if self.cfg.stiffness_switching {
            let norm = self
                .jac
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max);
            if h * norm < 1.0 {
                self.explicit_ok += 1;
                if self.explicit_ok >= STIFF_COUNT {
                    self.mode = Mode::Explicit;
                    self.stats.switches += 1;
                    self.explicit_ok = 0;
                    self.stiff_hits = 0;
                }
            } else {
                self.explicit_ok = 0;
            }
        }
        self.f.copy_from_slice(f2.as_slice());
        Attempt::Accepted { err: e }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(t1: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| t1 * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_field_is_constant() {
        let (traj, _) = integrate_with(
            |_, out: &mut [f64]| out[0] = 0.0,
            &[5.0],
            &grid(3.0, 7),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(traj.values().iter().all(|r| r[0] == 5.0));
    }

    #[test]
    fn exponential_matches_closed_form() {
        let (traj, _) = integrate_with(
            |x: &[f64], out: &mut [f64]| out[0] = 0.23 * x[0],
            &[4.78],
            &[0.0, 0.5, 1.0],
            &IntegratorConfig::default(),
        )
        .unwrap();
        let exact = 4.78 * 0.23f64.exp();
        assert!((traj.values()[2][0] / exact - 1.0).abs() < 1e-4);
        assert!((exact - 6.016).abs() < 1e-3);
    }

    #[test]
    fn oscillator_energy_is_conserved() {
        let c = 2.1;
        let (traj, _) = integrate_with(
            |x: &[f64], out: &mut [f64]| {
                out[0] = x[1];
                out[1] = -c * x[0];
            },
            &[0.4, -0.03],
            &grid(10.0, 150),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let energy = |r: &Vec<f64>| 0.5 * r[1] * r[1] + 0.5 * c * r[0] * r[0];
        let e0 = energy(&traj.values()[0]);
        for r in traj.values() {
            assert!((energy(r) / e0 - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn robertson_triggers_stiff_mode() {
        let rhs = |y: &[f64], out: &mut [f64]| {
            out[0] = -0.04 * y[0] + 1e4 * y[1] * y[2];
            out[1] = 0.04 * y[0] - 1e4 * y[1] * y[2] - 3e7 * y[1] * y[1];
            out[2] = 3e7 * y[1] * y[1];
        };
        let times = [0.0, 1.0, 10.0, 100.0, 1000.0];
        let (traj, stats) =
            integrate_with(rhs, &[1.0, 0.0, 0.0], &times, &IntegratorConfig::default()).unwrap();
        assert!(stats.switches >= 1, "{stats:?}");
        assert!(stats.accepted < 20_000, "{stats:?}");
        let last = &traj.values()[4];
        // reference from a tight-tolerance implicit solve
        assert!((last[0] - 0.336_874_5).abs() < 1e-4, "{last:?}");
        assert!((last.iter().sum::<f64>() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn blow_up_and_budget() {
        let err = integrate_with(
            |x: &[f64], out: &mut [f64]| out[0] = x[0] * x[0],
            &[1.0],
            &[0.0, 2.0],
            &IntegratorConfig::default(),
        )
        .unwrap_err();
        assert!(
            matches!(
                err,
                DynamicsError::BlowUp { .. }
                    | DynamicsError::StepUnderflow { .. }
                    | DynamicsError::NonFiniteState { .. }
            ),
            "{err:?}"
        );
        let cfg = IntegratorConfig {
            max_steps: 10,
            ..Default::default()
        };
        let err = integrate_with(
            |x: &[f64], out: &mut [f64]| {
                out[0] = x[1];
                out[1] = -x[0];
            },
            &[1.0, 0.0],
            &[0.0, 1000.0],
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, DynamicsError::StepBudget { steps: 10, .. }));
    }

    #[test]
    fn bit_identical_reruns() {
        let run = || {
            integrate_with(
                |x: &[f64], out: &mut [f64]| {
                    out[0] = 10.0 * (x[1] - x[0]);
                    out[1] = x[0] * (28.0 - x[2]) - x[1];
                    out[2] = x[0] * x[1] - 8.0 / 3.0 * x[2];
                },
                &[1.0, 1.0, 1.0],
                &grid(5.0, 100),
                &IntegratorConfig::default(),
            )
            .unwrap()
            .0
        };
        assert_eq!(run(), run());
    }
}

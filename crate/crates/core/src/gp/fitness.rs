use crate::dynamics::{
    fit_to_target, simulate_boolean, BoolTrajectory, DerivativeTarget, DynamicsError, FitConfig,
    FittedModel, Trajectory,
};
use crate::expr::{AlgebraicSystem, BooleanNetwork};
use crate::metrics::{bn_transition_scores, r_squared_flat};

/// Derivative-space R² of a fitted system against finite-difference targets.
#[derive(Debug, Clone)]
pub struct CdeFitness {
    full: DerivativeTarget,
    target: DerivativeTarget,
    fit: FitConfig,
}

impl CdeFitness {
    pub fn new(trajs: &[Trajectory], rows: usize, fit: FitConfig) -> Result<Self, DynamicsError> {
        Ok(Self::from_target(DerivativeTarget::from_trajectories(trajs)?, rows, fit))
    }

    /// Uses at most `rows` evenly spaced rows of `target` during evolution.
    pub fn from_target(target: DerivativeTarget, rows: usize, fit: FitConfig) -> Self {
        CdeFitness {
            target: target.subsample(rows),
            full: target,
            fit,
        }
    }

    pub fn evaluate(&self, system: &AlgebraicSystem) -> Option<f64> {
        let model = fit_to_target(system, &self.target, &self.fit).ok()?;
        let pred = model.predict_derivatives(&self.target);
        r_squared_flat(self.target.derivatives(), &pred, self.target.dim()).ok()
    }

    /// Fits against every row of the target with `cfg`.
    pub fn refit(&self, system: &AlgebraicSystem, cfg: &FitConfig) -> Result<FittedModel, DynamicsError> {
        fit_to_target(system, &self.full, cfg)
    }
}

/// Macro-F1 of simulated transitions against observed Boolean trajectories.
#[derive(Debug, Clone)]
pub struct BnFitness {
    truth: Vec<BoolTrajectory>,
}

impl BnFitness {
    /// Each trajectory must contain at least one transition.
    pub fn new(truth: Vec<BoolTrajectory>) -> Result<Self, DynamicsError> {
        if let Some(t) = truth.iter().find(|t| t.states.len() < 2) {
            return Err(DynamicsError::TooShort {
                found: t.states.len(),
                min: 2,
            });
        }
        Ok(BnFitness { truth })
    }

    pub fn evaluate(&self, net: &BooleanNetwork) -> Option<f64> {
        let mut observed = Vec::new();
        let mut simulated = Vec::new();
        for t in &self.truth {
            let sim = simulate_boolean(net, &t.states[..1], t.states.len() - 1).ok()?;
            observed.extend_from_slice(&t.states[1..]);
            simulated.extend(sim.into_iter().next()?.states.into_iter().skip(1));
        }
        bn_transition_scores(&observed, &simulated).ok().map(|s| s.f1)
    }
}

/// Whether `candidate` can reproduce `truth` exactly for some placeholder
/// values and is no more complex.
///
/// Both right-hand sides are compared on points spread over the state box of
/// `traj` widened by its own extent on each side.
pub fn equivalent_skeleton(candidate: &AlgebraicSystem, truth: &FittedModel, traj: &Trajectory) -> bool {
    if candidate.dim() != truth.dim() || candidate.complexity() > truth.system.complexity() {
        return false;
    }
    let dim = traj.dim();
    let bounds: Vec<(f64, f64)> = (0..dim)
        .map(|j| {
            let col = traj.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = (hi - lo).max(1e-3 * lo.abs().max(1.0));
            (lo - span, hi + span)
        })
        .collect();
    let n = 200;
    let states: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            bounds
                .iter()
                .enumerate()
                .map(|(j, &(lo, hi))| {
                    // low-discrepancy points, one irrational step per axis
                    let u = ((k as f64 + 0.5) * (0.618_033_988_75 + 0.414_213_562 * j as f64)).fract();
                    lo + u * (hi - lo)
                })
                .collect()
        })
        .collect();
    let mut rhs = truth.rhs();
    let mut derivs = Vec::with_capacity(n);
    for s in &states {
        let mut d = vec![0.0; dim];
        rhs(s, &mut d);
        if d.iter().any(|v| !v.is_finite()) {
            return false;
        }
        derivs.push(d);
    }
    let Ok(target) = DerivativeTarget::from_samples(&states, &derivs) else {
        return false;
    };
    let cfg = FitConfig {
        max_iterations: 500,
        ..FitConfig::default()
    };
    let Ok(model) = fit_to_target(candidate, &target, &cfg) else {
        return false;
    };
    let pred = model.predict_derivatives(&target);
    let scale = target.derivatives().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let err = pred
        .iter()
        .zip(target.derivatives())
        .fold(0.0f64, |m, (p, t)| m.max((p - t).abs()));
    err <= 1e-6 * scale
}

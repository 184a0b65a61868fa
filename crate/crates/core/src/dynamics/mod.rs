//! Trajectories, derivative estimation, coefficient fitting, ODE integration
//! and synchronous Boolean simulation.

mod boolean;
mod deriv;
mod fit;
mod integrate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boolean::{simulate_boolean, BoolTrajectory};
pub use deriv::estimate_derivatives;
pub use fit::{
    fit_call_count, fit_coefficients, fit_to_target, DerivativeTarget, FitConfig, FitDiagnostics,
    FittedModel,
};
pub use integrate::{integrate_ode, integrate_with, IntegratorConfig, SolverStats};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("trajectory has {found} points, at least {min} required")]
    TooShort { found: usize, min: usize },
    #[error("times are not strictly increasing at index {index}")]
    NonIncreasingTimes { index: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("row {row} has {found} values, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("candidate evaluates to non-finite values from every start")]
    NonFiniteFit,
    #[error("integration exceeded the step budget of {steps} at t = {t}")]
    StepBudget { t: f64, steps: usize },
    #[error("integration produced a non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("integration blew up past {threshold} at t = {t}")]
    BlowUp { t: f64, threshold: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("state is not binary at position {0}")]
    NonBinaryState(usize),
}

/// Sampled continuous trajectory: `times[k]` with state row `values[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory", into = "RawTrajectory")]
pub struct Trajectory {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawTrajectory {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = DynamicsError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        Trajectory::new(raw.times, raw.values)
    }
}

impl From<Trajectory> for RawTrajectory {
    fn from(t: Trajectory) -> Self {
        RawTrajectory {
            times: t.times,
            values: t.values,
        }
    }
}

impl Trajectory {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self, DynamicsError> {
        if times.len() != values.len() {
            return Err(DynamicsError::DimensionMismatch {
                expected: times.len(),
                found: values.len(),
            });
        }
        if times.is_empty() {
            return Err(DynamicsError::TooShort { found: 0, min: 1 });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(DynamicsError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for (row, r) in values.iter().enumerate() {
            if r.len() != dim {
                return Err(DynamicsError::RaggedRow {
                    row,
                    expected: dim,
                    found: r.len(),
                });
            }
            if let Some(col) = r.iter().position(|v| !v.is_finite()) {
                return Err(DynamicsError::NonFiniteValue { row, col });
            }
        }
        for (k, t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(DynamicsError::NonFiniteValue { row: k, col: 0 });
            }
            if k > 0 && *t <= times[k - 1] {
                return Err(DynamicsError::NonIncreasingTimes { index: k });
            }
        }
        Ok(Trajectory { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

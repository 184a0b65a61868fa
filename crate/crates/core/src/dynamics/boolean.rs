use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::expr::BooleanNetwork;

/// A binary state sequence starting from one initial condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoolTrajectory {
    pub states: Vec<Vec<u8>>,
}

impl BoolTrajectory {
    pub fn new(states: Vec<Vec<u8>>) -> Result<Self, DynamicsError> {
        let dim = states.first().map_or(0, Vec::len);
        for (row, s) in states.iter().enumerate() {
            if s.len() != dim {
                return Err(DynamicsError::RaggedRow {
                    row,
                    expected: dim,
                    found: s.len(),
                });
            }
            if let Some(p) = s.iter().position(|&b| b > 1) {
                return Err(DynamicsError::NonBinaryState(p));
            }
        }
        Ok(BoolTrajectory { states })
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Synchronous orbits of length `steps + 1`, one per initial state.
pub fn simulate_boolean(
    net: &BooleanNetwork,
    initial_states: &[Vec<u8>],
    steps: usize,
) -> Result<Vec<BoolTrajectory>, DynamicsError> {
    initial_states
        .iter()
        .map(|s0| {
            if s0.len() != net.dim() {
                return Err(DynamicsError::DimensionMismatch {
                    expected: net.dim(),
                    found: s0.len(),
                });
            }
            if let Some(p) = s0.iter().position(|&b| b > 1) {
                return Err(DynamicsError::NonBinaryState(p));
            }
            let mut states = Vec::with_capacity(steps + 1);
            states.push(s0.clone());
            for _ in 0..steps {
                let next = net.step(states.last().unwrap());
                states.push(next);
            }
            Ok(BoolTrajectory { states })
        })
        .collect()
}

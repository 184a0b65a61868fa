//! Core machinery for recovering governing structures from time series:
//! expression DSLs, trajectory simulation and fitting, verification metrics,
//! and genetic programming over expression trees.

pub mod catalog;
pub mod dynamics;
pub mod expr;
pub mod gp;
pub mod metrics;

use std::fmt;

use serde::{Deserialize, Serialize};

/// The three structure families handled by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// Coupled differential equations.
    Cde,
    /// Boolean networks.
    Bn,
    /// Lagged structural causal models.
    Scm,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Cde => "cde",
            TaskKind::Bn => "bn",
            TaskKind::Scm => "scm",
        })
    }
}

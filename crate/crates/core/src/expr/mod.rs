//! Symbolic structures for the three task families and their measures.

mod alg;
mod boolean;
mod parse;
mod scm;
pub mod ted;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use alg::{AlgExpr, AlgLabel, AlgebraicSystem, CompiledExpr, CompiledSystem, Func};
pub use boolean::{parse_boolean, parse_rule, BoolExpr, BoolLabel, BooleanNetwork};
pub use parse::{parse_algebraic, parse_expression};
pub use scm::{CausalEdge, ScmGraph};
pub use ted::{tree_edit_distance, LabeledTree, Postorder};

use crate::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("expected {expected} equations or rules, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("variable index {index} at offset {pos} is out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, pos: usize },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("no rule given for variable x{0}")]
    MissingRule(usize),
    #[error("more than one rule given for variable x{0}")]
    DuplicateRule(usize),
    #[error("invalid causal edge: {0}")]
    InvalidEdge(String),
}

/// Any candidate structure, tagged by task family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum Structure {
    Cde(AlgebraicSystem),
    Bn(BooleanNetwork),
    Scm(ScmGraph),
}

impl Structure {
    pub fn task(&self) -> TaskKind {
        match self {
            Structure::Cde(_) => TaskKind::Cde,
            Structure::Bn(_) => TaskKind::Bn,
            Structure::Scm(_) => TaskKind::Scm,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Structure::Cde(s) => s.dim(),
            Structure::Bn(n) => n.dim(),
            Structure::Scm(g) => g.dim(),
        }
    }

    pub fn complexity(&self) -> usize {
        match self {
            Structure::Cde(s) => s.complexity(),
            Structure::Bn(n) => n.complexity(),
            Structure::Scm(g) => g.complexity(),
        }
    }

    pub fn canonical_key(&self) -> String {
        match self {
            Structure::Cde(s) => format!("cde:{}", s.canonical_key()),
            Structure::Bn(n) => format!("bn:{}", n.canonical_key()),
            Structure::Scm(g) => format!("scm:{}", g.canonical_key()),
        }
    }

    pub fn free_variables(&self) -> BTreeSet<usize> {
        match self {
            Structure::Cde(s) => s.free_variables(),
            Structure::Bn(n) => n.free_variables(),
            Structure::Scm(g) => g.free_variables(),
        }
    }

    /// Edit distance for expression structures; graphs have none.
    pub fn edit_distance(&self, other: &Structure) -> Option<usize> {
        match (self, other) {
            (Structure::Cde(a), Structure::Cde(b)) => Some(system_edit_distance(a, b)),
            (Structure::Bn(a), Structure::Bn(b)) => Some(network_edit_distance(a, b)),
            _ => None,
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Cde(s) => write!(f, "{s}"),
            Structure::Bn(n) => write!(f, "{n}"),
            Structure::Scm(g) => write!(f, "{g}"),
        }
    }
}

fn pairwise_distance<T: LabeledTree>(a: &[T], b: &[T], size: impl Fn(&T) -> usize) -> usize {
    let common = a.len().min(b.len());
    let shared: usize = (0..common)
        .map(|i| tree_edit_distance(&a[i], &b[i]))
        .sum();
    let extra: usize = a[common..].iter().chain(&b[common..]).map(size).sum();
    shared + extra
}

/// Sum of equation-wise distances, matching equations by index. Unmatched
/// equations cost their full node count.
pub fn system_edit_distance(a: &AlgebraicSystem, b: &AlgebraicSystem) -> usize {
    pairwise_distance(a.equations(), b.equations(), AlgExpr::node_count)
}

pub fn network_edit_distance(a: &BooleanNetwork, b: &BooleanNetwork) -> usize {
    pairwise_distance(a.rules(), b.rules(), BoolExpr::node_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROW0: &str = "-c*x_0*x_1 - c*x_0*x_2 + c*x_0 | c*x_0*x_1 + c*x_0*x_2 - c*x_1 | c*x_1 - c*x_2 - c*x_3 | -c*x_0 + c*x_2 + c*x_3";
    const ROW5: &str =
        "c*x_0*x_1 - c*x_2 | c*x_1*x_2 - c*x_3 | -c*x_0*x_1 + c*x_2 | c*x_0 - c*x_1 + c*x_3";

    #[test]
    fn complexity_of_candidate_rows() {
        assert_eq!(parse_algebraic(ROW0, 4).unwrap().complexity(), 24);
        assert_eq!(parse_algebraic(ROW5, 4).unwrap().complexity(), 17);
        assert_eq!(parse_algebraic("x_0", 1).unwrap().complexity(), 0);
    }

    #[test]
    fn free_variables_examples() {
        assert!(parse_algebraic("c | c", 2).unwrap().free_variables().is_empty());
        assert_eq!(
            parse_algebraic(ROW0, 4).unwrap().free_variables(),
            BTreeSet::from([0, 1, 2, 3])
        );
        assert_eq!(
            parse_algebraic("x_0*x_0", 1).unwrap().free_variables(),
            BTreeSet::from([0])
        );
    }

    #[test]
    fn canonical_key_examples() {
        let a = parse_expression("c*x_0 + c_3*x_1", 2).unwrap();
        let b = parse_expression("c*x_1 + c*x_0", 2).unwrap();
        assert_eq!(a.canonical_key(), b.canonical_key());
        let p = parse_expression("c*x_0", 2).unwrap();
        let q = parse_expression("c*x_1", 2).unwrap();
        assert_ne!(p.canonical_key(), q.canonical_key());
    }

    #[test]
    fn edit_distance_examples() {
        let s = parse_algebraic("sin(x_0)", 1).unwrap();
        let c = parse_algebraic("cos(x_0)", 1).unwrap();
        assert_eq!(system_edit_distance(&s, &c), 1);
        assert_eq!(system_edit_distance(&s, &s), 0);
        let r0 = parse_algebraic(ROW0, 4).unwrap();
        let r5 = parse_algebraic(ROW5, 4).unwrap();
        assert_eq!(system_edit_distance(&r0, &r5), system_edit_distance(&r5, &r0));
        assert!(system_edit_distance(&r0, &r5) > 0);
    }

    #[test]
    fn structure_serde_round_trip() {
        let items = [
            Structure::Cde(parse_algebraic(ROW5, 4).unwrap()),
            Structure::Bn(parse_boolean(&["x1 = x2 AND NOT x1", "x2 = x1"], 2).unwrap()),
            Structure::Scm(ScmGraph::new(2, 1, [(0, 1, 1)]).unwrap()),
        ];
        for s in items {
            let j = serde_json::to_string(&s).unwrap();
            let back: Structure = serde_json::from_str(&j).unwrap();
            assert_eq!(s, back, "{j}");
        }
        let j = serde_json::to_value(Structure::Scm(ScmGraph::new(2, 1, [(0, 1, 1)]).unwrap()))
            .unwrap();
        assert_eq!(j["edges"], serde_json::json!([[0, 1, 1]]));
    }
}

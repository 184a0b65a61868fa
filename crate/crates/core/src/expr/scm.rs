//! Lagged causal graphs: edges `(source, lag) -> target`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ExprError;

/// `source` at time t − `lag` influences `target` at time t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CausalEdge {
    pub source: usize,
    pub lag: usize,
    pub target: usize,
}

impl Serialize for CausalEdge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.source, self.lag, self.target].serialize(s)
    }
}

impl<'de> Deserialize<'de> for CausalEdge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [source, lag, target] = <[usize; 3]>::deserialize(d)?;
        Ok(CausalEdge {
            source,
            lag,
            target,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScmGraph {
    dim: usize,
    max_lag: usize,
    edges: BTreeSet<CausalEdge>,
}

impl ScmGraph {
    /// Duplicate triples are an error rather than silently merged.
    pub fn new(
        dim: usize,
        max_lag: usize,
        edges: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self, ExprError> {
        if dim == 0 || max_lag == 0 {
            return Err(ExprError::InvalidEdge(format!(
                "dimension and max lag must be positive (dim {dim}, max lag {max_lag})"
            )));
        }
        let mut set = BTreeSet::new();
        for (source, lag, target) in edges {
            if source >= dim || target >= dim {
                return Err(ExprError::InvalidEdge(format!(
                    "edge [{source}, {lag}, {target}] references a variable outside 0..{dim}"
                )));
            }
            if lag == 0 || lag > max_lag {
                return Err(ExprError::InvalidEdge(format!(
                    "edge [{source}, {lag}, {target}] has lag outside 1..={max_lag}"
                )));
            }
            if !set.insert(CausalEdge {
                source,
                lag,
                target,
            }) {
                return Err(ExprError::InvalidEdge(format!(
                    "duplicate edge [{source}, {lag}, {target}]"
                )));
            }
        }
        Ok(ScmGraph {
            dim,
            max_lag,
            edges: set,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn edges(&self) -> &BTreeSet<CausalEdge> {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn parents(&self, target: usize) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.target == target)
            .map(|e| (e.source, e.lag))
            .collect()
    }

    pub fn free_variables(&self) -> BTreeSet<usize> {
        self.edges
            .iter()
            .flat_map(|e| [e.source, e.target])
            .collect()
    }

    /// The edge count.
    pub fn complexity(&self) -> usize {
        self.edges.len()
    }

    pub fn canonical_key(&self) -> String {
        self.edges
            .iter()
            .map(|e| format!("{}@{}->{}", e.source, e.lag, e.target))
            .collect::<Vec<_>>()
            .join(";")
    }
}

impl fmt::Display for ScmGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, e) in self.edges.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            write!(f, "[{}, {}, {}]", e.source, e.lag, e.target)?;
        }
        f.write_str("]")
    }
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    dim: usize,
    max_lag: usize,
    edges: Vec<CausalEdge>,
}

impl Serialize for ScmGraph {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        GraphWire {
            dim: self.dim,
            max_lag: self.max_lag,
            edges: self.edges.iter().copied().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScmGraph {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = GraphWire::deserialize(d)?;
        ScmGraph::new(
            w.dim,
            w.max_lag,
            w.edges.into_iter().map(|e| (e.source, e.lag, e.target)),
        )
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ScmGraph::new(2, 1, [(0, 1, 1), (1, 1, 0)]).is_ok());
        assert!(ScmGraph::new(2, 1, [(0, 2, 1)]).is_err());
        assert!(ScmGraph::new(2, 1, [(0, 0, 1)]).is_err());
        assert!(ScmGraph::new(2, 1, [(0, 1, 2)]).is_err());
        assert!(ScmGraph::new(2, 1, [(0, 1, 1), (0, 1, 1)]).is_err());
    }

    #[test]
    fn parents_and_key() {
        let g = ScmGraph::new(3, 2, [(0, 1, 2), (1, 2, 2), (2, 1, 0)]).unwrap();
        assert_eq!(g.parents(2), vec![(0, 1), (1, 2)]);
        assert_eq!(g.canonical_key(), "0@1->2;1@2->2;2@1->0");
        assert_eq!(g.complexity(), 3);
    }
}

//! Scored candidates and the deduplicated history pool.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use symlaw_core::expr::Structure;
use symlaw_core::metrics::ScoreCard;

use crate::verify::Verified;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Llm,
    Gp,
    Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub structure: Structure,
    pub key: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
    pub card: ScoreCard,
    /// Fitted coefficients of an equation system.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    pub epoch: usize,
    pub origin: Origin,
}

impl Candidate {
    pub fn new(structure: Structure, reasoning: Option<String>, verified: Verified, epoch: usize, origin: Origin) -> Self {
        assert_eq!(verified.card.task, structure.task(), "score card task differs from structure");
        Candidate {
            key: structure.canonical_key(),
            structure,
            reasoning,
            card: verified.card,
            coefficients: verified.coefficients,
            epoch,
            origin,
        }
    }
}

/// Orders by blended rank value (descending), then lower complexity, then
/// earlier epoch.
pub fn rank_order(a: &Candidate, b: &Candidate, rubric_weight: f64) -> Ordering {
    b.card
        .rank_value(rubric_weight)
        .total_cmp(&a.card.rank_value(rubric_weight))
        .then(a.card.complexity.cmp(&b.card.complexity))
        .then(a.epoch.cmp(&b.epoch))
}

/// Candidates in insertion order, unique by canonical key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Candidate>", into = "Vec<Candidate>")]
pub struct HistoryPool {
    candidates: Vec<Candidate>,
    keys: HashSet<String>,
}

impl From<Vec<Candidate>> for HistoryPool {
    fn from(v: Vec<Candidate>) -> Self {
        let mut pool = HistoryPool::default();
        for c in v {
            pool.insert(c);
        }
        pool
    }
}

impl From<HistoryPool> for Vec<Candidate> {
    fn from(p: HistoryPool) -> Self {
        p.candidates
    }
}

impl HistoryPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.keys.contains(key)
    }

    /// Adds `c` unless its key is already present.
    pub fn insert(&mut self, c: Candidate) -> bool {
        if !self.keys.insert(c.key.clone()) {
            return false;
        }
        self.candidates.push(c);
        true
    }

    pub fn get(&self, key: &str) -> Option<&Candidate> {
        if !self.contains(key) {
            return None;
        }
        self.candidates.iter().find(|c| c.key == key)
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// The `k` best scored candidates; failed ones never qualify.
    pub fn select_context(&self, k: usize, rubric_weight: f64) -> Vec<&Candidate> {
        let mut ok: Vec<&Candidate> = self.candidates.iter().filter(|c| !c.card.is_failed()).collect();
        ok.sort_by(|a, b| rank_order(a, b, rubric_weight));
        ok.truncate(k);
        ok
    }

    pub fn best(&self, rubric_weight: f64) -> Option<&Candidate> {
        self.select_context(1, rubric_weight).into_iter().next()
    }

    /// Highest objective over scored candidates.
    pub fn best_objective(&self) -> Option<f64> {
        self.candidates.iter().filter_map(|c| c.card.objective).reduce(f64::max)
    }
}

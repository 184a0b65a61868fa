use serde::{Deserialize, Serialize};

use super::{BnScores, ScmScores};
use crate::TaskKind;

/// Four rubric criteria, each scored 1 to 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RubricScores {
    pub context_alignment: u8,
    pub scientific_plausibility: u8,
    pub conciseness_clarity: u8,
    pub logical_coherence: u8,
}

impl RubricScores {
    /// `None` unless every score lies in `1..=5`.
    pub fn new(
        context_alignment: u8,
        scientific_plausibility: u8,
        conciseness_clarity: u8,
        logical_coherence: u8,
    ) -> Option<Self> {
        let s = RubricScores {
            context_alignment,
            scientific_plausibility,
            conciseness_clarity,
            logical_coherence,
        };
        s.as_array().iter().all(|v| (1..=5).contains(v)).then_some(s)
    }

    pub fn as_array(&self) -> [u8; 4] {
        [
            self.context_alignment,
            self.scientific_plausibility,
            self.conciseness_clarity,
            self.logical_coherence,
        ]
    }

    pub fn mean(&self) -> f64 {
        self.as_array().iter().map(|&v| f64::from(v)).sum::<f64>() / 4.0
    }
}

/// Which direction of the CI-score counts as better.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiOrientation {
    #[default]
    LowerIsBetter,
    HigherIsBetter,
}

impl CiOrientation {
    /// Maps a CI-score in `[0, 1]` to a higher-is-better objective.
    pub fn objective(self, ci: f64) -> f64 {
        match self {
            CiOrientation::LowerIsBetter => 1.0 - ci,
            CiOrientation::HigherIsBetter => ci,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDetail {
    Bn(BnScores),
    Scm {
        degenerate_edges: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        edges: Option<ScmScores>,
    },
}

/// Verification outcome for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub task: TaskKind,
    /// R², macro-F1 or CI-score; absent when verification failed.
    pub primary: Option<f64>,
    /// Higher-is-better form of `primary`, used for ranking and stopping.
    pub objective: Option<f64>,
    pub complexity: usize,
    /// Edit distance (or SHD for graphs) to the ground truth when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proximity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rubric: Option<RubricScores>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<ScoreDetail>,
}

impl ScoreCard {
    pub fn scored(task: TaskKind, primary: f64, objective: f64, complexity: usize) -> Self {
        assert!(primary.is_finite() && objective.is_finite());
        ScoreCard {
            task,
            primary: Some(primary),
            objective: Some(objective),
            complexity,
            proximity: None,
            rubric: None,
            failure: None,
            detail: None,
        }
    }

    pub fn failed(task: TaskKind, complexity: usize, reason: impl Into<String>) -> Self {
        ScoreCard {
            task,
            primary: None,
            objective: None,
            complexity,
            proximity: None,
            rubric: None,
            failure: Some(reason.into()),
            detail: None,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.objective.is_none()
    }

    /// Ranking key: the objective, optionally blended with the rubric mean
    /// rescaled to `[0, 1]`. Failed cards rank below everything.
    pub fn rank_value(&self, rubric_weight: f64) -> f64 {
        match self.objective {
            None => f64::NEG_INFINITY,
            Some(o) => {
                let bonus = match (rubric_weight, &self.rubric) {
                    (w, Some(r)) if w != 0.0 => w * (r.mean() - 1.0) / 4.0,
                    _ => 0.0,
                };
                o + bonus
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rubric_bounds() {
        assert!(RubricScores::new(5, 4, 4, 4).is_some());
        assert!(RubricScores::new(0, 4, 4, 4).is_none());
        assert!(RubricScores::new(5, 6, 4, 4).is_none());
        assert_eq!(RubricScores::new(5, 4, 4, 4).unwrap().mean(), 4.25);
    }

    #[test]
    fn failed_cards_rank_last() {
        let ok = ScoreCard::scored(TaskKind::Cde, -3.0, -3.0, 4);
        let bad = ScoreCard::failed(TaskKind::Cde, 2, "blow-up");
        assert!(ok.rank_value(0.0) > bad.rank_value(0.0));
        assert!(bad.is_failed());
        let j = serde_json::to_string(&bad).unwrap();
        assert_eq!(serde_json::from_str::<ScoreCard>(&j).unwrap(), bad);
    }

    #[test]
    fn orientation() {
        assert_eq!(CiOrientation::LowerIsBetter.objective(0.25), 0.75);
        assert_eq!(CiOrientation::HigherIsBetter.objective(0.25), 0.25);
    }
}

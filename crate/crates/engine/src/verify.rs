//! Quantitative verification of candidates against sample data.

use serde::{Deserialize, Serialize};
use symlaw_core::dynamics::{
    fit_to_target, integrate_ode, simulate_boolean, BoolTrajectory, DerivativeTarget, FitConfig, FittedModel,
    IntegratorConfig, Trajectory,
};
use symlaw_core::expr::{AlgebraicSystem, BooleanNetwork, ScmGraph, Structure};
use symlaw_core::metrics::{
    bn_transition_scores, ci_score, r_squared, scm_edge_metrics, CiOrientation, ScoreCard, ScoreDetail,
};

use crate::sample::{Sample, SampleData};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub fit: FitConfig,
    pub integrator: IntegratorConfig,
    pub ci_orientation: CiOrientation,
}

/// A score card plus the fitted coefficients of an equation system.
#[derive(Debug, Clone, PartialEq)]
pub struct Verified {
    pub card: ScoreCard,
    pub coefficients: Option<Vec<f64>>,
}

impl Verified {
    fn failed(s: &Structure, reason: impl Into<String>) -> Self {
        Verified {
            card: ScoreCard::failed(s.task(), s.complexity(), reason),
            coefficients: None,
        }
    }
}

fn proximity(candidate: &Structure, truth: Option<&Structure>) -> Option<usize> {
    match (candidate, truth?) {
        (Structure::Scm(a), Structure::Scm(b)) => Some(symlaw_core::metrics::structural_hamming_distance(a, b)),
        (a, b) => a.edit_distance(b),
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Integrates `model` from the first state of each trajectory and averages R².
fn trajectory_r2(model: &FittedModel, trajs: &[Trajectory], cfg: &IntegratorConfig) -> Result<f64, String> {
    let mut scores = Vec::with_capacity(trajs.len());
    for t in trajs {
        let pred = integrate_ode(model, t.initial_state(), t.times(), cfg).map_err(|e| format!("integration: {e}"))?;
        scores.push(r_squared(t, &pred).map_err(|e| format!("R²: {e}"))?);
    }
    Ok(mean(&scores))
}

fn boolean_card(net: &BooleanNetwork, trajs: &[BoolTrajectory], complexity: usize) -> Result<ScoreCard, String> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for t in trajs {
        let sim = simulate_boolean(net, &t.states[..1], t.len() - 1).map_err(|e| e.to_string())?;
        truth.extend_from_slice(&t.states[1..]);
        pred.extend_from_slice(&sim[0].states[1..]);
    }
    let s = bn_transition_scores(&truth, &pred).map_err(|e| e.to_string())?;
    let mut card = ScoreCard::scored(symlaw_core::TaskKind::Bn, s.f1, s.f1, complexity);
    card.detail = Some(ScoreDetail::Bn(s));
    Ok(card)
}

fn causal_card(
    g: &ScmGraph,
    trajs: &[Trajectory],
    truth: Option<&Structure>,
    cfg: &VerifyConfig,
) -> Result<ScoreCard, String> {
    let mut scores = Vec::with_capacity(trajs.len());
    let mut degenerate = 0;
    for t in trajs {
        let ci = ci_score(g, t).map_err(|e| format!("CI-score: {e}"))?;
        degenerate += ci.degenerate_edges;
        scores.push(ci.score);
    }
    let ci = mean(&scores);
    let mut card = ScoreCard::scored(
        symlaw_core::TaskKind::Scm,
        ci,
        cfg.ci_orientation.objective(ci),
        g.complexity(),
    );
    let edges = match truth {
        Some(Structure::Scm(t)) => scm_edge_metrics(g, t).ok(),
        _ => None,
    };
    card.detail = Some(ScoreDetail::Scm {
        degenerate_edges: degenerate,
        edges,
    });
    Ok(card)
}

fn fit_cde(sys: &AlgebraicSystem, train: &[Trajectory], cfg: &VerifyConfig) -> Result<FittedModel, String> {
    let target = DerivativeTarget::from_trajectories(train).map_err(|e| format!("derivatives: {e}"))?;
    fit_to_target(sys, &target, &cfg.fit).map_err(|e| format!("fit: {e}"))
}

/// Scores `structure` on the training data of `sample`. Equation systems are
/// fitted in derivative space, then integrated from every training initial
/// state.
pub fn verify(structure: &Structure, sample: &Sample, cfg: &VerifyConfig) -> Verified {
    if structure.task() != sample.task || structure.dim() != sample.dim {
        return Verified::failed(
            structure,
            format!(
                "candidate is a {}-dimensional {} structure, sample is {}-dimensional {}",
                structure.dim(),
                structure.task(),
                sample.dim,
                sample.task
            ),
        );
    }
    let complexity = structure.complexity();
    let scored = |r: Result<ScoreCard, String>| match r {
        Ok(card) => Verified {
            card,
            coefficients: None,
        },
        Err(e) => Verified::failed(structure, e),
    };
    let v = match (structure, &sample.data) {
        (Structure::Cde(sys), SampleData::Continuous { train, .. }) => match fit_cde(sys, train, cfg) {
            Err(e) => Verified::failed(structure, e),
            Ok(model) => Verified {
                card: match trajectory_r2(&model, train, &cfg.integrator) {
                    Ok(r2) => ScoreCard::scored(sample.task, r2, r2, complexity),
                    Err(e) => ScoreCard::failed(sample.task, complexity, e),
                },
                coefficients: Some(model.coefficients),
            },
        },
        (Structure::Bn(net), SampleData::Binary { train, .. }) => scored(boolean_card(net, train, complexity)),
        (Structure::Scm(g), SampleData::Continuous { train, .. }) => {
            scored(causal_card(g, train, sample.truth.as_ref(), cfg))
        }
        _ => Verified::failed(structure, "sample data does not match its task"),
    };
    v.with_proximity(structure, sample)
}

impl Verified {
    fn with_proximity(mut self, s: &Structure, sample: &Sample) -> Self {
        self.card.proximity = proximity(s, sample.truth.as_ref());
        self
    }
}

/// Scores an already verified candidate on the out-of-distribution data of
/// `sample` without refitting anything. `None` when the sample has no such
/// data.
pub fn evaluate_ood(
    structure: &Structure,
    coefficients: Option<&[f64]>,
    sample: &Sample,
    cfg: &VerifyConfig,
) -> Option<ScoreCard> {
    if !sample.has_ood() {
        return None;
    }
    let complexity = structure.complexity();
    let failed = |reason: String| ScoreCard::failed(sample.task, complexity, reason);
    if structure.task() != sample.task || structure.dim() != sample.dim {
        return Some(failed("candidate does not match the sample".into()));
    }
    let card = match (structure, &sample.data) {
        (Structure::Cde(sys), SampleData::Continuous { ood, .. }) => match coefficients {
            Some(c) if c.len() == sys.num_coefficients() => {
                let model = FittedModel::with_coefficients(sys.clone(), c.to_vec());
                match trajectory_r2(&model, ood, &cfg.integrator) {
                    Ok(r2) => ScoreCard::scored(sample.task, r2, r2, complexity),
                    Err(e) => failed(e),
                }
            }
            _ => failed("no fitted coefficients".into()),
        },
        (Structure::Bn(net), SampleData::Binary { ood, .. }) => {
            boolean_card(net, ood, complexity).unwrap_or_else(failed)
        }
        (Structure::Scm(g), SampleData::Continuous { ood, .. }) => {
            causal_card(g, ood, sample.truth.as_ref(), cfg).unwrap_or_else(failed)
        }
        _ => failed("sample data does not match its task".into()),
    };
    Some(Verified { card, coefficients: None }.with_proximity(structure, sample).card)
}

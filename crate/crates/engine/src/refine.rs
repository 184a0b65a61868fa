//! The iterative refinement loop for one sample.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use symlaw_core::expr::{AlgebraicSystem, BooleanNetwork, Structure};
use symlaw_core::gp::{evolve, BnFitness, CdeFitness, Genome, GpConfig, JudgeFn, Seed};
use symlaw_core::TaskKind;
use symlaw_llm::judge::{judge, JudgeInput};
use symlaw_llm::prompt::{build_prompt, HistoryEntry, Message, PromptSpec, Strategy, TaskContext};
use symlaw_llm::reply::{display_expression, parse_candidate};
use symlaw_llm::{ChatModel, LlmError};

use crate::pool::{Candidate, Origin};
use crate::sample::{Sample, SampleData};
use crate::verify::{verify, VerifyConfig};
use crate::{ConfigError, EngineError, HistoryPool};

/// Where each epoch's candidates come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One model proposal per epoch.
    #[default]
    Llm,
    /// Genetic programming seeded with the pool.
    Gp,
    /// A model proposal, then GP seeded with the pool including it.
    HybridSeededGp,
    /// GP whose selection includes rubric scores from the model.
    HybridGpJudged,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Llm => "llm",
            Mode::Gp => "gp",
            Mode::HybridSeededGp => "hybrid_seeded_gp",
            Mode::HybridGpJudged => "hybrid_gp_judged",
        }
    }

    pub fn proposes(self) -> bool {
        matches!(self, Mode::Llm | Mode::HybridSeededGp)
    }

    pub fn evolves(self) -> bool {
        self != Mode::Llm
    }
}

impl FromStr for Mode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Llm, Mode::Gp, Mode::HybridSeededGp, Mode::HybridGpJudged]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                ConfigError::new(
                    "loop.mode",
                    format!("unknown mode `{s}`; expected llm, gp, hybrid_seeded_gp or hybrid_gp_judged"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_epochs: usize,
    /// Model requests allowed per epoch for one proposal, and again for one
    /// rubric score.
    pub max_retries: u32,
    /// Candidates shown as context.
    pub top_k: usize,
    /// Stop once the best objective reaches this value. Unset means R² 0.999
    /// for equations, F1 1 for Boolean networks and no early stop for graphs.
    pub tolerance: Option<f64>,
    pub mode: Mode,
    pub strategy: Strategy,
    /// Score every inserted candidate with the rubric.
    pub judge: bool,
    /// Weight of the rescaled rubric mean when ranking context.
    pub rubric_weight: f64,
    /// Maximum number of data rows in a prompt.
    pub series_budget: usize,
    /// GP results inserted into the pool per epoch.
    pub gp_inserts: usize,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_epochs: 100,
            max_retries: 20,
            top_k: 5,
            tolerance: None,
            mode: Mode::Llm,
            strategy: Strategy::Base,
            judge: false,
            rubric_weight: 0.0,
            series_budget: 200,
            gp_inserts: 5,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("loop.max_epochs", self.max_epochs),
            ("loop.max_retries", self.max_retries as usize),
            ("loop.series_budget", self.series_budget),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(ConfigError::new(field, "must be positive"));
            }
        }
        if self.series_budget < 2 {
            return Err(ConfigError::new("loop.series_budget", "must be at least 2"));
        }
        if let Some(t) = self.tolerance {
            if !t.is_finite() || t > 1.0 {
                return Err(ConfigError::new("loop.tolerance", "must be a finite score no greater than 1"));
            }
        }
        if !self.rubric_weight.is_finite() || self.rubric_weight < 0.0 {
            return Err(ConfigError::new("loop.rubric_weight", "must be non-negative"));
        }
        if self.mode.evolves() && self.gp_inserts == 0 {
            return Err(ConfigError::new("loop.gp_inserts", "must be positive when GP runs"));
        }
        Ok(())
    }

    pub fn target(&self, task: TaskKind) -> Option<f64> {
        self.tolerance.or(match task {
            TaskKind::Cde => Some(0.999),
            TaskKind::Bn => Some(1.0),
            TaskKind::Scm => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSummary {
    /// Generations evolved after the initial population.
    pub generations: usize,
    pub evaluations: usize,
    /// Best verified objective among the GP results considered for insertion.
    pub best_objective: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Proposal requests sent.
    pub attempts: u32,
    pub judge_calls: u32,
    /// Error codes of replies that could not be parsed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parse_errors: Vec<String>,
    /// Canonical key of the accepted proposal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<String>,
    pub inserted: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<GpSummary>,
}

/// Everything needed to continue a run; written after every epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopState {
    pub sample_id: String,
    /// Completed epochs.
    pub epoch: usize,
    pub pool: HistoryPool,
    /// Best objective after each epoch.
    pub curve: Vec<Option<f64>>,
    pub records: Vec<EpochRecord>,
    pub proposal_calls: u64,
    pub judge_calls: u64,
    /// The target was reached.
    pub stopped: bool,
}

impl LoopState {
    pub fn new(sample_id: impl Into<String>) -> Self {
        LoopState {
            sample_id: sample_id.into(),
            epoch: 0,
            pool: HistoryPool::new(),
            curve: Vec::new(),
            records: Vec::new(),
            proposal_calls: 0,
            judge_calls: 0,
            stopped: false,
        }
    }

    pub fn failed_epochs(&self) -> usize {
        self.records.iter().filter(|r| r.failure.is_some()).count()
    }
}

/// Drives the loop for one sample.
pub struct Refiner<'a> {
    sample: &'a Sample,
    cfg: &'a LoopConfig,
    gp: &'a GpConfig,
    verify: &'a VerifyConfig,
    model: Option<&'a dyn ChatModel>,
    temperature: f64,
    judge_temperature: f64,
    series: String,
    context: Option<TaskContext>,
}

impl<'a> Refiner<'a> {
    pub fn new(
        sample: &'a Sample,
        cfg: &'a LoopConfig,
        gp: &'a GpConfig,
        verify: &'a VerifyConfig,
        model: Option<&'a dyn ChatModel>,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let mode = cfg.mode;
        if mode.evolves() {
            gp.validate().map_err(|e| ConfigError::new("gp", e.to_string()))?;
            if sample.task == TaskKind::Scm {
                return Err(ConfigError::new("loop.mode", format!("`{}` cannot search causal graphs", mode.name())).into());
            }
        }
        if mode == Mode::HybridGpJudged && gp.judge_weight <= 0.0 {
            return Err(ConfigError::new("gp.judge_weight", "must be positive in hybrid_gp_judged mode").into());
        }
        let needs_model = mode.proposes() || mode == Mode::HybridGpJudged || cfg.judge;
        if needs_model && model.is_none() {
            return Err(ConfigError::new("model", format!("mode `{}` needs a chat model", mode.name())).into());
        }
        let r = Refiner {
            sample,
            cfg,
            gp,
            verify,
            model,
            temperature: 0.7,
            judge_temperature: 0.0,
            series: sample.series_text(cfg.series_budget),
            context: sample.context(),
        };
        if mode.proposes() {
            r.prompt(&HistoryPool::new())
                .map_err(|e| ConfigError::new("loop.strategy", format!("sample `{}`: {e}", sample.id)))?;
        }
        Ok(r)
    }

    pub fn with_temperatures(mut self, proposal: f64, judge: f64) -> Self {
        self.temperature = proposal;
        self.judge_temperature = judge;
        self
    }

    fn prompt(&self, pool: &HistoryPool) -> Result<Vec<Message>, symlaw_llm::PromptError> {
        let s = self.sample;
        let strategy = self.cfg.strategy;
        let mut spec = PromptSpec::new(s.task, strategy, s.dim, self.series.clone());
        if strategy.uses_history() {
            spec = spec.with_history(
                pool.select_context(self.cfg.top_k, self.cfg.rubric_weight)
                    .into_iter()
                    .map(|c| HistoryEntry {
                        expression: display_expression(&c.structure),
                        score: c.card.objective,
                        complexity: c.card.complexity,
                        reasoning: c.reasoning.clone(),
                    })
                    .collect(),
            );
        }
        if strategy.uses_context() {
            if let Some(ctx) = &self.context {
                spec = spec.with_context(ctx.clone());
            }
        }
        if let Some(l) = s.max_lag {
            spec = spec.with_max_lag(l);
        }
        build_prompt(&spec)
    }

    /// Verifies `structures` and adds them to the pool at epoch 0.
    pub fn seed_pool(&self, state: &mut LoopState, structures: impl IntoIterator<Item = Structure>) {
        for s in structures {
            if state.pool.contains(&s.canonical_key()) {
                continue;
            }
            let v = verify(&s, self.sample, self.verify);
            state.pool.insert(Candidate::new(s, None, v, 0, Origin::Seed));
        }
    }

    /// Runs epochs until the target is met or the budget is spent, calling
    /// `checkpoint` after each one.
    pub fn run(
        &self,
        mut state: LoopState,
        checkpoint: &mut dyn FnMut(&LoopState) -> Result<(), EngineError>,
    ) -> Result<LoopState, EngineError> {
        while !state.stopped && state.epoch < self.cfg.max_epochs {
            self.run_epoch(&mut state)?;
            checkpoint(&state)?;
        }
        assert!(
            state.curve.windows(2).all(|w| w[0] <= w[1]),
            "best-so-far curve decreased: {:?}",
            state.curve
        );
        let budget = state.epoch as u64 * (u64::from(self.cfg.max_retries) + 1) + state.judge_calls;
        assert!(
            state.proposal_calls + state.judge_calls <= budget,
            "model calls {} exceed the budget {budget}",
            state.proposal_calls + state.judge_calls
        );
        Ok(state)
    }

    pub fn run_fresh(&self) -> Result<LoopState, EngineError> {
        self.run(LoopState::new(&self.sample.id), &mut |_| Ok(()))
    }

    /// One epoch: propose and/or evolve, verify, insert, record.
    pub fn run_epoch(&self, state: &mut LoopState) -> Result<(), EngineError> {
        let epoch = state.epoch + 1;
        let mut rec = EpochRecord {
            epoch,
            ..EpochRecord::default()
        };
        if self.cfg.mode.proposes() {
            self.propose(state, &mut rec)?;
        }
        if self.cfg.mode.evolves() {
            match &self.sample.data {
                SampleData::Continuous { train, .. } => {
                    let fit = CdeFitness::new(train, self.gp.fitness_rows, self.gp.fit.clone())?;
                    let seeds = self.seeds(state, |s| match s {
                        Structure::Cde(sys) => Some(sys.clone()),
                        _ => None,
                    });
                    self.evolve_into::<AlgebraicSystem, _>(state, &mut rec, &seeds, |g| fit.evaluate(g))?;
                }
                SampleData::Binary { train, .. } => {
                    let fit = BnFitness::new(train.clone())?;
                    let seeds = self.seeds(state, |s| match s {
                        Structure::Bn(n) => Some(n.clone()),
                        _ => None,
                    });
                    self.evolve_into::<BooleanNetwork, _>(state, &mut rec, &seeds, |g| fit.evaluate(g))?;
                }
            }
        }
        state.epoch = epoch;
        let best = state.pool.best_objective();
        state.curve.push(best);
        if let (Some(target), Some(b)) = (self.cfg.target(self.sample.task), best) {
            if b >= target {
                state.stopped = true;
            }
        }
        log::info!(
            "{} epoch {epoch}: best {:?}, {} inserted{}",
            self.sample.id,
            best,
            rec.inserted,
            rec.failure.as_deref().map(|f| format!(", failed: {f}")).unwrap_or_default()
        );
        state.records.push(rec);
        Ok(())
    }

    fn propose(&self, state: &mut LoopState, rec: &mut EpochRecord) -> Result<(), EngineError> {
        let model = self.model.expect("checked in new");
        let messages = self.prompt(&state.pool)?;
        let cap = self.cfg.max_retries;
        let shape = self.sample.shape();
        let mut used = 0u32;
        let parsed = loop {
            if used >= cap {
                rec.failure = Some(format!("no parsable candidate within {cap} attempts"));
                break None;
            }
            match model.complete(&messages, self.temperature, cap - used) {
                Ok(c) => {
                    used += c.attempts;
                    match parse_candidate(&c.text, shape) {
                        Ok(p) => break Some(p),
                        Err(e) => {
                            log::debug!("{}: unusable reply ({e})", self.sample.id);
                            rec.parse_errors.push(e.code().to_string());
                        }
                    }
                }
                Err(LlmError::Exhausted { attempts, last }) => {
                    used += attempts;
                    rec.failure = Some(last);
                    break None;
                }
                Err(e) => {
                    rec.attempts = used;
                    state.proposal_calls += u64::from(used);
                    return Err(e.into());
                }
            }
        };
        rec.attempts = used;
        state.proposal_calls += u64::from(used);
        let Some(p) = parsed else { return Ok(()) };
        let key = p.structure.canonical_key();
        rec.accepted = Some(key.clone());
        if state.pool.contains(&key) {
            return Ok(());
        }
        let v = verify(&p.structure, self.sample, self.verify);
        let cand = Candidate::new(p.structure, p.reasoning, v, rec.epoch, Origin::Llm);
        self.insert(state, rec, cand)
    }

    fn insert(&self, state: &mut LoopState, rec: &mut EpochRecord, mut cand: Candidate) -> Result<(), EngineError> {
        if self.cfg.judge {
            let input = JudgeInput {
                candidate: &cand.structure,
                reasoning: cand.reasoning.as_deref(),
                context: self.context.as_ref(),
                series: &self.series,
            };
            let model = self.model.expect("checked in new");
            let (verdict, used) = judge(model, &input, self.judge_temperature, self.cfg.max_retries)?;
            state.judge_calls += u64::from(used);
            rec.judge_calls += used;
            cand.card.rubric = verdict.map(|v| v.scores);
        }
        if state.pool.insert(cand) {
            rec.inserted += 1;
        }
        Ok(())
    }

    fn seeds<G>(&self, state: &LoopState, convert: impl Fn(&Structure) -> Option<G>) -> Vec<Seed<G>> {
        state
            .pool
            .select_context(self.cfg.top_k, self.cfg.rubric_weight)
            .into_iter()
            .filter_map(|c| {
                convert(&c.structure).map(|genome| Seed {
                    genome,
                    score: c.card.objective,
                })
            })
            .collect()
    }

    fn evolve_into<G, F>(
        &self,
        state: &mut LoopState,
        rec: &mut EpochRecord,
        seeds: &[Seed<G>],
        fitness: F,
    ) -> Result<(), EngineError>
    where
        G: Genome,
        F: Fn(&G) -> Option<f64> + Sync,
    {
        let mut cfg = self.gp.clone();
        cfg.seed = self.gp.seed.wrapping_add(rec.epoch as u64 - 1);
        let judged = self.cfg.mode == Mode::HybridGpJudged;
        if !judged {
            cfg.judge_weight = 0.0;
        }
        let mut judge_used = 0u32;
        let mut fatal: Option<LlmError> = None;
        let outcome = {
            let mut judge_fn = |g: &G| -> Option<f64> {
                if fatal.is_some() {
                    return None;
                }
                let s = g.to_structure();
                let input = JudgeInput {
                    candidate: &s,
                    reasoning: None,
                    context: self.context.as_ref(),
                    series: &self.series,
                };
                match judge(self.model?, &input, self.judge_temperature, self.cfg.max_retries) {
                    Ok((v, used)) => {
                        judge_used += used;
                        v.map(|v| (v.scores.mean() - 1.0) / 4.0)
                    }
                    Err(e) => {
                        fatal = Some(e);
                        None
                    }
                }
            };
            let judge_ref: Option<&mut JudgeFn<'_, G>> = if judged { Some(&mut judge_fn) } else { None };
            evolve(&cfg, self.sample.dim, seeds, fitness, judge_ref)?
        };
        state.judge_calls += u64::from(judge_used);
        rec.judge_calls += judge_used;
        if let Some(e) = fatal {
            return Err(e.into());
        }
        let mut best: Option<f64> = None;
        for ind in outcome.top.iter().filter(|i| i.fitness.is_some()).take(self.cfg.gp_inserts) {
            let s = ind.genome.to_structure();
            let key = s.canonical_key();
            let objective = match state.pool.get(&key) {
                Some(existing) => existing.card.objective,
                None => {
                    let v = verify(&s, self.sample, self.verify);
                    let obj = v.card.objective;
                    self.insert(state, rec, Candidate::new(s, None, v, rec.epoch, Origin::Gp))?;
                    obj
                }
            };
            best = match (best, objective) {
                (Some(a), Some(b)) => Some(a.max(b)),
                (a, b) => a.or(b),
            };
        }
        rec.gp = Some(GpSummary {
            generations: outcome.history.len().saturating_sub(1),
            evaluations: outcome.history.last().map_or(0, |h| h.evaluations),
            best_objective: best,
        });
        Ok(())
    }
}

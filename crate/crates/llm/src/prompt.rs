//! Prompt templates for the four proposal strategies.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use symlaw_core::dynamics::{BoolTrajectory, Trajectory};
use symlaw_core::TaskKind;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("strategy `{0}` requires domain and variable context")]
    MissingContext(Strategy),
    #[error("{found} variable descriptions given for dimension {dim}")]
    VariableCount { dim: usize, found: usize },
    #[error("causal prompts need a positive maximum lag")]
    MissingLag,
    #[error("unknown strategy `{0}`; expected naive, base, context or cot")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Data only.
    Naive,
    /// Data plus the selected history.
    #[default]
    Base,
    /// History plus domain and variable descriptions.
    Context,
    /// Context plus step-by-step reasoning before the answer.
    Cot,
}

impl Strategy {
    pub fn uses_history(self) -> bool {
        self != Strategy::Naive
    }

    pub fn uses_context(self) -> bool {
        matches!(self, Strategy::Context | Strategy::Cot)
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Naive => "naive",
            Strategy::Base => "base",
            Strategy::Context => "context",
            Strategy::Cot => "cot",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "naive" => Ok(Strategy::Naive),
            "base" => Ok(Strategy::Base),
            "context" => Ok(Strategy::Context),
            "cot" => Ok(Strategy::Cot),
            _ => Err(PromptError::UnknownStrategy(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// Domain description and one description per variable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskContext {
    pub domain: String,
    pub variables: Vec<String>,
}

/// A previously scored candidate shown to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub expression: String,
    pub score: Option<f64>,
    pub complexity: usize,
    pub reasoning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub task: TaskKind,
    pub strategy: Strategy,
    pub dim: usize,
    /// Largest admissible lag; causal tasks only.
    pub max_lag: Option<usize>,
    pub series: String,
    pub context: Option<TaskContext>,
    pub history: Vec<HistoryEntry>,
}

impl PromptSpec {
    pub fn new(task: TaskKind, strategy: Strategy, dim: usize, series: impl Into<String>) -> Self {
        PromptSpec {
            task,
            strategy,
            dim,
            max_lag: None,
            series: series.into(),
            context: None,
            history: Vec::new(),
        }
    }

    pub fn with_context(mut self, context: TaskContext) -> Self {
        self.context = Some(context);
        self
    }

    pub fn with_history(mut self, history: Vec<HistoryEntry>) -> Self {
        self.history = history;
        self
    }

    pub fn with_max_lag(mut self, max_lag: usize) -> Self {
        self.max_lag = Some(max_lag);
        self
    }

    fn validate(&self) -> Result<(), PromptError> {
        if self.strategy.uses_context() {
            let ctx = self
                .context
                .as_ref()
                .ok_or(PromptError::MissingContext(self.strategy))?;
            if ctx.variables.len() != self.dim {
                return Err(PromptError::VariableCount {
                    dim: self.dim,
                    found: ctx.variables.len(),
                });
            }
        }
        if self.task == TaskKind::Scm && self.max_lag.unwrap_or(0) == 0 {
            return Err(PromptError::MissingLag);
        }
        Ok(())
    }
}

const SYSTEM: &str = "You are a scientist who infers governing structures from observed time series. \
You answer with a single JSON object in the exact format requested.";

fn variable_name(task: TaskKind, i: usize) -> String {
    match task {
        TaskKind::Bn => format!("x{}", i + 1),
        _ => format!("x_{i}"),
    }
}

fn task_statement(spec: &PromptSpec) -> String {
    let d = spec.dim;
    match spec.task {
        TaskKind::Cde => format!(
            "Propose a system of {d} coupled ordinary differential equations dx_i/dt = f_i(x_0, ..., x_{}) \
that generates the time series below.",
            d - 1
        ),
        TaskKind::Bn => format!(
            "Propose a synchronous Boolean network over {d} nodes whose update rules reproduce the \
binary state transitions below."
        ),
        TaskKind::Scm => format!(
            "Propose the lagged causal graph among {d} variables that generated the time series below, \
using lags from 1 to {}.",
            spec.max_lag.unwrap_or(1)
        ),
    }
}

fn output_format(spec: &PromptSpec) -> String {
    let d = spec.dim;
    match spec.task {
        TaskKind::Cde => {
            let eqs: Vec<String> = (0..d).map(|i| format!("<f_{i}>")).collect();
            format!(
                "Write each right-hand side over the variables x_0 to x_{} with `c` for every unknown \
constant, the operators + - * / ** and the functions sin, cos, tan, exp, log, sqrt, abs. \
Separate the equations with `|`, in variable order. Finish with exactly one object:\n\
{{\"eq\": \"{}\", \"dim\": {d}}}",
                d - 1,
                eqs.join(" | ")
            )
        }
        TaskKind::Bn => {
            let rules: Vec<String> = (1..=d).map(|i| format!("\"x{i} = <rule>\"")).collect();
            format!(
                "Write one rule per node using the variables x1 to x{d} and the operators AND, OR, NOT \
with parentheses. Finish with exactly one object:\n{{\"rules\": [{}]}}",
                rules.join(", ")
            )
        }
        TaskKind::Scm => format!(
            "List every causal edge as [source, lag, target] with zero-based variable indices \
below {d}. Finish with exactly one object:\n{{\"edges\": [[0, 1, 1], ...]}}"
        ),
    }
}

fn context_section(spec: &PromptSpec, ctx: &TaskContext) -> String {
    let mut s = format!("## Context\nDomain: {}\nVariables:\n", ctx.domain);
    for (i, v) in ctx.variables.iter().enumerate() {
        let _ = writeln!(s, "- {}: {v}", variable_name(spec.task, i));
    }
    s
}

fn history_section(spec: &PromptSpec) -> String {
    let mut s = String::from("## Previous candidates\n");
    if spec.history.is_empty() {
        s.push_str("None yet.\n");
        return s;
    }
    s.push_str("Earlier proposals with their verification scores (higher is better). Improve on them.\n");
    for (k, h) in spec.history.iter().enumerate() {
        let score = h.score.map_or("failed".to_string(), |v| format!("{v:.5}"));
        let _ = writeln!(
            s,
            "{}. {} (score: {score}, complexity: {})",
            k + 1,
            h.expression,
            h.complexity
        );
        if spec.strategy == Strategy::Cot {
            if let Some(r) = &h.reasoning {
                let _ = writeln!(s, "   reasoning: {}", r.replace('\n', " "));
            }
        }
    }
    s
}

/// Renders the system and user messages for `spec`.
pub fn build_prompt(spec: &PromptSpec) -> Result<Vec<Message>, PromptError> {
    spec.validate()?;
    let mut user = format!("{}\n\n## Time series\n{}\n", task_statement(spec), spec.series.trim_end());
    if spec.strategy.uses_context() {
        let ctx = spec.context.as_ref().expect("validated");
        user.push('\n');
        user.push_str(&context_section(spec, ctx));
    }
    if spec.strategy.uses_history() {
        user.push('\n');
        user.push_str(&history_section(spec));
    }
    user.push_str("\n## Answer format\n");
    user.push_str(&output_format(spec));
    user.push('\n');
    if spec.strategy == Strategy::Cot {
        user.push_str(
            "\n## Reasoning\nThink step by step: relate the variable meanings to the observed trends, \
check your hypothesis against the data and the previous candidates, then revise it. \
Write your reasoning first and put the final answer object last.\n",
        );
    } else {
        user.push_str("\nReply with the answer object only.\n");
    }
    Ok(vec![Message::system(SYSTEM), Message::user(user)])
}

/// Rounds to four significant digits and prints without exponent.
pub fn format_sig4(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let rounded: f64 = format!("{v:.3e}").parse().expect("formatted float parses");
    rounded.to_string()
}

/// Indices of `budget` rows spread uniformly over `n`, first and last kept.
pub fn subsample_indices(n: usize, budget: usize) -> Vec<usize> {
    let budget = budget.max(2);
    if n <= budget {
        return (0..n).collect();
    }
    (0..budget)
        .map(|k| (k as f64 * (n - 1) as f64 / (budget - 1) as f64).round() as usize)
        .collect()
}

/// Text table of a trajectory with at most `budget` rows (at least two are
/// kept when available).
pub fn serialize_timeseries(traj: &Trajectory, budget: usize) -> String {
    let names: Vec<String> = (0..traj.dim()).map(|i| format!("x_{i}")).collect();
    let mut s = format!("t, {}\n", names.join(", "));
    for i in subsample_indices(traj.len(), budget) {
        let row: Vec<String> = std::iter::once(traj.times()[i])
            .chain(traj.values()[i].iter().copied())
            .map(format_sig4)
            .collect();
        s.push_str(&row.join(", "));
        s.push('\n');
    }
    s
}

/// Binary state tables, one block per initial condition. The row budget is
/// shared evenly between blocks.
pub fn serialize_boolean(trajs: &[BoolTrajectory], budget: usize) -> String {
    let per = (budget / trajs.len().max(1)).max(2);
    let mut s = String::new();
    for (k, t) in trajs.iter().enumerate() {
        let dim = t.states.first().map_or(0, Vec::len);
        let names: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        let _ = writeln!(s, "# trajectory {}\nstep, {}", k + 1, names.join(", "));
        for i in subsample_indices(t.states.len(), per) {
            let row: Vec<String> = t.states[i].iter().map(u8::to_string).collect();
            let _ = writeln!(s, "{i}, {}", row.join(", "));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(dim: usize) -> TaskContext {
        TaskContext {
            domain: "population dynamics".into(),
            variables: (0..dim).map(|i| format!("species {i} abundance")).collect(),
        }
    }

    fn history() -> Vec<HistoryEntry> {
        ["c*x_0", "c*x_0 - c*x_0**2", "c*x_0*(c - x_0)"]
            .iter()
            .enumerate()
            .map(|(k, e)| HistoryEntry {
                expression: e.to_string(),
                score: Some(0.5 + 0.1 * k as f64),
                complexity: k + 1,
                reasoning: Some(format!("idea {k}")),
            })
            .collect()
    }

    fn spec(strategy: Strategy) -> PromptSpec {
        PromptSpec::new(TaskKind::Cde, strategy, 1, "t, x_0\n0, 1\n1, 2\n")
            .with_context(ctx(1))
            .with_history(history())
    }

    fn user_text(s: &PromptSpec) -> String {
        build_prompt(s).unwrap()[1].content.clone()
    }

    #[test]
    fn sig4_rounding() {
        assert_eq!(format_sig4(0.000123456), "0.0001235");
        assert_eq!(format_sig4(4.78), "4.78");
        assert_eq!(format_sig4(-1234567.0), "-1235000");
        assert_eq!(format_sig4(-0.0), "0");
        assert_eq!(format_sig4(2.0 / 3.0), "0.6667");
    }

    #[test]
    fn short_series_verbatim() {
        let traj = Trajectory::new(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![1.5], vec![2.25]]).unwrap();
        assert_eq!(serialize_timeseries(&traj, 200), "t, x_0\n0, 1\n0.5, 1.5\n1, 2.25\n");
    }

    #[test]
    fn long_series_subsampled_with_endpoints() {
        let n = 1000;
        let traj = Trajectory::new(
            (0..n).map(|i| i as f64).collect(),
            (0..n).map(|i| vec![i as f64 * 2.0]).collect(),
        )
        .unwrap();
        let text = serialize_timeseries(&traj, 200);
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 200);
        assert_eq!(rows[0], "0, 0");
        assert_eq!(rows[199], "999, 1998");
        let idx = subsample_indices(n, 200);
        assert!(idx.windows(2).all(|w| w[1] > w[0]));
        for (k, &i) in idx.iter().enumerate() {
            // independent spacing check: every index within half a stride of its ideal position
            let ideal = k as f64 * 999.0 / 199.0;
            assert!((i as f64 - ideal).abs() <= 0.5);
        }
        assert_eq!(text, serialize_timeseries(&traj, 200));
    }

    #[test]
    fn naive_has_series_only() {
        let t = user_text(&spec(Strategy::Naive));
        assert!(t.contains("t, x_0\n0, 1"));
        assert!(!t.contains("species 0"));
        assert!(!t.contains("c*x_0 - c*x_0**2"));
    }

    #[test]
    fn base_lists_all_history() {
        let t = user_text(&spec(Strategy::Base));
        for h in history() {
            assert!(t.contains(&h.expression));
        }
        assert!(t.contains("score: 0.70000"));
        assert!(!t.contains("population dynamics"));
    }

    #[test]
    fn strategies_are_section_wise_additive() {
        let texts: Vec<String> = [Strategy::Naive, Strategy::Base, Strategy::Context, Strategy::Cot]
            .iter()
            .map(|&s| user_text(&spec(s)))
            .collect();
        let sections = |t: &str| -> Vec<String> {
            t.split("\n## ")
                .map(|s| s.lines().next().unwrap_or("").to_string())
                .collect()
        };
        for w in texts.windows(2) {
            let (a, b) = (sections(&w[0]), sections(&w[1]));
            assert!(a.iter().all(|h| b.contains(h)), "{a:?} not within {b:?}");
            assert!(b.len() > a.len());
        }
        let cot = &texts[3];
        assert!(cot.contains("## Context") && cot.contains("## Previous candidates"));
        assert!(cot.contains("step by step"));
        assert!(cot.contains("reasoning: idea 2"));
        assert!(!texts[2].contains("reasoning: idea 2"));
    }

    #[test]
    fn prompts_are_pure() {
        let s = spec(Strategy::Cot);
        assert_eq!(build_prompt(&s).unwrap(), build_prompt(&s).unwrap());
    }

    #[test]
    fn context_strategies_need_context() {
        let s = PromptSpec::new(TaskKind::Cde, Strategy::Context, 1, "t, x_0\n");
        assert_eq!(build_prompt(&s), Err(PromptError::MissingContext(Strategy::Context)));
        let s = s.with_context(ctx(2));
        assert!(matches!(build_prompt(&s), Err(PromptError::VariableCount { .. })));
        let naive = PromptSpec::new(TaskKind::Cde, Strategy::Naive, 1, "t, x_0\n");
        assert!(build_prompt(&naive).is_ok());
    }

    #[test]
    fn every_task_demands_its_object() {
        let cde = user_text(&PromptSpec::new(TaskKind::Cde, Strategy::Naive, 2, ""));
        assert!(cde.contains("{\"eq\": \"<f_0> | <f_1>\", \"dim\": 2}"));
        let bn = user_text(&PromptSpec::new(TaskKind::Bn, Strategy::Naive, 2, ""));
        assert!(bn.contains("{\"rules\": [\"x1 = <rule>\", \"x2 = <rule>\"]}"));
        let scm = PromptSpec::new(TaskKind::Scm, Strategy::Naive, 3, "");
        assert_eq!(build_prompt(&scm), Err(PromptError::MissingLag));
        assert!(user_text(&scm.with_max_lag(2)).contains("{\"edges\": [[0, 1, 1], ...]}"));
    }

    #[test]
    fn strategy_names() {
        assert_eq!("CoT".parse::<Strategy>().unwrap(), Strategy::Cot);
        assert!("fancy".parse::<Strategy>().is_err());
    }

    #[test]
    fn boolean_blocks() {
        let t = BoolTrajectory::new(vec![vec![0, 1], vec![1, 0], vec![1, 1]]).unwrap();
        let s = serialize_boolean(&[t.clone(), t], 100);
        assert!(s.starts_with("# trajectory 1\nstep, x1, x2\n0, 0, 1\n1, 1, 0\n2, 1, 1\n# trajectory 2"));
    }
}

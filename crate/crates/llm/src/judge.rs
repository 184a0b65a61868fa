//! Rubric scoring of candidates by a model.

use std::fmt::Write as _;

use serde_json::Value;
use symlaw_core::expr::Structure;
use symlaw_core::metrics::RubricScores;
use symlaw_core::TaskKind;

use crate::client::{ChatModel, LlmError};
use crate::prompt::{Message, TaskContext};
use crate::reply::{answer_object, last_object_with, ReplyError};

pub const RUBRIC_FIELDS: [&str; 4] = [
    "context_alignment",
    "scientific_plausibility",
    "conciseness_clarity",
    "logical_coherence",
];

/// Everything the judge sees about one candidate.
#[derive(Debug, Clone, Copy)]
pub struct JudgeInput<'a> {
    pub candidate: &'a Structure,
    pub reasoning: Option<&'a str>,
    pub context: Option<&'a TaskContext>,
    pub series: &'a str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JudgeVerdict {
    pub scores: RubricScores,
    /// At least one reply value lay outside 1..=5 and was clamped.
    pub clamped: bool,
}

fn preamble(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Cde => "The candidate is a system of differential equations proposed to explain a multivariate time series.",
        TaskKind::Bn => "The candidate is a set of Boolean update rules proposed to explain binary state transitions.",
        TaskKind::Scm => "The candidate is a lagged causal graph proposed to explain a multivariate time series.",
    }
}

pub fn build_judge_prompt(input: &JudgeInput<'_>) -> Vec<Message> {
    let system = "You are a strict scientific reviewer. Score candidates with integers from 1 (poor) to 5 (excellent).";
    let mut user = format!("{}\n\n## Time series\n{}\n", preamble(input.candidate.task()), input.series.trim_end());
    if let Some(ctx) = input.context {
        let _ = write!(user, "\n## Context\nDomain: {}\nVariables:\n", ctx.domain);
        for (i, v) in ctx.variables.iter().enumerate() {
            let name = match input.candidate.task() {
                TaskKind::Bn => format!("x{}", i + 1),
                _ => format!("x_{i}"),
            };
            let _ = writeln!(user, "- {name}: {v}");
        }
    }
    let _ = write!(user, "\n## Candidate\n{}\n", answer_object(input.candidate));
    let _ = write!(
        user,
        "\n## Reasoning\n{}\n",
        input.reasoning.unwrap_or("(no reasoning provided)")
    );
    user.push_str(
        "\n## Rubric\n\
- context_alignment: alignment with the time series and the contextual descriptions\n\
- scientific_plausibility: agreement with plausible physical laws or domain constraints\n\
- conciseness_clarity: readability and succinctness of the reasoning\n\
- logical_coherence: consistency and step-by-step soundness of the derivation\n\
\nReply with exactly one object:\n\
{\"context_alignment\": <1-5>, \"scientific_plausibility\": <1-5>, \"conciseness_clarity\": <1-5>, \"logical_coherence\": <1-5>}\n",
    );
    vec![Message::system(system), Message::user(user)]
}

/// Reads the last rubric object; values outside 1..=5 are clamped and flagged.
pub fn parse_judge_reply(text: &str) -> Result<JudgeVerdict, ReplyError> {
    let (_, obj) = last_object_with(text, RUBRIC_FIELDS[0]).ok_or(ReplyError::NoObject)?;
    let mut vals = [0u8; 4];
    let mut clamped = false;
    for (slot, key) in vals.iter_mut().zip(RUBRIC_FIELDS) {
        let raw = match obj.get(key) {
            Some(Value::Number(n)) => n.as_f64(),
            Some(Value::String(s)) => s.trim().parse::<f64>().ok(),
            _ => None,
        }
        .filter(|v| v.is_finite())
        .ok_or_else(|| ReplyError::Schema(format!("`{key}` must be a number")))?;
        let r = raw.round();
        let c = r.clamp(1.0, 5.0);
        clamped |= c != r;
        *slot = c as u8;
    }
    let scores = RubricScores::new(vals[0], vals[1], vals[2], vals[3]).expect("clamped into range");
    Ok(JudgeVerdict { scores, clamped })
}

/// Asks `model` for rubric scores, re-asking on unparseable replies while
/// attempts remain. `Ok(None)` means no usable reply arrived within
/// `max_attempts` requests; only non-transient failures are errors.
pub fn judge(
    model: &dyn ChatModel,
    input: &JudgeInput<'_>,
    temperature: f64,
    max_attempts: u32,
) -> Result<(Option<JudgeVerdict>, u32), LlmError> {
    let messages = build_judge_prompt(input);
    let mut used = 0;
    while used < max_attempts {
        let reply = match model.complete(&messages, temperature, max_attempts - used) {
            Ok(r) => r,
            Err(LlmError::Exhausted { attempts, last }) => {
                log::warn!("judge gave up after {attempts} attempt(s): {last}");
                return Ok((None, used + attempts));
            }
            Err(e) => return Err(e),
        };
        used += reply.attempts;
        match parse_judge_reply(&reply.text) {
            Ok(v) => {
                if v.clamped {
                    log::warn!("judge reply out of range, clamped: {}", reply.text.trim());
                }
                return Ok((Some(v), used));
            }
            Err(e) => log::warn!("unusable judge reply ({}): {}", e.code(), reply.text.trim()),
        }
    }
    Ok((None, used))
}

//! Extraction of candidate objects from free-form model replies.

use serde_json::{json, Map, Value};
use symlaw_core::expr::{parse_boolean, AlgebraicSystem, ExprError, ScmGraph, Structure};
use symlaw_core::TaskKind;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplyError {
    #[error("no answer object found in the reply")]
    NoObject,
    #[error("answer has dimension {found}, expected {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("answer does not parse: {0}")]
    Syntax(ExprError),
    #[error("malformed answer object: {0}")]
    Schema(String),
}

impl ReplyError {
    /// Stable identifier recorded with each failed attempt.
    pub fn code(&self) -> &'static str {
        match self {
            ReplyError::NoObject => "no_object",
            ReplyError::DimMismatch { .. } => "dim_mismatch",
            ReplyError::Syntax(_) => "syntax",
            ReplyError::Schema(_) => "schema",
        }
    }
}

/// What a reply must describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub task: TaskKind,
    pub dim: usize,
    /// Largest admissible lag; only read for causal graphs.
    pub max_lag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReply {
    pub structure: Structure,
    /// Text preceding the answer object, if any.
    pub reasoning: Option<String>,
}

/// The last JSON object in `text` that has `key`, with its byte offset.
pub(crate) fn last_object_with(text: &str, key: &str) -> Option<(usize, Map<String, Value>)> {
    let starts: Vec<usize> = text.match_indices('{').map(|(i, _)| i).collect();
    for &i in starts.iter().rev() {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            if map.contains_key(key) {
                return Some((i, map));
            }
        }
    }
    None
}

fn usize_field(map: &Map<String, Value>, key: &str) -> Result<usize, ReplyError> {
    map.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| ReplyError::Schema(format!("`{key}` must be a non-negative integer")))
}

fn dim_error(e: ExprError) -> ReplyError {
    match e {
        ExprError::DimensionMismatch { expected, found } => ReplyError::DimMismatch { expected, found },
        other => ReplyError::Syntax(other),
    }
}

/// Parses the last answer object for `shape.task` out of `text`.
pub fn parse_candidate(text: &str, shape: Shape) -> Result<ParsedReply, ReplyError> {
    let key = match shape.task {
        TaskKind::Cde => "eq",
        TaskKind::Bn => "rules",
        TaskKind::Scm => "edges",
    };
    let (start, obj) = last_object_with(text, key).ok_or(ReplyError::NoObject)?;
    let structure = match shape.task {
        TaskKind::Cde => {
            let eq = obj["eq"]
                .as_str()
                .ok_or_else(|| ReplyError::Schema("`eq` must be a string".into()))?;
            let dim = usize_field(&obj, "dim")?;
            if dim != shape.dim {
                return Err(ReplyError::DimMismatch {
                    expected: shape.dim,
                    found: dim,
                });
            }
            Structure::Cde(AlgebraicSystem::parse(eq, dim).map_err(dim_error)?)
        }
        TaskKind::Bn => {
            let rules: Vec<&str> = obj["rules"]
                .as_array()
                .and_then(|a| a.iter().map(Value::as_str).collect())
                .ok_or_else(|| ReplyError::Schema("`rules` must be a list of strings".into()))?;
            if rules.len() != shape.dim {
                return Err(ReplyError::DimMismatch {
                    expected: shape.dim,
                    found: rules.len(),
                });
            }
            Structure::Bn(parse_boolean(&rules, shape.dim).map_err(dim_error)?)
        }
        TaskKind::Scm => {
            let bad = || ReplyError::Schema("`edges` must be a list of [source, lag, target]".into());
            let list = obj["edges"].as_array().ok_or_else(bad)?;
            let mut edges = Vec::with_capacity(list.len());
            for e in list {
                let triple: Vec<usize> = e
                    .as_array()
                    .filter(|a| a.len() == 3)
                    .and_then(|a| a.iter().map(|v| v.as_u64().map(|u| u as usize)).collect())
                    .ok_or_else(bad)?;
                edges.push((triple[0], triple[1], triple[2]));
            }
            Structure::Scm(ScmGraph::new(shape.dim, shape.max_lag, edges).map_err(ReplyError::Syntax)?)
        }
    };
    let reasoning = text[..start].trim();
    Ok(ParsedReply {
        structure,
        reasoning: (!reasoning.is_empty()).then(|| reasoning.to_string()),
    })
}

/// The answer object a model would emit for `structure`.
pub fn answer_object(structure: &Structure) -> String {
    let v = match structure {
        Structure::Cde(s) => json!({"eq": s.to_string(), "dim": s.dim()}),
        Structure::Bn(n) => json!({"rules": n.rule_lines()}),
        Structure::Scm(g) => {
            let edges: Vec<[usize; 3]> = g.edges().iter().map(|e| [e.source, e.lag, e.target]).collect();
            json!({"edges": edges})
        }
    };
    v.to_string()
}

/// Compact text shown to models when listing earlier candidates.
pub fn display_expression(structure: &Structure) -> String {
    match structure {
        Structure::Cde(s) => s.skeleton_string(),
        Structure::Bn(n) => n.rule_lines().join("; "),
        Structure::Scm(_) => answer_object(structure),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const APPENDIX: &str = r#"Step 15: Format Verification. Follow pipe-separated format:
{"eq": "c*x_0*x_1 + c*x_2 - c*x_3 | c*x_1/x_0 + c*x_3 | c*x_2 - c*x_0*x_3 | c*x_3 + c*x_0 - c*x_1",  "dim": 4}
Final JSON Output
{
  "eq": "c*x_0*x_1 + c*x_2 - c*x_3 | c*x_1/x_0 + c*x_3 | c*x_2 - c*x_0*x_3 | c*x_3 + c*x_0 - c*x_1",
  "dim": 4
}"#;

    fn cde(dim: usize) -> Shape {
        Shape {
            task: TaskKind::Cde,
            dim,
            max_lag: 1,
        }
    }

    #[test]
    fn appendix_reply_parses_with_reasoning() {
        let r = parse_candidate(APPENDIX, cde(4)).unwrap();
        let Structure::Cde(s) = &r.structure else { panic!() };
        assert_eq!(s.dim(), 4);
        assert_eq!(s.num_coefficients(), 10);
        let reasoning = r.reasoning.unwrap();
        assert!(reasoning.starts_with("Step 15") && reasoning.ends_with("Final JSON Output"));
    }

    #[test]
    fn last_object_wins() {
        let text = r#"try {"eq": "c*x_0", "dim": 1} then {"eq": "c*x_0**2", "dim": 1}"#;
        let r = parse_candidate(text, cde(1)).unwrap();
        let expect = AlgebraicSystem::parse("c*x_0**2", 1).unwrap();
        assert_eq!(r.structure, Structure::Cde(expect));
    }

    #[test]
    fn error_codes() {
        let e = parse_candidate(r#"{"eq": "c*x_0", "dim": 2}"#, cde(1)).unwrap_err();
        assert_eq!(e, ReplyError::DimMismatch { expected: 1, found: 2 });
        assert_eq!(e.code(), "dim_mismatch");
        assert_eq!(parse_candidate("no json here", cde(1)).unwrap_err().code(), "no_object");
        assert_eq!(
            parse_candidate(r#"{"eq": "c*(x_0", "dim": 1}"#, cde(1)).unwrap_err().code(),
            "syntax"
        );
        assert_eq!(
            parse_candidate(r#"{"eq": "c*x_0 | c", "dim": 1}"#, cde(1)).unwrap_err().code(),
            "dim_mismatch"
        );
        assert_eq!(parse_candidate(r#"{"eq": 3, "dim": 1}"#, cde(1)).unwrap_err().code(), "schema");
    }

    #[test]
    fn nested_objects_are_skipped_for_the_outer_answer() {
        let text = r#"{"eq": "c*x_0", "dim": 1, "note": {"a": 1}}"#;
        assert!(parse_candidate(text, cde(1)).is_ok());
    }

    #[test]
    fn boolean_and_graph_answers() {
        let bn = Shape {
            task: TaskKind::Bn,
            dim: 2,
            max_lag: 1,
        };
        let r = parse_candidate(r#"{"rules": ["x1 = x2", "x2 = NOT x1"]}"#, bn).unwrap();
        assert_eq!(r.reasoning, None);
        let round = parse_candidate(&answer_object(&r.structure), bn).unwrap();
        assert_eq!(round.structure, r.structure);

        let scm = Shape {
            task: TaskKind::Scm,
            dim: 3,
            max_lag: 2,
        };
        let r = parse_candidate(r#"{"edges": [[0, 1, 1], [1, 2, 2]]}"#, scm).unwrap();
        let round = parse_candidate(&answer_object(&r.structure), scm).unwrap();
        assert_eq!(round.structure, r.structure);
        assert_eq!(
            parse_candidate(r#"{"edges": [[0, 3, 1]]}"#, scm).unwrap_err().code(),
            "syntax"
        );
        assert_eq!(parse_candidate(r#"{"edges": [[0, 1]]}"#, scm).unwrap_err().code(), "schema");
    }

    #[test]
    fn printed_systems_round_trip() {
        let s = AlgebraicSystem::parse("c*x_0 - c*x_0*x_1 | -c*x_1 + c*x_0*x_1", 2).unwrap();
        let text = answer_object(&Structure::Cde(s.clone()));
        let back = parse_candidate(&text, cde(2)).unwrap();
        assert_eq!(back.structure, Structure::Cde(s));
    }
}

//! Benchmark samples: schema, validation, loading and saving.
//!
//! One JSON object per file:
//!
//! ```json
//! {
//!   "id": "logistic",
//!   "task": "cde",
//!   "dim": 1,
//!   "domain": "population dynamics",
//!   "variables": ["population size"],
//!   "train": [{"times": [0.0, 0.1], "values": [[7.3], [7.7]]}],
//!   "ood": [{"times": [0.0, 0.1], "values": [[21.0], [22.1]]}],
//!   "truth": "c_0*x_0*(1 - x_0/c_1)"
//! }
//! ```
//!
//! Boolean samples store each trajectory as a list of 0/1 rows, `truth` as a
//! list of rules. Causal samples carry `max_lag` and give `truth` as
//! `[source, lag, target]` triples.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use symlaw_core::dynamics::{BoolTrajectory, Trajectory};
use symlaw_core::expr::{parse_boolean, AlgebraicSystem, ScmGraph, Structure};
use symlaw_core::TaskKind;
use symlaw_llm::prompt::{serialize_boolean, serialize_timeseries, TaskContext};
use symlaw_llm::reply::Shape;
use thiserror::Error;

/// A schema violation located by sample id and field path.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("sample `{sample}`, field `{field}`: {message}")]
pub struct SampleError {
    pub sample: String,
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Invalid { path: PathBuf, source: SampleError },
    #[error("{}: no sample files found", .0.display())]
    Empty(PathBuf),
    #[error("sample id `{0}` appears more than once")]
    DuplicateId(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleData {
    Continuous { train: Vec<Trajectory>, ood: Vec<Trajectory> },
    Binary { train: Vec<BoolTrajectory>, ood: Vec<BoolTrajectory> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub task: TaskKind,
    pub dim: usize,
    pub domain: String,
    /// One description per variable, or empty.
    pub variables: Vec<String>,
    pub data: SampleData,
    pub truth: Option<Structure>,
    /// Largest lag considered; causal samples only.
    pub max_lag: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSample {
    id: String,
    task: TaskKind,
    dim: usize,
    #[serde(default)]
    domain: String,
    #[serde(default)]
    variables: Vec<String>,
    train: Vec<Value>,
    #[serde(default)]
    ood: Vec<Value>,
    #[serde(default)]
    truth: Option<Value>,
    #[serde(default)]
    max_lag: Option<usize>,
}

struct Ctx<'a> {
    id: &'a str,
}

impl Ctx<'_> {
    fn err(&self, field: impl Into<String>, message: impl ToString) -> SampleError {
        SampleError {
            sample: self.id.to_string(),
            field: field.into(),
            message: message.to_string(),
        }
    }

    fn decode<T: DeserializeOwned>(&self, field: &str, v: &Value) -> Result<T, SampleError> {
        serde_path_to_error::deserialize(v).map_err(|e| {
            let inner = e.path().to_string();
            let path = if inner == "." { field.to_string() } else { format!("{field}.{inner}") };
            self.err(path, e.into_inner())
        })
    }
}

fn continuous(ctx: &Ctx, field: &str, list: &[Value], dim: usize, min_len: usize) -> Result<Vec<Trajectory>, SampleError> {
    list.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = format!("{field}[{i}]");
            let t: Trajectory = ctx.decode(&f, v)?;
            if t.dim() != dim {
                return Err(ctx.err(&f, format!("trajectory has dimension {}, expected {dim}", t.dim())));
            }
            if t.len() < min_len {
                return Err(ctx.err(&f, format!("trajectory has {} points, at least {min_len} required", t.len())));
            }
            Ok(t)
        })
        .collect()
}

fn binary(ctx: &Ctx, field: &str, list: &[Value], dim: usize) -> Result<Vec<BoolTrajectory>, SampleError> {
    list.iter()
        .enumerate()
        .map(|(i, v)| {
            let f = format!("{field}[{i}]");
            let rows: Vec<Vec<u8>> = ctx.decode(&f, v)?;
            let t = BoolTrajectory::new(rows).map_err(|e| ctx.err(&f, e))?;
            if t.dim() != dim {
                return Err(ctx.err(&f, format!("states have dimension {}, expected {dim}", t.dim())));
            }
            if t.len() < 2 {
                return Err(ctx.err(&f, "at least two states are required"));
            }
            Ok(t)
        })
        .collect()
}

impl Sample {
    /// Parses and validates one sample object.
    pub fn from_json_str(text: &str) -> Result<Sample, SampleError> {
        let value: Value = serde_json::from_str(text).map_err(|e| SampleError {
            sample: "?".into(),
            field: ".".into(),
            message: e.to_string(),
        })?;
        Sample::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Sample, SampleError> {
        let id = value.get("id").and_then(Value::as_str).unwrap_or("?").to_string();
        let ctx = Ctx { id: &id };
        let raw: RawSample = ctx.decode(".", value).map_err(|mut e| {
            e.field = e.field.trim_start_matches("..").to_string();
            e
        })?;
        if raw.id.trim().is_empty() {
            return Err(ctx.err("id", "must not be empty"));
        }
        let dim = raw.dim;
        if dim == 0 {
            return Err(ctx.err("dim", "must be positive"));
        }
        if !raw.variables.is_empty() && raw.variables.len() != dim {
            return Err(ctx.err(
                "variables",
                format!("{} descriptions given for dimension {dim}", raw.variables.len()),
            ));
        }
        if raw.train.is_empty() {
            return Err(ctx.err("train", "at least one trajectory is required"));
        }
        let max_lag = match (raw.task, raw.max_lag) {
            (TaskKind::Scm, Some(l)) if l > 0 => Some(l),
            (TaskKind::Scm, _) => return Err(ctx.err("max_lag", "causal samples need a positive max_lag")),
            (_, Some(_)) => return Err(ctx.err("max_lag", "only causal samples take a max_lag")),
            (_, None) => None,
        };
        let data = match raw.task {
            TaskKind::Cde | TaskKind::Scm => {
                let min_len = match raw.task {
                    TaskKind::Cde => 3,
                    _ => max_lag.unwrap_or(1) + 3,
                };
                SampleData::Continuous {
                    train: continuous(&ctx, "train", &raw.train, dim, min_len)?,
                    ood: continuous(&ctx, "ood", &raw.ood, dim, min_len)?,
                }
            }
            TaskKind::Bn => SampleData::Binary {
                train: binary(&ctx, "train", &raw.train, dim)?,
                ood: binary(&ctx, "ood", &raw.ood, dim)?,
            },
        };
        let truth = match &raw.truth {
            None | Some(Value::Null) => None,
            Some(v) => Some(parse_truth(&ctx, raw.task, dim, max_lag, v)?),
        };
        Ok(Sample {
            id: raw.id,
            task: raw.task,
            dim,
            domain: raw.domain,
            variables: raw.variables,
            data,
            truth,
            max_lag,
        })
    }

    pub fn to_value(&self) -> Value {
        let mut v = json!({
            "id": self.id,
            "task": self.task,
            "dim": self.dim,
            "domain": self.domain,
            "variables": self.variables,
        });
        let (train, ood) = match &self.data {
            SampleData::Continuous { train, ood } => (json!(train), json!(ood)),
            SampleData::Binary { train, ood } => (json!(train), json!(ood)),
        };
        v["train"] = train;
        if ood.as_array().is_some_and(|a| !a.is_empty()) {
            v["ood"] = ood;
        }
        if let Some(t) = &self.truth {
            v["truth"] = match t {
                Structure::Cde(s) => json!(s.to_string()),
                Structure::Bn(n) => json!(n.rule_lines()),
                Structure::Scm(g) => json!(g.edges().iter().map(|e| [e.source, e.lag, e.target]).collect::<Vec<_>>()),
            };
        }
        if let Some(l) = self.max_lag {
            v["max_lag"] = json!(l);
        }
        v
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        let text = serde_json::to_string_pretty(&self.to_value()).expect("sample serializes");
        fs::write(path, text + "\n").map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn has_ood(&self) -> bool {
        match &self.data {
            SampleData::Continuous { ood, .. } => !ood.is_empty(),
            SampleData::Binary { ood, .. } => !ood.is_empty(),
        }
    }

    pub fn context(&self) -> Option<TaskContext> {
        (!self.variables.is_empty()).then(|| TaskContext {
            domain: self.domain.clone(),
            variables: self.variables.clone(),
        })
    }

    pub fn shape(&self) -> Shape {
        Shape {
            task: self.task,
            dim: self.dim,
            max_lag: self.max_lag.unwrap_or(1),
        }
    }

    /// Training data as prompt text, at most `budget` rows in total.
    pub fn series_text(&self, budget: usize) -> String {
        match &self.data {
            SampleData::Binary { train, .. } => serialize_boolean(train, budget),
            SampleData::Continuous { train, .. } if train.len() == 1 => serialize_timeseries(&train[0], budget),
            SampleData::Continuous { train, .. } => {
                let each = (budget / train.len()).max(2);
                train
                    .iter()
                    .enumerate()
                    .map(|(k, t)| format!("# trajectory {}\n{}", k + 1, serialize_timeseries(t, each)))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        }
    }
}

fn parse_truth(ctx: &Ctx, task: TaskKind, dim: usize, max_lag: Option<usize>, v: &Value) -> Result<Structure, SampleError> {
    match task {
        TaskKind::Cde => {
            let eq: String = ctx.decode("truth", v)?;
            AlgebraicSystem::parse(&eq, dim)
                .map(Structure::Cde)
                .map_err(|e| ctx.err("truth", e))
        }
        TaskKind::Bn => {
            let rules: Vec<String> = ctx.decode("truth", v)?;
            parse_boolean(&rules, dim).map(Structure::Bn).map_err(|e| ctx.err("truth", e))
        }
        TaskKind::Scm => {
            let edges: Vec<[usize; 3]> = ctx.decode("truth", v)?;
            ScmGraph::new(dim, max_lag.unwrap_or(1), edges.into_iter().map(|[s, l, t]| (s, l, t)))
                .map(Structure::Scm)
                .map_err(|e| ctx.err("truth", e))
        }
    }
}

/// Reads one sample file, or every `*.json` file of a directory in file
/// name order.
pub fn load_dataset(path: &Path) -> Result<Vec<Sample>, DatasetError> {
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| DatasetError::Io { path: p, source }
    };
    let files: Vec<PathBuf> = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    if files.is_empty() {
        return Err(DatasetError::Empty(path.to_path_buf()));
    }
    let mut samples: Vec<Sample> = Vec::with_capacity(files.len());
    for f in files {
        let text = fs::read_to_string(&f).map_err(io(&f))?;
        let s = Sample::from_json_str(&text).map_err(|source| DatasetError::Invalid { path: f.clone(), source })?;
        if samples.iter().any(|o| o.id == s.id) {
            return Err(DatasetError::DuplicateId(s.id));
        }
        samples.push(s);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Value {
        json!({
            "id": "s1",
            "task": "cde",
            "dim": 1,
            "domain": "growth",
            "variables": ["population"],
            "train": [{"times": [0.0, 0.5, 1.0, 1.5], "values": [[1.0], [1.2], [1.5], [1.8]]}],
            "truth": "c*x_0"
        })
    }

    #[test]
    fn valid_sample_parses() {
        let s = Sample::from_value(&base()).unwrap();
        assert_eq!(s.id, "s1");
        assert!(!s.has_ood());
        assert!(matches!(s.truth, Some(Structure::Cde(_))));
    }

    #[test]
    fn errors_name_the_field() {
        let mut v = base();
        v["truth"] = json!("c*x_0 | c*x_1");
        let e = Sample::from_value(&v).unwrap_err();
        assert_eq!((e.sample.as_str(), e.field.as_str()), ("s1", "truth"));

        let mut v = base();
        v["train"][0]["times"] = json!([0.0, 0.5, 0.5, 1.5]);
        let e = Sample::from_value(&v).unwrap_err();
        assert_eq!(e.field, "train[0]");
        assert!(e.message.contains("increasing"), "{e}");

        let mut v = base();
        v["train"][0]["values"][1] = json!("x");
        let e = Sample::from_value(&v).unwrap_err();
        assert!(e.field.starts_with("train[0].values"), "{e}");

        let mut v = base();
        v.as_object_mut().unwrap().remove("dim");
        let e = Sample::from_value(&v).unwrap_err();
        assert!(e.message.contains("dim"), "{e}");

        let mut v = base();
        v["variables"] = json!(["a", "b"]);
        assert_eq!(Sample::from_value(&v).unwrap_err().field, "variables");
    }

    #[test]
    fn causal_samples_need_a_lag() {
        let v = json!({
            "id": "g", "task": "scm", "dim": 2,
            "train": [{"times": [0.0, 1.0, 2.0, 3.0, 4.0], "values": [[0.0, 1.0], [1.0, 0.0], [0.5, 0.2], [0.1, 0.3], [0.2, 0.9]]}],
            "truth": [[0, 1, 1]]
        });
        assert_eq!(Sample::from_value(&v).unwrap_err().field, "max_lag");
        let mut v = v;
        v["max_lag"] = json!(1);
        let s = Sample::from_value(&v).unwrap();
        assert_eq!(Sample::from_value(&s.to_value()).unwrap(), s);
    }

    #[test]
    fn boolean_round_trip() {
        let v = json!({
            "id": "b", "task": "bn", "dim": 2,
            "train": [[[0, 1], [1, 0], [0, 1]]],
            "ood": [[[1, 1], [1, 0]]],
            "truth": ["x1 = x2", "x2 = x1"]
        });
        let s = Sample::from_value(&v).unwrap();
        assert!(s.has_ood());
        assert_eq!(Sample::from_value(&s.to_value()).unwrap(), s);
        let mut bad = v.clone();
        bad["train"][0][1] = json!([2, 0]);
        assert_eq!(Sample::from_value(&bad).unwrap_err().field, "train[0]");
    }
}

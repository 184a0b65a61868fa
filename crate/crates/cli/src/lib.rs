//! Configuration binding and subcommand implementations behind the `symlaw`
//! binary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use symlaw_core::expr::{parse_boolean, AlgebraicSystem, ScmGraph, Structure};
use symlaw_core::metrics::ScoreCard;
use symlaw_core::TaskKind;
use symlaw_engine::harness::{read_results, RESULTS_FILE, TRANSCRIPT_FILE};
use symlaw_engine::report::write_report;
use symlaw_engine::{
    evaluate_ood, load_dataset, run_dataset, verify, ConfigError, DatasetError, EngineError, Report,
    ReportError, RunConfig, RunSummary, Sample, VerifyConfig,
};
use symlaw_llm::{parse_candidate, ChatClient, ChatModel, LlmError};
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot read structure: {0}")]
    Structure(String),
    #[error("model client: {0}")]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for bad inputs, 2 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Structure(_) => 1,
            CliError::Dataset(DatasetError::Invalid { .. } | DatasetError::DuplicateId(_)) => 1,
            CliError::Engine(e) if e.is_validation() => 1,
            _ => 2,
        }
    }
}

fn parse_scalar(text: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

/// Sets `key` (dotted) in `root`, creating intermediate tables.
fn apply_override(root: &mut Table, key: &str, value: Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = key.split('.').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::new(key, "empty key segment"));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for (i, p) in parents.iter().enumerate() {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = match entry {
            Value::Table(t) => t,
            _ => return Err(ConfigError::new(parts[..=i].join("."), "is not a table")),
        };
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Deserializes `table` into `T`, reporting failures by field path.
pub fn bind<T: DeserializeOwned>(table: Table) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { "config".to_string() } else { path };
        ConfigError::new(field, e.into_inner().to_string())
    })
}

/// Reads the optional config file and applies `key=value` overrides on top.
pub fn load_table(file: Option<&Path>, overrides: &[String]) -> Result<Table, CliError> {
    let mut root = match file {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            toml::from_str::<Table>(&text).map_err(|e| ConfigError::new(p.display().to_string(), e.message()))?
        }
        None => Table::new(),
    };
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| ConfigError::new(o.clone(), "overrides take the form key=value"))?;
        apply_override(&mut root, k.trim(), parse_scalar(v.trim()))?;
    }
    Ok(root)
}

pub fn load_config(file: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    Ok(bind(load_table(file, overrides)?)?)
}

/// Runs the configured dataset; samples already in the results log are
/// skipped and interrupted ones resume from their checkpoints.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary, CliError> {
    cfg.validate()?;
    let samples = load_dataset(&cfg.dataset)?;
    fs::create_dir_all(&cfg.output).map_err(|source| CliError::Io {
        path: cfg.output.clone(),
        source,
    })?;
    let client = if cfg.needs_model() {
        Some(ChatClient::new(cfg.model.clone())?.with_transcript(&cfg.output.join(TRANSCRIPT_FILE))?)
    } else {
        None
    };
    let model = client.as_ref().map(|c| c as &dyn ChatModel);
    Ok(run_dataset(cfg, &samples, model)?)
}

fn split_top_level(text: &str) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut depth = 0i32;
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(String::new());
                continue;
            }
            _ => {}
        }
        parts.last_mut().expect("never empty").push(ch);
    }
    parts
}

/// Reads a candidate for `sample`: a reply-style JSON object, or the bare
/// form of the task (equations separated by `|` or listed as `{a, b}`,
/// Boolean rules separated by `;`, or a JSON list of `[source, lag, target]`).
pub fn parse_structure(text: &str, sample: &Sample) -> Result<Structure, CliError> {
    let text = text.trim();
    let bad = |e: &dyn std::fmt::Display| CliError::Structure(e.to_string());
    if text.starts_with('{') && text.contains('"') {
        return parse_candidate(text, sample.shape())
            .map(|p| p.structure)
            .map_err(|e| bad(&e));
    }
    match sample.task {
        TaskKind::Cde => {
            let body = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')).unwrap_or(text);
            let joined = if body.contains('|') {
                body.to_string()
            } else {
                split_top_level(body).join(" | ")
            };
            AlgebraicSystem::parse(&joined, sample.dim)
                .map(Structure::Cde)
                .map_err(|e| bad(&e))
        }
        TaskKind::Bn => {
            let rules: Vec<String> = text
                .split([';', '\n'])
                .map(str::trim)
                .filter(|r| !r.is_empty())
                .map(String::from)
                .collect();
            parse_boolean(&rules, sample.dim).map(Structure::Bn).map_err(|e| bad(&e))
        }
        TaskKind::Scm => {
            let edges: Vec<[usize; 3]> = serde_json::from_str(text).map_err(|e| bad(&e))?;
            ScmGraph::new(
                sample.dim,
                sample.max_lag.unwrap_or(1),
                edges.into_iter().map(|[s, l, t]| (s, l, t)),
            )
            .map(Structure::Scm)
            .map_err(|e| bad(&e))
        }
    }
}

/// Picks the sample with `id`, or the only one in the file.
pub fn select_sample(samples: Vec<Sample>, id: Option<&str>) -> Result<Sample, CliError> {
    match id {
        Some(id) => samples
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| ConfigError::new("id", format!("no sample `{id}`")).into()),
        None if samples.len() == 1 => Ok(samples.into_iter().next().expect("one sample")),
        None => Err(ConfigError::new("id", format!("{} samples found; pick one with --id", samples.len())).into()),
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Verification {
    pub sample_id: String,
    pub structure: String,
    pub id: ScoreCard,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood: Option<ScoreCard>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

/// Scores one structure against a sample. No model is involved.
pub fn cmd_verify(structure: &str, sample: &Sample, cfg: &VerifyConfig) -> Result<Verification, CliError> {
    let s = parse_structure(structure, sample)?;
    let v = verify(&s, sample, cfg);
    let ood = if v.card.is_failed() {
        None
    } else {
        evaluate_ood(&s, v.coefficients.as_deref(), sample, cfg)
    };
    Ok(Verification {
        sample_id: sample.id.clone(),
        structure: symlaw_llm::display_expression(&s),
        id: v.card,
        ood,
        coefficients: v.coefficients,
    })
}

/// Rebuilds the report files of a run directory from its results log.
pub fn cmd_report(dir: &Path) -> Result<Report, CliError> {
    let log = dir.join(RESULTS_FILE);
    if !log.exists() {
        return Err(CliError::Io {
            path: log,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no results log"),
        });
    }
    let results = read_results(&log)?;
    if results.is_empty() {
        return Err(ReportError::Empty.into());
    }
    Ok(write_report(dir, &results)?)
}

pub fn cmd_dataset_validate(path: &Path) -> Result<Vec<Sample>, CliError> {
    Ok(load_dataset(path)?)
}

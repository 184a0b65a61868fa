//! Dataset-level runs: configuration, per-sample execution with checkpoints,
//! the append-only results log and out-of-distribution scoring.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use symlaw_core::gp::GpConfig;
use symlaw_core::metrics::ScoreCard;
use symlaw_core::TaskKind;
use symlaw_llm::{ChatModel, ModelConfig};

use crate::pool::Candidate;
use crate::refine::{LoopConfig, LoopState, Refiner};
use crate::report;
use crate::sample::Sample;
use crate::verify::{evaluate_ood, VerifyConfig};
use crate::{ConfigError, EngineError};

pub const RESULTS_FILE: &str = "results.jsonl";
pub const CONFIG_SNAPSHOT: &str = "config.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// A sample file or a directory of them.
    pub dataset: PathBuf,
    pub output: PathBuf,
    /// Tasks to run; empty runs every sample.
    pub tasks: Vec<TaskKind>,
    /// Master seed; overrides the GP and fitting seeds.
    pub seed: u64,
    /// Samples evaluated concurrently.
    pub parallelism: usize,
    /// Run a sample a second time when the first run leaves no scored
    /// candidate.
    pub rerun_empty: bool,
    pub model: ModelConfig,
    #[serde(rename = "loop")]
    pub refine: LoopConfig,
    pub gp: GpConfig,
    pub verify: VerifyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: PathBuf::from("data"),
            output: PathBuf::from("runs/latest"),
            tasks: Vec::new(),
            seed: 0,
            parallelism: 1,
            rerun_empty: true,
            model: ModelConfig::default(),
            refine: LoopConfig::default(),
            gp: GpConfig::default(),
            verify: VerifyConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !self.dataset.exists() {
            return Err(ConfigError::new(
                "dataset",
                format!("{} does not exist", self.dataset.display()),
            ));
        }
        if self.parallelism == 0 {
            return Err(ConfigError::new("parallelism", "must be positive"));
        }
        if self.model.concurrency == 0 {
            return Err(ConfigError::new("model.concurrency", "must be positive"));
        }
        for (field, t) in [
            ("model.temperature", self.model.temperature),
            ("model.judge_temperature", self.model.judge_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                return Err(ConfigError::new(field, "must lie in [0, 2]"));
            }
        }
        if self.model.rate_limit.is_some_and(|r| !(r > 0.0)) {
            return Err(ConfigError::new("model.rate_limit", "must be positive"));
        }
        self.refine.validate()?;
        if self.refine.mode.evolves() {
            self.gp.validate().map_err(|e| ConfigError::new("gp", e.to_string()))?;
        }
        Ok(())
    }

    /// The configuration with the master seed applied.
    pub fn resolved(&self) -> RunConfig {
        let mut c = self.clone();
        c.gp.seed = self.seed;
        c.verify.fit.seed = self.seed;
        c
    }

    /// Digest of everything that affects results (the output path does not).
    pub fn fingerprint(&self) -> String {
        let mut c = self.resolved();
        c.output = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }

    pub fn needs_model(&self) -> bool {
        let m = self.refine.mode;
        m.proposes() || m == crate::Mode::HybridGpJudged || self.refine.judge
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub sample_id: String,
    pub task: TaskKind,
    pub dim: usize,
    pub best: Option<Candidate>,
    pub id_scores: Option<ScoreCard>,
    /// Present whenever the sample has out-of-distribution data.
    pub ood_scores: Option<ScoreCard>,
    pub proximity: Option<usize>,
    pub complexity: Option<usize>,
    /// Best objective after each epoch of the final attempt.
    pub curve: Vec<Option<f64>>,
    /// Epochs over all attempts.
    pub epochs: usize,
    pub failed_epochs: usize,
    pub model_calls: u64,
    pub judge_calls: u64,
    /// 2 when the sample was rerun.
    pub attempts: u32,
    pub config_fingerprint: String,
    pub transcript: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    attempt: u32,
    spent_epochs: usize,
    spent_calls: u64,
    spent_judge: u64,
    spent_failed: usize,
    state: LoopState,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EngineError + '_ {
    move |source| EngineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

fn write_atomic(path: &Path, text: &str) -> Result<(), EngineError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Runs one sample to completion, resuming from `checkpoint` if it exists.
pub fn run_sample(
    sample: &Sample,
    cfg: &RunConfig,
    model: Option<&dyn ChatModel>,
    checkpoint: Option<&Path>,
) -> Result<RunResult, EngineError> {
    let cfg = cfg.resolved();
    let mut saved: Option<Checkpoint> = match checkpoint {
        Some(p) if p.exists() => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            let c: Checkpoint = serde_json::from_str(&text).map_err(|source| EngineError::Record {
                path: p.to_path_buf(),
                source,
            })?;
            (c.state.sample_id == sample.id).then_some(c)
        }
        _ => None,
    };
    let mut attempt = saved.as_ref().map_or(1, |c| c.attempt);
    let (mut spent_epochs, mut spent_calls, mut spent_judge, mut spent_failed) = saved
        .as_ref()
        .map_or((0, 0, 0, 0), |c| (c.spent_epochs, c.spent_calls, c.spent_judge, c.spent_failed));
    loop {
        let mut gp = cfg.gp.clone();
        gp.seed = cfg.gp.seed.wrapping_add(u64::from(attempt - 1) << 32);
        let refiner = Refiner::new(sample, &cfg.refine, &gp, &cfg.verify, model)?
            .with_temperatures(cfg.model.temperature, cfg.model.judge_temperature);
        let state = saved
            .take()
            .map(|c| c.state)
            .unwrap_or_else(|| LoopState::new(&sample.id));
        let mut save = |s: &LoopState| -> Result<(), EngineError> {
            let Some(p) = checkpoint else { return Ok(()) };
            let c = Checkpoint {
                attempt,
                spent_epochs,
                spent_calls,
                spent_judge,
                spent_failed,
                state: s.clone(),
            };
            write_atomic(p, &serde_json::to_string(&c).expect("checkpoint serializes"))
        };
        let state = refiner.run(state, &mut save)?;
        spent_epochs += state.epoch;
        spent_calls += state.proposal_calls + state.judge_calls;
        spent_judge += state.judge_calls;
        spent_failed += state.failed_epochs();
        let best = state.pool.best(cfg.refine.rubric_weight).cloned();
        if best.is_none() && cfg.rerun_empty && attempt == 1 {
            log::warn!("{}: no scored candidate, running once more", sample.id);
            attempt = 2;
            continue;
        }
        let ood_scores = match &best {
            Some(b) => evaluate_ood(&b.structure, b.coefficients.as_deref(), sample, &cfg.verify),
            None => sample
                .has_ood()
                .then(|| ScoreCard::failed(sample.task, 0, "no scored candidate")),
        };
        return Ok(RunResult {
            sample_id: sample.id.clone(),
            task: sample.task,
            dim: sample.dim,
            id_scores: best.as_ref().map(|b| b.card.clone()),
            proximity: best.as_ref().and_then(|b| b.card.proximity),
            complexity: best.as_ref().map(|b| b.card.complexity),
            best,
            ood_scores,
            curve: state.curve,
            epochs: spent_epochs,
            failed_epochs: spent_failed,
            model_calls: spent_calls,
            judge_calls: spent_judge,
            attempts: attempt,
            config_fingerprint: cfg.fingerprint(),
            transcript: model.map(|_| TRANSCRIPT_FILE.to_string()),
        });
    }
}

/// Reads a results log. A final line cut short by an interrupted write is
/// ignored.
pub fn read_results(path: &Path) -> Result<Vec<RunResult>, EngineError> {
    let file = File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io_err(path))?;
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) if i + 1 == lines.len() => log::warn!("ignoring truncated last record: {e}"),
            Err(source) => {
                return Err(EngineError::Record {
                    path: path.to_path_buf(),
                    source,
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// Every record in the results log after this invocation.
    pub results: Vec<RunResult>,
    pub completed: usize,
    /// Samples already present in the log.
    pub skipped: usize,
    /// Samples that stopped with a runtime error, by id.
    pub errors: Vec<(String, String)>,
}

/// Evaluates `samples` into `cfg.output`, skipping samples already in the
/// results log and resuming interrupted ones from their checkpoints.
/// Records are appended in dataset order.
pub fn run_dataset(
    cfg: &RunConfig,
    samples: &[Sample],
    model: Option<&dyn ChatModel>,
) -> Result<RunSummary, EngineError> {
    let cfg = cfg.resolved();
    cfg.refine.validate()?;
    let out = &cfg.output;
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(io_err(&ckpt_dir))?;
    let snapshot = out.join(CONFIG_SNAPSHOT);
    write_atomic(
        &snapshot,
        &(serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n"),
    )?;

    let selected: Vec<&Sample> = samples
        .iter()
        .filter(|s| cfg.tasks.is_empty() || cfg.tasks.contains(&s.task))
        .collect();
    // configuration problems surface before any work starts
    for s in &selected {
        Refiner::new(s, &cfg.refine, &cfg.gp, &cfg.verify, model)?;
    }

    let results_path = out.join(RESULTS_FILE);
    let done: HashSet<String> = if results_path.exists() {
        read_results(&results_path)?.into_iter().map(|r| r.sample_id).collect()
    } else {
        HashSet::new()
    };
    let pending: Vec<&Sample> = selected.iter().copied().filter(|s| !done.contains(&s.id)).collect();
    let skipped = selected.len() - pending.len();

    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&results_path)
        .map_err(io_err(&results_path))?;
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<RunResult, EngineError>)>();
    let mut completed = 0;
    let mut errors = Vec::new();
    let workers = cfg.parallelism.min(pending.len()).max(1);
    std::thread::scope(|scope| -> Result<(), EngineError> {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, cfg, ckpt_dir) = (&next, &pending, &cfg, &ckpt_dir);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(s) = pending.get(i) else { break };
                let ckpt = ckpt_dir.join(format!("{}.json", file_stem(&s.id)));
                let r = run_sample(s, cfg, model, Some(&ckpt));
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer, releasing records in dataset order
        let mut buffer: BTreeMap<usize, Result<RunResult, EngineError>> = BTreeMap::new();
        let mut cursor = 0;
        for (i, r) in rx {
            buffer.insert(i, r);
            while let Some(r) = buffer.remove(&cursor) {
                let id = &pending[cursor].id;
                match r {
                    Ok(res) => {
                        let line = serde_json::to_string(&res).expect("result serializes");
                        writeln!(log, "{line}")
                            .and_then(|_| log.flush())
                            .map_err(io_err(&results_path))?;
                        let ckpt = ckpt_dir.join(format!("{}.json", file_stem(id)));
                        let _ = fs::remove_file(ckpt);
                        completed += 1;
                    }
                    Err(e) => {
                        log::error!("{id}: {e}");
                        errors.push((id.clone(), e.to_string()));
                    }
                }
                cursor += 1;
            }
        }
        Ok(())
    })?;

    let results = read_results(&results_path)?;
    if !results.is_empty() {
        report::write_report(out, &results)?;
    }
    Ok(RunSummary {
        results,
        completed,
        skipped,
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_ignores_output_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 7;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn seed_propagates() {
        let mut c = RunConfig::default();
        c.seed = 11;
        let r = c.resolved();
        assert_eq!((r.gp.seed, r.verify.fit.seed), (11, 11));
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("a/b c.d"), "a_b_c.d");
    }
}

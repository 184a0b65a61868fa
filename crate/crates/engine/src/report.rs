//! Aggregate tables, complexity correlations and convergence curves over a
//! set of run results.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use symlaw_core::metrics::{
    complexity_accuracy_correlation, sr2_and_acc, ScoreCard, ScoreDetail,
};
use symlaw_core::TaskKind;
use thiserror::Error;

use crate::harness::RunResult;
use crate::EngineError;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_TEXT: &str = "report.txt";

/// R² threshold for equation accuracy and out-of-distribution success.
pub const CDE_THRESHOLD: f64 = 0.9;
/// F1 thresholds for Boolean networks and causal graphs.
pub const F1_THRESHOLDS: [f64; 3] = [0.5, 0.7, 0.8];
/// F1 above which a network or graph counts as an out-of-distribution success.
pub const F1_SUCCESS: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReportError {
    #[error("no results to report")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdeRow {
    /// `all` or `dim=<d>`.
    pub stratum: String,
    pub samples: usize,
    pub id_sr2: f64,
    pub id_acc: f64,
    pub ood_sr2: Option<f64>,
    pub ood_acc: Option<f64>,
    pub complexity: Option<f64>,
    pub proximity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BnRow {
    pub samples: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub bookmaker: f64,
    pub f1: f64,
    /// Percentage of samples with F1 above each of [`F1_THRESHOLDS`].
    pub acc: [f64; 3],
    pub ood_f1: Option<f64>,
    pub complexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScmRow {
    pub samples: usize,
    /// Samples with a known graph, over which the edge metrics are taken.
    pub with_truth: usize,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fdr: Option<f64>,
    pub acc: Option<[f64; 3]>,
    pub shd: Option<f64>,
    pub complexity: Option<f64>,
    pub ci: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationRow {
    pub task: TaskKind,
    pub stratum: String,
    pub samples: usize,
    /// Absent with fewer than three samples or no variation.
    pub r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub task: TaskKind,
    /// Mean best objective after each epoch; finished samples carry their
    /// last value forward.
    pub points: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub samples: usize,
    pub cde: Vec<CdeRow>,
    pub bn: Option<BnRow>,
    pub scm: Option<ScmRow>,
    pub correlations: Vec<CorrelationRow>,
    pub curves: Vec<Curve>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn pct(x: f64) -> f64 {
    100.0 * x
}

/// Primary score with failures as NaN, which aggregation treats as ≤ 0.
fn primary(card: Option<&ScoreCard>) -> f64 {
    card.and_then(|c| c.primary).unwrap_or(f64::NAN)
}

fn best_complexity(r: &RunResult) -> Option<f64> {
    r.complexity.map(|c| c as f64)
}

fn cde_row(stratum: String, rs: &[&RunResult]) -> CdeRow {
    let id: Vec<f64> = rs.iter().map(|r| primary(r.id_scores.as_ref())).collect();
    let (id_sr2, id_acc) = sr2_and_acc(&id, CDE_THRESHOLD).expect("non-empty stratum");
    let ood: Vec<f64> = rs
        .iter()
        .filter_map(|r| r.ood_scores.as_ref())
        .map(|c| primary(Some(c)))
        .collect();
    let ood = sr2_and_acc(&ood, CDE_THRESHOLD).ok();
    CdeRow {
        stratum,
        samples: rs.len(),
        id_sr2: pct(id_sr2),
        id_acc: pct(id_acc),
        ood_sr2: ood.map(|o| pct(o.0)),
        ood_acc: ood.map(|o| pct(o.1)),
        complexity: mean(rs.iter().filter_map(|r| best_complexity(r))),
        proximity: mean(rs.iter().filter_map(|r| r.proximity.map(|p| p as f64))),
    }
}

fn thresholds(f1: &[f64]) -> [f64; 3] {
    F1_THRESHOLDS.map(|t| pct(sr2_and_acc(f1, t).expect("non-empty").1))
}

fn bn_row(rs: &[&RunResult]) -> BnRow {
    let scores: Vec<_> = rs
        .iter()
        .map(|r| match r.id_scores.as_ref().and_then(|c| c.detail.as_ref()) {
            Some(ScoreDetail::Bn(s)) => Some(*s),
            _ => None,
        })
        .collect();
    let field = |f: fn(&symlaw_core::metrics::BnScores) -> f64| {
        pct(mean(scores.iter().map(|s| s.as_ref().map_or(0.0, f))).unwrap_or(0.0))
    };
    let f1: Vec<f64> = rs.iter().map(|r| primary(r.id_scores.as_ref())).collect();
    BnRow {
        samples: rs.len(),
        precision: field(|s| s.precision),
        recall: field(|s| s.recall),
        accuracy: field(|s| s.accuracy),
        bookmaker: field(|s| s.bookmaker),
        f1: field(|s| s.f1),
        acc: thresholds(&f1),
        ood_f1: mean(
            rs.iter()
                .filter_map(|r| r.ood_scores.as_ref())
                .map(|c| c.primary.unwrap_or(0.0)),
        )
        .map(pct),
        complexity: mean(rs.iter().filter_map(|r| best_complexity(r))),
    }
}

fn scm_edges(r: &RunResult) -> Option<symlaw_core::metrics::ScmScores> {
    match r.id_scores.as_ref()?.detail.as_ref()? {
        ScoreDetail::Scm { edges, .. } => *edges,
        _ => None,
    }
}

fn scm_row(rs: &[&RunResult]) -> ScmRow {
    let edges: Vec<_> = rs.iter().filter_map(|r| scm_edges(r)).collect();
    let f1: Vec<f64> = edges.iter().map(|e| e.f1).collect();
    let field = |f: fn(&symlaw_core::metrics::ScmScores) -> f64| mean(edges.iter().map(f));
    ScmRow {
        samples: rs.len(),
        with_truth: edges.len(),
        f1: field(|e| e.f1).map(pct),
        precision: field(|e| e.precision).map(pct),
        recall: field(|e| e.recall).map(pct),
        fdr: field(|e| e.fdr).map(pct),
        acc: (!f1.is_empty()).then(|| thresholds(&f1)),
        shd: field(|e| e.shd as f64),
        complexity: mean(rs.iter().filter_map(|r| best_complexity(r))),
        ci: mean(rs.iter().filter_map(|r| r.id_scores.as_ref()?.primary)),
    }
}

/// Whether the best candidate generalized, when that can be judged.
fn ood_success(r: &RunResult) -> Option<bool> {
    let card = r.ood_scores.as_ref()?;
    match r.task {
        TaskKind::Cde => Some(card.primary.is_some_and(|p| p > CDE_THRESHOLD)),
        TaskKind::Bn => Some(card.primary.is_some_and(|p| p > F1_SUCCESS)),
        TaskKind::Scm => match &card.detail {
            Some(ScoreDetail::Scm { edges: Some(e), .. }) => Some(e.f1 > F1_SUCCESS),
            _ => card.is_failed().then_some(false),
        },
    }
}

fn correlation_rows(task: TaskKind, rs: &[&RunResult]) -> Vec<CorrelationRow> {
    let dims: BTreeSet<usize> = rs.iter().map(|r| r.dim).collect();
    let mut strata = vec![("all".to_string(), None)];
    strata.extend(dims.into_iter().map(|d| (format!("dim={d}"), Some(d))));
    strata
        .into_iter()
        .map(|(stratum, dim)| {
            let records: Vec<(f64, f64)> = rs
                .iter()
                .filter(|r| dim.is_none_or(|d| r.dim == d))
                .filter_map(|r| {
                    let ok = ood_success(r)?;
                    Some((r.complexity? as f64, if ok { 1.0 } else { 0.0 }))
                })
                .collect();
            CorrelationRow {
                task,
                stratum,
                samples: records.len(),
                r: complexity_accuracy_correlation(&records).ok(),
            }
        })
        .collect()
}

fn curve(task: TaskKind, rs: &[&RunResult]) -> Curve {
    let len = rs.iter().map(|r| r.curve.len()).max().unwrap_or(0);
    let points = (0..len)
        .map(|k| {
            mean(rs.iter().filter_map(|r| {
                let last = r.curve.len().checked_sub(1)?;
                r.curve[k.min(last)]
            }))
        })
        .collect();
    Curve { task, points }
}

pub fn report(results: &[RunResult]) -> Result<Report, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let of = |t: TaskKind| -> Vec<&RunResult> { results.iter().filter(|r| r.task == t).collect() };
    let (cde, bn, scm) = (of(TaskKind::Cde), of(TaskKind::Bn), of(TaskKind::Scm));

    let mut cde_rows = Vec::new();
    if !cde.is_empty() {
        cde_rows.push(cde_row("all".into(), &cde));
        let dims: BTreeSet<usize> = cde.iter().map(|r| r.dim).collect();
        for d in dims {
            let sub: Vec<&RunResult> = cde.iter().copied().filter(|r| r.dim == d).collect();
            cde_rows.push(cde_row(format!("dim={d}"), &sub));
        }
    }
    let mut correlations = Vec::new();
    let mut curves = Vec::new();
    for (task, rs) in [(TaskKind::Cde, &cde), (TaskKind::Bn, &bn), (TaskKind::Scm, &scm)] {
        if !rs.is_empty() {
            correlations.extend(correlation_rows(task, rs));
            curves.push(curve(task, rs));
        }
    }
    Ok(Report {
        samples: results.len(),
        cde: cde_rows,
        bn: (!bn.is_empty()).then(|| bn_row(&bn)),
        scm: (!scm.is_empty()).then(|| scm_row(&scm)),
        correlations,
        curves,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl Report {
    pub fn render_text(&self) -> String {
        let mut out = format!("samples: {}\n", self.samples);
        if !self.cde.is_empty() {
            out.push_str("\nDifferential equations\n");
            let _ = writeln!(
                out,
                "{:<8} {:>4} {:>8} {:>8} {:>8} {:>8} {:>10} {:>9}",
                "stratum", "n", "SR2", "ACC0.9", "SR2-ood", "ACC-ood", "complexity", "proximity"
            );
            for r in &self.cde {
                let _ = writeln!(
                    out,
                    "{:<8} {:>4} {:>8.2} {:>8.2} {:>8} {:>8} {:>10} {:>9}",
                    r.stratum,
                    r.samples,
                    r.id_sr2,
                    r.id_acc,
                    cell(r.ood_sr2),
                    cell(r.ood_acc),
                    cell(r.complexity),
                    cell(r.proximity)
                );
            }
        }
        if let Some(b) = &self.bn {
            out.push_str("\nBoolean networks\n");
            let _ = writeln!(
                out,
                "{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
                "n", "P", "R", "Acc", "BM", "F1", "ACC0.5", "ACC0.7", "ACC0.8", "F1-ood"
            );
            let _ = writeln!(
                out,
                "{:>4} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8}",
                b.samples,
                b.precision,
                b.recall,
                b.accuracy,
                b.bookmaker,
                b.f1,
                b.acc[0],
                b.acc[1],
                b.acc[2],
                cell(b.ood_f1)
            );
        }
        if let Some(s) = &self.scm {
            out.push_str("\nCausal graphs\n");
            let _ = writeln!(
                out,
                "{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8}",
                "n", "F1", "P", "R", "FDR", "ACC0.5", "ACC0.7", "ACC0.8", "SHD", "complexity", "CI"
            );
            let acc = |i: usize| cell(s.acc.map(|a| a[i]));
            let _ = writeln!(
                out,
                "{:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>8}",
                s.samples,
                cell(s.f1),
                cell(s.precision),
                cell(s.recall),
                cell(s.fdr),
                acc(0),
                acc(1),
                acc(2),
                cell(s.shd),
                cell(s.complexity),
                s.ci.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
            );
        }
        if !self.correlations.is_empty() {
            out.push_str("\nComplexity vs out-of-distribution success (Pearson r)\n");
            for c in &self.correlations {
                let _ = writeln!(
                    out,
                    "{:<4} {:<8} n={:<4} r={}",
                    c.task,
                    c.stratum,
                    c.samples,
                    c.r.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"))
                );
            }
        }
        for c in &self.curves {
            let _ = write!(out, "\nConvergence ({})\n", c.task);
            for (k, p) in c.points.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:>4} {}",
                    k + 1,
                    p.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
                );
            }
        }
        out
    }
}

/// Builds the report and writes the structured and plain-text forms to `dir`.
pub fn write_report(dir: &Path, results: &[RunResult]) -> Result<Report, EngineError> {
    let rep = report(results)?;
    let io = |path: std::path::PathBuf| {
        move |source| EngineError::Io { path, source }
    };
    let json = dir.join(REPORT_JSON);
    fs::write(&json, serde_json::to_string_pretty(&rep).expect("report serializes") + "\n")
        .map_err(io(json.clone()))?;
    let txt = dir.join(REPORT_TEXT);
    fs::write(&txt, rep.render_text()).map_err(io(txt.clone()))?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(task: TaskKind, dim: usize, id: Option<f64>, ood: Option<f64>, complexity: usize) -> RunResult {
        let card = |v: Option<f64>| match v {
            Some(v) => ScoreCard::scored(task, v, v, complexity),
            None => ScoreCard::failed(task, complexity, "integration diverged"),
        };
        RunResult {
            sample_id: format!("s{dim}{complexity}"),
            task,
            dim,
            best: None,
            id_scores: Some(card(id)),
            ood_scores: Some(card(ood)),
            proximity: Some(0),
            complexity: Some(complexity),
            curve: vec![id],
            epochs: 1,
            failed_epochs: 0,
            model_calls: 1,
            judge_calls: 0,
            attempts: 1,
            config_fingerprint: String::new(),
            transcript: None,
        }
    }

    #[test]
    fn perfect_result() {
        let r = report(&[result(TaskKind::Cde, 1, Some(1.0), Some(1.0), 5)]).unwrap();
        assert_eq!((r.cde[0].id_sr2, r.cde[0].id_acc), (100.0, 100.0));
        assert_eq!(r.cde[0].ood_sr2, Some(100.0));
    }

    #[test]
    fn negative_scores_are_clipped() {
        let r = report(&[
            result(TaskKind::Cde, 1, Some(0.95), None, 5),
            result(TaskKind::Cde, 2, Some(-0.5), Some(0.2), 9),
        ])
        .unwrap();
        assert!((r.cde[0].id_sr2 - 47.5).abs() < 1e-12);
        assert_eq!(r.cde[0].id_acc, 50.0);
        assert_eq!(r.cde[0].ood_sr2, Some(10.0));
        assert_eq!(r.cde.iter().map(|c| c.stratum.as_str()).collect::<Vec<_>>(), ["all", "dim=1", "dim=2"]);
    }

    #[test]
    fn bn_thresholds_are_strict() {
        let rs: Vec<_> = [0.5, 0.75, 0.9, 0.3]
            .iter()
            .map(|&f| result(TaskKind::Bn, 5, Some(f), Some(f), 3))
            .collect();
        let b = report(&rs).unwrap().bn.unwrap();
        assert_eq!(b.acc, [50.0, 50.0, 25.0]);
    }

    #[test]
    fn correlation_needs_three_records() {
        let rs = vec![
            result(TaskKind::Cde, 1, Some(1.0), Some(1.0), 3),
            result(TaskKind::Cde, 1, Some(1.0), Some(0.1), 20),
        ];
        let r = report(&rs).unwrap();
        assert_eq!(r.correlations[0].r, None);
        let mut more = rs.clone();
        more.push(result(TaskKind::Cde, 1, Some(1.0), Some(0.95), 4));
        let c = report(&more).unwrap().correlations[0].r.unwrap();
        assert!(c < -0.9);
    }

    #[test]
    fn curves_carry_forward() {
        let mut a = result(TaskKind::Cde, 1, Some(0.5), None, 1);
        a.curve = vec![Some(0.2), Some(0.5)];
        let mut b = result(TaskKind::Cde, 1, Some(1.0), None, 1);
        b.curve = vec![Some(1.0)];
        let r = report(&[a, b]).unwrap();
        assert_eq!(r.curves[0].points, [Some(0.6), Some(0.75)]);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(report(&[]).unwrap_err(), ReportError::Empty);
    }
}

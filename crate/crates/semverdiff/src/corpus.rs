//! Corpus manifests and batch evaluation.
//!
//! A corpus is a directory of labeled cases, each holding an old and a new
//! snapshot of a small library plus the public API under scrutiny. The
//! manifest lists the cases with their expected outcome; running the corpus
//! replays the full analysis over every case and scores the observed
//! verdicts against the labels.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::loader::{load_snapshot, LoadError};
use crate::report::{analyze_upgrade, AnalysisConfig, ApiStatus, DumpOptions, UpgradeError};

/// Expected outcome of one corpus case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseLabel {
    Semb,
    Compatible,
    Synb,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Semb => "SEMB",
            CaseLabel::Compatible => "COMPATIBLE",
            CaseLabel::Synb => "SYNB",
        }
    }
}

/// One manifest entry. Directories are resolved relative to the manifest
/// file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseSpec {
    pub name: String,
    pub old_dir: String,
    pub new_dir: String,
    pub api: String,
    pub label: CaseLabel,
    pub category: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub cases: Vec<CaseSpec>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {}: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("case `{name}` ({side} snapshot): {source}")]
    Load {
        name: String,
        side: &'static str,
        #[source]
        source: LoadError,
    },
    #[error("case `{name}`: {source}")]
    Analysis {
        name: String,
        #[source]
        source: UpgradeError,
    },
    #[error("case `{name}`: api `{api}` appears neither in the verdicts nor in the synb list")]
    MissingApi { name: String, api: String },
}

/// SemB detection quality over a labeled corpus. The optional ratios are
/// undefined when their denominator is zero and print as `N.A.`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f_measure: Option<f64>,
}

impl Metrics {
    pub fn from_counts(
        true_positives: usize,
        false_positives: usize,
        false_negatives: usize,
        true_negatives: usize,
    ) -> Metrics {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(true_positives, true_positives + false_positives);
        let recall = ratio(true_positives, true_positives + false_negatives);
        let f_measure = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Metrics {
            true_positives,
            false_positives,
            false_negatives,
            true_negatives,
            precision,
            recall,
            f_measure,
        }
    }

    /// Formats an optional ratio as a percentage with two decimals.
    pub fn percent(value: Option<f64>) -> String {
        match value {
            Some(v) => format!("{:.2}%", v * 100.0),
            None => "N.A.".to_string(),
        }
    }
}

/// Observed outcome of one case next to its expectation.
#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub name: String,
    pub category: String,
    pub expected: CaseLabel,
    /// Verdict status of the API under scrutiny, absent when the API landed
    /// in the synb list instead.
    pub status: Option<ApiStatus>,
    /// Whether the API was reported as syntactically broken.
    pub synb: bool,
    /// Highest kernel score among the API's clusters, when any.
    pub k: Option<f64>,
    pub pass: bool,
}

/// Everything a corpus run produced.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusReport {
    pub results: Vec<CaseResult>,
    pub metrics: Metrics,
    pub gates: GateReport,
}

impl CorpusReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    /// Case results grouped by manifest category, in category order.
    pub fn by_category(&self) -> BTreeMap<&str, Vec<&CaseResult>> {
        let mut groups: BTreeMap<&str, Vec<&CaseResult>> = BTreeMap::new();
        for result in &self.results {
            groups
                .entry(result.category.as_str())
                .or_default()
                .push(result);
        }
        groups
    }
}

/// The corpus quality gates. A labeled corpus may legitimately contain
/// documented false positives, so the bar is not per-case perfection:
/// every semantic break must be caught, refactorings must never be
/// flagged, at most one benign case in five may be flagged, syntactic
/// breaks must all be reported, and no case may end in an error.
#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub semb_total: usize,
    pub semb_caught: usize,
    pub refactoring_total: usize,
    pub refactoring_false_positives: usize,
    pub benign_total: usize,
    pub benign_false_positives: usize,
    pub synb_total: usize,
    pub synb_caught: usize,
    pub clean: bool,
    pub pass: bool,
}

/// Benign false-positive ceiling: one case in five.
pub const BENIGN_FP_CAP: f64 = 0.2;

impl GateReport {
    fn evaluate(results: &[CaseResult]) -> GateReport {
        let mut gates = GateReport {
            semb_total: 0,
            semb_caught: 0,
            refactoring_total: 0,
            refactoring_false_positives: 0,
            benign_total: 0,
            benign_false_positives: 0,
            synb_total: 0,
            synb_caught: 0,
            clean: true,
            pass: false,
        };
        for result in results {
            let observed_semb = result.status == Some(ApiStatus::Semb);
            match result.expected {
                CaseLabel::Semb => {
                    gates.semb_total += 1;
                    gates.semb_caught += usize::from(observed_semb);
                }
                CaseLabel::Synb => {
                    gates.synb_total += 1;
                    gates.synb_caught += usize::from(result.synb);
                }
                CaseLabel::Compatible if result.category == "refactoring" => {
                    gates.refactoring_total += 1;
                    gates.refactoring_false_positives += usize::from(observed_semb);
                }
                CaseLabel::Compatible => {
                    gates.benign_total += 1;
                    gates.benign_false_positives += usize::from(observed_semb);
                }
            }
            if result.status == Some(ApiStatus::Error) || (result.status.is_none() && !result.synb)
            {
                gates.clean = false;
            }
        }
        let benign_ok = gates.benign_total == 0
            || gates.benign_false_positives as f64 / gates.benign_total as f64 <= BENIGN_FP_CAP;
        gates.pass = gates.semb_caught == gates.semb_total
            && gates.refactoring_false_positives == 0
            && benign_ok
            && gates.synb_caught == gates.synb_total
            && gates.clean;
        gates
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CorpusError> {
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CorpusError::Manifest {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every case of the manifest, in parallel, and scores the outcomes.
/// Results keep the manifest order. Cases labeled SYNB are judged against
/// the syntactic report alone and stay out of the semantic confusion
/// matrix.
pub fn run_corpus(
    manifest_path: &Path,
    config: &AnalysisConfig,
) -> Result<CorpusReport, CorpusError> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let results: Vec<CaseResult> = manifest
        .cases
        .par_iter()
        .map(|case| run_case(base, case, config))
        .collect::<Result<_, _>>()?;

    let mut counts = [0usize; 4];
    for result in &results {
        if result.expected == CaseLabel::Synb {
            continue;
        }
        let observed_semb = result.status == Some(ApiStatus::Semb);
        let expected_semb = result.expected == CaseLabel::Semb;
        let bucket = match (expected_semb, observed_semb) {
            (true, true) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (false, false) => 3,
        };
        counts[bucket] += 1;
    }
    let gates = GateReport::evaluate(&results);
    Ok(CorpusReport {
        results,
        metrics: Metrics::from_counts(counts[0], counts[1], counts[2], counts[3]),
        gates,
    })
}

fn run_case(
    base: &Path,
    case: &CaseSpec,
    config: &AnalysisConfig,
) -> Result<CaseResult, CorpusError> {
    let load = |dir: &str, side: &'static str| {
        load_snapshot(&base.join(dir), None).map_err(|source| CorpusError::Load {
            name: case.name.clone(),
            side,
            source,
        })
    };
    let old = load(&case.old_dir, "old")?;
    let new = load(&case.new_dir, "new")?;
    let report =
        analyze_upgrade(&old, &new, config, &DumpOptions::default()).map_err(|source| {
            CorpusError::Analysis {
                name: case.name.clone(),
                source,
            }
        })?;

    let synb = report.synb.iter().any(|f| f.signature == case.api);
    let verdict = report.verdicts.iter().find(|v| v.api == case.api);
    if !synb && verdict.is_none() {
        return Err(CorpusError::MissingApi {
            name: case.name.clone(),
            api: case.api.clone(),
        });
    }
    let status = verdict.map(|v| v.status);
    let k = verdict.and_then(|v| {
        v.clusters
            .iter()
            .map(|c| c.k)
            .max_by(|a, b| a.partial_cmp(b).expect("kernel scores are finite"))
    });
    let pass = match case.label {
        CaseLabel::Semb => status == Some(ApiStatus::Semb),
        CaseLabel::Synb => synb,
        CaseLabel::Compatible => matches!(
            status,
            Some(ApiStatus::Unchanged) | Some(ApiStatus::ChangedCompatible)
        ),
    };
    Ok(CaseResult {
        name: case.name.clone(),
        category: case.category.clone(),
        expected: case.label,
        status,
        synb,
        k,
        pass,
    })
}

/// Renders a corpus report as one line per case plus a metrics footer.
pub fn render_corpus_text(report: &CorpusReport) -> String {
    let mut out = String::new();
    for result in &report.results {
        let observed = if result.synb {
            "synb".to_string()
        } else {
            match result.status {
                Some(status) => status.as_str().to_string(),
                None => "missing".to_string(),
            }
        };
        let score = match result.k {
            Some(k) => format!(" k={k:.4}"),
            None => String::new(),
        };
        out.push_str(&format!(
            "{} {} [{}] expected={} observed={observed}{score}\n",
            if result.pass { "PASS" } else { "FAIL" },
            result.name,
            result.category,
            result.expected.as_str(),
        ));
    }
    let m = &report.metrics;
    out.push_str(&format!(
        "semb detection: tp={} fp={} fn={} tn={} precision={} recall={} f-measure={}\n",
        m.true_positives,
        m.false_positives,
        m.false_negatives,
        m.true_negatives,
        Metrics::percent(m.precision),
        Metrics::percent(m.recall),
        Metrics::percent(m.f_measure),
    ));
    out.push_str(&format!(
        "cases: {} total, {} pass, {} fail\n",
        report.results.len(),
        report.results.iter().filter(|r| r.pass).count(),
        report.results.iter().filter(|r| !r.pass).count(),
    ));
    let g = &report.gates;
    let verdict = |ok: bool| if ok { "ok" } else { "VIOLATED" };
    out.push_str(&format!(
        "gate semb recall: {}/{} caught, {}\n",
        g.semb_caught,
        g.semb_total,
        verdict(g.semb_caught == g.semb_total),
    ));
    out.push_str(&format!(
        "gate refactoring fp: {}/{} flagged, {}\n",
        g.refactoring_false_positives,
        g.refactoring_total,
        verdict(g.refactoring_false_positives == 0),
    ));
    let benign_rate = if g.benign_total > 0 {
        g.benign_false_positives as f64 / g.benign_total as f64
    } else {
        0.0
    };
    out.push_str(&format!(
        "gate benign fp: {}/{} flagged ({:.2}%, cap {:.0}%), {}\n",
        g.benign_false_positives,
        g.benign_total,
        benign_rate * 100.0,
        BENIGN_FP_CAP * 100.0,
        verdict(benign_rate <= BENIGN_FP_CAP),
    ));
    out.push_str(&format!(
        "gate synb: {}/{} reported, {}\n",
        g.synb_caught,
        g.synb_total,
        verdict(g.synb_caught == g.synb_total),
    ));
    out.push_str(&format!(
        "gates overall: {}\n",
        if g.pass { "pass" } else { "FAIL" }
    ));
    out
}

/// Exit status of the corpus subcommand: zero when the quality gates hold.
pub fn corpus_exit_code(report: &CorpusReport) -> i32 {
    if report.gates.pass {
        0
    } else {
        1
    }
}

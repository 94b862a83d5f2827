//! Upgrade analysis driver and report assembly.
//!
//! This module runs the whole pipeline for a pair of snapshots: pair the
//! public APIs, build both call graphs, cluster the changed methods each
//! API can reach, slice and compare every cluster, and fold the outcomes
//! into a single report. The report serializes to JSON with a stable field
//! order and stable iteration order everywhere, so two runs over the same
//! input produce byte-identical output.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::benign::{classify, BenignSet, BenignTag};
use crate::callgraph::{
    pair_apis, ApiPair, CallGraph, SynBKind, DEFAULT_DEPTH_CAP, DEFAULT_MAX_PATHS,
};
use crate::differ::{changed_methods, clusters, ChangeCluster};
use crate::impact::{propagatable, triggerable};
use crate::ir::{ModuleSnapshot, Signature, Version};
use crate::semdiff::{semantic_graph, wl_kernel, KernelConfig, KernelResult, PenaltyMode, Side};
use crate::slicer::{slice_cluster, ClusterSlice};

/// Tuning knobs of one analysis run.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Call-graph exploration depth, also the slicer's recursion budget.
    pub depth_cap: usize,
    /// Cap on enumerated call paths during propagation checks.
    pub max_paths: usize,
    pub kernel: KernelConfig,
}

impl Default for AnalysisConfig {
    fn default() -> AnalysisConfig {
        AnalysisConfig {
            depth_cap: DEFAULT_DEPTH_CAP,
            max_paths: DEFAULT_MAX_PATHS,
            kernel: KernelConfig::default(),
        }
    }
}

/// Which optional payloads each cluster entry should embed.
#[derive(Debug, Clone, Copy, Default)]
pub struct DumpOptions {
    pub summaries: bool,
    pub benign: bool,
    pub kernel: bool,
}

/// Final status of one public API.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStatus {
    Unchanged,
    ChangedCompatible,
    Semb,
    Error,
}

impl ApiStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ApiStatus::Unchanged => "unchanged",
            ApiStatus::ChangedCompatible => "changed_compatible",
            ApiStatus::Semb => "semb",
            ApiStatus::Error => "error",
        }
    }
}

/// Semantic version relation between the two snapshots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpgradeKind {
    Major,
    Minor,
    Patch,
}

impl UpgradeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UpgradeKind::Major => "major",
            UpgradeKind::Minor => "minor",
            UpgradeKind::Patch => "patch",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UpgradeError {
    #[error("invalid version string `{0}` (expected MAJOR.MINOR.PATCH)")]
    Parse(String),
    #[error("old and new snapshots carry the same version {0}")]
    EqualVersions(Version),
}

/// Parses a MAJOR.MINOR.PATCH string.
pub fn parse_version(text: &str) -> Result<Version, UpgradeError> {
    Version::parse(text).ok_or_else(|| UpgradeError::Parse(text.trim().to_string()))
}

/// Names the most significant version component that moved, in either
/// direction. Equal versions are rejected: there is no upgrade to classify.
pub fn classify_upgrade(old: &Version, new: &Version) -> Result<UpgradeKind, UpgradeError> {
    if old == new {
        return Err(UpgradeError::EqualVersions(*old));
    }
    if old.major != new.major {
        Ok(UpgradeKind::Major)
    } else if old.minor != new.minor {
        Ok(UpgradeKind::Minor)
    } else {
        Ok(UpgradeKind::Patch)
    }
}

/// Analysis parameters echoed into the report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportConfig {
    pub depth: usize,
    pub h: usize,
    pub threshold: f64,
    pub beta: f64,
    pub penalty_mode: PenaltyMode,
}

/// One condition summary in a dump: its predicate pair and the labels of
/// the data nodes feeding it.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionDump {
    pub dbs: String,
    pub data: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExceptionDump {
    pub exception: String,
    pub guard: String,
}

/// All summaries of one slice, flattened to sorted label lists.
#[derive(Debug, Clone, Serialize)]
pub struct SummariesSideDump {
    pub dds: Vec<String>,
    pub cds: Vec<ConditionDump>,
    pub es: Vec<ExceptionDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummariesDump {
    pub old: SummariesSideDump,
    pub new: SummariesSideDump,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenignNodeDump {
    pub node: String,
    pub tag: BenignTag,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenignDump {
    pub new: Vec<BenignNodeDump>,
    pub old_shadow: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelDump {
    pub per_iteration: Vec<f64>,
    pub unmatched_initial_old: Vec<String>,
    pub unmatched_initial_new: Vec<String>,
    pub unmatched_final_old: Vec<String>,
    pub unmatched_final_new: Vec<String>,
}

/// Outcome of comparing one change cluster.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterVerdict {
    pub members: Vec<String>,
    pub old_root: Option<String>,
    pub new_root: Option<String>,
    pub k: f64,
    pub is_semb: bool,
    pub triggerable: bool,
    pub propagatable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summaries: Option<SummariesDump>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benign: Option<BenignDump>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelDump>,
}

/// Outcome for one public API.
#[derive(Debug, Clone, Serialize)]
pub struct ApiVerdict {
    pub api: String,
    pub status: ApiStatus,
    pub clusters: Vec<ClusterVerdict>,
    pub evidence: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One syntactically broken API.
#[derive(Debug, Clone, Serialize)]
pub struct SynBVerdict {
    pub signature: String,
    pub kind: SynBKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Totals {
    pub unchanged: usize,
    pub changed_compatible: usize,
    pub semb: usize,
    pub synb: usize,
    pub error: usize,
}

/// Complete result of one upgrade analysis.
#[derive(Debug, Clone, Serialize)]
pub struct UpgradeReport {
    pub old_version: String,
    pub new_version: String,
    pub upgrade_kind: UpgradeKind,
    pub config: ReportConfig,
    pub verdicts: Vec<ApiVerdict>,
    pub synb: Vec<SynBVerdict>,
    pub totals: Totals,
}

/// Runs the full pipeline over two loaded snapshots.
///
/// APIs are assessed independently, in parallel, and reported in the old
/// snapshot's sorted public-method order. A failure inside one API's
/// assessment turns into an `error` verdict for that API alone.
pub fn analyze_upgrade(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    config: &AnalysisConfig,
    dumps: &DumpOptions,
) -> Result<UpgradeReport, UpgradeError> {
    let upgrade_kind = classify_upgrade(&old.version, &new.version)?;
    let changed = changed_methods(old, new);
    let (pairs, findings) = pair_apis(old, new);
    let verdicts: Vec<ApiVerdict> = pairs
        .par_iter()
        .map(|pair| assess_api(old, new, pair, &changed, config, dumps))
        .collect();

    let mut totals = Totals {
        synb: findings.len(),
        ..Totals::default()
    };
    for verdict in &verdicts {
        match verdict.status {
            ApiStatus::Unchanged => totals.unchanged += 1,
            ApiStatus::ChangedCompatible => totals.changed_compatible += 1,
            ApiStatus::Semb => totals.semb += 1,
            ApiStatus::Error => totals.error += 1,
        }
    }

    Ok(UpgradeReport {
        old_version: old.version.to_string(),
        new_version: new.version.to_string(),
        upgrade_kind,
        config: ReportConfig {
            depth: config.depth_cap,
            h: config.kernel.h,
            threshold: config.kernel.threshold,
            beta: config.kernel.beta,
            penalty_mode: config.kernel.penalty_mode,
        },
        verdicts,
        synb: findings
            .iter()
            .map(|f| SynBVerdict {
                signature: f.signature.display_string(),
                kind: f.kind,
            })
            .collect(),
        totals,
    })
}

/// Assesses one paired API.
///
/// The API is `semb` when at least one of its clusters scores above the
/// threshold and survives both impact checks, `changed_compatible` when
/// changes were reachable but none qualified, and `unchanged` otherwise.
/// Any stage failure yields an `error` status carrying the message.
pub fn assess_api(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    pair: &ApiPair,
    changed: &BTreeSet<Signature>,
    config: &AnalysisConfig,
    dumps: &DumpOptions,
) -> ApiVerdict {
    let mut verdict = ApiVerdict {
        api: pair.old.display_string(),
        status: ApiStatus::Unchanged,
        clusters: Vec::new(),
        evidence: Vec::new(),
        error: None,
    };
    let (Some(old_api), Some(new_api)) = (old.method(&pair.old), new.method(&pair.new)) else {
        verdict.status = ApiStatus::Error;
        verdict.error = Some("paired API does not resolve in its snapshot".to_string());
        return verdict;
    };
    let old_graph = CallGraph::build(old, old_api, config.depth_cap);
    let new_graph = CallGraph::build(new, new_api, config.depth_cap);
    let found = clusters(old, new, &old_graph, &new_graph, changed);
    if found.is_empty() {
        return verdict;
    }

    let mut any_semb = false;
    for cluster in &found {
        match assess_cluster(old, new, &old_graph, &new_graph, cluster, config, dumps) {
            Ok(None) => {}
            Ok(Some(outcome)) => {
                any_semb |= outcome.is_semb && outcome.triggerable && outcome.propagatable;
                append_evidence(&mut verdict.evidence, &outcome, config);
                verdict.clusters.push(outcome);
            }
            Err(message) => {
                verdict.status = ApiStatus::Error;
                verdict.error = Some(message);
                return verdict;
            }
        }
    }
    verdict.status = if any_semb {
        ApiStatus::Semb
    } else {
        ApiStatus::ChangedCompatible
    };
    verdict
}

fn assess_cluster(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    old_graph: &CallGraph,
    new_graph: &CallGraph,
    cluster: &ChangeCluster,
    config: &AnalysisConfig,
    dumps: &DumpOptions,
) -> Result<Option<ClusterVerdict>, String> {
    let old_slice = slice_cluster(
        old,
        &cluster.old_members,
        cluster.old_root.as_ref(),
        config.depth_cap,
    )
    .map_err(|e| e.to_string())?;
    let new_slice = slice_cluster(
        new,
        &cluster.new_members,
        cluster.new_root.as_ref(),
        config.depth_cap,
    )
    .map_err(|e| e.to_string())?;
    if old_slice.summaries.is_empty() && new_slice.summaries.is_empty() {
        return Ok(None);
    }

    let benign = classify(
        old,
        new,
        &cluster.old_members,
        &cluster.new_members,
        &old_slice,
        &new_slice,
    );
    let graph_old = semantic_graph(&old_slice, &benign, Side::Old);
    let graph_new = semantic_graph(&new_slice, &benign, Side::New);
    let kernel = wl_kernel(&graph_old, &graph_new, &config.kernel);

    let mut trig = false;
    let mut prop = false;
    if kernel.is_semb {
        trig = triggerable(old, &old_slice, &new_slice, &kernel);
        let exceptions: BTreeSet<String> = old_slice
            .summaries
            .es
            .values()
            .chain(new_slice.summaries.es.values())
            .map(|e| e.exception.clone())
            .collect();
        prop = match (&cluster.new_root, &cluster.old_root) {
            (Some(root), _) => propagatable(
                new,
                new_graph,
                root,
                &written_fields(new, &cluster.new_members),
                &exceptions,
                config.max_paths,
            ),
            (None, Some(root)) => propagatable(
                old,
                old_graph,
                root,
                &written_fields(old, &cluster.old_members),
                &exceptions,
                config.max_paths,
            ),
            (None, None) => false,
        };
    }

    Ok(Some(ClusterVerdict {
        members: cluster.members.iter().map(|s| s.display_string()).collect(),
        old_root: cluster.old_root.as_ref().map(|s| s.display_string()),
        new_root: cluster.new_root.as_ref().map(|s| s.display_string()),
        k: kernel.k,
        is_semb: kernel.is_semb,
        triggerable: trig,
        propagatable: prop,
        summaries: dumps.summaries.then(|| SummariesDump {
            old: dump_side(&old_slice),
            new: dump_side(&new_slice),
        }),
        benign: dumps.benign.then(|| dump_benign(&benign)),
        kernel: dumps
            .kernel
            .then(|| dump_kernel(&kernel, &old_slice, &new_slice)),
    }))
}

/// Fields written by any member of the cluster on one side.
fn written_fields(
    snapshot: &ModuleSnapshot,
    members: &BTreeSet<Signature>,
) -> BTreeSet<(String, String)> {
    let mut fields = BTreeSet::new();
    for sig in members {
        if let Some(method) = snapshot.method(sig) {
            fields.extend(method.fields_written());
        }
    }
    fields
}

fn append_evidence(evidence: &mut Vec<String>, outcome: &ClusterVerdict, config: &AnalysisConfig) {
    if !outcome.is_semb {
        return;
    }
    let root = outcome
        .new_root
        .as_deref()
        .or(outcome.old_root.as_deref())
        .unwrap_or("?");
    evidence.push(format!(
        "cluster rooted at {root}: k={:.4} exceeds threshold {}",
        outcome.k, config.kernel.threshold
    ));
}

fn dump_side(slice: &ClusterSlice) -> SummariesSideDump {
    let summaries = &slice.summaries;
    let mut dds: Vec<String> = summaries.dds.values().cloned().collect();
    dds.sort();
    let mut cds: Vec<ConditionDump> = summaries
        .cds
        .values()
        .map(|cond| {
            let mut data: Vec<String> = cond
                .associated_data
                .iter()
                .map(|o| summaries.label(o).unwrap_or_else(|| o.to_string()))
                .collect();
            data.sort();
            ConditionDump {
                dbs: cond.dbs.clone(),
                data,
            }
        })
        .collect();
    cds.sort_by(|a, b| (&a.dbs, &a.data).cmp(&(&b.dbs, &b.data)));
    let mut es: Vec<ExceptionDump> = summaries
        .es
        .values()
        .map(|e| ExceptionDump {
            exception: e.exception.clone(),
            guard: e.guard.clone(),
        })
        .collect();
    es.sort_by(|a, b| (&a.exception, &a.guard).cmp(&(&b.exception, &b.guard)));
    SummariesSideDump { dds, cds, es }
}

fn dump_benign(benign: &BenignSet) -> BenignDump {
    BenignDump {
        new: benign
            .entries
            .iter()
            .map(|(origin, tag)| BenignNodeDump {
                node: origin.to_string(),
                tag: *tag,
            })
            .collect(),
        old_shadow: benign.old_shadow.iter().map(|o| o.to_string()).collect(),
    }
}

fn dump_kernel(
    kernel: &KernelResult,
    old_slice: &ClusterSlice,
    new_slice: &ClusterSlice,
) -> KernelDump {
    let describe = |slice: &ClusterSlice, origins: &BTreeSet<crate::slicer::Origin>| {
        origins
            .iter()
            .map(|o| match slice.summaries.label(o) {
                Some(label) => format!("{o}: {label}"),
                None => o.to_string(),
            })
            .collect()
    };
    KernelDump {
        per_iteration: kernel.per_iteration.clone(),
        unmatched_initial_old: describe(old_slice, &kernel.unmatched_initial_old),
        unmatched_initial_new: describe(new_slice, &kernel.unmatched_initial_new),
        unmatched_final_old: describe(old_slice, &kernel.unmatched_final_old),
        unmatched_final_new: describe(new_slice, &kernel.unmatched_final_new),
    }
}

/// Serializes the report as pretty JSON with a trailing newline.
pub fn to_json(report: &UpgradeReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

/// Renders the report as a plain-text table with one line per API.
pub fn render_text(report: &UpgradeReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "upgrade {} -> {} ({})",
        report.old_version,
        report.new_version,
        report.upgrade_kind.as_str()
    );
    let _ = writeln!(
        out,
        "config: depth={} h={} threshold={} beta={} penalty_mode={}",
        report.config.depth,
        report.config.h,
        report.config.threshold,
        report.config.beta,
        match report.config.penalty_mode {
            PenaltyMode::PerNode => "per_node",
            PenaltyMode::Global => "global",
        }
    );
    let _ = writeln!(out);
    for verdict in &report.verdicts {
        let _ = writeln!(out, "{:<20} {}", verdict.status.as_str(), verdict.api);
        for cluster in &verdict.clusters {
            let _ = writeln!(
                out,
                "    cluster k={:.4} semb={} triggerable={} propagatable={} members=[{}]",
                cluster.k,
                cluster.is_semb,
                cluster.triggerable,
                cluster.propagatable,
                cluster.members.join(", ")
            );
        }
        for line in &verdict.evidence {
            let _ = writeln!(out, "    {line}");
        }
        if let Some(error) = &verdict.error {
            let _ = writeln!(out, "    error: {error}");
        }
    }
    for finding in &report.synb {
        let synb_kind = match finding.kind {
            SynBKind::MissingClass => "missing_class",
            SynBKind::MissingMethod => "missing_method",
            SynBKind::ParamChange => "param_change",
            SynBKind::ReturnNarrowing => "return_narrowing",
            SynBKind::VisibilityReduced => "visibility_reduced",
        };
        let _ = writeln!(out, "{:<20} {} ({synb_kind})", "synb", finding.signature);
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "totals: {} unchanged, {} changed_compatible, {} semb, {} synb, {} error",
        report.totals.unchanged,
        report.totals.changed_compatible,
        report.totals.semb,
        report.totals.synb,
        report.totals.error
    );
    out
}

/// Process exit code the CLI should use for this report: 1 when a breaking
/// change was found, 2 when nothing broke but some API could not be
/// assessed, 0 otherwise.
pub fn exit_code(report: &UpgradeReport) -> i32 {
    if report.totals.semb > 0 || report.totals.synb > 0 {
        1
    } else if report.totals.error > 0 {
        2
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::loader::snapshot_from_sources;

    fn snapshot(version: &str, source: &str) -> ModuleSnapshot {
        snapshot_from_sources(&[("m.mvil", source)], Version::parse(version).unwrap())
            .expect("fixture must load")
    }

    fn default_report(old: &ModuleSnapshot, new: &ModuleSnapshot) -> UpgradeReport {
        analyze_upgrade(
            old,
            new,
            &AnalysisConfig::default(),
            &DumpOptions::default(),
        )
        .expect("versions differ")
    }

    const STABLE_HELPER: &str = "method public int stable(int x) {\n\
         entry:\n  a = param 0;\n  r = binop add a, #10;\n  return r;\n\
         }\n";

    fn guard_removal_pair() -> (ModuleSnapshot, ModuleSnapshot) {
        let old = snapshot(
            "1.0.0",
            &format!(
                "class Dec {{\n\
                 field bool ready;\n\
                 method public int decode(int n) {{\n\
                 entry:\n\
                 \x20 n0 = param 0;\n\
                 \x20 has = getfield this, Dec.ready;\n\
                 \x20 branch has, work, empty;\n\
                 work:\n\
                 \x20 v = call Dec.fetch():int;\n\
                 \x20 r = binop mul v, n0;\n\
                 \x20 return r;\n\
                 empty:\n\
                 \x20 z = const #0;\n\
                 \x20 return z;\n\
                 }}\n\
                 method private int fetch() {{\n\
                 entry:\n  c = const #7;\n  return c;\n\
                 }}\n\
                 {STABLE_HELPER}\
                 }}\n"
            ),
        );
        let new = snapshot(
            "1.1.0",
            &format!(
                "class Dec {{\n\
                 field bool ready;\n\
                 method public int decode(int n) {{\n\
                 entry:\n\
                 \x20 n0 = param 0;\n\
                 \x20 v = call Dec.fetch():int;\n\
                 \x20 r = binop mul v, n0;\n\
                 \x20 return r;\n\
                 }}\n\
                 method private int fetch() {{\n\
                 entry:\n  c = const #7;\n  return c;\n\
                 }}\n\
                 {STABLE_HELPER}\
                 }}\n"
            ),
        );
        (old, new)
    }

    #[test]
    fn guard_removal_is_reported_as_semb() {
        let (old, new) = guard_removal_pair();
        let report = default_report(&old, &new);
        assert_eq!(report.upgrade_kind, UpgradeKind::Minor);
        assert_eq!(report.verdicts.len(), 2);

        let decode = &report.verdicts[0];
        assert_eq!(decode.api, "Dec.decode(int):int");
        assert_eq!(decode.status, ApiStatus::Semb);
        assert_eq!(decode.clusters.len(), 1);
        assert!(decode.clusters[0].is_semb);
        assert!(decode.clusters[0].triggerable);
        assert!(decode.clusters[0].propagatable);
        assert!(!decode.evidence.is_empty());

        let stable = &report.verdicts[1];
        assert_eq!(stable.api, "Dec.stable(int):int");
        assert_eq!(stable.status, ApiStatus::Unchanged);

        assert_eq!(report.totals.semb, 1);
        assert_eq!(report.totals.unchanged, 1);
        assert_eq!(exit_code(&report), 1);
    }

    #[test]
    fn summaries_dump_shows_the_condition_delta() {
        let (old, new) = guard_removal_pair();
        let dumps = DumpOptions {
            summaries: true,
            benign: true,
            kernel: true,
        };
        let report = analyze_upgrade(&old, &new, &AnalysisConfig::default(), &dumps).expect("runs");
        let cluster = &report.verdicts[0].clusters[0];
        let summaries = cluster.summaries.as_ref().expect("summaries requested");
        assert_eq!(summaries.old.cds.len(), 1);
        assert!(summaries.new.cds.is_empty());
        assert!(cluster.kernel.is_some());
        assert!(cluster.benign.is_some());
    }

    #[test]
    fn identical_snapshots_report_every_api_unchanged() {
        let source = format!("class Dec {{\n{STABLE_HELPER}}}\n");
        let old = snapshot("1.0.0", &source);
        let new = snapshot("1.0.1", &source);
        let report = default_report(&old, &new);
        assert_eq!(report.upgrade_kind, UpgradeKind::Patch);
        assert_eq!(report.totals.unchanged, 1);
        assert_eq!(report.totals.semb, 0);
        assert_eq!(exit_code(&report), 0);
    }

    #[test]
    fn missing_method_lands_in_synb_and_breaks_the_exit_code() {
        let old = snapshot("1.0.0", &format!("class Dec {{\n{STABLE_HELPER}}}\n"));
        let new = snapshot(
            "2.0.0",
            "class Dec {\n\
             method public int other(int x) {\n\
             entry:\n  a = param 0;\n  return a;\n\
             }\n}\n",
        );
        let report = default_report(&old, &new);
        assert_eq!(report.synb.len(), 1);
        assert_eq!(report.synb[0].signature, "Dec.stable(int):int");
        assert_eq!(report.totals.synb, 1);
        assert!(report.verdicts.is_empty());
        assert_eq!(exit_code(&report), 1);
    }

    #[test]
    fn slicer_failure_becomes_an_error_verdict_and_exit_two() {
        let build = |split_blocks: bool| {
            let mut body = String::from("class Chain {\n");
            for i in 0..16 {
                let vis = if i == 0 { "public" } else { "private" };
                body.push_str(&format!(
                    "method {vis} int m{i}(int x) {{\nentry:\n  p = param 0;\n"
                ));
                if split_blocks {
                    body.push_str("  goto fin;\nfin:\n");
                }
                if i == 15 {
                    body.push_str("  return p;\n");
                } else {
                    let next = i + 1;
                    body.push_str(&format!(
                        "  v = call Chain.m{next}(int):int p;\n  return v;\n"
                    ));
                }
                body.push_str("}\n");
            }
            body.push_str("}\n");
            body
        };
        let old = snapshot("1.0.0", &build(false));
        let new = snapshot("1.0.1", &build(true));
        let report = default_report(&old, &new);
        assert_eq!(report.verdicts[0].status, ApiStatus::Error);
        assert!(report.verdicts[0].error.is_some());
        assert_eq!(report.totals.error, 1);
        assert_eq!(report.totals.semb, 0);
        assert_eq!(exit_code(&report), 2);
    }

    #[test]
    fn reports_are_byte_identical_across_runs_and_round_trip() {
        let (old, new) = guard_removal_pair();
        let dumps = DumpOptions {
            summaries: true,
            benign: true,
            kernel: true,
        };
        let first =
            to_json(&analyze_upgrade(&old, &new, &AnalysisConfig::default(), &dumps).unwrap());
        let second =
            to_json(&analyze_upgrade(&old, &new, &AnalysisConfig::default(), &dumps).unwrap());
        assert_eq!(first, second);
        let value: serde_json::Value = serde_json::from_str(&first).expect("valid JSON");
        assert_eq!(value["totals"]["semb"], 1);
        assert_eq!(value["verdicts"][0]["status"], "semb");
    }

    #[test]
    fn upgrade_classification_and_version_errors() {
        let v = |t: &str| Version::parse(t).unwrap();
        assert_eq!(
            classify_upgrade(&v("1.2.3"), &v("2.0.0")),
            Ok(UpgradeKind::Major)
        );
        assert_eq!(
            classify_upgrade(&v("1.2.3"), &v("1.3.0")),
            Ok(UpgradeKind::Minor)
        );
        assert_eq!(
            classify_upgrade(&v("1.2.3"), &v("1.2.4")),
            Ok(UpgradeKind::Patch)
        );
        assert_eq!(
            classify_upgrade(&v("2.0.0"), &v("1.9.9")),
            Ok(UpgradeKind::Major)
        );
        assert!(matches!(
            classify_upgrade(&v("1.2.3"), &v("1.2.3")),
            Err(UpgradeError::EqualVersions(_))
        ));
        assert!(matches!(
            parse_version("not-a-version"),
            Err(UpgradeError::Parse(_))
        ));
        assert_eq!(parse_version(" 1.2.3\n"), Ok(v("1.2.3")));
    }

    #[test]
    fn text_rendering_lists_statuses_and_totals() {
        let (old, new) = guard_removal_pair();
        let report = default_report(&old, &new);
        let text = render_text(&report);
        assert!(text.starts_with("upgrade 1.0.0 -> 1.1.0 (minor)"));
        assert!(text.contains("semb"));
        assert!(text.contains("Dec.decode(int):int"));
        assert!(text.contains("totals: 1 unchanged, 0 changed_compatible, 1 semb, 0 synb, 0 error"));
    }
}

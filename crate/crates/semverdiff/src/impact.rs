//! Impact verification for a cluster whose kernel score crossed the
//! breaking threshold.
//!
//! A high score alone does not make a difference matter to clients. Two
//! extra checks gate the verdict. Triggerability asks whether some node
//! that failed to match depends only on inputs a client of the old version
//! can actually supply: parameters of the API, fields that already existed
//! in the old schema, or nothing at all. Propagatability asks whether the
//! effect of the cluster root can travel back up the call graph to the API
//! boundary, hop by hop, through return values, field traffic, or an
//! escaping exception.

use std::collections::BTreeSet;

use crate::callgraph::CallGraph;
use crate::cfg::{throw_target, Cfg};
use crate::ir::{ModuleSnapshot, Signature, StatementKind, Type};
use crate::pdg::Pdg;
use crate::semdiff::KernelResult;
use crate::slicer::{ClusterSlice, InputDescriptor, Origin};

/// Decides whether the mismatched part of the comparison can be reached by
/// a client of the old version.
///
/// The basis is the set of summary nodes left unmatched by the first
/// kernel iteration, on both sides. When every label matched initially and
/// the divergence is purely structural, the basis falls back to the nodes
/// unmatched after the last iteration. A basis node fires when it has no
/// linked inputs at all, when it depends on an API parameter, or when it
/// depends on a field that exists in the old schema. Fields introduced by
/// the new version only cannot be populated by an old-version client, so
/// they do not count.
pub fn triggerable(
    old: &ModuleSnapshot,
    old_slice: &ClusterSlice,
    new_slice: &ClusterSlice,
    kernel: &KernelResult,
) -> bool {
    let mut basis: Vec<(&Origin, &ClusterSlice)> = kernel
        .unmatched_initial_old
        .iter()
        .map(|o| (o, old_slice))
        .chain(kernel.unmatched_initial_new.iter().map(|o| (o, new_slice)))
        .collect();
    if basis.is_empty() {
        basis = kernel
            .unmatched_final_old
            .iter()
            .map(|o| (o, old_slice))
            .chain(kernel.unmatched_final_new.iter().map(|o| (o, new_slice)))
            .collect();
    }
    basis
        .iter()
        .any(|(origin, slice)| match slice.linked_inputs.get(origin) {
            None => true,
            Some(inputs) if inputs.is_empty() => true,
            Some(inputs) => inputs.iter().any(|input| match input {
                InputDescriptor::Param(_) => true,
                InputDescriptor::Field(class, field) => old.class_field_exists(class, field),
            }),
        })
}

/// Decides whether the cluster root's effect can reach the API boundary.
///
/// A root that is the API itself trivially propagates. Otherwise every
/// call path from the API to the root is examined; the effect propagates
/// when at least one path carries it across every caller/callee hop, or
/// when one of the cluster's exceptions can unwind the whole path without
/// being caught. No path at all means the verdict is negative.
pub fn propagatable(
    snapshot: &ModuleSnapshot,
    graph: &CallGraph,
    root: &Signature,
    cluster_fields: &BTreeSet<(String, String)>,
    exceptions: &BTreeSet<String>,
    max_paths: usize,
) -> bool {
    if *root == graph.api {
        return true;
    }
    let Ok(paths) = graph.all_call_paths(&graph.api, root, max_paths) else {
        return false;
    };
    paths.iter().any(|path| {
        let data = path
            .windows(2)
            .all(|hop| hop_carries(snapshot, &hop[0], &hop[1], cluster_fields));
        data || exceptions
            .iter()
            .any(|exc| exception_escapes(snapshot, path, exc))
    })
}

/// One caller/callee hop of the data propagation walk.
///
/// Inside the caller, the effect arrives through the values its call sites
/// to `callee` define, or through loads of fields the callee or any
/// cluster member writes. It leaves through the caller's returns when the
/// caller produces a value, or through the caller's own field stores when
/// it does not; those stores are exactly what the next hop up observes as
/// field loads. The two ends must be connected by the caller's data
/// dependences.
fn hop_carries(
    snapshot: &ModuleSnapshot,
    caller: &Signature,
    callee: &Signature,
    cluster_fields: &BTreeSet<(String, String)>,
) -> bool {
    let Some(method) = snapshot.method(caller) else {
        return false;
    };
    let mut relevant_fields = cluster_fields.clone();
    if let Some(target) = snapshot.method(callee) {
        relevant_fields.extend(target.fields_written());
    }

    let mut sources: BTreeSet<usize> = BTreeSet::new();
    for stmt in &method.statements {
        match &stmt.kind {
            StatementKind::Call {
                def, callee: site, ..
            } => {
                let declared = snapshot.resolve(site).map(|m| &m.signature).unwrap_or(site);
                if declared == callee && def.is_some() {
                    sources.insert(stmt.id);
                }
            }
            StatementKind::FieldLoad { class, field, .. }
                if relevant_fields.contains(&(class.clone(), field.clone())) =>
            {
                sources.insert(stmt.id);
            }
            _ => {}
        }
    }
    if sources.is_empty() {
        return false;
    }

    let void_caller = method.signature.return_type == Type::Void;
    let targets: BTreeSet<usize> = method
        .statements
        .iter()
        .filter(|stmt| match &stmt.kind {
            StatementKind::Return { .. } => !void_caller,
            StatementKind::FieldStore { .. } => void_caller,
            _ => false,
        })
        .map(|stmt| stmt.id)
        .collect();
    if targets.is_empty() {
        return false;
    }

    let cfg = Cfg::build(method);
    let pdg = Pdg::build(method, &cfg);
    let mut reached = sources;
    loop {
        let mut grew = false;
        for id in 0..method.statements.len() {
            if !reached.contains(&id) && pdg.data_deps[id].iter().any(|d| reached.contains(d)) {
                reached.insert(id);
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    targets.iter().any(|t| reached.contains(t))
}

/// Whether `exception` can unwind along `path` without being caught.
///
/// Each caller on the path must have at least one call site to the next
/// method down whose block is not covered by a catch of that exception.
fn exception_escapes(snapshot: &ModuleSnapshot, path: &[Signature], exception: &str) -> bool {
    path.windows(2).all(|hop| {
        let Some(method) = snapshot.method(&hop[0]) else {
            return false;
        };
        method.call_sites().iter().any(|(stmt_id, site)| {
            let declared = snapshot.resolve(site).map(|m| &m.signature).unwrap_or(site);
            *declared == hop[1]
                && throw_target(method, method.block_of(*stmt_id), exception).is_none()
        })
    })
}

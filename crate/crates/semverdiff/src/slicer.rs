//! Cluster slicing: dependency summaries for one side of a change cluster.
//!
//! Starting from the cluster root, the slicer walks backward from the
//! cluster's observable outputs (root return values, stored fields, escaping
//! exceptions) over data and control dependences, descending into in-cluster
//! callees and freezing everything else. The result is a set of summary
//! nodes with normalized labels plus data, guard, and control-flow edges
//! between them.
//!
//! Normalization removes naming and structure that refactorings are free to
//! change: locals render as `var`, root parameters as `parameter(i)`, and
//! branch conditions as an unordered pair of a predicate and its negation so
//! that swapping arms and negating reads the same. In-cluster calls, callee
//! parameter binds, and non-root returns are glue: the slice walks through
//! them and wires their neighbors directly to each other, which keeps
//! extract-method and inline-method refactorings invisible.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cfg::{throw_target, Cfg};
use crate::ir::{MethodIR, ModuleSnapshot, Operand, Signature, StatementKind, Type};
use crate::pdg::Pdg;

/// A summary node's identity: the method it came from plus the statement id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Origin {
    pub method: Signature,
    pub stmt: usize,
}

impl Origin {
    pub fn new(method: Signature, stmt: usize) -> Origin {
        Origin { method, stmt }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.method.display_string(), self.stmt)
    }
}

impl Serialize for Origin {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Externally visible value source a node's behavior depends on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDescriptor {
    Param(usize),
    Field(String, String),
}

/// Condition node: the normalized branch predicate and the data nodes
/// feeding it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionSummary {
    pub dbs: String,
    pub associated_data: BTreeSet<Origin>,
}

/// Escaping exception node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExceptionSummary {
    pub exception: String,
    /// Normalized predicates of the conditions directly guarding the throw,
    /// joined for display; empty when the throw is unconditional.
    pub guard: String,
}

/// The three summary families of one slice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencySummaries {
    pub dds: BTreeMap<Origin, String>,
    pub cds: BTreeMap<Origin, ConditionSummary>,
    pub es: BTreeMap<Origin, ExceptionSummary>,
}

impl DependencySummaries {
    pub fn contains(&self, origin: &Origin) -> bool {
        self.dds.contains_key(origin)
            || self.cds.contains_key(origin)
            || self.es.contains_key(origin)
    }

    pub fn len(&self) -> usize {
        self.dds.len() + self.cds.len() + self.es.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Label of a node, independent of its family.
    pub fn label(&self, origin: &Origin) -> Option<String> {
        if let Some(text) = self.dds.get(origin) {
            return Some(text.clone());
        }
        if let Some(cond) = self.cds.get(origin) {
            return Some(cond.dbs.clone());
        }
        self.es
            .get(origin)
            .map(|e| format!("throw {}", e.exception))
    }

    /// Sorted multiset of every node label, for refactoring-invariance
    /// comparisons.
    pub fn label_multiset(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .dds
            .keys()
            .chain(self.cds.keys())
            .chain(self.es.keys())
            .filter_map(|o| self.label(o))
            .collect();
        labels.sort();
        labels
    }
}

/// Slice of one cluster side: summaries plus the edges that connect them.
#[derive(Debug, Clone, Default)]
pub struct ClusterSlice {
    pub summaries: DependencySummaries,
    /// Value flow, provider to consumer.
    pub data_edges: BTreeSet<(Origin, Origin)>,
    /// Condition to the node it governs.
    pub guard_edges: BTreeSet<(Origin, Origin)>,
    /// Execution-order edges between summary nodes that cross a real
    /// control-flow transition.
    pub control_flow_edges: BTreeSet<(Origin, Origin)>,
    /// External inputs each node's value or reachability depends on.
    pub linked_inputs: BTreeMap<Origin, BTreeSet<InputDescriptor>>,
    /// Nodes that are observable outputs: root returns, stored fields, and
    /// escaping throws.
    pub output_seeds: BTreeSet<Origin>,
}

#[derive(Debug, Error)]
pub enum SliceError {
    #[error("recursion limit exceeded while slicing cluster rooted at {0}")]
    RecursionLimit(String),
}

/// Slices one side of a cluster. `members` are the changed methods that
/// exist on this side; `root` is the member closest to the API, or `None`
/// when the side is empty.
pub fn slice_cluster(
    snapshot: &ModuleSnapshot,
    members: &BTreeSet<Signature>,
    root: Option<&Signature>,
    depth_cap: usize,
) -> Result<ClusterSlice, SliceError> {
    let Some(root) = root else {
        return Ok(ClusterSlice::default());
    };
    let Some(root_method) = snapshot.method(root) else {
        return Ok(ClusterSlice::default());
    };
    let mut slicer = Slicer {
        snapshot,
        members,
        root: root.clone(),
        depth_cap,
        analyses: BTreeMap::new(),
        bindings: BTreeMap::new(),
        context_guards: BTreeMap::new(),
        forced_labels: BTreeMap::new(),
        slice: ClusterSlice::default(),
        queue: VecDeque::new(),
        enqueued: BTreeSet::new(),
    };
    slicer.bind_members(root_method)?;
    slicer.seed()?;
    slicer.run()?;
    slicer.project_control_flow();
    slicer.finalize();
    Ok(slicer.slice)
}

struct Analysis {
    cfg: Cfg,
    pdg: Pdg,
}

struct Slicer<'a> {
    snapshot: &'a ModuleSnapshot,
    members: &'a BTreeSet<Signature>,
    root: Signature,
    depth_cap: usize,
    analyses: BTreeMap<Signature, Analysis>,
    /// First call site reaching each non-root member from the root.
    bindings: BTreeMap<Signature, (Signature, usize)>,
    /// Conditions governing a member's call site in its caller, transitively
    /// up to the root.
    context_guards: BTreeMap<Signature, Vec<Origin>>,
    /// Labels for synthesized nodes, such as literal returns in callees.
    forced_labels: BTreeMap<Origin, String>,
    slice: ClusterSlice,
    queue: VecDeque<Origin>,
    enqueued: BTreeSet<Origin>,
}

impl<'a> Slicer<'a> {
    fn method(&self, sig: &Signature) -> &'a MethodIR {
        self.snapshot
            .method(sig)
            .expect("cluster members resolve in their snapshot")
    }

    fn analysis(&mut self, sig: &Signature) -> &Analysis {
        if !self.analyses.contains_key(sig) {
            let method = self.method(sig);
            let cfg = Cfg::build(method);
            let pdg = Pdg::build(method, &cfg);
            self.analyses.insert(sig.clone(), Analysis { cfg, pdg });
        }
        &self.analyses[sig]
    }

    /// Resolves a call-site signature to the declaration signature when the
    /// target is an in-cluster member.
    fn member_target(&self, callee: &Signature) -> Option<Signature> {
        let resolved = self.snapshot.resolve(callee)?;
        self.members
            .contains(&resolved.signature)
            .then(|| resolved.signature.clone())
    }

    /// Records the first call site reaching each member, walking from the
    /// root in statement order.
    fn bind_members(&mut self, root: &MethodIR) -> Result<(), SliceError> {
        let mut stack = vec![(root.signature.clone(), 0usize)];
        let mut visited = BTreeSet::new();
        visited.insert(root.signature.clone());
        while let Some((sig, depth)) = stack.pop() {
            if depth > self.depth_cap {
                return Err(SliceError::RecursionLimit(self.root.display_string()));
            }
            let method = self.method(&sig);
            // Depth-first in statement order: reversed pushes keep the pop
            // order equal to the declaration order.
            let mut discovered = Vec::new();
            for (stmt_id, callee) in method.call_sites() {
                let Some(target) = self.member_target(callee) else {
                    continue;
                };
                if visited.insert(target.clone()) {
                    self.bindings.insert(target.clone(), (sig.clone(), stmt_id));
                    discovered.push((target, depth + 1));
                }
            }
            for entry in discovered.into_iter().rev() {
                stack.push(entry);
            }
        }
        Ok(())
    }

    /// Conditions governing every statement of `sig`, inherited from the
    /// call site that binds it, transitively to the root.
    fn context_of(&mut self, sig: &Signature) -> Vec<Origin> {
        if let Some(cached) = self.context_guards.get(sig) {
            return cached.clone();
        }
        let guards = match self.bindings.get(sig).cloned() {
            None => Vec::new(),
            Some((caller, call_id)) => {
                let local: Vec<Origin> = {
                    let analysis = self.analysis(&caller);
                    analysis.pdg.control_deps[call_id]
                        .iter()
                        .map(|&b| Origin::new(caller.clone(), b))
                        .collect()
                };
                let mut all = self.context_of(&caller);
                all.extend(local);
                all.sort();
                all.dedup();
                all
            }
        };
        self.context_guards.insert(sig.clone(), guards.clone());
        guards
    }

    fn enqueue(&mut self, origin: Origin) {
        if self.enqueued.insert(origin.clone()) {
            self.queue.push_back(origin);
        }
    }

    /// Seeds the slice with observable outputs.
    fn seed(&mut self) -> Result<(), SliceError> {
        let root = self.root.clone();
        let root_method = self.method(&root);
        let void_root = root_method.signature.return_type == Type::Void;

        let mut return_seeds = Vec::new();
        if !void_root {
            for stmt in &root_method.statements {
                if matches!(stmt.kind, StatementKind::Return { value: Some(_) }) {
                    return_seeds.push(Origin::new(root.clone(), stmt.id));
                }
            }
        }

        let mut store_seeds: Vec<Origin> = Vec::new();
        let mut store_edges: Vec<(Origin, Origin)> = Vec::new();
        if void_root {
            for member in self.members.clone() {
                let method = self.method(&member);
                for stmt in &method.statements {
                    if matches!(stmt.kind, StatementKind::FieldStore { .. }) {
                        store_seeds.push(Origin::new(member.clone(), stmt.id));
                    }
                }
            }
        } else {
            for (store, returns) in self.output_object_stores(&return_seeds)? {
                for ret in returns {
                    store_edges.push((store.clone(), ret));
                }
                store_seeds.push(store);
            }
        }

        let throw_seeds = self.escaping_throws();

        for seed in return_seeds
            .into_iter()
            .chain(store_seeds)
            .chain(throw_seeds)
        {
            self.slice.output_seeds.insert(seed.clone());
            self.enqueue(seed);
        }
        for edge in store_edges {
            self.slice.data_edges.insert(edge);
        }
        Ok(())
    }

    /// Stores into objects that the root returns. Each entry pairs the
    /// store with the return statements its object reaches.
    fn output_object_stores(
        &mut self,
        return_seeds: &[Origin],
    ) -> Result<Vec<(Origin, Vec<Origin>)>, SliceError> {
        let mut returned_news: BTreeMap<Origin, Vec<Origin>> = BTreeMap::new();
        for ret in return_seeds {
            let method = self.method(&ret.method);
            let StatementKind::Return { value: Some(value) } = &method.statements[ret.stmt].kind
            else {
                continue;
            };
            let Some(local) = value.as_local() else {
                continue;
            };
            let defs = {
                let analysis = self.analysis(&ret.method);
                analysis.pdg.defs_for_use(ret.stmt, local)
            };
            for def in defs {
                let reals = self.resolve_providers(
                    Origin::new(ret.method.clone(), def),
                    &mut BTreeSet::new(),
                    0,
                )?;
                for real in reals {
                    let stmt = &self.method(&real.method).statements[real.stmt];
                    if matches!(stmt.kind, StatementKind::NewObject { .. }) {
                        returned_news.entry(real).or_default().push(ret.clone());
                    }
                }
            }
        }
        if returned_news.is_empty() {
            return Ok(Vec::new());
        }

        let mut out = Vec::new();
        for member in self.members.clone() {
            let method = self.method(&member);
            let stores: Vec<(usize, String)> = method
                .statements
                .iter()
                .filter_map(|s| match &s.kind {
                    StatementKind::FieldStore { object, .. } => {
                        object.as_local().map(|local| (s.id, local.to_string()))
                    }
                    _ => None,
                })
                .collect();
            for (stmt_id, object) in stores {
                let defs = {
                    let analysis = self.analysis(&member);
                    analysis.pdg.defs_for_use(stmt_id, &object)
                };
                let mut returns = Vec::new();
                for def in defs {
                    let reals = self.resolve_providers(
                        Origin::new(member.clone(), def),
                        &mut BTreeSet::new(),
                        0,
                    )?;
                    for real in reals {
                        if let Some(rets) = returned_news.get(&real) {
                            returns.extend(rets.iter().cloned());
                        }
                    }
                }
                if !returns.is_empty() {
                    returns.sort();
                    returns.dedup();
                    out.push((Origin::new(member.clone(), stmt_id), returns));
                }
            }
        }
        Ok(out)
    }

    /// Throws in cluster members that no try region catches on the way up
    /// to the root.
    fn escaping_throws(&mut self) -> Vec<Origin> {
        let mut seeds = Vec::new();
        for member in self.members.clone() {
            let method = self.method(&member);
            let throws: Vec<(usize, String)> = method
                .statements
                .iter()
                .filter_map(|s| match &s.kind {
                    StatementKind::Throw { exception } => Some((s.id, exception.clone())),
                    _ => None,
                })
                .collect();
            'throws: for (stmt_id, exception) in throws {
                let method = self.method(&member);
                if throw_target(method, method.block_of(stmt_id), &exception).is_some() {
                    continue;
                }
                // Walk the binding chain: a caller may catch the exception
                // around the call site.
                let mut at = member.clone();
                loop {
                    if at == self.root {
                        break;
                    }
                    let Some((caller, call_id)) = self.bindings.get(&at).cloned() else {
                        // Unreached member: the throw cannot escape through
                        // this API.
                        continue 'throws;
                    };
                    let caller_method = self.method(&caller);
                    if throw_target(caller_method, caller_method.block_of(call_id), &exception)
                        .is_some()
                    {
                        continue 'throws;
                    }
                    at = caller;
                }
                seeds.push(Origin::new(member.clone(), stmt_id));
            }
        }
        seeds
    }

    /// Follows a definition through glue until real summary nodes appear.
    /// Literal returns in callees synthesize constant nodes so the literal
    /// stays visible.
    fn resolve_providers(
        &mut self,
        origin: Origin,
        visited: &mut BTreeSet<Origin>,
        depth: usize,
    ) -> Result<BTreeSet<Origin>, SliceError> {
        if depth > self.depth_cap {
            return Err(SliceError::RecursionLimit(self.root.display_string()));
        }
        if !visited.insert(origin.clone()) {
            return Ok(BTreeSet::new());
        }
        let method = self.method(&origin.method);
        let stmt = &method.statements[origin.stmt];
        match &stmt.kind {
            StatementKind::ParamBind { index, .. } if origin.method != self.root => {
                let Some((caller, call_id)) = self.bindings.get(&origin.method).cloned() else {
                    return Ok(BTreeSet::new());
                };
                let caller_method = self.method(&caller);
                let StatementKind::Call { args, .. } = &caller_method.statements[call_id].kind
                else {
                    return Ok(BTreeSet::new());
                };
                let Some(arg) = args.get(*index) else {
                    return Ok(BTreeSet::new());
                };
                let Some(local) = arg.as_local() else {
                    return Ok(BTreeSet::new());
                };
                let local = local.to_string();
                let defs = {
                    let analysis = self.analysis(&caller);
                    analysis.pdg.defs_for_use(call_id, &local)
                };
                let mut out = BTreeSet::new();
                for def in defs {
                    out.extend(self.resolve_providers(
                        Origin::new(caller.clone(), def),
                        visited,
                        depth + 1,
                    )?);
                }
                Ok(out)
            }
            StatementKind::Call { callee, .. } => {
                let Some(target) = self.member_target(callee) else {
                    return Ok(BTreeSet::from([origin]));
                };
                let target_method = self.method(&target);
                let returns: Vec<(usize, Operand)> = target_method
                    .statements
                    .iter()
                    .filter_map(|s| match &s.kind {
                        StatementKind::Return { value: Some(v) } => Some((s.id, v.clone())),
                        _ => None,
                    })
                    .collect();
                let mut out = BTreeSet::new();
                for (ret_id, value) in returns {
                    match value {
                        Operand::Local(local) => {
                            let defs = {
                                let analysis = self.analysis(&target);
                                analysis.pdg.defs_for_use(ret_id, &local)
                            };
                            for def in defs {
                                out.extend(self.resolve_providers(
                                    Origin::new(target.clone(), def),
                                    visited,
                                    depth + 1,
                                )?);
                            }
                        }
                        Operand::Literal(lit) => {
                            let synth = Origin::new(target.clone(), ret_id);
                            self.forced_labels
                                .insert(synth.clone(), format!("var = const {lit}"));
                            out.insert(synth);
                        }
                        Operand::This => {}
                    }
                }
                Ok(out)
            }
            _ => Ok(BTreeSet::from([origin])),
        }
    }

    /// Role of an operand at a use site: literals and `this` keep their
    /// text, locals defined only by one parameter render as that parameter
    /// (resolved through call bindings for non-root methods), everything
    /// else is `var`.
    fn role(
        &mut self,
        method_sig: &Signature,
        stmt_id: usize,
        operand: &Operand,
        depth: usize,
    ) -> String {
        match operand {
            Operand::Literal(lit) => lit.to_string(),
            Operand::This => "this".to_string(),
            Operand::Local(local) => {
                if depth > self.depth_cap {
                    return "var".to_string();
                }
                let defs = {
                    let analysis = self.analysis(method_sig);
                    analysis.pdg.defs_for_use(stmt_id, local)
                };
                let mut param_index: Option<usize> = None;
                for &def in &defs {
                    let stmt = &self.method(method_sig).statements[def];
                    match &stmt.kind {
                        StatementKind::ParamBind { index, .. }
                            if param_index.is_none() || param_index == Some(*index) =>
                        {
                            param_index = Some(*index);
                        }
                        _ => return "var".to_string(),
                    }
                }
                let Some(index) = param_index else {
                    return "var".to_string();
                };
                if method_sig == &self.root {
                    return format!("parameter({index})");
                }
                let Some((caller, call_id)) = self.bindings.get(method_sig).cloned() else {
                    return "var".to_string();
                };
                let caller_method = self.method(&caller);
                let StatementKind::Call { args, .. } = &caller_method.statements[call_id].kind
                else {
                    return "var".to_string();
                };
                match args.get(index) {
                    Some(arg) => {
                        let arg = arg.clone();
                        self.role(&caller, call_id, &arg, depth + 1)
                    }
                    None => "var".to_string(),
                }
            }
        }
    }

    /// Right-hand side of a node's normalized text.
    fn render_rhs(&mut self, sig: &Signature, stmt_id: usize) -> String {
        let kind = self.method(sig).statements[stmt_id].kind.clone();
        match kind {
            StatementKind::ParamBind { .. } => "bind".to_string(),
            StatementKind::ConstAssign { value, .. } => format!("const {value}"),
            StatementKind::BinOp { op, lhs, rhs, .. } => {
                let l = self.role(sig, stmt_id, &lhs, 0);
                let r = self.role(sig, stmt_id, &rhs, 0);
                format!("binop {} {l}, {r}", op.name())
            }
            StatementKind::RelOpAssign { op, lhs, rhs, .. } => {
                let l = self.role(sig, stmt_id, &lhs, 0);
                let r = self.role(sig, stmt_id, &rhs, 0);
                format!("relop {} {l}, {r}", op.name())
            }
            StatementKind::Call { callee, args, .. } => {
                let roles: Vec<String> =
                    args.iter().map(|a| self.role(sig, stmt_id, a, 0)).collect();
                if roles.is_empty() {
                    format!("call {}", callee.display_string())
                } else {
                    format!("call {} {}", callee.display_string(), roles.join(", "))
                }
            }
            StatementKind::NewObject { class, .. } => format!("new {class}"),
            StatementKind::FieldLoad {
                object,
                class,
                field,
                ..
            } => {
                let obj = self.role(sig, stmt_id, &object, 0);
                format!("getfield {obj}, field({class}.{field})")
            }
            StatementKind::FieldStore { .. }
            | StatementKind::Return { .. }
            | StatementKind::Throw { .. }
            | StatementKind::Branch { .. }
            | StatementKind::Goto { .. } => String::new(),
        }
    }

    /// Full normalized text of a data node.
    fn render_node(&mut self, origin: &Origin) -> String {
        if let Some(forced) = self.forced_labels.get(origin) {
            return forced.clone();
        }
        let kind = self.method(&origin.method).statements[origin.stmt]
            .kind
            .clone();
        match kind {
            StatementKind::ParamBind { index, .. } => format!("parameter({index}) = bind"),
            StatementKind::FieldStore {
                object,
                class,
                field,
                value,
            } => {
                let obj = self.role(&origin.method, origin.stmt, &object, 0);
                let val = self.role(&origin.method, origin.stmt, &value, 0);
                format!("field({class}.{field}) = putfield {obj}, {val}")
            }
            StatementKind::Return { value } => match value {
                Some(v) => format!("return {}", self.role(&origin.method, origin.stmt, &v, 0)),
                None => "return".to_string(),
            },
            StatementKind::Throw { exception } => format!("throw {exception}"),
            _ => format!("var = {}", self.render_rhs(&origin.method, origin.stmt)),
        }
    }

    fn run(&mut self) -> Result<(), SliceError> {
        while let Some(origin) = self.queue.pop_front() {
            if self.slice.summaries.contains(&origin) {
                continue;
            }
            let kind = self.method(&origin.method).statements[origin.stmt]
                .kind
                .clone();
            match kind {
                StatementKind::Branch { cond, .. } => self.process_condition(&origin, &cond)?,
                StatementKind::Throw { exception } => {
                    self.slice.summaries.es.insert(
                        origin.clone(),
                        ExceptionSummary {
                            exception,
                            guard: String::new(),
                        },
                    );
                    self.process_controls(&origin)?;
                }
                StatementKind::Goto { .. } => {}
                _ => {
                    let label = self.render_node(&origin);
                    self.slice.summaries.dds.insert(origin.clone(), label);
                    self.process_direct_inputs(&origin);
                    if !self.forced_labels.contains_key(&origin) {
                        self.process_data(&origin)?;
                    }
                    self.process_controls(&origin)?;
                }
            }
        }
        Ok(())
    }

    fn process_direct_inputs(&mut self, origin: &Origin) {
        let stmt = &self.method(&origin.method).statements[origin.stmt];
        let input = match &stmt.kind {
            StatementKind::ParamBind { index, .. } if origin.method == self.root => {
                Some(InputDescriptor::Param(*index))
            }
            StatementKind::FieldLoad { class, field, .. } => {
                Some(InputDescriptor::Field(class.clone(), field.clone()))
            }
            _ => None,
        };
        if let Some(input) = input {
            self.slice
                .linked_inputs
                .entry(origin.clone())
                .or_default()
                .insert(input);
        }
    }

    /// Wires the data providers of a node and queues them.
    fn process_data(&mut self, origin: &Origin) -> Result<(), SliceError> {
        let uses: Vec<BTreeSet<usize>> = {
            let analysis = self.analysis(&origin.method);
            analysis.pdg.use_defs[origin.stmt]
                .values()
                .cloned()
                .collect()
        };
        for defs in uses {
            for def in defs {
                let reals = self.resolve_providers(
                    Origin::new(origin.method.clone(), def),
                    &mut BTreeSet::new(),
                    0,
                )?;
                for real in reals {
                    self.slice.data_edges.insert((real.clone(), origin.clone()));
                    self.enqueue(real);
                }
            }
        }
        Ok(())
    }

    /// Wires local and inherited guards of a node and queues the conditions.
    fn process_controls(&mut self, origin: &Origin) -> Result<(), SliceError> {
        let local: Vec<Origin> = {
            let analysis = self.analysis(&origin.method);
            analysis.pdg.control_deps[origin.stmt]
                .iter()
                .map(|&b| Origin::new(origin.method.clone(), b))
                .collect()
        };
        let context = self.context_of(&origin.method);
        for guard in local.into_iter().chain(context) {
            if &guard == origin {
                continue;
            }
            self.slice
                .guard_edges
                .insert((guard.clone(), origin.clone()));
            self.enqueue(guard);
        }
        Ok(())
    }

    /// Builds a condition node: the branch predicate paired with its
    /// negation, unordered, so arm swaps and negations read identically.
    fn process_condition(&mut self, origin: &Origin, cond: &Operand) -> Result<(), SliceError> {
        let mut associated: BTreeSet<Origin> = BTreeSet::new();
        let dbs = match cond {
            Operand::Literal(lit) => dbs_pair(&lit.to_string(), &format!("!{lit}")),
            Operand::This => dbs_pair("this", "!this"),
            Operand::Local(local) => {
                let defs = {
                    let analysis = self.analysis(&origin.method);
                    analysis.pdg.defs_for_use(origin.stmt, local)
                };
                let single_relop = if defs.len() == 1 {
                    let def = *defs.iter().next().unwrap();
                    let stmt = &self.method(&origin.method).statements[def];
                    matches!(stmt.kind, StatementKind::RelOpAssign { .. }).then_some(def)
                } else {
                    None
                };
                match single_relop {
                    Some(relop_id) => {
                        // The relop is absorbed: the predicate renders from
                        // it, and its operand providers attach directly to
                        // the condition.
                        let StatementKind::RelOpAssign { op, lhs, rhs, .. } =
                            self.method(&origin.method).statements[relop_id]
                                .kind
                                .clone()
                        else {
                            unreachable!("checked above");
                        };
                        let l = self.role(&origin.method, relop_id, &lhs, 0);
                        let r = self.role(&origin.method, relop_id, &rhs, 0);
                        let positive = format!("relop {} {l}, {r}", op.name());
                        let negated = format!("relop {} {l}, {r}", op.negate().name());
                        let operand_defs: Vec<BTreeSet<usize>> = {
                            let analysis = self.analysis(&origin.method);
                            analysis.pdg.use_defs[relop_id].values().cloned().collect()
                        };
                        for defs in operand_defs {
                            for def in defs {
                                let reals = self.resolve_providers(
                                    Origin::new(origin.method.clone(), def),
                                    &mut BTreeSet::new(),
                                    0,
                                )?;
                                for real in reals {
                                    self.slice.data_edges.insert((real.clone(), origin.clone()));
                                    associated.insert(real.clone());
                                    self.enqueue(real);
                                }
                            }
                        }
                        dbs_pair(&positive, &negated)
                    }
                    None if defs.len() == 1 => {
                        let def = *defs.iter().next().unwrap();
                        let predicate = self.render_rhs(&origin.method, def);
                        let reals = self.resolve_providers(
                            Origin::new(origin.method.clone(), def),
                            &mut BTreeSet::new(),
                            0,
                        )?;
                        for real in reals {
                            self.slice.data_edges.insert((real.clone(), origin.clone()));
                            associated.insert(real.clone());
                            self.enqueue(real);
                        }
                        dbs_pair(&predicate, &format!("!{predicate}"))
                    }
                    None => {
                        let role = self.role(&origin.method, origin.stmt, cond, 0);
                        for def in defs {
                            let reals = self.resolve_providers(
                                Origin::new(origin.method.clone(), def),
                                &mut BTreeSet::new(),
                                0,
                            )?;
                            for real in reals {
                                self.slice.data_edges.insert((real.clone(), origin.clone()));
                                associated.insert(real.clone());
                                self.enqueue(real);
                            }
                        }
                        dbs_pair(&role, &format!("!{role}"))
                    }
                }
            }
        };
        self.slice.summaries.cds.insert(
            origin.clone(),
            ConditionSummary {
                dbs,
                associated_data: associated,
            },
        );
        self.process_controls(origin)?;
        Ok(())
    }

    /// Projects real control-flow transitions onto summary nodes. From each
    /// node, execution is walked forward through statements, block edges,
    /// and in-cluster call splices; the first summary node reached on a path
    /// gets an edge when at least one block transition was crossed.
    fn project_control_flow(&mut self) {
        let nodes: Vec<Origin> = self
            .slice
            .summaries
            .dds
            .keys()
            .chain(self.slice.summaries.cds.keys())
            .chain(self.slice.summaries.es.keys())
            .cloned()
            .collect();
        // Cache analyses for every member touched by nodes.
        for node in &nodes {
            let sig = node.method.clone();
            self.analysis(&sig);
        }
        for node in &nodes {
            let mut visited: BTreeSet<(Origin, bool)> = BTreeSet::new();
            let mut stack: Vec<(Origin, bool)> = Vec::new();
            visited.insert((node.clone(), false));
            for (next, crossed) in self.steps(node) {
                if visited.insert((next.clone(), crossed)) {
                    stack.push((next, crossed));
                }
            }
            while let Some((position, crossed)) = stack.pop() {
                if self.slice.summaries.contains(&position) {
                    if crossed {
                        self.slice
                            .control_flow_edges
                            .insert((node.clone(), position));
                    }
                    continue;
                }
                for (next, step_crossed) in self.steps(&position) {
                    let flag = crossed || step_crossed;
                    if visited.insert((next.clone(), flag)) {
                        stack.push((next, flag));
                    }
                }
            }
        }
    }

    /// Successor positions of one statement position, with the flag telling
    /// whether the step crosses a block transition.
    fn steps(&mut self, position: &Origin) -> Vec<(Origin, bool)> {
        let sig = &position.method;
        let method = self.method(sig);
        let stmt = &method.statements[position.stmt];
        let block = method.block_of(position.stmt);
        let info = &method.blocks[block];
        let is_last_in_block = position.stmt + 1 == info.end;

        // In-cluster binding call sites splice into the callee.
        if let StatementKind::Call { callee, .. } = &stmt.kind {
            if let Some(target) = self.member_target(callee) {
                if self.bindings.get(&target) == Some(&(sig.clone(), position.stmt)) {
                    let target_method = self.method(&target);
                    if let Some(first) = target_method.blocks.first() {
                        if first.start < first.end {
                            return vec![(Origin::new(target.clone(), first.start), false)];
                        }
                    }
                    return Vec::new();
                }
            }
        }
        // Returns in non-root members splice back to after their binding
        // call site.
        if matches!(stmt.kind, StatementKind::Return { .. }) && sig != &self.root {
            if let Some((caller, call_id)) = self.bindings.get(sig).cloned() {
                return self.after_position(&caller, call_id);
            }
            return Vec::new();
        }

        if !is_last_in_block && !stmt.is_terminator() {
            return vec![(Origin::new(sig.clone(), position.stmt + 1), false)];
        }

        // Block transition through the CFG; edges to the virtual exit end
        // the path.
        let succs = {
            let analysis = self.analysis(sig);
            analysis.cfg.succs[block].clone()
        };
        let method = self.method(sig);
        let mut out = Vec::new();
        for succ in succs {
            if succ >= method.blocks.len() {
                continue;
            }
            let target = &method.blocks[succ];
            if target.start < target.end {
                out.push((Origin::new(sig.clone(), target.start), true));
            }
        }
        out
    }

    /// Position(s) immediately after a call statement in its caller.
    fn after_position(&mut self, caller: &Signature, call_id: usize) -> Vec<(Origin, bool)> {
        let method = self.method(caller);
        let block = method.block_of(call_id);
        let info = &method.blocks[block];
        if call_id + 1 < info.end {
            return vec![(Origin::new(caller.clone(), call_id + 1), false)];
        }
        let succs = {
            let analysis = self.analysis(caller);
            analysis.cfg.succs[block].clone()
        };
        let method = self.method(caller);
        let mut out = Vec::new();
        for succ in succs {
            if succ >= method.blocks.len() {
                continue;
            }
            let target = &method.blocks[succ];
            if target.start < target.end {
                out.push((Origin::new(caller.clone(), target.start), true));
            }
        }
        out
    }

    /// Fills exception guard strings and propagates linked inputs forward
    /// to a fixpoint over data and guard edges.
    fn finalize(&mut self) {
        let es_origins: Vec<Origin> = self.slice.summaries.es.keys().cloned().collect();
        for origin in es_origins {
            let mut guards: Vec<String> = self
                .slice
                .guard_edges
                .iter()
                .filter(|(_, to)| to == &origin)
                .filter_map(|(from, _)| self.slice.summaries.cds.get(from))
                .map(|c| c.dbs.clone())
                .collect();
            guards.sort();
            guards.dedup();
            if let Some(summary) = self.slice.summaries.es.get_mut(&origin) {
                summary.guard = guards.join(" && ");
            }
        }

        let edges: Vec<(Origin, Origin)> = self
            .slice
            .data_edges
            .iter()
            .chain(self.slice.guard_edges.iter())
            .cloned()
            .collect();
        let mut changed = true;
        while changed {
            changed = false;
            for (from, to) in &edges {
                let incoming: Vec<InputDescriptor> = self
                    .slice
                    .linked_inputs
                    .get(from)
                    .map(|s| s.iter().cloned().collect())
                    .unwrap_or_default();
                if incoming.is_empty() {
                    continue;
                }
                let target = self.slice.linked_inputs.entry(to.clone()).or_default();
                for input in incoming {
                    if target.insert(input) {
                        changed = true;
                    }
                }
            }
        }
    }
}

/// Unordered predicate pair: the stable text of a branch condition.
fn dbs_pair(a: &str, b: &str) -> String {
    if a <= b {
        format!("dbs{{{a} | {b}}}")
    } else {
        format!("dbs{{{b} | {a}}}")
    }
}

//! Benign-change classification over a pair of cluster slices.
//!
//! Version upgrades routinely contain edits that change behavior in ways a
//! caller would not consider breaking: a boundary check tightened during a
//! bug fix, a new branch handling an input the old code mishandled, an extra
//! output field, a revised constant inside a condition chain. Each matcher
//! here recognizes one such shape and tags the involved summary nodes so the
//! kernel can weigh them down instead of flagging them.
//!
//! Matchers run in a fixed precedence order and the first tag wins:
//! condition adjustment, extra handling, augmented output, assignment
//! revision. New-side nodes receive tags; old-side counterparts of adjusted
//! or removed structures land in the shadow set so both graphs treat them
//! consistently.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::hash::Fnv64;
use crate::ir::{MethodIR, ModuleSnapshot, Operand, Signature, StatementKind};
use crate::slicer::{ClusterSlice, Origin};

/// Which matcher claimed a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenignTag {
    CcAdjust,
    ExtraHandling,
    AugmentedOutput,
    AssignRevision,
}

/// Benign classification of one cluster: tagged new-side nodes and the
/// old-side nodes they superseded.
#[derive(Debug, Clone, Default)]
pub struct BenignSet {
    pub entries: BTreeMap<Origin, BenignTag>,
    pub old_shadow: BTreeSet<Origin>,
}

impl BenignSet {
    pub fn is_benign_new(&self, origin: &Origin) -> bool {
        self.entries.contains_key(origin)
    }

    pub fn is_benign_old(&self, origin: &Origin) -> bool {
        self.old_shadow.contains(origin)
    }

    fn tag(&mut self, origin: Origin, tag: BenignTag) {
        self.entries.entry(origin).or_insert(tag);
    }
}

/// Runs all matchers over one cluster's slices.
pub fn classify(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    old_members: &BTreeSet<Signature>,
    new_members: &BTreeSet<Signature>,
    old_slice: &ClusterSlice,
    new_slice: &ClusterSlice,
) -> BenignSet {
    let mut set = BenignSet::default();
    cc_adjust(old_slice, new_slice, &mut set);
    extra_handling(
        old,
        new,
        old_members,
        new_members,
        old_slice,
        new_slice,
        &mut set,
    );
    augmented_output(old, new, old_slice, new_slice, &mut set);
    assign_revision(old_slice, new_slice, &mut set);
    set
}

/// Origins of `a`'s conditions whose predicate has no matching predicate
/// left in `b`, multiset style.
fn unmatched_conditions(a: &ClusterSlice, b: &ClusterSlice) -> Vec<Origin> {
    let mut budget: BTreeMap<&str, usize> = BTreeMap::new();
    for cond in b.summaries.cds.values() {
        *budget.entry(cond.dbs.as_str()).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    for (origin, cond) in &a.summaries.cds {
        match budget.get_mut(cond.dbs.as_str()) {
            Some(count) if *count > 0 => *count -= 1,
            _ => out.push(origin.clone()),
        }
    }
    out
}

/// Origins of `a`'s data nodes whose label has no matching label left in
/// `b`, multiset style.
fn unmatched_data(a: &ClusterSlice, b: &ClusterSlice) -> Vec<Origin> {
    let mut budget: BTreeMap<&str, usize> = BTreeMap::new();
    for label in b.summaries.dds.values() {
        *budget.entry(label.as_str()).or_insert(0) += 1;
    }
    let mut out = Vec::new();
    for (origin, label) in &a.summaries.dds {
        match budget.get_mut(label.as_str()) {
            Some(count) if *count > 0 => *count -= 1,
            _ => out.push(origin.clone()),
        }
    }
    out
}

/// Sorted labels of every node a condition guards.
fn governed_labels(slice: &ClusterSlice, cond: &Origin) -> Vec<String> {
    let mut labels: Vec<String> = slice
        .guard_edges
        .iter()
        .filter(|(from, _)| from == cond)
        .filter_map(|(_, to)| slice.summaries.label(to))
        .collect();
    labels.sort();
    labels
}

/// Nodes from which an output seed is reachable over data edges.
fn output_data_nodes(slice: &ClusterSlice) -> BTreeSet<Origin> {
    let mut reached: BTreeSet<Origin> = slice.output_seeds.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for (from, to) in &slice.data_edges {
            if reached.contains(to) && reached.insert(from.clone()) {
                changed = true;
            }
        }
    }
    reached
}

/// Data-edge ancestors of one node, the node included.
fn data_ancestors(slice: &ClusterSlice, seed: &Origin) -> BTreeSet<Origin> {
    let mut reached = BTreeSet::from([seed.clone()]);
    let mut changed = true;
    while changed {
        changed = false;
        for (from, to) in &slice.data_edges {
            if reached.contains(to) && reached.insert(from.clone()) {
                changed = true;
            }
        }
    }
    reached
}

/// Condition adjustment: an old condition and a new condition whose
/// predicates differ but which guard label-identical sets of nodes. The
/// governed code is intact, only the boundary moved.
fn cc_adjust(old_slice: &ClusterSlice, new_slice: &ClusterSlice, set: &mut BenignSet) {
    let old_unmatched = unmatched_conditions(old_slice, new_slice);
    let new_unmatched = unmatched_conditions(new_slice, old_slice);
    let mut used: BTreeSet<Origin> = BTreeSet::new();
    for old_cond in old_unmatched {
        let old_governed = governed_labels(old_slice, &old_cond);
        for new_cond in &new_unmatched {
            if used.contains(new_cond) {
                continue;
            }
            if governed_labels(new_slice, new_cond) != old_governed {
                continue;
            }
            used.insert(new_cond.clone());
            set.tag(new_cond.clone(), BenignTag::CcAdjust);
            if let Some(cond) = new_slice.summaries.cds.get(new_cond) {
                for assoc in &cond.associated_data {
                    set.tag(assoc.clone(), BenignTag::CcAdjust);
                }
            }
            set.old_shadow.insert(old_cond.clone());
            if let Some(cond) = old_slice.summaries.cds.get(&old_cond) {
                for assoc in &cond.associated_data {
                    set.old_shadow.insert(assoc.clone());
                }
            }
            break;
        }
    }
}

/// Extra handling: a new condition where one arm is code the old version
/// already had and the other arm is new, or an exception that the new
/// version catches instead of letting escape.
fn extra_handling(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    old_members: &BTreeSet<Signature>,
    new_members: &BTreeSet<Signature>,
    old_slice: &ClusterSlice,
    new_slice: &ClusterSlice,
    set: &mut BenignSet,
) {
    let mut old_shapes: BTreeSet<u64> = BTreeSet::new();
    for member in old_members {
        if let Some(method) = old.method(member) {
            old_shapes.extend(suffix_fingerprints(method));
        }
    }

    for new_cond in unmatched_conditions(new_slice, old_slice) {
        if set.entries.contains_key(&new_cond) {
            continue;
        }
        let Some(method) = new.method(&new_cond.method) else {
            continue;
        };
        let StatementKind::Branch {
            then_label,
            else_label,
            ..
        } = &method.statements[new_cond.stmt].kind
        else {
            continue;
        };
        let Some(then_block) = method.block_index(then_label) else {
            continue;
        };
        let Some(else_block) = method.block_index(else_label) else {
            continue;
        };
        let then_known = old_shapes.contains(&block_fingerprint(method, then_block, 0));
        let else_known = old_shapes.contains(&block_fingerprint(method, else_block, 0));
        let extra_block = match (then_known, else_known) {
            (true, false) => else_block,
            (false, true) => then_block,
            _ => continue,
        };
        set.tag(new_cond.clone(), BenignTag::ExtraHandling);
        if let Some(cond) = new_slice.summaries.cds.get(&new_cond) {
            for assoc in &cond.associated_data {
                set.tag(assoc.clone(), BenignTag::ExtraHandling);
            }
        }
        tag_block_nodes(new_slice, method, extra_block, set);
    }

    // Newly caught exceptions: the old slice saw the throw escape, the new
    // version wraps it in a region and handles it.
    let new_exceptions: BTreeSet<&str> = new_slice
        .summaries
        .es
        .values()
        .map(|e| e.exception.as_str())
        .collect();
    let escaped_old: Vec<(Origin, String)> = old_slice
        .summaries
        .es
        .iter()
        .filter(|(_, e)| !new_exceptions.contains(e.exception.as_str()))
        .map(|(o, e)| (o.clone(), e.exception.clone()))
        .collect();
    for (old_origin, exception) in escaped_old {
        if !members_contain_throw(new, new_members, &exception) {
            continue;
        }
        for member in new_members {
            let Some(method) = new.method(member) else {
                continue;
            };
            for region in &method.try_regions {
                if region.exception != exception {
                    continue;
                }
                set.old_shadow.insert(old_origin.clone());
                if let Some(handler) = method.block_index(&region.handler_label) {
                    tag_block_nodes(new_slice, method, handler, set);
                }
            }
        }
    }
}

/// Whether any cluster member still raises the exception; a region only
/// counts as newly catching it when the throw is still there to catch.
fn members_contain_throw(
    snapshot: &ModuleSnapshot,
    members: &BTreeSet<Signature>,
    exception: &str,
) -> bool {
    members.iter().any(|member| {
        snapshot.method(member).is_some_and(|method| {
            method
                .statements
                .iter()
                .any(|s| matches!(&s.kind, StatementKind::Throw { exception: e } if e == exception))
        })
    })
}

/// Tags every summary node located in one block of one method.
fn tag_block_nodes(slice: &ClusterSlice, method: &MethodIR, block: usize, set: &mut BenignSet) {
    let info = &method.blocks[block];
    for stmt in info.start..info.end {
        let origin = Origin::new(method.signature.clone(), stmt);
        if slice.summaries.contains(&origin) {
            set.tag(origin, BenignTag::ExtraHandling);
        }
    }
}

/// Augmented output: the new version stores additional, newly declared
/// fields while every old output field is still written with its old type.
fn augmented_output(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    old_slice: &ClusterSlice,
    new_slice: &ClusterSlice,
    set: &mut BenignSet,
) {
    let old_fields = output_field_stores(old, old_slice);
    let new_fields = output_field_stores(new, new_slice);
    for (class, field) in old_fields.keys() {
        if !new_fields.contains_key(&(class.clone(), field.clone())) {
            return;
        }
        let old_ty = old.classes.get(class).and_then(|c| c.field_type(field));
        let new_ty = new.classes.get(class).and_then(|c| c.field_type(field));
        if old_ty != new_ty {
            return;
        }
    }
    for ((class, field), stores) in &new_fields {
        if old_fields.contains_key(&(class.clone(), field.clone())) {
            continue;
        }
        if old.class_field_exists(class, field) {
            continue;
        }
        for store in stores {
            for ancestor in data_ancestors(new_slice, store) {
                set.tag(ancestor, BenignTag::AugmentedOutput);
            }
        }
    }
}

/// Output field stores of a slice, grouped by the stored field.
fn output_field_stores(
    snapshot: &ModuleSnapshot,
    slice: &ClusterSlice,
) -> BTreeMap<(String, String), Vec<Origin>> {
    let mut out: BTreeMap<(String, String), Vec<Origin>> = BTreeMap::new();
    for seed in &slice.output_seeds {
        let Some(method) = snapshot.method(&seed.method) else {
            continue;
        };
        if let StatementKind::FieldStore { class, field, .. } = &method.statements[seed.stmt].kind {
            out.entry((class.clone(), field.clone()))
                .or_default()
                .push(seed.clone());
        }
    }
    out
}

/// Assignment revision: a data node whose label exists on only one side and
/// which feeds conditions exclusively, never an output. Revising such a
/// statement moves a decision boundary without changing what the method
/// produces on either side of it.
fn assign_revision(old_slice: &ClusterSlice, new_slice: &ClusterSlice, set: &mut BenignSet) {
    let new_outputs = output_data_nodes(new_slice);
    for origin in unmatched_data(new_slice, old_slice) {
        if set.entries.contains_key(&origin) || new_outputs.contains(&origin) {
            continue;
        }
        set.tag(origin, BenignTag::AssignRevision);
    }
    let old_outputs = output_data_nodes(old_slice);
    for origin in unmatched_data(old_slice, new_slice) {
        if set.old_shadow.contains(&origin) || old_outputs.contains(&origin) {
            continue;
        }
        set.old_shadow.insert(origin);
    }
}

fn local_rank(names: &mut BTreeMap<String, usize>, local: &str) -> String {
    let next = names.len();
    let id = *names.entry(local.to_string()).or_insert(next);
    format!("l{id}")
}

fn operand_text(names: &mut BTreeMap<String, usize>, op: &Operand) -> String {
    match op {
        Operand::Local(name) => local_rank(names, name),
        Operand::This => "this".to_string(),
        Operand::Literal(lit) => lit.to_string(),
    }
}

/// Fingerprint of the statements of one block from `offset` on, with locals
/// renamed by first occurrence so surrounding context does not leak in.
fn block_fingerprint(method: &MethodIR, block: usize, offset: usize) -> u64 {
    let info = &method.blocks[block];
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let mut hash = Fnv64::new();
    let feed = |hash: Fnv64, text: &str| hash.bytes(text.as_bytes()).bytes(b"\x1f");
    for stmt in &method.statements[info.start + offset..info.end] {
        match &stmt.kind {
            StatementKind::ParamBind { def, index } => {
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = param {index}"));
            }
            StatementKind::ConstAssign { def, value } => {
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = const {value}"));
            }
            StatementKind::BinOp { def, op, lhs, rhs } => {
                let l = operand_text(&mut names, lhs);
                let r = operand_text(&mut names, rhs);
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = binop {} {l}, {r}", op.name()));
            }
            StatementKind::RelOpAssign { def, op, lhs, rhs } => {
                let l = operand_text(&mut names, lhs);
                let r = operand_text(&mut names, rhs);
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = relop {} {l}, {r}", op.name()));
            }
            StatementKind::Call { def, callee, args } => {
                let rendered: Vec<String> =
                    args.iter().map(|a| operand_text(&mut names, a)).collect();
                let d = def
                    .as_ref()
                    .map(|d| local_rank(&mut names, d))
                    .unwrap_or_default();
                hash = feed(
                    hash,
                    &format!(
                        "{d} = call {} {}",
                        callee.display_string(),
                        rendered.join(", ")
                    ),
                );
            }
            StatementKind::NewObject { def, class } => {
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = new {class}"));
            }
            StatementKind::FieldLoad {
                def,
                object,
                class,
                field,
            } => {
                let o = operand_text(&mut names, object);
                let d = local_rank(&mut names, def);
                hash = feed(hash, &format!("{d} = getfield {o}, {class}.{field}"));
            }
            StatementKind::FieldStore {
                object,
                class,
                field,
                value,
            } => {
                let o = operand_text(&mut names, object);
                let v = operand_text(&mut names, value);
                hash = feed(hash, &format!("putfield {o}, {class}.{field}, {v}"));
            }
            StatementKind::Return { value } => {
                let v = value
                    .as_ref()
                    .map(|v| operand_text(&mut names, v))
                    .unwrap_or_default();
                hash = feed(hash, &format!("return {v}"));
            }
            StatementKind::Throw { exception } => {
                hash = feed(hash, &format!("throw {exception}"));
            }
            StatementKind::Branch { cond, .. } => {
                let c = operand_text(&mut names, cond);
                hash = feed(hash, &format!("branch {c}"));
            }
            StatementKind::Goto { .. } => {
                hash = feed(hash, "goto");
            }
        }
    }
    hash.finish()
}

/// Fingerprints of every suffix of every block of a method.
fn suffix_fingerprints(method: &MethodIR) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    for (block, info) in method.blocks.iter().enumerate() {
        for offset in 0..info.end.saturating_sub(info.start) {
            out.insert(block_fingerprint(method, block, offset));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::DEFAULT_DEPTH_CAP;
    use crate::ir::loader::snapshot_from_sources;
    use crate::ir::Version;
    use crate::slicer::slice_cluster;

    fn snap(source: &str) -> ModuleSnapshot {
        snapshot_from_sources(&[("m.mvil", source)], Version::parse("1.0.0").unwrap())
            .expect("fixture parses")
    }

    fn members_of(snapshot: &ModuleSnapshot, sigs: &[&str]) -> BTreeSet<Signature> {
        sigs.iter()
            .map(|s| {
                let sig = Signature::parse_str(s).expect("signature literal");
                snapshot
                    .resolve(&sig)
                    .expect("member resolves")
                    .signature
                    .clone()
            })
            .collect()
    }

    fn classified(
        old_src: &str,
        new_src: &str,
        sigs: &[&str],
    ) -> (ClusterSlice, ClusterSlice, BenignSet) {
        let old = snap(old_src);
        let new = snap(new_src);
        let old_members = members_of(&old, sigs);
        let new_members = members_of(&new, sigs);
        let root_sig = Signature::parse_str(sigs[0]).unwrap();
        let root_old = old.resolve(&root_sig).unwrap().signature.clone();
        let root_new = new.resolve(&root_sig).unwrap().signature.clone();
        let old_slice =
            slice_cluster(&old, &old_members, Some(&root_old), DEFAULT_DEPTH_CAP).unwrap();
        let new_slice =
            slice_cluster(&new, &new_members, Some(&root_new), DEFAULT_DEPTH_CAP).unwrap();
        let set = classify(
            &old,
            &new,
            &old_members,
            &new_members,
            &old_slice,
            &new_slice,
        );
        (old_slice, new_slice, set)
    }

    #[test]
    fn adjusted_boundary_with_intact_arms_is_cc_adjust() {
        let old_src = "class C {\n\
            method public int clamp(int a) {\n\
            entry:\n  a0 = param 0;\n  c = relop lt a0, #0;\n  branch c, bad, ok;\n\
            bad:\n  throw RangeError;\n\
            ok:\n  r = binop add a0, #10;\n  return r;\n\
            }\n}\n";
        let new_src = "class C {\n\
            method public int clamp(int a) {\n\
            entry:\n  a0 = param 0;\n  c = relop le a0, #0;\n  branch c, bad, ok;\n\
            bad:\n  throw RangeError;\n\
            ok:\n  r = binop add a0, #10;\n  return r;\n\
            }\n}\n";
        let (old_slice, new_slice, set) = classified(old_src, new_src, &["C.clamp(int):int"]);
        let old_cond = old_slice.summaries.cds.keys().next().unwrap();
        let new_cond = new_slice.summaries.cds.keys().next().unwrap();
        assert_eq!(set.entries.get(new_cond), Some(&BenignTag::CcAdjust));
        assert!(set.old_shadow.contains(old_cond));
    }

    #[test]
    fn new_branch_with_one_preserved_arm_is_extra_handling() {
        let old_src = "class C {\n\
            method public int scale(int a) {\n\
            entry:\n  a0 = param 0;\n  r = binop mul a0, #2;\n  return r;\n\
            }\n}\n";
        let new_src = "class C {\n\
            method public int scale(int a) {\n\
            entry:\n  a0 = param 0;\n  z = const #0;\n  c = relop eq a0, z;\n  branch c, zero, main;\n\
            zero:\n  d = const #0;\n  return d;\n\
            main:\n  r = binop mul a0, #2;\n  return r;\n\
            }\n}\n";
        let (_, new_slice, set) = classified(old_src, new_src, &["C.scale(int):int"]);
        let new_cond = new_slice.summaries.cds.keys().next().unwrap();
        assert_eq!(set.entries.get(new_cond), Some(&BenignTag::ExtraHandling));
        let zero_const = new_slice
            .summaries
            .dds
            .iter()
            .find(|(o, label)| label.as_str() == "var = const #0" && o.stmt > new_cond.stmt)
            .map(|(o, _)| o.clone())
            .expect("handling-arm constant");
        assert_eq!(
            set.entries.get(&zero_const),
            Some(&BenignTag::ExtraHandling)
        );
        let preserved = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.starts_with("var = binop mul"))
            .map(|(o, _)| o.clone())
            .expect("preserved arm");
        assert!(!set.entries.contains_key(&preserved));
    }

    #[test]
    fn newly_caught_exception_is_extra_handling() {
        let old_src = "class C {\n\
            method public int run(int a) {\n\
            entry:\n  a0 = param 0;\n  r = call C.risky(int):int a0;\n  return r;\n\
            }\n\
            method private int risky(int a) {\n\
            entry:\n  a0 = param 0;\n  c = relop lt a0, #0;\n  branch c, bad, ok;\n\
            bad:\n  throw DataError;\n\
            ok:\n  return a0;\n\
            }\n}\n";
        let new_src = "class C {\n\
            method public int run(int a) {\n\
            entry:\n  a0 = param 0;\n  r = call C.risky(int):int a0;\n  return r;\n\
            rescue:\n  z = const #0;\n  return z;\n\
            try entry .. entry catch DataError -> rescue;\n\
            }\n\
            method private int risky(int a) {\n\
            entry:\n  a0 = param 0;\n  c = relop lt a0, #0;\n  branch c, bad, ok;\n\
            bad:\n  throw DataError;\n\
            ok:\n  return a0;\n\
            }\n}\n";
        let (old_slice, new_slice, set) =
            classified(old_src, new_src, &["C.run(int):int", "C.risky(int):int"]);
        assert_eq!(old_slice.summaries.es.len(), 1);
        assert!(new_slice.summaries.es.is_empty());
        let old_throw = old_slice.summaries.es.keys().next().unwrap();
        assert!(set.old_shadow.contains(old_throw));
        let handler_const = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.as_str() == "var = const #0")
            .map(|(o, _)| o.clone())
            .expect("handler constant");
        assert_eq!(
            set.entries.get(&handler_const),
            Some(&BenignTag::ExtraHandling)
        );
    }

    #[test]
    fn new_output_field_with_old_fields_intact_is_augmented_output() {
        let old_src = "class Box {\n field int x;\n}\n\
            class F {\n\
            method public Box make(int a) {\n\
            entry:\n  a0 = param 0;\n  b = new Box;\n  putfield b, Box.x, a0;\n  return b;\n\
            }\n}\n";
        let new_src = "class Box {\n field int x;\n field int y;\n}\n\
            class F {\n\
            method public Box make(int a) {\n\
            entry:\n  a0 = param 0;\n  b = new Box;\n  putfield b, Box.x, a0;\n  s = const #1;\n  putfield b, Box.y, s;\n  return b;\n\
            }\n}\n";
        let (_, new_slice, set) = classified(old_src, new_src, &["F.make(int):Box"]);
        let store_y = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.starts_with("field(Box.y)"))
            .map(|(o, _)| o.clone())
            .expect("new store");
        assert_eq!(set.entries.get(&store_y), Some(&BenignTag::AugmentedOutput));
        let value = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.as_str() == "var = const #1")
            .map(|(o, _)| o.clone())
            .expect("stored value");
        assert_eq!(set.entries.get(&value), Some(&BenignTag::AugmentedOutput));
        let store_x = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.starts_with("field(Box.x)"))
            .map(|(o, _)| o.clone())
            .expect("old store");
        assert!(!set.entries.contains_key(&store_x));
    }

    #[test]
    fn dropping_an_old_output_field_is_never_benign() {
        let old_src = "class Box {\n field int x;\n field int y;\n}\n\
            class F {\n\
            method public Box make(int a) {\n\
            entry:\n  a0 = param 0;\n  b = new Box;\n  putfield b, Box.x, a0;\n  s = const #1;\n  putfield b, Box.y, s;\n  return b;\n\
            }\n}\n";
        let new_src = "class Box {\n field int x;\n field int y;\n}\n\
            class F {\n\
            method public Box make(int a) {\n\
            entry:\n  a0 = param 0;\n  b = new Box;\n  s = const #1;\n  putfield b, Box.y, s;\n  return b;\n\
            }\n}\n";
        let (_, _, set) = classified(old_src, new_src, &["F.make(int):Box"]);
        assert!(set.entries.is_empty());
    }

    #[test]
    fn revised_assignment_feeding_only_conditions_is_benign() {
        let old_src = "class C {\n\
            method public int pick(int a) {\n\
            entry:\n  a0 = param 0;\n  t = binop add a0, #1;\n  c = relop lt t, #10;\n  branch c, low, high;\n\
            low:\n  l = const #100;\n  return l;\n\
            high:\n  h = const #200;\n  return h;\n\
            }\n}\n";
        let new_src = "class C {\n\
            method public int pick(int a) {\n\
            entry:\n  a0 = param 0;\n  t = binop add a0, #2;\n  c = relop lt t, #10;\n  branch c, low, high;\n\
            low:\n  l = const #100;\n  return l;\n\
            high:\n  h = const #200;\n  return h;\n\
            }\n}\n";
        let (old_slice, new_slice, set) = classified(old_src, new_src, &["C.pick(int):int"]);
        let new_t = new_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.as_str() == "var = binop add parameter(0), #2")
            .map(|(o, _)| o.clone())
            .expect("revised assignment");
        assert_eq!(set.entries.get(&new_t), Some(&BenignTag::AssignRevision));
        let old_t = old_slice
            .summaries
            .dds
            .iter()
            .find(|(_, label)| label.as_str() == "var = binop add parameter(0), #1")
            .map(|(o, _)| o.clone())
            .expect("old assignment");
        assert!(set.old_shadow.contains(&old_t));
    }

    #[test]
    fn revised_assignment_feeding_an_output_is_not_benign() {
        let old_src = "class C {\n\
            method public int calc(int a) {\n\
            entry:\n  a0 = param 0;\n  r = binop add a0, #1;\n  return r;\n\
            }\n}\n";
        let new_src = "class C {\n\
            method public int calc(int a) {\n\
            entry:\n  a0 = param 0;\n  r = binop add a0, #2;\n  return r;\n\
            }\n}\n";
        let (_, _, set) = classified(old_src, new_src, &["C.calc(int):int"]);
        assert!(set.entries.is_empty());
        assert!(set.old_shadow.is_empty());
    }
}

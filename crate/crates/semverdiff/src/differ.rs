//! Change detection: method fingerprints and changed-method clusters.
//!
//! A fingerprint hashes the method body modulo names that carry no meaning:
//! locals are renamed by first-definition order and branch targets become
//! block indices, while literals, operators, field names, and callee
//! signatures are kept verbatim. Each call site also contributes whether its
//! callee resolves inside the snapshot, so a call flipping between external
//! and internal counts as a change even when the text is identical.
//!
//! Changed methods reachable from a paired API are grouped into clusters:
//! connected components over the union of both call graphs, restricted to
//! edges whose endpoints both changed. Every cluster gets one root per side,
//! the member closest to the API.

use std::collections::{BTreeMap, BTreeSet};

use crate::callgraph::CallGraph;
use crate::hash::Fnv64;
use crate::ir::{MethodIR, ModuleSnapshot, Operand, Signature, StatementKind};

/// Stable hash of a method body, local and label names factored out.
pub fn fingerprint(method: &MethodIR, snapshot: &ModuleSnapshot) -> u64 {
    let mut rename: BTreeMap<&str, usize> = BTreeMap::new();
    for stmt in &method.statements {
        if let Some(def) = stmt.def() {
            let next = rename.len();
            rename.entry(def).or_insert(next);
        }
    }
    let local = |name: &str| -> String {
        match rename.get(name) {
            Some(index) => format!("l{index}"),
            None => format!("?{name}"),
        }
    };
    let operand = |op: &Operand| -> String {
        match op {
            Operand::Local(name) => local(name),
            Operand::This => "this".into(),
            Operand::Literal(lit) => lit.to_string(),
        }
    };
    let block_idx = |label: &str| -> String {
        match method.block_index(label) {
            Some(index) => index.to_string(),
            None => format!("?{label}"),
        }
    };

    let mut hash = Fnv64::new();
    let mut feed = |text: &str| {
        hash = hash.bytes(text.as_bytes()).bytes(b"\x1f");
    };
    for (index, _) in method.blocks.iter().enumerate() {
        feed("block");
        feed(&index.to_string());
        for stmt in method.block_statements(index) {
            match &stmt.kind {
                StatementKind::ParamBind { def, index } => {
                    feed("param");
                    feed(&local(def));
                    feed(&index.to_string());
                }
                StatementKind::ConstAssign { def, value } => {
                    feed("const");
                    feed(&local(def));
                    feed(&value.to_string());
                }
                StatementKind::BinOp { def, op, lhs, rhs } => {
                    feed("binop");
                    feed(&local(def));
                    feed(op.name());
                    feed(&operand(lhs));
                    feed(&operand(rhs));
                }
                StatementKind::RelOpAssign { def, op, lhs, rhs } => {
                    feed("relop");
                    feed(&local(def));
                    feed(op.name());
                    feed(&operand(lhs));
                    feed(&operand(rhs));
                }
                StatementKind::Call { def, callee, args } => {
                    feed("call");
                    feed(&def.as_deref().map(&local).unwrap_or_else(|| "-".into()));
                    feed(&callee.display_string());
                    feed(if snapshot.is_external(callee) {
                        "external"
                    } else {
                        "internal"
                    });
                    for arg in args {
                        feed(&operand(arg));
                    }
                }
                StatementKind::NewObject { def, class } => {
                    feed("new");
                    feed(&local(def));
                    feed(class);
                }
                StatementKind::FieldLoad {
                    def,
                    object,
                    class,
                    field,
                } => {
                    feed("getfield");
                    feed(&local(def));
                    feed(&operand(object));
                    feed(&format!("{class}.{field}"));
                }
                StatementKind::FieldStore {
                    object,
                    class,
                    field,
                    value,
                } => {
                    feed("putfield");
                    feed(&operand(object));
                    feed(&format!("{class}.{field}"));
                    feed(&operand(value));
                }
                StatementKind::Return { value } => {
                    feed("return");
                    feed(&value.as_ref().map(&operand).unwrap_or_else(|| "-".into()));
                }
                StatementKind::Throw { exception } => {
                    feed("throw");
                    feed(exception);
                }
                StatementKind::Branch {
                    cond,
                    then_label,
                    else_label,
                } => {
                    feed("branch");
                    feed(&operand(cond));
                    feed(&block_idx(then_label));
                    feed(&block_idx(else_label));
                }
                StatementKind::Goto { label } => {
                    feed("goto");
                    feed(&block_idx(label));
                }
            }
        }
    }
    for region in &method.try_regions {
        feed("try");
        feed(&block_idx(&region.start_label));
        feed(&block_idx(&region.end_label));
        feed(&region.exception);
        feed(&block_idx(&region.handler_label));
    }
    hash.finish()
}

/// Key under which two method versions count as the same method: class,
/// name, and parameter list. Visibility and return type stay out so that a
/// tweak to either compares the bodies instead of faking a delete plus add.
type MethodKey = (String, String, Vec<crate::ir::Type>);

fn method_key(sig: &Signature) -> MethodKey {
    (
        sig.class_name.clone(),
        sig.method_name.clone(),
        sig.param_types.clone(),
    )
}

/// Signatures whose behavior may differ between the snapshots: methods
/// present on only one side, plus methods whose fingerprints disagree.
pub fn changed_methods(old: &ModuleSnapshot, new: &ModuleSnapshot) -> BTreeSet<Signature> {
    let mut changed = BTreeSet::new();
    let all_methods = |snapshot: &ModuleSnapshot| -> BTreeMap<MethodKey, (Signature, u64)> {
        snapshot
            .classes
            .values()
            .flat_map(|c| c.methods_ordered())
            .map(|m| {
                (
                    method_key(&m.signature),
                    (m.signature.clone(), fingerprint(m, snapshot)),
                )
            })
            .collect()
    };
    let old_prints = all_methods(old);
    let new_prints = all_methods(new);
    for (key, (old_sig, old_print)) in &old_prints {
        match new_prints.get(key) {
            Some((_, new_print)) if new_print == old_print => {}
            Some((new_sig, _)) => {
                changed.insert(old_sig.clone());
                changed.insert(new_sig.clone());
            }
            None => {
                changed.insert(old_sig.clone());
            }
        }
    }
    for (key, (new_sig, _)) in &new_prints {
        if !old_prints.contains_key(key) {
            changed.insert(new_sig.clone());
        }
    }
    changed
}

/// Connected group of changed methods reachable from one API pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeCluster {
    pub members: BTreeSet<Signature>,
    pub old_members: BTreeSet<Signature>,
    pub new_members: BTreeSet<Signature>,
    /// Cluster member closest to the API in the old call graph.
    pub old_root: Option<Signature>,
    /// Cluster member closest to the API in the new call graph.
    pub new_root: Option<Signature>,
}

/// Groups the changed methods visible from one API pair into clusters.
/// Clusters come out sorted by their smallest member.
pub fn clusters(
    old: &ModuleSnapshot,
    new: &ModuleSnapshot,
    old_graph: &CallGraph,
    new_graph: &CallGraph,
    changed: &BTreeSet<Signature>,
) -> Vec<ChangeCluster> {
    let mut nodes: BTreeSet<&Signature> = BTreeSet::new();
    for sig in old_graph.depth.keys().chain(new_graph.depth.keys()) {
        if changed.contains(sig) {
            nodes.insert(sig);
        }
    }

    let mut adjacency: BTreeMap<&Signature, BTreeSet<&Signature>> = BTreeMap::new();
    for (from, to, _) in old_graph.edges.iter().chain(new_graph.edges.iter()) {
        if nodes.contains(from) && nodes.contains(to) {
            adjacency.entry(from).or_default().insert(to);
            adjacency.entry(to).or_default().insert(from);
        }
    }
    let mut by_key: BTreeMap<MethodKey, Vec<&Signature>> = BTreeMap::new();
    for &sig in &nodes {
        by_key.entry(method_key(sig)).or_default().push(sig);
    }
    for group in by_key.values() {
        for pair in group.windows(2) {
            adjacency.entry(pair[0]).or_default().insert(pair[1]);
            adjacency.entry(pair[1]).or_default().insert(pair[0]);
        }
    }

    let mut seen: BTreeSet<&Signature> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in &nodes {
        if seen.contains(start) {
            continue;
        }
        let mut component = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(node) = stack.pop() {
            component.insert(node.clone());
            if let Some(neighbors) = adjacency.get(node) {
                for &next in neighbors {
                    if seen.insert(next) {
                        stack.push(next);
                    }
                }
            }
        }

        let old_members: BTreeSet<Signature> = component
            .iter()
            .filter(|sig| old.method(sig).is_some())
            .cloned()
            .collect();
        let new_members: BTreeSet<Signature> = component
            .iter()
            .filter(|sig| new.method(sig).is_some())
            .cloned()
            .collect();
        let root_of = |members: &BTreeSet<Signature>, graph: &CallGraph| -> Option<Signature> {
            members
                .iter()
                .min_by_key(|sig| {
                    (
                        graph.depth.get(sig).copied().unwrap_or(usize::MAX),
                        sig.display_string(),
                    )
                })
                .cloned()
        };
        let old_root = root_of(&old_members, old_graph);
        let new_root = root_of(&new_members, new_graph);
        out.push(ChangeCluster {
            members: component,
            old_members,
            new_members,
            old_root,
            new_root,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callgraph::DEFAULT_DEPTH_CAP;
    use crate::ir::loader::snapshot_from_sources;
    use crate::ir::Version;

    fn snapshot(text: &str) -> ModuleSnapshot {
        snapshot_from_sources(&[("test.mvil", text)], Version::parse("1.0.0").unwrap()).unwrap()
    }

    fn sig(text: &str) -> Signature {
        Signature::parse_str(text).unwrap()
    }

    fn print_of(snapshot: &ModuleSnapshot, sig_text: &str) -> u64 {
        let method = snapshot.method(&sig(sig_text)).unwrap();
        fingerprint(method, snapshot)
    }

    #[test]
    fn fingerprint_ignores_local_and_label_names() {
        let a = snapshot(
            r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    c = relop lt p, #0;
    branch c, neg, pos;
  neg:
    x = const #-1;
    goto end;
  pos:
    x = const #1;
    goto end;
  end:
    return x;
  }
}
"#,
        );
        let b = snapshot(
            r#"
class C {
  method public int f(int a) {
  entry:
    arg = param 0;
    isneg = relop lt arg, #0;
    branch isneg, below, above;
  below:
    result = const #-1;
    goto out;
  above:
    result = const #1;
    goto out;
  out:
    return result;
  }
}
"#,
        );
        assert_eq!(print_of(&a, "C.f(int):int"), print_of(&b, "C.f(int):int"));
    }

    #[test]
    fn fingerprint_sees_literals_operators_and_fields() {
        let base = snapshot(
            r#"
class C {
  field int total;
  method public int f(int a) {
  entry:
    p = param 0;
    r = binop add p, #1;
    putfield this, C.total, r;
    return r;
  }
}
"#,
        );
        let literal = snapshot(
            r#"
class C {
  field int total;
  method public int f(int a) {
  entry:
    p = param 0;
    r = binop add p, #2;
    putfield this, C.total, r;
    return r;
  }
}
"#,
        );
        let operator = snapshot(
            r#"
class C {
  field int total;
  method public int f(int a) {
  entry:
    p = param 0;
    r = binop sub p, #1;
    putfield this, C.total, r;
    return r;
  }
}
"#,
        );
        let key = "C.f(int):int";
        assert_ne!(print_of(&base, key), print_of(&literal, key));
        assert_ne!(print_of(&base, key), print_of(&operator, key));
        assert_ne!(print_of(&literal, key), print_of(&operator, key));
    }

    #[test]
    fn external_resolution_flip_changes_the_fingerprint() {
        let body = r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    r = call Util.scale(int):int p;
    return r;
  }
}
"#;
        let util = r#"
class Util {
  method public int scale(int x) {
  entry:
    p = param 0;
    r = binop mul p, #2;
    return r;
  }
}
"#;
        let without = snapshot(body);
        let with = snapshot_from_sources(
            &[("c.mvil", body), ("util.mvil", util)],
            Version::parse("1.0.0").unwrap(),
        )
        .unwrap();
        let key = "C.f(int):int";
        assert_ne!(print_of(&without, key), print_of(&with, key));
    }

    #[test]
    fn changed_methods_cover_additions_removals_and_edits() {
        let old = snapshot(
            r#"
class C {
  method public int same(int a) {
  entry:
    p = param 0;
    return p;
  }
  method public int edited(int a) {
  entry:
    p = param 0;
    r = binop add p, #1;
    return r;
  }
  method public void removed() {
  entry:
    return;
  }
}
"#,
        );
        let new = snapshot(
            r#"
class C {
  method public int same(int a) {
  entry:
    p = param 0;
    return p;
  }
  method public int edited(int a) {
  entry:
    p = param 0;
    r = binop add p, #2;
    return r;
  }
  method public void added() {
  entry:
    return;
  }
}
"#,
        );
        let changed = changed_methods(&old, &new);
        let names: Vec<String> = changed.iter().map(|s| s.display_string()).collect();
        assert_eq!(
            names,
            vec!["C.added():void", "C.edited(int):int", "C.removed():void"]
        );
    }

    #[test]
    fn unchanged_intermediary_splits_clusters() {
        let old_text = r#"
class C {
  method public int api(int a) {
  entry:
    p = param 0;
    x = call C.mid(int):int p;
    y = call C.other(int):int x;
    return y;
  }
  method public int mid(int a) {
  entry:
    p = param 0;
    r = call C.leaf(int):int p;
    return r;
  }
  method public int leaf(int a) {
  entry:
    p = param 0;
    r = binop add p, #1;
    return r;
  }
  method public int other(int a) {
  entry:
    p = param 0;
    r = binop mul p, #3;
    return r;
  }
}
"#;
        let new_text = r#"
class C {
  method public int api(int a) {
  entry:
    p = param 0;
    x = call C.mid(int):int p;
    y = call C.other(int):int x;
    return y;
  }
  method public int mid(int a) {
  entry:
    p = param 0;
    r = call C.leaf(int):int p;
    return r;
  }
  method public int leaf(int a) {
  entry:
    p = param 0;
    r = binop add p, #2;
    return r;
  }
  method public int other(int a) {
  entry:
    p = param 0;
    r = binop mul p, #4;
    return r;
  }
}
"#;
        let old = snapshot(old_text);
        let new = snapshot(new_text);
        let api = sig("C.api(int):int");
        let old_graph = CallGraph::build(&old, old.method(&api).unwrap(), DEFAULT_DEPTH_CAP);
        let new_graph = CallGraph::build(&new, new.method(&api).unwrap(), DEFAULT_DEPTH_CAP);
        let changed = changed_methods(&old, &new);
        // leaf and other changed; api and mid did not. leaf connects to
        // nothing changed (mid is unchanged), so two clusters result.
        let found = clusters(&old, &new, &old_graph, &new_graph, &changed);
        assert_eq!(found.len(), 2);
        assert_eq!(
            found[0].members.iter().next().unwrap().display_string(),
            "C.leaf(int):int"
        );
        assert_eq!(found[0].old_root, Some(sig("C.leaf(int):int")));
        assert_eq!(found[1].old_root, Some(sig("C.other(int):int")));
    }

    #[test]
    fn adjacent_changes_merge_and_root_is_closest_to_api() {
        let old_text = r#"
class C {
  method public int api(int a) {
  entry:
    p = param 0;
    x = call C.mid(int):int p;
    return x;
  }
  method public int mid(int a) {
  entry:
    p = param 0;
    r = call C.leaf(int):int p;
    return r;
  }
  method public int leaf(int a) {
  entry:
    p = param 0;
    r = binop add p, #1;
    return r;
  }
}
"#;
        let new_text = r#"
class C {
  method public int api(int a) {
  entry:
    p = param 0;
    x = call C.mid(int):int p;
    return x;
  }
  method public int mid(int a) {
  entry:
    p = param 0;
    r = call C.leaf(int):int p;
    r2 = binop add r, #0;
    return r2;
  }
  method public int leaf(int a) {
  entry:
    p = param 0;
    r = binop add p, #2;
    return r;
  }
}
"#;
        let old = snapshot(old_text);
        let new = snapshot(new_text);
        let api = sig("C.api(int):int");
        let old_graph = CallGraph::build(&old, old.method(&api).unwrap(), DEFAULT_DEPTH_CAP);
        let new_graph = CallGraph::build(&new, new.method(&api).unwrap(), DEFAULT_DEPTH_CAP);
        let changed = changed_methods(&old, &new);
        let found = clusters(&old, &new, &old_graph, &new_graph, &changed);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].members.len(), 2);
        assert_eq!(found[0].old_root, Some(sig("C.mid(int):int")));
        assert_eq!(found[0].new_root, Some(sig("C.mid(int):int")));
    }
}

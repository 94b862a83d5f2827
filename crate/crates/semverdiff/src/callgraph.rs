//! Call-graph construction, API candidate pairing, and path enumeration.
//!
//! A call graph is built per public API method by breadth-first traversal of
//! resolved call sites, capped at a configurable depth. Callees whose class
//! is not part of the snapshot are kept as external leaf nodes: they carry
//! their declared signature but are never expanded.
//!
//! Candidate pairing matches the public APIs of two snapshots by class,
//! name, and parameter list. Old APIs that no longer match produce
//! syntactic-breakage findings; matching APIs whose new return type still
//! widens into the old one become candidate pairs for semantic comparison.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::ir::{MethodIR, ModuleSnapshot, Signature, Visibility};

/// Default bound on the breadth-first traversal depth.
pub const DEFAULT_DEPTH_CAP: usize = 15;

/// Default bound on the number of paths `all_call_paths` returns.
pub const DEFAULT_MAX_PATHS: usize = 256;

/// Call graph reachable from one API method.
#[derive(Debug, Clone)]
pub struct CallGraph {
    pub api: Signature,
    /// Breadth-first depth of every node, the API itself at depth 0.
    /// External nodes appear here too, one step below their caller.
    pub depth: BTreeMap<Signature, usize>,
    /// Nodes that are declared call targets but not part of the snapshot.
    pub externals: BTreeSet<Signature>,
    /// `(caller, callee, call statement id)` for every traversed call site.
    pub edges: BTreeSet<(Signature, Signature, usize)>,
}

impl CallGraph {
    /// Builds the graph reachable from `api` in `snapshot`. Methods at
    /// `depth_cap` are kept as frontier nodes but their calls are not
    /// followed.
    pub fn build(snapshot: &ModuleSnapshot, api: &MethodIR, depth_cap: usize) -> CallGraph {
        let mut graph = CallGraph {
            api: api.signature.clone(),
            depth: BTreeMap::new(),
            externals: BTreeSet::new(),
            edges: BTreeSet::new(),
        };
        let mut queue = VecDeque::new();
        graph.depth.insert(api.signature.clone(), 0);
        queue.push_back((api.signature.clone(), 0usize));

        while let Some((caller_sig, depth)) = queue.pop_front() {
            if depth >= depth_cap {
                continue;
            }
            let Some(caller) = snapshot.resolve(&caller_sig) else {
                continue;
            };
            for (stmt_id, callee) in caller.call_sites() {
                let resolved = snapshot.resolve(callee);
                // Edges carry the declaration-side signature so that graph
                // nodes are unambiguous.
                let callee_sig = match resolved {
                    Some(target) => target.signature.clone(),
                    None => callee.clone(),
                };
                graph
                    .edges
                    .insert((caller_sig.clone(), callee_sig.clone(), stmt_id));
                if resolved.is_none() {
                    graph.externals.insert(callee_sig.clone());
                }
                if !graph.depth.contains_key(&callee_sig) {
                    graph.depth.insert(callee_sig.clone(), depth + 1);
                    if resolved.is_some() {
                        queue.push_back((callee_sig, depth + 1));
                    }
                }
            }
        }
        graph
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.depth.contains_key(sig)
    }

    /// Distinct callees of `caller`, sorted.
    pub fn callees(&self, caller: &Signature) -> Vec<&Signature> {
        let mut out: Vec<&Signature> = self
            .edges
            .iter()
            .filter(|(from, _, _)| from == caller)
            .map(|(_, to, _)| to)
            .collect();
        out.dedup();
        out
    }

    /// Every simple call path from `from` to `to`, shortest first; paths of
    /// equal length come out in lexicographic node order. At most
    /// `max_paths` paths are returned.
    pub fn all_call_paths(
        &self,
        from: &Signature,
        to: &Signature,
        max_paths: usize,
    ) -> Result<Vec<Vec<Signature>>, PathError> {
        let no_path = || PathError::NoPath {
            from: from.display_string(),
            to: to.display_string(),
        };
        if !self.contains(from) || !self.contains(to) {
            return Err(no_path());
        }
        if from == to {
            return Ok(vec![vec![from.clone()]]);
        }

        let mut paths = Vec::new();
        let mut frontier: VecDeque<Vec<Signature>> = VecDeque::new();
        frontier.push_back(vec![from.clone()]);
        let mut expansions = 0usize;
        while let Some(path) = frontier.pop_front() {
            expansions += 1;
            if expansions > 1_000_000 {
                break;
            }
            let last = path.last().expect("paths are never empty");
            for callee in self.callees(last) {
                if path.contains(callee) {
                    continue;
                }
                let mut next = path.clone();
                next.push(callee.clone());
                if callee == to {
                    paths.push(next);
                    if paths.len() >= max_paths {
                        return Ok(paths);
                    }
                } else {
                    frontier.push_back(next);
                }
            }
        }
        if paths.is_empty() {
            Err(no_path())
        } else {
            Ok(paths)
        }
    }
}

#[derive(Debug, Error)]
pub enum PathError {
    #[error("no call path from {from} to {to}")]
    NoPath { from: String, to: String },
}

/// Matched old/new API methods with compatible signatures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiPair {
    pub old: Signature,
    pub new: Signature,
}

/// Ways an old public API can break without any semantic analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynBKind {
    MissingClass,
    MissingMethod,
    ParamChange,
    ReturnNarrowing,
    VisibilityReduced,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SynBFinding {
    pub signature: Signature,
    pub kind: SynBKind,
}

/// Pairs every old public API with its new counterpart, or reports why it
/// cannot be paired. Ordering follows the old snapshot's sorted public
/// methods.
pub fn pair_apis(old: &ModuleSnapshot, new: &ModuleSnapshot) -> (Vec<ApiPair>, Vec<SynBFinding>) {
    let mut pairs = Vec::new();
    let mut findings = Vec::new();
    for method in old.public_methods() {
        let old_sig = &method.signature;
        let mut report = |kind: SynBKind| {
            findings.push(SynBFinding {
                signature: old_sig.clone(),
                kind,
            })
        };
        let Some(new_class) = new.classes.get(&old_sig.class_name) else {
            report(SynBKind::MissingClass);
            continue;
        };
        let key = (old_sig.method_name.clone(), old_sig.param_types.clone());
        let Some(candidate) = new_class.methods.get(&key) else {
            let renamed_params = new_class.methods.keys().any(|(name, params)| {
                name == &old_sig.method_name && params != &old_sig.param_types
            });
            if renamed_params {
                report(SynBKind::ParamChange);
            } else {
                report(SynBKind::MissingMethod);
            }
            continue;
        };
        if candidate.signature.visibility != Visibility::Public {
            report(SynBKind::VisibilityReduced);
            continue;
        }
        if candidate
            .signature
            .return_type
            .widens_to(&old_sig.return_type)
        {
            pairs.push(ApiPair {
                old: old_sig.clone(),
                new: candidate.signature.clone(),
            });
        } else {
            report(SynBKind::ReturnNarrowing);
        }
    }
    (pairs, findings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::loader::snapshot_from_sources;
    use crate::ir::Version;

    fn snapshot(text: &str) -> ModuleSnapshot {
        snapshot_from_sources(&[("test.mvil", text)], Version::parse("1.0.0").unwrap()).unwrap()
    }

    fn sig(text: &str) -> Signature {
        Signature::parse_str(text).unwrap()
    }

    const DIAMOND: &str = r#"
class G {
  method public int a(int x) {
  entry:
    p = param 0;
    r1 = call G.b(int):int p;
    r2 = call G.c(int):int p;
    r = binop add r1, r2;
    return r;
  }
  method public int b(int x) {
  entry:
    p = param 0;
    r = call G.d(int):int p;
    return r;
  }
  method public int c(int x) {
  entry:
    p = param 0;
    r = call G.d(int):int p;
    return r;
  }
  method public int d(int x) {
  entry:
    p = param 0;
    r = call Ext.leaf(int):int p;
    return r;
  }
}
"#;

    #[test]
    fn bfs_depths_and_externals() {
        let snap = snapshot(DIAMOND);
        let api = snap.method(&sig("G.a(int):int")).unwrap();
        let graph = CallGraph::build(&snap, api, DEFAULT_DEPTH_CAP);
        assert_eq!(graph.depth[&sig("G.a(int):int")], 0);
        assert_eq!(graph.depth[&sig("G.b(int):int")], 1);
        assert_eq!(graph.depth[&sig("G.c(int):int")], 1);
        assert_eq!(graph.depth[&sig("G.d(int):int")], 2);
        assert_eq!(graph.depth[&sig("Ext.leaf(int):int")], 3);
        assert_eq!(graph.externals, BTreeSet::from([sig("Ext.leaf(int):int")]));
    }

    #[test]
    fn depth_cap_freezes_the_frontier() {
        let snap = snapshot(DIAMOND);
        let api = snap.method(&sig("G.a(int):int")).unwrap();
        let graph = CallGraph::build(&snap, api, 2);
        assert!(graph.contains(&sig("G.d(int):int")));
        assert!(!graph.contains(&sig("Ext.leaf(int):int")));
    }

    #[test]
    fn all_paths_in_the_diamond_come_shortest_first() {
        let snap = snapshot(DIAMOND);
        let api = snap.method(&sig("G.a(int):int")).unwrap();
        let graph = CallGraph::build(&snap, api, DEFAULT_DEPTH_CAP);
        let paths = graph
            .all_call_paths(
                &sig("G.a(int):int"),
                &sig("G.d(int):int"),
                DEFAULT_MAX_PATHS,
            )
            .unwrap();
        assert_eq!(
            paths,
            vec![
                vec![
                    sig("G.a(int):int"),
                    sig("G.b(int):int"),
                    sig("G.d(int):int")
                ],
                vec![
                    sig("G.a(int):int"),
                    sig("G.c(int):int"),
                    sig("G.d(int):int")
                ],
            ]
        );
    }

    #[test]
    fn trivial_and_missing_paths() {
        let snap = snapshot(DIAMOND);
        let api = snap.method(&sig("G.a(int):int")).unwrap();
        let graph = CallGraph::build(&snap, api, DEFAULT_DEPTH_CAP);
        let a = sig("G.a(int):int");
        assert_eq!(
            graph.all_call_paths(&a, &a, DEFAULT_MAX_PATHS).unwrap(),
            vec![vec![a.clone()]]
        );
        // d never calls back into a.
        assert!(graph
            .all_call_paths(&sig("G.d(int):int"), &a, DEFAULT_MAX_PATHS)
            .is_err());
    }

    #[test]
    fn paths_match_exhaustive_enumeration() {
        // Independent oracle: depth-first enumeration of every simple path,
        // compared as a set against the breadth-first result.
        let snap = snapshot(
            r#"
class G {
  method public void a() {
  entry:
    call G.b():void;
    call G.c():void;
    call G.d():void;
    return;
  }
  method public void b() {
  entry:
    call G.c():void;
    call G.e():void;
    return;
  }
  method public void c() {
  entry:
    call G.d():void;
    call G.e():void;
    return;
  }
  method public void d() {
  entry:
    call G.e():void;
    return;
  }
  method public void e() {
  entry:
    return;
  }
}
"#,
        );
        let api = snap.method(&sig("G.a():void")).unwrap();
        let graph = CallGraph::build(&snap, api, DEFAULT_DEPTH_CAP);
        let from = sig("G.a():void");
        let to = sig("G.e():void");

        fn dfs(
            graph: &CallGraph,
            path: &mut Vec<Signature>,
            to: &Signature,
            found: &mut BTreeSet<Vec<Signature>>,
        ) {
            let last = path.last().unwrap().clone();
            if &last == to {
                found.insert(path.clone());
                return;
            }
            for callee in graph.callees(&last) {
                if path.contains(callee) {
                    continue;
                }
                path.push(callee.clone());
                dfs(graph, path, to, found);
                path.pop();
            }
        }
        let mut expected = BTreeSet::new();
        dfs(&graph, &mut vec![from.clone()], &to, &mut expected);

        let paths = graph.all_call_paths(&from, &to, DEFAULT_MAX_PATHS).unwrap();
        let got: BTreeSet<Vec<Signature>> = paths.iter().cloned().collect();
        assert_eq!(got, expected);
        assert_eq!(got.len(), paths.len(), "no duplicate paths");
        for pair in paths.windows(2) {
            assert!(pair[0].len() <= pair[1].len(), "shortest paths come first");
        }
    }

    #[test]
    fn pairing_reports_each_breakage_kind() {
        let old = snapshot(
            r#"
class Gone { method public void f() {
entry:
  return;
} }
class Kept {
  method public void gone() {
  entry:
    return;
  }
  method public int renamed(int a) {
  entry:
    p = param 0;
    return p;
  }
  method public int narrowed() {
  entry:
    x = const #1;
    return x;
  }
  method public long widened() {
  entry:
    x = const #1;
    return x;
  }
  method public void hidden() {
  entry:
    return;
  }
  method public int same(int a) {
  entry:
    p = param 0;
    return p;
  }
}
"#,
        );
        let new = snapshot(
            r#"
class Kept {
  method public int renamed(long a) {
  entry:
    p = param 0;
    y = const #0;
    return y;
  }
  method public long narrowed() {
  entry:
    x = const #1;
    return x;
  }
  method public int widened() {
  entry:
    x = const #1;
    return x;
  }
  method private void hidden() {
  entry:
    return;
  }
  method public int same(int a) {
  entry:
    p = param 0;
    return p;
  }
}
"#,
        );
        let (pairs, findings) = pair_apis(&old, &new);
        let kinds: BTreeMap<String, SynBKind> = findings
            .iter()
            .map(|f| (f.signature.display_string(), f.kind))
            .collect();
        assert_eq!(kinds["Gone.f():void"], SynBKind::MissingClass);
        assert_eq!(kinds["Kept.gone():void"], SynBKind::MissingMethod);
        assert_eq!(kinds["Kept.renamed(int):int"], SynBKind::ParamChange);
        assert_eq!(kinds["Kept.narrowed():int"], SynBKind::ReturnNarrowing);
        assert_eq!(kinds["Kept.hidden():void"], SynBKind::VisibilityReduced);
        // `widened` pairs: the new int return still widens into old long.
        let paired: Vec<String> = pairs.iter().map(|p| p.old.display_string()).collect();
        assert_eq!(paired, vec!["Kept.same(int):int", "Kept.widened():long"]);
    }
}

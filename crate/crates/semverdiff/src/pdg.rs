//! Per-method program dependence graph.
//!
//! Data dependence comes from reaching definitions computed at statement
//! level over two variable spaces: locals, and one pseudo-variable per
//! `Class.field` pair so that `putfield` defines and `getfield` uses flow
//! like ordinary assignments. Control dependence is lifted from block
//! granularity: every statement of a block depends on exactly the branch
//! statements its block depends on.

use std::collections::{BTreeMap, BTreeSet};

use crate::cfg::Cfg;
use crate::ir::{MethodIR, Statement, StatementKind};

/// Variable named by a statement: a local, or a `Class.field` pseudo-var.
/// Field pseudo-vars embed a `.` so they can never collide with local names.
fn field_var(class: &str, field: &str) -> String {
    format!("{class}.{field}")
}

/// What a statement defines in the reaching-definitions sense.
fn defined_var(stmt: &Statement) -> Option<String> {
    match &stmt.kind {
        StatementKind::FieldStore { class, field, .. } => Some(field_var(class, field)),
        _ => stmt.def().map(str::to_string),
    }
}

/// Variables a statement reads: its local operands plus the field
/// pseudo-var for `getfield`.
fn used_vars(stmt: &Statement) -> Vec<String> {
    let mut used: Vec<String> = stmt
        .uses()
        .iter()
        .filter_map(|o| o.as_local().map(str::to_string))
        .collect();
    if let StatementKind::FieldLoad { class, field, .. } = &stmt.kind {
        used.push(field_var(class, field));
    }
    used
}

/// Dependence graph of one method, indexed by statement id.
#[derive(Debug, Clone)]
pub struct Pdg {
    /// `data_deps[s]` holds the ids of the definitions each use of `s`
    /// resolves to, merged over all of its used variables.
    pub data_deps: Vec<BTreeSet<usize>>,
    /// `use_defs[s]` keeps the per-variable split of `data_deps[s]`.
    pub use_defs: Vec<BTreeMap<String, BTreeSet<usize>>>,
    /// `control_deps[s]` holds the ids of branch statements governing `s`.
    pub control_deps: Vec<BTreeSet<usize>>,
}

impl Pdg {
    pub fn build(method: &MethodIR, cfg: &Cfg) -> Pdg {
        let n = method.statements.len();

        // Per-block gen/kill in terms of definition statement ids.
        let all_defs: BTreeMap<usize, String> = method
            .statements
            .iter()
            .filter_map(|s| defined_var(s).map(|v| (s.id, v)))
            .collect();
        let mut defs_of_var: BTreeMap<&str, BTreeSet<usize>> = BTreeMap::new();
        for (&id, var) in &all_defs {
            defs_of_var.entry(var).or_default().insert(id);
        }

        let blocks = method.blocks.len();
        let mut gen_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks];
        let mut kill_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks];
        for block in 0..blocks {
            for stmt in method.block_statements(block) {
                if let Some(var) = all_defs.get(&stmt.id) {
                    let same_var = &defs_of_var[var.as_str()];
                    gen_sets[block].retain(|d| !same_var.contains(d));
                    gen_sets[block].insert(stmt.id);
                    kill_sets[block].extend(same_var.iter().copied());
                }
            }
        }

        // Forward fixpoint over the CFG; the virtual exit is skipped.
        let mut ins: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks];
        let mut outs: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); blocks];
        let mut changed = true;
        while changed {
            changed = false;
            for block in 0..blocks {
                let mut in_set = BTreeSet::new();
                for &pred in &cfg.preds[block] {
                    if pred < blocks {
                        in_set.extend(outs[pred].iter().copied());
                    }
                }
                let mut out_set: BTreeSet<usize> = in_set
                    .iter()
                    .copied()
                    .filter(|d| !kill_sets[block].contains(d))
                    .collect();
                out_set.extend(gen_sets[block].iter().copied());
                if in_set != ins[block] || out_set != outs[block] {
                    ins[block] = in_set;
                    outs[block] = out_set;
                    changed = true;
                }
            }
        }

        // Statement-level pass: thread the reaching set through each block.
        let mut use_defs: Vec<BTreeMap<String, BTreeSet<usize>>> = vec![BTreeMap::new(); n];
        let mut data_deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (block, in_set) in ins.iter().enumerate() {
            let mut live: BTreeSet<usize> = in_set.clone();
            for stmt in method.block_statements(block) {
                for var in used_vars(stmt) {
                    let defs: BTreeSet<usize> = live
                        .iter()
                        .copied()
                        .filter(|d| all_defs.get(d) == Some(&var))
                        .collect();
                    data_deps[stmt.id].extend(defs.iter().copied());
                    use_defs[stmt.id].entry(var).or_default().extend(defs);
                }
                if let Some(var) = all_defs.get(&stmt.id) {
                    live.retain(|d| all_defs.get(d) != Some(var));
                    live.insert(stmt.id);
                }
            }
        }

        // Lift block-level control dependence to statements.
        let block_deps = cfg.control_dependence(method);
        let mut control_deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for (block, deps) in block_deps.iter().enumerate() {
            for stmt in method.block_statements(block) {
                control_deps[stmt.id] = deps.clone();
            }
        }

        Pdg {
            data_deps,
            use_defs,
            control_deps,
        }
    }

    /// Definitions that the use of `var` at statement `stmt` resolves to.
    pub fn defs_for_use(&self, stmt: usize, var: &str) -> BTreeSet<usize> {
        self.use_defs[stmt].get(var).cloned().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parser::parse_module;

    fn pdg_of(text: &str) -> (MethodIR, Pdg) {
        let classes = parse_module(text).expect("parse");
        let method = classes[0].methods.values().next().unwrap().clone();
        let cfg = Cfg::build(&method);
        let pdg = Pdg::build(&method, &cfg);
        (method, pdg)
    }

    #[test]
    fn straight_line_defs_reach_their_uses() {
        let (_, pdg) = pdg_of(
            r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    x = binop add p, #1;
    y = binop mul x, p;
    return y;
  }
}
"#,
        );
        // Hand oracle: statement 1 uses p (def 0); statement 2 uses x (def 1)
        // and p (def 0); the return uses y (def 2).
        assert_eq!(pdg.data_deps[0], BTreeSet::new());
        assert_eq!(pdg.data_deps[1], BTreeSet::from([0]));
        assert_eq!(pdg.data_deps[2], BTreeSet::from([0, 1]));
        assert_eq!(pdg.data_deps[3], BTreeSet::from([2]));
    }

    #[test]
    fn merge_point_sees_both_definitions() {
        let (method, pdg) = pdg_of(
            r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    c = relop lt p, #0;
    branch c, neg, pos;
  neg:
    x = const #-1;
    goto join;
  pos:
    x = const #1;
    goto join;
  join:
    return x;
  }
}
"#,
        );
        let ret_id = method.statements.len() - 1;
        // Both `x = const` defs (ids 3 and 5) reach the return.
        assert_eq!(pdg.data_deps[ret_id], BTreeSet::from([3, 5]));
        // The return itself is not control-dependent on the branch: both
        // arms rejoin before it.
        assert!(pdg.control_deps[ret_id].is_empty());
        assert_eq!(pdg.control_deps[3], BTreeSet::from([2]));
        assert_eq!(pdg.control_deps[5], BTreeSet::from([2]));
    }

    #[test]
    fn redefinition_kills_earlier_definition() {
        let (_, pdg) = pdg_of(
            r#"
class C {
  method public int f(int a) {
  entry:
    x = const #1;
    x = const #2;
    return x;
  }
}
"#,
        );
        assert_eq!(pdg.data_deps[2], BTreeSet::from([1]));
    }

    #[test]
    fn field_pseudo_variables_flow_between_statements() {
        let (_, pdg) = pdg_of(
            r#"
class C {
  field int total;
  method public int f(int a) {
  entry:
    p = param 0;
    putfield this, C.total, p;
    v = getfield this, C.total;
    r = binop add v, #1;
    putfield this, C.total, r;
    w = getfield this, C.total;
    return w;
  }
}
"#,
        );
        // getfield at 2 reads the store at 1; the store at 4 kills it, so
        // getfield at 5 reads only the store at 4.
        assert_eq!(pdg.defs_for_use(2, "C.total"), BTreeSet::from([1]));
        assert_eq!(pdg.defs_for_use(5, "C.total"), BTreeSet::from([4]));
        // The store at 4 uses the local r (def 3) but not the older store.
        assert_eq!(pdg.data_deps[4], BTreeSet::from([3]));
    }

    #[test]
    fn loop_carried_definition_reaches_the_condition() {
        let (method, pdg) = pdg_of(
            r#"
class C {
  method public int f(int a) {
  entry:
    p = param 0;
    goto head;
  head:
    c = relop gt p, #0;
    branch c, body, done;
  body:
    p = binop sub p, #1;
    goto body2;
  body2:
    goto head;
  done:
    return p;
  }
}
"#,
        );
        // `c = relop gt p, #0` sees both the param bind and the loop-carried
        // subtraction.
        assert_eq!(pdg.defs_for_use(2, "p"), BTreeSet::from([0, 4]));
        let ret_id = method.statements.len() - 1;
        assert_eq!(pdg.data_deps[ret_id], BTreeSet::from([0, 4]));
    }
}

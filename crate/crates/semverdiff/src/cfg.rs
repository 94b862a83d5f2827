//! Per-method control-flow graph, postdominators, and control dependence.
//!
//! Nodes are the method's basic blocks plus one virtual exit node. Edges
//! follow terminators: `branch` targets both blocks, `goto` its block,
//! `return` the exit, and `throw` the covering handler when one catches the
//! thrown exception, the exit otherwise. Every block is guaranteed a path to
//! the exit: blocks trapped in non-terminating loops get a virtual exit edge
//! so postdominators are total.
//!
//! Control dependence is computed from immediate postdominators: for an edge
//! `A -> B` where `B` does not postdominate `A`, every node from `B` up the
//! postdominator tree to (but excluding) `ipdom(A)` depends on the branch
//! ending `A`. A branch inside a loop body can therefore depend on itself,
//! which is how loop conditions surface in slices.

use std::collections::BTreeSet;

use crate::ir::{MethodIR, StatementKind};

/// Control-flow graph of one method. Block indices match
/// `MethodIR::blocks`; `exit` is the extra virtual node.
#[derive(Debug, Clone)]
pub struct Cfg {
    pub block_count: usize,
    pub exit: usize,
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

impl Cfg {
    pub fn build(method: &MethodIR) -> Cfg {
        let block_count = method.blocks.len();
        let exit = block_count;
        let mut succs: Vec<Vec<usize>> = vec![Vec::new(); block_count + 1];

        for (index, _) in method.blocks.iter().enumerate() {
            let stmts = method.block_statements(index);
            let mut targets = Vec::new();
            match stmts.last().map(|s| &s.kind) {
                Some(StatementKind::Branch {
                    then_label,
                    else_label,
                    ..
                }) => {
                    targets.push(method.block_index(then_label).unwrap_or(exit));
                    targets.push(method.block_index(else_label).unwrap_or(exit));
                }
                Some(StatementKind::Goto { label }) => {
                    targets.push(method.block_index(label).unwrap_or(exit));
                }
                Some(StatementKind::Return { .. }) => targets.push(exit),
                Some(StatementKind::Throw { exception }) => {
                    targets.push(throw_target(method, index, exception).unwrap_or(exit));
                }
                _ => targets.push(exit),
            }
            for target in targets {
                if !succs[index].contains(&target) {
                    succs[index].push(target);
                }
            }
        }

        // Blocks that cannot reach the exit (non-terminating loops) get a
        // virtual exit edge so the postdominator tree covers every node.
        let mut reaches_exit = vec![false; block_count + 1];
        reaches_exit[exit] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for block in 0..block_count {
                if !reaches_exit[block] && succs[block].iter().any(|&s| reaches_exit[s]) {
                    reaches_exit[block] = true;
                    changed = true;
                }
            }
        }
        for block in 0..block_count {
            if !reaches_exit[block] {
                succs[block].push(exit);
            }
        }

        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); block_count + 1];
        for (from, outs) in succs.iter().enumerate() {
            for &to in outs {
                preds[to].push(from);
            }
        }
        Cfg {
            block_count,
            exit,
            succs,
            preds,
        }
    }

    /// Immediate postdominator of every block; the exit maps to itself.
    /// Blocks unreachable from the entry still get an answer as long as they
    /// have a path to the exit, which `build` guarantees.
    pub fn immediate_postdominators(&self) -> Vec<usize> {
        let n = self.exit + 1;

        // Postorder of the reverse graph from the exit; predecessors in the
        // reverse graph are this graph's successors.
        let mut postorder = Vec::with_capacity(n);
        let mut visited = vec![false; n];
        let mut stack = vec![(self.exit, 0usize)];
        visited[self.exit] = true;
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            if *next < self.preds[node].len() {
                let child = self.preds[node][*next];
                *next += 1;
                if !visited[child] {
                    visited[child] = true;
                    stack.push((child, 0));
                }
            } else {
                postorder.push(node);
                stack.pop();
            }
        }

        let mut rpo_number = vec![usize::MAX; n];
        for (i, &node) in postorder.iter().rev().enumerate() {
            rpo_number[node] = i;
        }

        let mut ipdom: Vec<Option<usize>> = vec![None; n];
        ipdom[self.exit] = Some(self.exit);
        let mut changed = true;
        while changed {
            changed = false;
            for &node in postorder.iter().rev() {
                if node == self.exit {
                    continue;
                }
                let mut new_idom: Option<usize> = None;
                for &succ in &self.succs[node] {
                    if ipdom[succ].is_none() {
                        continue;
                    }
                    new_idom = Some(match new_idom {
                        None => succ,
                        Some(current) => intersect(&ipdom, &rpo_number, succ, current),
                    });
                }
                if let Some(new_idom) = new_idom {
                    if ipdom[node] != Some(new_idom) {
                        ipdom[node] = Some(new_idom);
                        changed = true;
                    }
                }
            }
        }
        ipdom
            .into_iter()
            .map(|d| d.expect("every node reaches the exit"))
            .collect()
    }

    /// Control dependence at block granularity: `result[block]` holds the
    /// statement ids of the `branch` statements the block depends on.
    pub fn control_dependence(&self, method: &MethodIR) -> Vec<BTreeSet<usize>> {
        let ipdom = self.immediate_postdominators();
        let mut deps: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.block_count];
        for block in 0..self.block_count {
            let stmts = method.block_statements(block);
            let Some(last) = stmts.last() else { continue };
            if !matches!(last.kind, StatementKind::Branch { .. }) {
                continue;
            }
            let branch_id = last.id;
            for &succ in &self.succs[block] {
                let stop = ipdom[block];
                let mut walk = succ;
                while walk != stop && walk != self.exit {
                    deps[walk].insert(branch_id);
                    walk = ipdom[walk];
                }
            }
        }
        deps
    }
}

/// Handler block for an exception thrown in `block`, when a covering try
/// region catches that exception type. Regions are checked in declaration
/// order; the first match wins.
pub fn throw_target(method: &MethodIR, block: usize, exception: &str) -> Option<usize> {
    for region in &method.try_regions {
        let start = method.block_index(&region.start_label)?;
        let end = method.block_index(&region.end_label)?;
        if block >= start && block <= end && region.exception == exception {
            return method.block_index(&region.handler_label);
        }
    }
    None
}

fn intersect(ipdom: &[Option<usize>], rpo_number: &[usize], mut a: usize, mut b: usize) -> usize {
    while a != b {
        while rpo_number[a] > rpo_number[b] {
            a = ipdom[a].expect("intersect walked past the root");
        }
        while rpo_number[b] > rpo_number[a] {
            b = ipdom[b].expect("intersect walked past the root");
        }
    }
    a
}

use std::collections::{BTreeMap, BTreeSet};

use super::cfg::{Cfg, EdgeKind, Node};
use super::{MethodIr, Reg};

/// Statement-level dependences. Data edges are `(def, use, reg)`; control
/// edges are `(controller, controlled)`. Both lists are sorted and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub data: Vec<(usize, usize, Reg)>,
    pub ctrl: Vec<(usize, usize)>,
}

/// For every statement, the definitions (statement indices) reaching the
/// point just before it.
///
/// An exception edge leaving block `b` carries every state observable before
/// some statement of `b`, because any of them may throw.
pub fn reaching_definitions(ir: &MethodIr, cfg: &Cfg) -> Vec<BTreeSet<usize>> {
    let n_blocks = ir.blocks.len();
    let mut defs_of: BTreeMap<Reg, Vec<usize>> = BTreeMap::new();
    for (i, s) in ir.stmts.iter().enumerate() {
        if let Some(r) = s.def() {
            defs_of.entry(r).or_default().push(i);
        }
    }
    let transfer = |b: usize, input: &BTreeSet<usize>| -> (BTreeSet<usize>, BTreeSet<usize>) {
        let mut cur = input.clone();
        let mut seen = input.clone();
        let stmts = ir.blocks[b].clone();
        let last = stmts.end.saturating_sub(1);
        for i in stmts {
            if let Some(r) = ir.stmts[i].def() {
                for d in &defs_of[&r] {
                    cur.remove(d);
                }
                cur.insert(i);
                if i != last {
                    seen.insert(i);
                }
            }
        }
        (cur, seen)
    };

    let mut ins = vec![BTreeSet::new(); n_blocks];
    let mut outs = vec![(BTreeSet::new(), BTreeSet::new()); n_blocks];
    let mut changed = true;
    while changed {
        changed = false;
        for &b in &cfg.blocks {
            let mut input = BTreeSet::new();
            for &(p, kind) in cfg.preds(Node::Block(b)) {
                if let Node::Block(p) = p {
                    let (normal, exceptional) = &outs[p];
                    input.extend(if kind == EdgeKind::Exception { exceptional } else { normal });
                }
            }
            let out = transfer(b, &input);
            if out != outs[b] {
                changed = true;
                outs[b] = out;
            }
            ins[b] = input;
        }
    }

    let mut per_stmt = vec![BTreeSet::new(); ir.stmts.len()];
    for &b in &cfg.blocks {
        let mut cur = ins[b].clone();
        for i in ir.blocks[b].clone() {
            per_stmt[i] = cur.clone();
            if let Some(r) = ir.stmts[i].def() {
                for d in &defs_of[&r] {
                    cur.remove(d);
                }
                cur.insert(i);
            }
        }
    }
    per_stmt
}

/// Post-dominator set of every CFG node (each set contains the node itself),
/// computed on the graph including synthetic edges.
pub fn post_dominator_sets(cfg: &Cfg) -> BTreeMap<Node, BTreeSet<Node>> {
    let nodes = cfg.nodes();
    let all: BTreeSet<Node> = nodes.iter().copied().collect();
    let mut pdom: BTreeMap<Node, BTreeSet<Node>> = nodes
        .iter()
        .map(|&n| (n, if n == Node::Exit { BTreeSet::from([n]) } else { all.clone() }))
        .collect();
    let mut changed = true;
    while changed {
        changed = false;
        for &n in nodes.iter().rev() {
            if n == Node::Exit {
                continue;
            }
            let mut acc: Option<BTreeSet<Node>> = None;
            for &(s, _) in cfg.succs(n) {
                let ps = &pdom[&s];
                acc = Some(match acc {
                    None => ps.clone(),
                    Some(a) => a.intersection(ps).copied().collect(),
                });
            }
            let mut new = acc.unwrap_or_default();
            new.insert(n);
            if new != pdom[&n] {
                pdom.insert(n, new);
                changed = true;
            }
        }
    }
    pdom
}

/// Immediate post-dominator: the strict post-dominator that every other
/// strict post-dominator post-dominates.
fn immediate(pdom: &BTreeMap<Node, BTreeSet<Node>>, n: Node) -> Option<Node> {
    let strict: Vec<Node> = pdom[&n].iter().copied().filter(|&m| m != n).collect();
    strict
        .iter()
        .copied()
        .find(|&c| strict.iter().all(|o| pdom[&c].contains(o)))
}

/// Data dependences from reaching definitions and control dependences by
/// walking the post-dominator tree from each edge target up to the source's
/// immediate post-dominator. The controller of a block is its last
/// statement; ENTRY controls nothing.
pub fn dependencies(ir: &MethodIr, cfg: &Cfg) -> DepGraph {
    let rd = reaching_definitions(ir, cfg);
    let mut data = BTreeSet::new();
    for &b in &cfg.blocks {
        for u in ir.blocks[b].clone() {
            for r in ir.stmts[u].uses() {
                for &d in &rd[u] {
                    if ir.stmts[d].def() == Some(r) {
                        data.insert((d, u, r));
                    }
                }
            }
        }
    }

    let pdom = post_dominator_sets(cfg);
    let mut controlled: BTreeSet<(Node, Node)> = BTreeSet::new();
    for e in &cfg.edges {
        let Node::Block(_) = e.from else { continue };
        if pdom[&e.from].contains(&e.to) && e.from != e.to {
            continue;
        }
        let stop = immediate(&pdom, e.from);
        let mut cur = Some(e.to);
        while let Some(c) = cur {
            if Some(c) == stop || c == Node::Exit {
                break;
            }
            controlled.insert((e.from, c));
            cur = immediate(&pdom, c);
        }
    }
    let mut ctrl = BTreeSet::new();
    for (a, b) in controlled {
        let (Node::Block(a), Node::Block(b)) = (a, b) else { continue };
        let Some(controller) = ir.blocks[a].clone().last() else { continue };
        for s in ir.blocks[b].clone() {
            ctrl.insert((controller, s));
        }
    }
    DepGraph {
        data: data.into_iter().collect(),
        ctrl: ctrl.into_iter().collect(),
    }
}

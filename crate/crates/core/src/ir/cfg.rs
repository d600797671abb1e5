use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{BlockId, MethodIr, Stmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Entry,
    Block(BlockId),
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Fallthrough,
    BranchTaken,
    SwitchCase,
    Exception,
    /// Added so that every node reaches EXIT (infinite loops).
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CfgEdge {
    pub from: Node,
    pub to: Node,
    pub kind: EdgeKind,
}

/// Block-level control-flow graph with distinguished ENTRY and EXIT nodes.
/// Only blocks reachable from ENTRY are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub blocks: Vec<BlockId>,
    pub edges: Vec<CfgEdge>,
    succ: BTreeMap<Node, Vec<(Node, EdgeKind)>>,
    pred: BTreeMap<Node, Vec<(Node, EdgeKind)>>,
}

impl Cfg {
    fn from_edges(blocks: Vec<BlockId>, edges: Vec<CfgEdge>) -> Self {
        let mut succ: BTreeMap<Node, Vec<(Node, EdgeKind)>> = BTreeMap::new();
        let mut pred: BTreeMap<Node, Vec<(Node, EdgeKind)>> = BTreeMap::new();
        for e in &edges {
            succ.entry(e.from).or_default().push((e.to, e.kind));
            pred.entry(e.to).or_default().push((e.from, e.kind));
        }
        Cfg {
            blocks,
            edges,
            succ,
            pred,
        }
    }

    /// ENTRY, the reachable blocks in id order, then EXIT.
    pub fn nodes(&self) -> Vec<Node> {
        let mut v = vec![Node::Entry];
        v.extend(self.blocks.iter().map(|&b| Node::Block(b)));
        v.push(Node::Exit);
        v
    }

    pub fn succs(&self, n: Node) -> &[(Node, EdgeKind)] {
        self.succ.get(&n).map_or(&[], Vec::as_slice)
    }

    pub fn preds(&self, n: Node) -> &[(Node, EdgeKind)] {
        self.pred.get(&n).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, b: BlockId) -> bool {
        self.blocks.binary_search(&b).is_ok()
    }
}

fn reach(start: Node, next: impl Fn(Node) -> Vec<Node>) -> BTreeSet<Node> {
    let mut seen = BTreeSet::from([start]);
    let mut work = VecDeque::from([start]);
    while let Some(n) = work.pop_front() {
        for m in next(n) {
            if seen.insert(m) {
                work.push_back(m);
            }
        }
    }
    seen
}

/// Builds the CFG of `ir`. Returns go to EXIT on a fallthrough edge, throws
/// on an exception edge, and covered blocks get exception edges to their
/// handlers. Blocks unreachable from ENTRY are dropped. Every node that
/// cannot reach EXIT (an infinite loop) is given a synthetic edge to EXIT,
/// one per loop, from its highest-numbered block.
pub fn build_cfg(ir: &MethodIr) -> Cfg {
    let mut edges = Vec::new();
    let mut add = |from, to, kind| {
        let e = CfgEdge { from, to, kind };
        if !edges.contains(&e) {
            edges.push(e);
        }
    };
    if ir.blocks.is_empty() {
        add(Node::Entry, Node::Exit, EdgeKind::Fallthrough);
    } else {
        add(Node::Entry, Node::Block(0), EdgeKind::Fallthrough);
    }
    for b in 0..ir.blocks.len() {
        let from = Node::Block(b);
        for (s, kind) in ir.successors(b) {
            add(from, Node::Block(s), kind);
        }
        match ir.block_stmts(b).last() {
            Some(Stmt::Return { .. }) => add(from, Node::Exit, EdgeKind::Fallthrough),
            Some(Stmt::Throw { .. }) => add(from, Node::Exit, EdgeKind::Exception),
            _ if ir.falls_through(b) && b + 1 == ir.blocks.len() => add(from, Node::Exit, EdgeKind::Fallthrough),
            _ => {}
        }
        for h in ir.handlers_of(b) {
            add(from, Node::Block(h), EdgeKind::Exception);
        }
    }

    let full = Cfg::from_edges((0..ir.blocks.len()).collect(), edges);
    let live = reach(Node::Entry, |n| full.succs(n).iter().map(|e| e.0).collect());
    let blocks: Vec<BlockId> = full
        .blocks
        .iter()
        .copied()
        .filter(|b| {
            let keep = live.contains(&Node::Block(*b));
            if !keep {
                log::debug!("dropping unreachable block B{b} from CFG");
            }
            keep
        })
        .collect();
    let mut edges: Vec<CfgEdge> = full
        .edges
        .into_iter()
        .filter(|e| live.contains(&e.from))
        .collect();

    loop {
        let cfg = Cfg::from_edges(blocks.clone(), edges.clone());
        let to_exit = reach(Node::Exit, |n| cfg.preds(n).iter().map(|e| e.0).collect());
        let stuck = blocks.iter().rev().find(|b| !to_exit.contains(&Node::Block(**b)));
        match stuck {
            Some(&b) => edges.push(CfgEdge {
                from: Node::Block(b),
                to: Node::Exit,
                kind: EdgeKind::Synthetic,
            }),
            None => return cfg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{CondOp, CondRhs, Reg};

    fn ir(blocks: Vec<Vec<Stmt>>) -> MethodIr {
        let mut stmts = Vec::new();
        let mut ranges = Vec::new();
        for b in blocks {
            let s = stmts.len();
            stmts.extend(b);
            ranges.push(s..stmts.len());
        }
        MethodIr {
            params: vec![],
            ret: None,
            is_static: true,
            stmts,
            blocks: ranges,
            handlers: vec![],
            local_names: Default::default(),
        }
    }

    #[test]
    fn infinite_loop_gets_synthetic_exit_edge() {
        let m = ir(vec![
            vec![Stmt::If {
                op: CondOp::Eq,
                lhs: Reg::Param(0),
                rhs: CondRhs::Zero,
                target: 2,
            }],
            vec![Stmt::Goto { target: 1 }],
            vec![Stmt::Return { value: None }],
        ]);
        let cfg = build_cfg(&m);
        assert!(cfg.edges.contains(&CfgEdge {
            from: Node::Block(1),
            to: Node::Exit,
            kind: EdgeKind::Synthetic
        }));
        assert_eq!(cfg.succs(Node::Block(0)).len(), 2);
    }

    #[test]
    fn unreachable_block_is_pruned() {
        let m = ir(vec![
            vec![Stmt::Return { value: None }],
            vec![Stmt::Return { value: None }],
        ]);
        let cfg = build_cfg(&m);
        assert_eq!(cfg.blocks, vec![0]);
        assert!(cfg.edges.iter().all(|e| e.from != Node::Block(1)));
    }

    #[test]
    fn throw_reaches_exit_by_exception_edge() {
        let m = ir(vec![vec![Stmt::Throw { value: Reg::Param(0) }]]);
        let cfg = build_cfg(&m);
        assert_eq!(cfg.succs(Node::Block(0)), &[(Node::Exit, EdgeKind::Exception)]);
    }
}

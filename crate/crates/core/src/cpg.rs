//! Code property graphs over normalized IR and the triplet sets derived
//! from them.
//!
//! Every statement except `goto` becomes a node. Its operands hang below it
//! as AST children, and statements are linked by control-flow successor,
//! data-dependence and control-dependence edges. A triplet is the label of
//! an edge's source, the edge label and the label of its target.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classfile::unqualify_name;
use crate::ir::{
    build_cfg, dependencies, Cfg, CondRhs, ConcatPart, DepGraph, EdgeKind, Expr, MethodIr, Node, Reg, Stmt,
};
use crate::normalize::normalize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CpgEdgeKind {
    AstChild(u16),
    CfgSucc,
    Data,
    Ctrl,
}

impl fmt::Display for CpgEdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CpgEdgeKind::AstChild(i) => write!(f, "AST-child:{i}"),
            CpgEdgeKind::CfgSucc => f.write_str("CFG-succ"),
            CpgEdgeKind::Data => f.write_str("DATA"),
            CpgEdgeKind::Ctrl => f.write_str("CTRL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CpgEdge {
    pub from: usize,
    pub to: usize,
    pub kind: CpgEdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Cpg {
    pub labels: Vec<String>,
    pub edges: Vec<CpgEdge>,
    /// Node of each IR statement; `None` for gotos.
    pub stmt_nodes: Vec<Option<usize>>,
}

impl Cpg {
    fn add_node(&mut self, label: String) -> usize {
        self.labels.push(label);
        self.labels.len() - 1
    }

    pub fn edges_of(&self, kind: impl Fn(CpgEdgeKind) -> bool) -> impl Iterator<Item = &CpgEdge> {
        self.edges.iter().filter(move |e| kind(e.kind))
    }
}

fn stmt_label(s: &Stmt) -> String {
    match s {
        Stmt::Assign { expr, .. } => match expr {
            Expr::Const { value, .. } => format!("assign const {value}"),
            Expr::Copy(_) => "assign copy".into(),
            Expr::Binary { op, ty, .. } => format!("assign {} {}", op.name(), ty.name()),
            Expr::Neg { ty, .. } => format!("assign neg {}", ty.name()),
            Expr::Convert { from, to, .. } => format!("assign convert {} {}", from.name(), to.name()),
            Expr::Compare { kind, ty, .. } => format!("assign {} {}", kind.name(), ty.name()),
            Expr::GetField { object: Some(_), field } => format!("getfield {field}"),
            Expr::GetField { object: None, field } => format!("getstatic {field}"),
            Expr::ArrayLoad { elem, .. } => format!("assign arrayload {}", elem.name()),
            Expr::ArrayLength(_) => "assign arraylength".into(),
            Expr::New(c) => format!("assign new {c}"),
            Expr::NewArray { elem, dims } => format!("assign newarray {elem} {}", dims.len()),
            Expr::CheckCast { ty, .. } => format!("assign checkcast {ty}"),
            Expr::InstanceOf { ty, .. } => format!("assign instanceof {ty}"),
            Expr::CaughtException(t) => format!("assign caughtexception {}", t.as_deref().unwrap_or("*")),
            Expr::Concat(parts) => {
                let shape: Vec<String> = parts
                    .iter()
                    .map(|p| match p {
                        ConcatPart::Lit(s) => format!("{s:?}"),
                        ConcatPart::Reg(_) => "_".into(),
                    })
                    .collect();
                format!("assign concat({})", shape.join(", "))
            }
        },
        Stmt::Invoke { call, .. } => {
            let mut l = format!("invoke {} {}", call.kind.name(), call.method);
            if let Some(b) = &call.bootstrap {
                l.push_str(&format!(" bsm {}", b.method));
                for a in &b.args {
                    l.push_str(&format!(" {a}"));
                }
            }
            l
        }
        Stmt::PutField {
            object: Some(_), field, ..
        } => format!("putfield {field}"),
        Stmt::PutField { object: None, field, .. } => format!("putstatic {field}"),
        Stmt::ArrayStore { elem, .. } => format!("arraystore {}", elem.name()),
        Stmt::If { op, .. } => format!("if {}", op.name()),
        Stmt::Switch { cases, .. } => {
            let keys: Vec<String> = cases.iter().map(|c| c.0.to_string()).collect();
            format!("switch {}", keys.join(","))
        }
        Stmt::Return { .. } => "return".into(),
        Stmt::Throw { .. } => "throw".into(),
        Stmt::Monitor { enter: true, .. } => "monitorenter".into(),
        Stmt::Monitor { enter: false, .. } => "monitorexit".into(),
        Stmt::Goto { .. } => "goto".into(),
        Stmt::Nop => "nop".into(),
    }
}

/// Builds the CPG of a normalized method from its CFG and dependences.
pub fn build_cpg(ir: &MethodIr, cfg: &Cfg, deps: &DepGraph) -> Cpg {
    let mut first_def: HashMap<Reg, usize> = HashMap::new();
    for (i, s) in ir.stmts.iter().enumerate() {
        if let Some(d) = s.def() {
            first_def.entry(d).or_insert(i);
        }
    }
    let reg_label = |r: Reg| match r {
        Reg::Param(_) => r.to_string(),
        _ => match first_def.get(&r) {
            Some(p) => format!("{r}@{p}"),
            None => format!("{r}@?"),
        },
    };

    let mut g = Cpg::default();
    for s in &ir.stmts {
        if matches!(s, Stmt::Goto { .. }) {
            g.stmt_nodes.push(None);
            continue;
        }
        let n = g.add_node(stmt_label(s));
        g.stmt_nodes.push(Some(n));
        let mut children: Vec<String> = s.uses().into_iter().map(reg_label).collect();
        if let Stmt::If { rhs, .. } = s {
            match rhs {
                CondRhs::Zero => children.push("0".into()),
                CondRhs::Null => children.push("null".into()),
                CondRhs::Reg(_) => {}
            }
        }
        for (i, c) in children.into_iter().enumerate() {
            let child = g.add_node(c);
            g.edges.push(CpgEdge {
                from: n,
                to: child,
                kind: CpgEdgeKind::AstChild(i as u16),
            });
        }
    }

    let first_node = |b: usize| -> Option<usize> {
        let mut b = b;
        let mut hops = 0;
        loop {
            let range = ir.blocks[b].clone();
            if let Some(n) = range.clone().find_map(|i| g.stmt_nodes[i]) {
                return Some(n);
            }
            match ir.stmts[range].last() {
                Some(Stmt::Goto { target }) if hops < ir.blocks.len() => {
                    b = *target;
                    hops += 1;
                }
                _ => return None,
            }
        }
    };
    let last_node = |b: usize| ir.blocks[b].clone().rev().find_map(|i| g.stmt_nodes[i]);

    let mut flow = BTreeSet::new();
    for b in &cfg.blocks {
        let nodes: Vec<usize> = ir.blocks[*b].clone().filter_map(|i| g.stmt_nodes[i]).collect();
        for w in nodes.windows(2) {
            flow.insert((w[0], w[1]));
        }
    }
    for e in &cfg.edges {
        if e.kind == EdgeKind::Synthetic {
            continue;
        }
        if let (Node::Block(a), Node::Block(b)) = (e.from, e.to) {
            if let (Some(x), Some(y)) = (last_node(a), first_node(b)) {
                flow.insert((x, y));
            }
        }
    }
    let mut extra = Vec::new();
    for (x, y) in flow {
        extra.push(CpgEdge {
            from: x,
            to: y,
            kind: CpgEdgeKind::CfgSucc,
        });
    }
    let mut dep_edges = BTreeSet::new();
    for &(d, u, _) in &deps.data {
        if let (Some(x), Some(y)) = (g.stmt_nodes[d], g.stmt_nodes[u]) {
            dep_edges.insert((x, y, CpgEdgeKind::Data));
        }
    }
    for &(c, s) in &deps.ctrl {
        let controller = g.stmt_nodes[c].or_else(|| last_node(ir.block_of(c)));
        if let (Some(x), Some(y)) = (controller, g.stmt_nodes[s]) {
            dep_edges.insert((x, y, CpgEdgeKind::Ctrl));
        }
    }
    extra.extend(dep_edges.into_iter().map(|(from, to, kind)| CpgEdge { from, to, kind }));
    g.edges.extend(extra);
    g
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub source: String,
    pub edge: String,
    pub target: String,
}

impl Triplet {
    pub fn new(source: impl Into<String>, edge: impl Into<String>, target: impl Into<String>) -> Self {
        Triplet {
            source: source.into(),
            edge: edge.into(),
            target: target.into(),
        }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\u{1f}{}\u{1f}{}", self.source, self.edge, self.target)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TripletSet(pub BTreeSet<Triplet>);

impl TripletSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triplet> {
        self.0.iter()
    }

    pub fn intersection_len(&self, other: &TripletSet) -> usize {
        let (small, large) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        small.0.iter().filter(|t| large.0.contains(*t)).count()
    }

    pub fn union(&self, other: &TripletSet) -> TripletSet {
        TripletSet(self.0.union(&other.0).cloned().collect())
    }

    /// Sorted `src␟edge␟dst` lines.
    pub fn serialize(&self) -> String {
        self.0.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn parse(text: &str) -> Option<TripletSet> {
        let mut set = BTreeSet::new();
        for line in text.lines() {
            let mut parts = line.split('\u{1f}');
            let (Some(s), Some(e), Some(t), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
                return None;
            };
            set.insert(Triplet::new(s, e, t));
        }
        Some(TripletSet(set))
    }
}

impl FromIterator<Triplet> for TripletSet {
    fn from_iter<I: IntoIterator<Item = Triplet>>(iter: I) -> Self {
        TripletSet(iter.into_iter().collect())
    }
}

impl Serialize for TripletSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.0.iter().map(ToString::to_string))
    }
}

impl<'de> Deserialize<'de> for TripletSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lines = Vec::<String>::deserialize(d)?;
        let mut set = BTreeSet::new();
        for l in lines {
            let parsed = TripletSet::parse(&l).filter(|p| p.len() == 1);
            let Some(p) = parsed else {
                return Err(serde::de::Error::custom(format!("malformed triplet {l:?}")));
            };
            set.extend(p.0);
        }
        Ok(TripletSet(set))
    }
}

pub fn extract_triplets(cpg: &Cpg) -> TripletSet {
    cpg.edges
        .iter()
        .map(|e| Triplet::new(cpg.labels[e.from].clone(), e.kind.to_string(), cpg.labels[e.to].clone()))
        .collect()
}

/// Context, positive and negative triplets of a fix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixSignature {
    pub ct: TripletSet,
    pub pt: TripletSet,
    pub nt: TripletSet,
}

pub fn diff(t_vul: &TripletSet, t_fix: &TripletSet) -> FixSignature {
    FixSignature {
        ct: TripletSet(t_vul.0.intersection(&t_fix.0).cloned().collect()),
        pt: TripletSet(t_fix.0.difference(&t_vul.0).cloned().collect()),
        nt: TripletSet(t_vul.0.difference(&t_fix.0).cloned().collect()),
    }
}

/// Strips package prefixes from every label.
pub fn unqualify(set: &TripletSet) -> TripletSet {
    set.iter()
        .map(|t| Triplet::new(unqualify_name(&t.source), t.edge.clone(), unqualify_name(&t.target)))
        .collect()
}

impl FixSignature {
    pub fn unqualified(&self) -> FixSignature {
        FixSignature {
            ct: unqualify(&self.ct),
            pt: unqualify(&self.pt),
            nt: unqualify(&self.nt),
        }
    }
}

/// Normalizes a lifted method and returns its triplet set.
pub fn method_triplets(lifted: &MethodIr) -> TripletSet {
    let ir = normalize(lifted);
    let cfg = build_cfg(&ir);
    let deps = dependencies(&ir, &cfg);
    extract_triplets(&build_cpg(&ir, &cfg, &deps))
}

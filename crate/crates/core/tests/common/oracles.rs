//! Brute-force checkers shared by the topical tests and the acceptance run.
//! Each returns a description of the first disagreement.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use jarsig::classfile::asm::assemble_classes;
use jarsig::classfile::{emit_class, parse_class, ClassFile};
use jarsig::cpg::{diff, TripletSet};
use jarsig::ir::interp::{self, Outcome, Value};
use jarsig::ir::{build_cfg, lift_method, post_dominator_sets, reaching_definitions, Cfg, MethodIr, Node, Stmt};
use jarsig::modharness::compiler_variant;
use jarsig::normalize::normalize;

use super::refvm::{self, RefOutcome};

pub const STEP_LIMIT: usize = 200_000;

// ---------------------------------------------------------------- triplets

pub fn check_triplet_algebra(t_vul: &TripletSet, t_fix: &TripletSet) -> Result<(), String> {
    let sig = diff(t_vul, t_fix);
    let universe: BTreeSet<_> = t_vul.iter().chain(t_fix.iter()).cloned().collect();
    for t in &universe {
        let (v, f) = (t_vul.0.contains(t), t_fix.0.contains(t));
        let expect = [v && f, f && !v, v && !f];
        let got = [sig.ct.0.contains(t), sig.pt.0.contains(t), sig.nt.0.contains(t)];
        if expect != got {
            return Err(format!("{t:?}: expected (ct, pt, nt) = {expect:?}, got {got:?}"));
        }
    }
    let all_in_universe = [&sig.ct, &sig.pt, &sig.nt].iter().all(|s| s.iter().all(|t| universe.contains(t)));
    if !all_in_universe {
        return Err("signature holds a triplet from neither input".into());
    }
    if sig.ct.union(&sig.nt) != *t_vul {
        return Err("CT ∪ NT differs from T_vul".into());
    }
    if sig.ct.union(&sig.pt) != *t_fix {
        return Err("CT ∪ PT differs from T_fix".into());
    }
    if sig.ct.intersection_len(&sig.pt) + sig.ct.intersection_len(&sig.nt) + sig.pt.intersection_len(&sig.nt) != 0 {
        return Err("CT, PT and NT overlap".into());
    }
    Ok(())
}

// ---------------------------------------------------------------- dataflow

/// Normal successors of block `b`, read straight off its last statement.
fn block_succs(ir: &MethodIr, b: usize) -> Vec<usize> {
    let n = ir.blocks.len();
    let next = (b + 1 < n).then_some(b + 1);
    match ir.stmts[ir.blocks[b].clone()].last() {
        Some(Stmt::If { target, .. }) => next.into_iter().chain([*target]).collect(),
        Some(Stmt::Goto { target }) => vec![*target],
        Some(Stmt::Switch { cases, default, .. }) => cases.iter().map(|c| c.1).chain([*default]).collect(),
        Some(Stmt::Return { .. } | Stmt::Throw { .. }) => vec![],
        _ => next.into_iter().collect(),
    }
}

/// Program points are "just before statement i". A step either executes
/// `i` (normal flow, applying its definition) or raises before `i` finishes
/// and enters a covering handler (no definition applied).
struct Points<'a> {
    ir: &'a MethodIr,
    block_of: Vec<usize>,
}

impl<'a> Points<'a> {
    fn new(ir: &'a MethodIr) -> Self {
        let mut block_of = vec![0; ir.stmts.len()];
        for (b, r) in ir.blocks.iter().enumerate() {
            for i in r.clone() {
                block_of[i] = b;
            }
        }
        Points { ir, block_of }
    }

    fn first(&self, b: usize) -> Option<usize> {
        let r = &self.ir.blocks[b];
        (r.start < r.end).then_some(r.start)
    }

    fn normal(&self, i: usize) -> Vec<usize> {
        let b = self.block_of[i];
        if i + 1 < self.ir.blocks[b].end {
            return vec![i + 1];
        }
        block_succs(self.ir, b).into_iter().filter_map(|s| self.first(s)).collect()
    }

    fn exceptional(&self, i: usize) -> Vec<usize> {
        let b = self.block_of[i];
        self.ir
            .handlers
            .iter()
            .filter(|h| h.covered.contains(&b))
            .filter_map(|h| self.first(h.target))
            .collect()
    }

    fn reachable_from_entry(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<usize> = self.first(0).into_iter().collect();
        while let Some(p) = stack.pop() {
            if seen.insert(p) {
                stack.extend(self.normal(p));
                stack.extend(self.exceptional(p));
            }
        }
        seen
    }

    /// Points reachable after executing `d` without passing another
    /// definition of the same register.
    fn reached_by(&self, d: usize) -> BTreeSet<usize> {
        let reg = self.ir.stmts[d].def();
        let mut seen = BTreeSet::new();
        let mut stack = self.normal(d);
        while let Some(p) = stack.pop() {
            if !seen.insert(p) {
                continue;
            }
            stack.extend(self.exceptional(p));
            if self.ir.stmts[p].def() != reg {
                stack.extend(self.normal(p));
            }
        }
        seen
    }
}

pub fn check_reaching_definitions(ir: &MethodIr) -> Result<(), String> {
    let cfg = build_cfg(ir);
    let got = reaching_definitions(ir, &cfg);
    let pts = Points::new(ir);
    let live = if ir.blocks.is_empty() || ir.stmts.is_empty() { BTreeSet::new() } else { pts.reachable_from_entry() };
    let mut expect = vec![BTreeSet::new(); ir.stmts.len()];
    for d in live.iter().copied().filter(|&d| ir.stmts[d].def().is_some()) {
        for u in pts.reached_by(d) {
            expect[u].insert(d);
        }
    }
    for u in 0..ir.stmts.len() {
        if got[u] != expect[u] {
            return Err(format!("reaching definitions at s{u}: got {:?}, expected {:?}\n{}", got[u], expect[u], ir.dump()));
        }
    }
    Ok(())
}

/// Intersection of the node sets of every simple path from `n` to EXIT.
fn pdom_by_paths(cfg: &Cfg, n: Node, all: &BTreeSet<Node>) -> BTreeSet<Node> {
    fn walk(cfg: &Cfg, at: Node, path: &mut Vec<Node>, acc: &mut Option<BTreeSet<Node>>) {
        if at == Node::Exit {
            let nodes: BTreeSet<Node> = path.iter().copied().collect();
            *acc = Some(match acc.take() {
                None => nodes,
                Some(a) => a.intersection(&nodes).copied().collect(),
            });
            return;
        }
        for &(s, _) in cfg.succs(at) {
            if !path.contains(&s) {
                path.push(s);
                walk(cfg, s, path, acc);
                path.pop();
            }
        }
    }
    let mut acc = None;
    walk(cfg, n, &mut vec![n], &mut acc);
    acc.unwrap_or_else(|| all.clone())
}

pub fn check_post_dominance(ir: &MethodIr) -> Result<(), String> {
    let cfg = build_cfg(ir);
    let got = post_dominator_sets(&cfg);
    let all: BTreeSet<Node> = cfg.nodes().into_iter().collect();
    let mut expect = BTreeMap::new();
    for &n in &all {
        expect.insert(n, pdom_by_paths(&cfg, n, &all));
    }
    for n in &all {
        if !expect[n].contains(&Node::Exit) {
            return Err(format!("{n:?} cannot reach EXIT"));
        }
    }
    if got != expect {
        return Err(format!("post-dominators: got {got:?}, expected {expect:?}\n{}", ir.dump()));
    }
    Ok(())
}

// ---------------------------------------------------------------- semantics

fn same(r: &RefOutcome, o: &Outcome) -> bool {
    match (r, o) {
        (RefOutcome::Returned(Some(a)), Outcome::Returned(Some(Value::Int(b)))) => a == b,
        (RefOutcome::Returned(None), Outcome::Returned(None)) => true,
        (RefOutcome::Threw(a), Outcome::Threw(b)) => a == b,
        (RefOutcome::StepLimit, Outcome::StepLimit) => true,
        _ => false,
    }
}

/// Assembles `source` and round-trips it through the class-file encoder.
pub fn assemble_one(source: &str) -> Result<ClassFile, String> {
    let classes = assemble_classes(source).map_err(|e| format!("{e}\n{source}"))?;
    let class = classes.into_iter().next().ok_or("no class")?;
    parse_class(&emit_class(&class).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

/// Static `(I...)I` methods of `class` by name.
pub fn int_methods(class: &ClassFile) -> Vec<(String, usize)> {
    class
        .methods
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_static() && m.code().is_some())
        .map(|(i, m)| (class.member_name(m).unwrap().to_string(), i))
        .collect()
}

/// Checks, for one method: normalization is idempotent, and the reference
/// interpreter on bytecode, the IR interpreter on the lifted IR, and the IR
/// interpreter on normalized IR agree on every argument vector.
pub fn check_semantics(class: &ClassFile, method: usize, vectors: &[Vec<i32>]) -> Result<(), String> {
    let m = &class.methods[method];
    let code = m.code().ok_or("no code")?;
    let lifted = lift_method(class, m).map_err(|e| format!("lift: {e}"))?;
    let norm = normalize(&lifted);
    if normalize(&norm) != norm {
        return Err(format!("normalize is not idempotent\n{}\nvs\n{}", norm.dump(), normalize(&norm).dump()));
    }
    for args in vectors {
        let want = refvm::run(class, code, args, STEP_LIMIT)?;
        let vals: Vec<Value> = args.iter().map(|a| Value::Int(*a)).collect();
        for (what, ir) in [("lifted", &lifted), ("normalized", &norm)] {
            let got = interp::run(ir, &vals, STEP_LIMIT).map_err(|e| format!("{what} IR: {e}"))?;
            if !same(&want, &got) {
                return Err(format!("args {args:?}: bytecode gives {want:?}, {what} IR gives {got:?}\n{}", ir.dump()));
            }
        }
    }
    Ok(())
}

/// A compiler variant of `class` behaves like the original on bytecode and
/// normalizes to the same IR.
pub fn check_variant(class: &ClassFile, vectors: &[Vec<i32>], rng: &mut impl Rng) -> Result<(), String> {
    let variant = compiler_variant(class, rng).map_err(|e| e.to_string())?;
    let variant = parse_class(&emit_class(&variant).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    for (name, i) in int_methods(class) {
        let (a, b) = (&class.methods[i], &variant.methods[i]);
        let (ca, cb) = (a.code().unwrap(), b.code().unwrap());
        for args in vectors {
            let (x, y) = (refvm::run(class, ca, args, STEP_LIMIT)?, refvm::run(&variant, cb, args, STEP_LIMIT)?);
            if x != y {
                return Err(format!("{name}{args:?}: original gives {x:?}, variant gives {y:?}"));
            }
        }
        let na = normalize(&lift_method(class, a).map_err(|e| e.to_string())?);
        let nb = normalize(&lift_method(&variant, b).map_err(|e| e.to_string())?);
        if na != nb {
            return Err(format!("{name}: variant normalizes differently\n{}\nvs\n{}", na.dump(), nb.dump()));
        }
    }
    Ok(())
}

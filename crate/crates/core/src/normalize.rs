//! Canonicalization of lifted IR so that equivalent code produced by
//! different compilers, or by the same compiler with different settings,
//! prints identically.
//!
//! The pipeline runs a fixed list of passes, in order:
//!
//! 1. strip debug names and renumber registers by first definition;
//! 2. drop `nop`s and redirect blocks left empty;
//! 3. rewrite string-builder chains and concat call sites to `concat(...)`;
//! 4. thread jumps through goto-only blocks and fuse straight-line blocks;
//! 5. canonicalize branch polarity (`==`, `<`, `<=` only) and switch tables;
//! 6. merge identical return blocks;
//! 7. forget constant encodings;
//! 8. lay blocks out in depth-first order (fallthrough successor first) and
//!    renumber registers once more.
//!
//! Blocks are handled as a graph with explicit successors between steps 2
//! and 8, so layout-dependent artifacts such as redundant gotos disappear.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::classfile::descriptor::FieldType;
use crate::ir::{
    BlockId, Call, ConcatPart, Const, CondOp, CondRhs, Expr, Handler, InvokeKind, MethodIr, Reg, Stmt,
};

/// Version of the pass list. Signatures built with a different version are
/// not comparable.
pub const PIPELINE_VERSION: u32 = 1;

pub fn normalize(ir: &MethodIr) -> MethodIr {
    let stripped = strip_debug(ir);
    let mut g = Graph::from_ir(&stripped);
    g.eliminate_nops();
    g.rewrite_concat();
    g.thread_jumps();
    g.canonicalize_branches();
    g.merge_returns();
    g.unify_constants();
    renumber(&g.layout(ir))
}

/// Clears local names and renumbers local and temporary registers. Join
/// registers keep their identity until the final renumbering.
pub fn strip_debug(ir: &MethodIr) -> MethodIr {
    let mut out = renumber_where(ir, |r| matches!(r, Reg::Var(_)));
    out.local_names.clear();
    out
}

/// Renames every non-parameter register to `Var(k)`, numbering by first
/// definition in statement order, then by first use for registers never
/// defined. Join registers become ordinary variables.
pub fn renumber(ir: &MethodIr) -> MethodIr {
    renumber_where(ir, |r| !matches!(r, Reg::Param(_)))
}

fn renumber_where(ir: &MethodIr, pick: impl Fn(Reg) -> bool) -> MethodIr {
    let mut order: Vec<Reg> = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &ir.stmts {
        if let Some(d) = s.def() {
            if pick(d) && seen.insert(d) {
                order.push(d);
            }
        }
    }
    for s in &ir.stmts {
        for u in s.uses() {
            if pick(u) && seen.insert(u) {
                order.push(u);
            }
        }
    }
    let map: HashMap<Reg, Reg> = order
        .into_iter()
        .enumerate()
        .map(|(k, r)| (r, Reg::Var(k as u32)))
        .collect();
    let mut out = ir.clone();
    for s in &mut out.stmts {
        for u in s.uses_mut() {
            if let Some(n) = map.get(u) {
                *u = *n;
            }
        }
        if let Some(d) = s.def_mut() {
            if let Some(n) = map.get(d) {
                *d = *n;
            }
        }
    }
    out.local_names = ir
        .local_names
        .iter()
        .map(|(r, n)| (map.get(r).copied().unwrap_or(*r), n.clone()))
        .collect();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Term {
    Jump(BlockId),
    If {
        op: CondOp,
        lhs: Reg,
        rhs: CondRhs,
        taken: BlockId,
        fall: BlockId,
    },
    Switch {
        key: Reg,
        cases: Vec<(i32, BlockId)>,
        default: BlockId,
    },
    Return(Option<Reg>),
    Throw(Reg),
    /// Control runs off the end of the method; never produced by the lifter.
    FallOff,
}

impl Term {
    /// Successors in layout preference order.
    fn succs(&self) -> Vec<BlockId> {
        match self {
            Term::Jump(t) => vec![*t],
            Term::If { taken, fall, .. } => vec![*fall, *taken],
            Term::Switch { cases, default, .. } => {
                let mut v = vec![*default];
                v.extend(cases.iter().map(|c| c.1));
                v
            }
            Term::Return(_) | Term::Throw(_) | Term::FallOff => vec![],
        }
    }

    fn succs_mut(&mut self) -> Vec<&mut BlockId> {
        match self {
            Term::Jump(t) => vec![t],
            Term::If { taken, fall, .. } => vec![fall, taken],
            Term::Switch { cases, default, .. } => std::iter::once(default).chain(cases.iter_mut().map(|c| &mut c.1)).collect(),
            Term::Return(_) | Term::Throw(_) | Term::FallOff => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Block {
    body: Vec<Stmt>,
    term: Term,
}

#[derive(Debug, Clone)]
struct Graph {
    blocks: Vec<Option<Block>>,
    entry: BlockId,
    handlers: Vec<Handler>,
}

fn term_uses(t: &Term) -> Vec<Reg> {
    match t {
        Term::If { lhs, rhs, .. } => match rhs {
            CondRhs::Reg(r) => vec![*lhs, *r],
            _ => vec![*lhs],
        },
        Term::Switch { key, .. } => vec![*key],
        Term::Return(v) => v.iter().copied().collect(),
        Term::Throw(v) => vec![*v],
        Term::Jump(_) | Term::FallOff => vec![],
    }
}

fn replace_term_use(t: &mut Term, from: Reg, to: Reg) {
    let swap = |r: &mut Reg| {
        if *r == from {
            *r = to;
        }
    };
    match t {
        Term::If { lhs, rhs, .. } => {
            swap(lhs);
            if let CondRhs::Reg(r) = rhs {
                swap(r);
            }
        }
        Term::Switch { key, .. } => swap(key),
        Term::Return(Some(v)) | Term::Throw(v) => swap(v),
        _ => {}
    }
}

fn is_builder(call: &Call, name: &str) -> bool {
    call.method.owner == "java.lang.StringBuilder" && call.method.name == name
}

fn renders_as_text(ty: &FieldType) -> bool {
    !matches!(ty, FieldType::Char | FieldType::Boolean)
}

impl Graph {
    fn from_ir(ir: &MethodIr) -> Self {
        let n = ir.blocks.len();
        let blocks = (0..n)
            .map(|b| {
                let stmts = ir.block_stmts(b);
                let (body, term) = match stmts.last() {
                    Some(Stmt::If { op, lhs, rhs, target }) => (
                        &stmts[..stmts.len() - 1],
                        if b + 1 < n {
                            Term::If {
                                op: *op,
                                lhs: *lhs,
                                rhs: *rhs,
                                taken: *target,
                                fall: b + 1,
                            }
                        } else {
                            Term::FallOff
                        },
                    ),
                    Some(Stmt::Goto { target }) => (&stmts[..stmts.len() - 1], Term::Jump(*target)),
                    Some(Stmt::Switch { key, cases, default }) => (
                        &stmts[..stmts.len() - 1],
                        Term::Switch {
                            key: *key,
                            cases: cases.clone(),
                            default: *default,
                        },
                    ),
                    Some(Stmt::Return { value }) => (&stmts[..stmts.len() - 1], Term::Return(*value)),
                    Some(Stmt::Throw { value }) => (&stmts[..stmts.len() - 1], Term::Throw(*value)),
                    _ if b + 1 < n => (stmts, Term::Jump(b + 1)),
                    _ => (stmts, Term::FallOff),
                };
                Some(Block {
                    body: body.to_vec(),
                    term,
                })
            })
            .collect();
        Graph {
            blocks,
            entry: 0,
            handlers: ir.handlers.clone(),
        }
    }

    fn live(&self) -> impl Iterator<Item = (BlockId, &Block)> {
        self.blocks.iter().enumerate().filter_map(|(i, b)| b.as_ref().map(|b| (i, b)))
    }

    fn handler_targets(&self) -> BTreeSet<BlockId> {
        self.handlers.iter().map(|h| h.target).collect()
    }

    fn covering(&self, b: BlockId) -> Vec<usize> {
        (0..self.handlers.len())
            .filter(|&h| self.handlers[h].covered.contains(&b))
            .collect()
    }

    fn redirect(&mut self, from: BlockId, to: BlockId) {
        for blk in self.blocks.iter_mut().flatten() {
            for s in blk.term.succs_mut() {
                if *s == from {
                    *s = to;
                }
            }
        }
        if self.entry == from {
            self.entry = to;
        }
    }

    fn remove(&mut self, b: BlockId) {
        self.blocks[b] = None;
        for h in &mut self.handlers {
            h.covered.retain(|&c| c != b);
        }
    }

    /// Drops blocks unreachable from the entry, where a handler entry counts
    /// as reachable once one of its covered blocks is. Dead predecessors
    /// would otherwise block fusion.
    fn prune_unreachable(&mut self) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.entry];
        loop {
            while let Some(b) = stack.pop() {
                let Some(blk) = &self.blocks[b] else { continue };
                if seen.insert(b) {
                    stack.extend(blk.term.succs());
                }
            }
            stack.extend(
                self.handlers
                    .iter()
                    .filter(|h| !seen.contains(&h.target) && h.covered.iter().any(|c| seen.contains(c)))
                    .map(|h| h.target),
            );
            if stack.is_empty() {
                break;
            }
        }
        let dead: Vec<BlockId> = self.live().map(|(b, _)| b).filter(|b| !seen.contains(b)).collect();
        for &b in &dead {
            self.remove(b);
        }
        !dead.is_empty()
    }

    fn eliminate_nops(&mut self) {
        for blk in self.blocks.iter_mut().flatten() {
            blk.body.retain(|s| !matches!(s, Stmt::Nop));
        }
        self.thread_jumps();
    }

    /// Removes blocks that only jump elsewhere, then fuses a block into its
    /// unique predecessor when that predecessor jumps to it unconditionally
    /// and both sit under the same handlers.
    fn thread_jumps(&mut self) {
        let protected = self.handler_targets();
        loop {
            let mut changed = self.prune_unreachable();
            for b in 0..self.blocks.len() {
                let Some(blk) = &self.blocks[b] else { continue };
                if let (true, Term::Jump(t)) = (blk.body.is_empty(), &blk.term) {
                    let t = *t;
                    if t != b && !protected.contains(&b) {
                        self.redirect(b, t);
                        self.remove(b);
                        changed = true;
                    }
                }
            }
            for b in 0..self.blocks.len() {
                let Some(Block { term: Term::Jump(t), .. }) = &self.blocks[b] else { continue };
                let t = *t;
                if t == b || t == self.entry || protected.contains(&t) || self.blocks[t].is_none() {
                    continue;
                }
                if self.pred_count(t) != 1 || self.covering(b) != self.covering(t) {
                    continue;
                }
                let tail = self.blocks[t].take().expect("live");
                self.remove(t);
                let head = self.blocks[b].as_mut().expect("live");
                head.body.extend(tail.body);
                head.term = tail.term;
                changed = true;
            }
            for blk in self.blocks.iter_mut().flatten() {
                if let Term::If { taken, fall, .. } = blk.term {
                    if taken == fall {
                        blk.term = Term::Jump(fall);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.forward_join_copies();
    }

    /// Substitutes `j := x` into the uses of a join register `j` once the
    /// join has a single definition whose uses all follow it in the same
    /// block and `x` is not reassigned before the last of them. Fused
    /// blocks no longer need the copies that carried stack values across
    /// the old boundary.
    fn forward_join_copies(&mut self) {
        let mut defs: HashMap<Reg, usize> = HashMap::new();
        let mut use_blocks: HashMap<Reg, BTreeSet<BlockId>> = HashMap::new();
        for (b, blk) in self.live() {
            for s in &blk.body {
                if let Some(d) = s.def() {
                    *defs.entry(d).or_insert(0) += 1;
                }
                for u in s.uses() {
                    use_blocks.entry(u).or_default().insert(b);
                }
            }
            for u in term_uses(&blk.term) {
                use_blocks.entry(u).or_default().insert(b);
            }
        }
        for b in 0..self.blocks.len() {
            let Some(blk) = self.blocks[b].as_mut() else { continue };
            let mut k = 0;
            while k < blk.body.len() {
                let Stmt::Assign {
                    dst: j @ Reg::Join { .. },
                    expr: Expr::Copy(src),
                } = blk.body[k]
                else {
                    k += 1;
                    continue;
                };
                let local_only = defs.get(&j) == Some(&1)
                    && use_blocks.get(&j).is_none_or(|bs| bs.len() == 1 && bs.contains(&b))
                    && blk.body[..k].iter().all(|s| !s.uses().contains(&j));
                let live_until = if term_uses(&blk.term).contains(&j) {
                    blk.body.len()
                } else {
                    blk.body[k + 1..]
                        .iter()
                        .rposition(|s| s.uses().contains(&j))
                        .map_or(k + 1, |p| p + k + 2)
                };
                let src_stable = blk.body[k + 1..live_until].iter().all(|s| s.def() != Some(src));
                if !(local_only && src_stable) {
                    k += 1;
                    continue;
                }
                blk.body.remove(k);
                for s in &mut blk.body[k..] {
                    for u in s.uses_mut() {
                        if *u == j {
                            *u = src;
                        }
                    }
                }
                replace_term_use(&mut blk.term, j, src);
            }
        }
    }

    fn pred_count(&self, t: BlockId) -> usize {
        let mut n = usize::from(self.entry == t);
        for (_, blk) in self.live() {
            let succs: BTreeSet<BlockId> = blk.term.succs().into_iter().collect();
            n += usize::from(succs.contains(&t));
        }
        n
    }

    fn canonicalize_branches(&mut self) {
        for blk in self.blocks.iter_mut().flatten() {
            match &mut blk.term {
                Term::If { op, taken, fall, .. } => {
                    if matches!(op, CondOp::Ne | CondOp::Ge | CondOp::Gt) {
                        *op = op.negate();
                        std::mem::swap(taken, fall);
                    }
                }
                Term::Switch { cases, default, .. } => {
                    let d = *default;
                    cases.retain(|c| c.1 != d);
                    cases.sort();
                    cases.dedup_by_key(|c| c.0);
                }
                _ => {}
            }
        }
    }

    fn merge_returns(&mut self) {
        // A jump to a block that only returns becomes the return itself, so
        // shared and duplicated epilogues end up alike.
        for b in 0..self.blocks.len() {
            let Some(Block { term: Term::Jump(t), .. }) = &self.blocks[b] else { continue };
            let ret = match &self.blocks[*t] {
                Some(Block { body, term: term @ Term::Return(_) }) if body.is_empty() => term.clone(),
                _ => continue,
            };
            self.blocks[b].as_mut().expect("live").term = ret;
        }
        let protected = self.handler_targets();
        let mut first: HashMap<Block, BlockId> = HashMap::new();
        for b in 0..self.blocks.len() {
            let Some(blk) = &self.blocks[b] else { continue };
            if !matches!(blk.term, Term::Return(_)) || protected.contains(&b) {
                continue;
            }
            match first.get(blk) {
                Some(&keep) if self.covering(keep) == self.covering(b) => {
                    self.redirect(b, keep);
                    self.remove(b);
                }
                Some(_) => {}
                None => {
                    first.insert(blk.clone(), b);
                }
            }
        }
        self.thread_jumps();
    }

    fn unify_constants(&mut self) {
        for blk in self.blocks.iter_mut().flatten() {
            for s in &mut blk.body {
                if let Stmt::Assign {
                    expr: Expr::Const { form, .. },
                    ..
                } = s
                {
                    *form = None;
                }
            }
        }
    }

    fn use_counts(&self) -> HashMap<Reg, usize> {
        let mut counts = HashMap::new();
        for (_, blk) in self.live() {
            for r in blk.body.iter().flat_map(Stmt::uses).chain(term_uses(&blk.term)) {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
        counts
    }

    fn rewrite_concat(&mut self) {
        let counts = self.use_counts();
        for blk in self.blocks.iter_mut().flatten() {
            rewrite_concat_in(&mut blk.body, &counts);
        }
    }

    /// Depth-first layout from the entry, then from each handler entry.
    /// Conditional branches fall through to their false successor when it
    /// is laid out next; otherwise the condition is negated or a goto block
    /// is appended.
    fn layout(&self, original: &MethodIr) -> MethodIr {
        let mut order = Vec::new();
        let mut seen = BTreeSet::new();
        let mut roots = vec![self.entry];
        roots.extend(self.handlers.iter().map(|h| h.target));
        for (i, root) in roots.into_iter().enumerate() {
            if i > 0 && !self.handlers[i - 1].covered.iter().any(|c| seen.contains(c)) {
                continue;
            }
            let mut stack = vec![root];
            while let Some(b) = stack.pop() {
                if self.blocks[b].is_none() || !seen.insert(b) {
                    continue;
                }
                order.push(b);
                let succs = self.blocks[b].as_ref().expect("live").term.succs();
                stack.extend(succs.into_iter().rev());
            }
        }

        // Emit, allowing for extra goto blocks: layout slot -> emitted blocks.
        let mut emitted: Vec<(Vec<Stmt>, Option<BlockId>)> = Vec::new();
        let mut first_index = HashMap::new();
        for (pos, &b) in order.iter().enumerate() {
            let blk = self.blocks[b].as_ref().expect("live");
            let next = order.get(pos + 1).copied();
            first_index.insert(b, emitted.len());
            let mut stmts = blk.body.clone();
            let mut extra_goto = None;
            match &blk.term {
                Term::Jump(t) => {
                    if next != Some(*t) {
                        stmts.push(Stmt::Goto { target: *t });
                    }
                }
                Term::If {
                    op,
                    lhs,
                    rhs,
                    taken,
                    fall,
                } => {
                    if next == Some(*fall) {
                        stmts.push(Stmt::If {
                            op: *op,
                            lhs: *lhs,
                            rhs: *rhs,
                            target: *taken,
                        });
                    } else if next == Some(*taken) {
                        stmts.push(Stmt::If {
                            op: op.negate(),
                            lhs: *lhs,
                            rhs: *rhs,
                            target: *fall,
                        });
                    } else {
                        stmts.push(Stmt::If {
                            op: *op,
                            lhs: *lhs,
                            rhs: *rhs,
                            target: *taken,
                        });
                        extra_goto = Some(*fall);
                    }
                }
                Term::Switch { key, cases, default } => stmts.push(Stmt::Switch {
                    key: *key,
                    cases: cases.clone(),
                    default: *default,
                }),
                Term::Return(v) => stmts.push(Stmt::Return { value: *v }),
                Term::Throw(v) => stmts.push(Stmt::Throw { value: *v }),
                Term::FallOff => {}
            }
            if stmts.is_empty() {
                stmts.push(Stmt::Nop);
            }
            emitted.push((stmts, Some(b)));
            if let Some(f) = extra_goto {
                emitted.push((vec![Stmt::Goto { target: f }], Some(b)));
            }
        }

        let mut stmts = Vec::new();
        let mut ranges = Vec::new();
        let mut owner = Vec::new();
        for (body, orig) in emitted {
            let start = stmts.len();
            for mut s in body {
                for t in s.targets_mut() {
                    *t = first_index[t];
                }
                stmts.push(s);
            }
            ranges.push(start..stmts.len());
            owner.push(orig);
        }
        let handlers = self
            .handlers
            .iter()
            .filter_map(|h| {
                let covered: Vec<BlockId> = (0..owner.len())
                    .filter(|&i| owner[i].is_some_and(|o| h.covered.contains(&o)))
                    .collect();
                let target = *first_index.get(&h.target)?;
                (!covered.is_empty()).then(|| Handler {
                    covered,
                    target,
                    catch_type: h.catch_type.clone(),
                })
            })
            .collect();
        MethodIr {
            params: original.params.clone(),
            ret: original.ret.clone(),
            is_static: original.is_static,
            stmts,
            blocks: ranges,
            handlers,
            local_names: BTreeMap::new(),
        }
    }
}

/// Rewrites string-builder chains and `makeConcatWithConstants` call sites
/// inside one block body.
fn rewrite_concat_in(body: &mut Vec<Stmt>, counts: &HashMap<Reg, usize>) {
    let count = |r: &Reg| counts.get(r).copied().unwrap_or(0);
    let mut i = 0;
    while i < body.len() {
        let rewrite = match &body[i] {
            Stmt::Assign {
                dst,
                expr: Expr::New(class),
            } if class == "java.lang.StringBuilder" => builder_chain(body, i, *dst, &count),
            Stmt::Invoke {
                dst: Some(dst),
                call,
            } if call.kind == InvokeKind::Dynamic => indy_concat(call).map(|parts| (vec![], i, *dst, parts)),
            _ => None,
        };
        let Some((mut drop, at, dst, mut parts)) = rewrite else {
            i += 1;
            continue;
        };
        // Inline single-use string constants defined earlier in the block.
        for p in &mut parts {
            let ConcatPart::Reg(r) = p else { continue };
            if count(r) != 1 {
                continue;
            }
            let def = (0..at).rev().find(|&k| body[k].def() == Some(*r));
            if let Some(k) = def {
                if let Stmt::Assign {
                    expr: Expr::Const {
                        value: Const::String(s),
                        ..
                    },
                    ..
                } = &body[k]
                {
                    *p = ConcatPart::Lit(s.clone());
                    drop.push(k);
                }
            }
        }
        let mut merged: Vec<ConcatPart> = Vec::new();
        for p in parts {
            match (merged.last_mut(), p) {
                (_, ConcatPart::Lit(s)) if s.is_empty() => {}
                (Some(ConcatPart::Lit(a)), ConcatPart::Lit(b)) => a.push_str(&b),
                (_, p) => merged.push(p),
            }
        }
        body[at] = Stmt::Assign {
            dst,
            expr: Expr::Concat(merged),
        };
        drop.sort_unstable();
        drop.dedup();
        for k in drop.iter().rev() {
            body.remove(*k);
        }
        i = at + 1 - drop.iter().filter(|&&k| k < at).count();
    }
}

type Rewrite = (Vec<usize>, usize, Reg, Vec<ConcatPart>);

fn builder_chain(body: &[Stmt], start: usize, sb: Reg, count: &dyn Fn(&Reg) -> usize) -> Option<Rewrite> {
    let mut parts = Vec::new();
    let mut chain = vec![start];
    let mut cur = sb;
    let mut initialized = false;
    // (part register, statement index where it was consumed)
    let mut consumed: Vec<(Reg, usize)> = Vec::new();
    for (k, s) in body.iter().enumerate().skip(start + 1) {
        let Stmt::Invoke { dst, call } = s else {
            if s.uses().contains(&cur) {
                return None;
            }
            continue;
        };
        if !call.args.first().is_some_and(|a| *a == cur) {
            if call.args.contains(&cur) {
                return None;
            }
            continue;
        }
        let params = &call.method.descriptor.params;
        if !initialized {
            if !is_builder(call, "<init>") || call.kind != InvokeKind::Special || count(&sb) != 2 {
                return None;
            }
            match params.as_slice() {
                [] => {}
                [FieldType::Object(o)] if o == "java.lang.String" => {
                    parts.push(ConcatPart::Reg(call.args[1]));
                    consumed.push((call.args[1], k));
                }
                _ => return None,
            }
            initialized = true;
            chain.push(k);
            continue;
        }
        if is_builder(call, "append") && params.len() == 1 && renders_as_text(&params[0]) {
            let d = (*dst)?;
            if count(&d) > 1 {
                return None;
            }
            parts.push(ConcatPart::Reg(call.args[1]));
            consumed.push((call.args[1], k));
            chain.push(k);
            cur = d;
            if count(&d) == 0 {
                return None;
            }
            continue;
        }
        if is_builder(call, "toString") && params.is_empty() {
            let d = (*dst)?;
            // Parts must still hold their appended values here.
            for (r, at) in &consumed {
                if body[at + 1..k].iter().any(|s| s.def() == Some(*r)) {
                    return None;
                }
            }
            return Some((chain, k, d, parts));
        }
        return None;
    }
    None
}

fn indy_concat(call: &Call) -> Option<Vec<ConcatPart>> {
    let b = call.bootstrap.as_ref()?;
    if b.method != "java.lang.invoke.StringConcatFactory.makeConcatWithConstants" {
        return None;
    }
    if !call.method.descriptor.params.iter().all(renders_as_text) {
        return None;
    }
    let Some(Const::String(recipe)) = b.args.first() else { return None };
    let mut parts = Vec::new();
    let mut args = call.args.iter();
    let mut consts = b.args[1..].iter();
    let mut lit = String::new();
    for c in recipe.chars() {
        match c {
            '\u{1}' => {
                if !lit.is_empty() {
                    parts.push(ConcatPart::Lit(std::mem::take(&mut lit)));
                }
                parts.push(ConcatPart::Reg(*args.next()?));
            }
            '\u{2}' => match consts.next()? {
                Const::String(s) => lit.push_str(s),
                k => lit.push_str(&k.to_string()),
            },
            c => lit.push(c),
        }
    }
    if !lit.is_empty() {
        parts.push(ConcatPart::Lit(lit));
    }
    Some(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::builder::{ClassBuilder, CodeBuilder};
    use crate::classfile::opcodes::*;
    use crate::classfile::ACC_STATIC;
    use crate::ir::interp::{run, Outcome, Value};
    use crate::ir::lift_method;

    fn lift_static(desc: &str, f: impl FnOnce(&mut CodeBuilder<'_>)) -> MethodIr {
        let mut cb = ClassBuilder::new("t.T").unwrap();
        let mut c = cb.code();
        f(&mut c);
        let code = c.finish().unwrap();
        cb.method(ACC_STATIC, "m", desc, Some(code)).unwrap();
        let class = cb.build();
        lift_method(&class, &class.methods[0]).unwrap()
    }

    /// `return a >= b ? a - b : b - a`, in either branch polarity.
    fn abs_diff(flipped: bool) -> MethodIr {
        lift_static("(II)I", |c| {
            let (other, join) = (c.label(), c.label());
            c.op(ILOAD_0).local(ILOAD, 1);
            if flipped {
                c.branch(IF_ICMPLT, other);
                c.op(ILOAD_0).local(ILOAD, 1).op(ISUB).local(ISTORE, 2);
            } else {
                c.branch(IF_ICMPGE, other);
                c.local(ILOAD, 1).op(ILOAD_0).op(ISUB).local(ISTORE, 2);
            }
            c.branch(GOTO, join);
            c.place(other);
            if flipped {
                c.local(ILOAD, 1).op(ILOAD_0).op(ISUB).local(ISTORE, 2);
            } else {
                c.op(ILOAD_0).local(ILOAD, 1).op(ISUB).local(ISTORE, 2);
            }
            c.place(join);
            c.local(ILOAD, 2).op(IRETURN);
        })
    }

    #[test]
    fn branch_polarity_variants_converge() {
        let a = normalize(&abs_diff(false));
        let b = normalize(&abs_diff(true));
        assert_ne!(abs_diff(false).dump(), abs_diff(true).dump());
        assert_eq!(a.dump(), b.dump());
        assert!(a.stmts.iter().all(|s| !matches!(s, Stmt::If { op: CondOp::Ge | CondOp::Ne | CondOp::Gt, .. })));
    }

    #[test]
    fn dead_predecessor_does_not_block_fusion() {
        // B0: r0 := 1; goto B2 | B1 (dead): r0 := 2 | B2: return r0
        let set = |v| Stmt::Assign {
            dst: Reg::Var(0),
            expr: Expr::Const {
                value: Const::Int(v),
                form: None,
            },
        };
        let ir = MethodIr {
            params: vec![],
            ret: Some(FieldType::Int),
            is_static: true,
            stmts: vec![set(1), Stmt::Goto { target: 2 }, set(2), Stmt::Return { value: Some(Reg::Var(0)) }],
            blocks: vec![0..2, 2..3, 3..4],
            handlers: vec![],
            local_names: BTreeMap::new(),
        };
        let once = normalize(&ir);
        assert_eq!(once.blocks.len(), 1, "{}", once.dump());
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn idempotent_on_polarity_example() {
        let once = normalize(&abs_diff(false));
        assert_eq!(normalize(&once), once);
    }

    #[test]
    fn slot_permutation_converges() {
        let build = |x: u16, y: u16| {
            lift_static("(I)I", |c| {
                c.op(ILOAD_0).iconst(3).unwrap().op(IMUL).local(ISTORE, x);
                c.op(ILOAD_0).iconst(7).unwrap().op(IADD).local(ISTORE, y);
                c.local(ILOAD, x).local(ILOAD, y).op(ISUB).op(IRETURN);
            })
        };
        assert_eq!(normalize(&build(1, 2)).dump(), normalize(&build(2, 1)).dump());
        assert_eq!(normalize(&build(1, 2)).dump(), normalize(&build(5, 3)).dump());
    }

    #[test]
    fn redundant_goto_nop_padding_and_constant_forms_converge() {
        let plain = lift_static("(I)I", |c| {
            c.op(ILOAD_0).iconst(2).unwrap().op(IADD).op(IRETURN);
        });
        let padded = lift_static("(I)I", |c| {
            let next = c.label();
            c.op(NOP).op(ILOAD_0).branch(GOTO, next);
            c.place(next);
            c.op(NOP).raw(BIPUSH, crate::classfile::Operand::Byte(2)).op(IADD).op(IRETURN);
        });
        assert_ne!(plain.dump(), padded.dump());
        assert_eq!(normalize(&plain).dump(), normalize(&padded).dump());
    }

    #[test]
    fn identical_returns_merge() {
        let ir = lift_static("(I)I", |c| {
            let other = c.label();
            c.op(ILOAD_0).branch(IFEQ, other);
            c.op(ILOAD_0).op(IRETURN);
            c.place(other);
            c.op(ILOAD_0).op(IRETURN);
        });
        let n = normalize(&ir);
        assert_eq!(n.compact(), "[return p0]");
    }

    #[test]
    fn builder_chain_becomes_concat() {
        let ir = lift_static("(I)Ljava/lang/String;", |c| {
            c.type_op(NEW, "java.lang.StringBuilder").unwrap().op(DUP);
            c.invoke(INVOKESPECIAL, "java.lang.StringBuilder", "<init>", "()V").unwrap();
            c.sconst("n=").unwrap();
            c.invoke(INVOKEVIRTUAL, "java.lang.StringBuilder", "append", "(Ljava/lang/String;)Ljava/lang/StringBuilder;").unwrap();
            c.op(ILOAD_0);
            c.invoke(INVOKEVIRTUAL, "java.lang.StringBuilder", "append", "(I)Ljava/lang/StringBuilder;").unwrap();
            c.invoke(INVOKEVIRTUAL, "java.lang.StringBuilder", "toString", "()Ljava/lang/String;").unwrap();
            c.op(ARETURN);
        });
        let n = normalize(&ir);
        assert_eq!(n.compact(), "[r0 := concat(\"n=\", p0); return r0]");
        for v in [0, -5, 77] {
            assert_eq!(
                run(&ir, &[Value::Int(v)], 100).unwrap(),
                run(&n, &[Value::Int(v)], 100).unwrap()
            );
        }
        assert_eq!(
            run(&n, &[Value::Int(3)], 100).unwrap(),
            Outcome::Returned(Some(Value::Str("n=3".into())))
        );
    }
}

//! Random inputs for the oracle tests: structured int methods in assembly
//! syntax, raw IR control-flow graphs, and triplet sets.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use jarsig::cpg::{Triplet, TripletSet};
use jarsig::ir::{BinOp, CondOp, CondRhs, Const, Expr, Handler, MethodIr, Reg, Stmt, Ty};

/// Parameters occupy slots 0..3, scratch locals 3..7, loop counters 7..9.
const PARAMS: u16 = 3;
const LOCALS: std::ops::Range<u16> = 3..7;
const COUNTER_BASE: u16 = 7;

const BINOPS: [&str; 11] = ["iadd", "isub", "imul", "idiv", "irem", "iand", "ior", "ixor", "ishl", "ishr", "iushr"];
const IF1: [&str; 6] = ["ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle"];
const IF2: [&str; 6] = ["if_icmpeq", "if_icmpne", "if_icmplt", "if_icmpge", "if_icmpgt", "if_icmple"];

struct MethodGen<'r, R: Rng> {
    rng: &'r mut R,
    out: Vec<String>,
    tries: Vec<String>,
    labels: usize,
}

impl<R: Rng> MethodGen<'_, R> {
    fn label(&mut self) -> String {
        self.labels += 1;
        format!("L{}", self.labels)
    }

    fn emit(&mut self, line: impl Into<String>) {
        self.out.push(format!("  {}", line.into()));
    }

    fn place(&mut self, l: &str) {
        self.out.push(format!("{l}:"));
    }

    fn constant(&mut self) {
        let v: i32 = match self.rng.gen_range(0..5) {
            0 => self.rng.gen_range(-1..=5),
            1 => self.rng.gen_range(-128..=127),
            2 => self.rng.gen_range(-32768..=32767),
            3 => self.rng.gen(),
            _ => *[0, 1, 2, 3, 7, 31, 32, 100].choose(self.rng).unwrap(),
        };
        self.emit(format!("push {v}"));
    }

    fn readable(&mut self, counters: u16) -> u16 {
        let n = PARAMS + LOCALS.len() as u16 + counters;
        let slot = self.rng.gen_range(0..n);
        if slot < PARAMS + LOCALS.len() as u16 {
            slot
        } else {
            COUNTER_BASE + (slot - PARAMS - LOCALS.len() as u16)
        }
    }

    fn expr(&mut self, depth: u32, counters: u16) {
        match self.rng.gen_range(0..if depth == 0 { 2 } else { 5 }) {
            0 => self.constant(),
            1 => {
                let s = self.readable(counters);
                self.emit(format!("iload {s}"));
            }
            2 => {
                self.expr(depth - 1, counters);
                self.emit("ineg");
            }
            _ => {
                self.expr(depth - 1, counters);
                self.expr(depth - 1, counters);
                let op = *BINOPS.choose(self.rng).unwrap();
                self.emit(op);
            }
        }
    }

    fn cond_jump(&mut self, target: &str, counters: u16) {
        if self.rng.gen_bool(0.5) {
            self.expr(1, counters);
            let op = *IF1.choose(self.rng).unwrap();
            self.emit(format!("{op} {target}"));
        } else {
            self.expr(1, counters);
            self.expr(1, counters);
            let op = *IF2.choose(self.rng).unwrap();
            self.emit(format!("{op} {target}"));
        }
    }

    fn block(&mut self, depth: u32, counters: u16) {
        for _ in 0..self.rng.gen_range(1..4) {
            self.stmt(depth, counters);
        }
    }

    fn stmt(&mut self, depth: u32, counters: u16) {
        let choice = if depth == 0 { 0 } else { self.rng.gen_range(0..8) };
        match choice {
            0 | 1 => {
                self.expr(2, counters);
                let dst = self.rng.gen_range(LOCALS);
                self.emit(format!("istore {dst}"));
            }
            2 => {
                let dst = self.rng.gen_range(LOCALS);
                let d: i16 = self.rng.gen_range(-200..200);
                self.emit(format!("iinc {dst} {d}"));
            }
            3 => {
                let (els, end) = (self.label(), self.label());
                self.cond_jump(&els, counters);
                self.block(depth - 1, counters);
                if self.rng.gen_bool(0.2) {
                    self.expr(1, counters);
                    self.emit("ireturn");
                } else {
                    self.emit(format!("goto {end}"));
                }
                self.place(&els);
                self.block(depth - 1, counters);
                self.place(&end);
                self.emit("nop");
            }
            4 if counters < 2 => {
                let c = COUNTER_BASE + counters;
                let (head, exit) = (self.label(), self.label());
                let bound = self.rng.gen_range(0..5);
                self.emit("push 0");
                self.emit(format!("istore {c}"));
                self.place(&head);
                self.emit(format!("iload {c}"));
                self.emit(format!("push {bound}"));
                self.emit(format!("if_icmpge {exit}"));
                self.block(depth - 1, counters + 1);
                self.emit(format!("iinc {c} 1"));
                self.emit(format!("goto {head}"));
                self.place(&exit);
                self.emit("nop");
            }
            5 => {
                let (start, stop, handler, end) = (self.label(), self.label(), self.label(), self.label());
                self.place(&start);
                self.block(depth - 1, counters);
                self.place(&stop);
                self.emit(format!("goto {end}"));
                self.place(&handler);
                self.emit("pop");
                self.constant();
                let dst = self.rng.gen_range(LOCALS);
                self.emit(format!("istore {dst}"));
                self.place(&end);
                self.emit("nop");
                let ty = if self.rng.gen_bool(0.7) { "java.lang.ArithmeticException" } else { "any" };
                self.tries.push(format!("try {start} {stop} {handler} {ty}"));
            }
            6 => {
                let cases: Vec<String> = (0..self.rng.gen_range(1..4)).map(|_| self.label()).collect();
                let (dflt, end) = (self.label(), self.label());
                self.expr(1, counters);
                if self.rng.gen_bool(0.5) {
                    let low = self.rng.gen_range(-2..2);
                    self.emit(format!("tableswitch {low} {dflt} {}", cases.join(" ")));
                } else {
                    let mut keys: Vec<i32> = (-3..6).collect();
                    keys.shuffle(self.rng);
                    let pairs: Vec<String> = cases.iter().zip(keys).map(|(l, k)| format!("{k}:{l}")).collect();
                    self.emit(format!("lookupswitch {dflt} {}", pairs.join(" ")));
                }
                for l in cases.iter().chain([&dflt]) {
                    self.place(l);
                    self.block(depth - 1, counters);
                    self.emit(format!("goto {end}"));
                }
                self.place(&end);
                self.emit("nop");
            }
            _ => {
                self.block(depth - 1, counters);
            }
        }
    }
}

/// A class `gen.M` holding one static `(III)I` method named `f`, written in
/// the assembler syntax. Every local is initialised before use and every
/// loop is bounded.
pub fn int_method_source(rng: &mut impl Rng) -> String {
    let mut g = MethodGen {
        rng,
        out: Vec::new(),
        tries: Vec::new(),
        labels: 0,
    };
    for slot in LOCALS.chain(COUNTER_BASE..COUNTER_BASE + 2) {
        g.emit("push 0");
        g.emit(format!("istore {slot}"));
    }
    g.block(3, 0);
    g.expr(2, 0);
    g.emit("ireturn");
    let mut text = String::from("class gen.M\nmethod public static f (III)I\n");
    for l in g.out.iter().chain(&g.tries) {
        text.push_str(l);
        text.push('\n');
    }
    text.push_str("end\n");
    text
}

pub fn int_args(rng: &mut impl Rng) -> Vec<i32> {
    (0..PARAMS)
        .map(|_| match rng.gen_range(0..4) {
            0 => rng.gen_range(-3..=3),
            1 => *[i32::MIN, i32::MAX, -1, 0, 1].choose(rng).unwrap(),
            _ => rng.gen_range(-1000..1000),
        })
        .collect()
}

fn assign(dst: u32, src: Reg) -> Stmt {
    Stmt::Assign {
        dst: Reg::Var(dst),
        expr: Expr::Binary {
            op: BinOp::Add,
            ty: Ty::Int,
            lhs: src,
            rhs: Reg::Param(0),
        },
    }
}

/// Raw IR with at most `max_blocks` blocks, arbitrary (possibly irreducible
/// and partly unreachable) control flow, a few registers defined and used
/// repeatedly, and occasional exception handlers.
pub fn random_ir(rng: &mut impl Rng, max_blocks: usize) -> MethodIr {
    let n = rng.gen_range(1..=max_blocks);
    let regs = rng.gen_range(1..=3u32);
    let reg = |rng: &mut dyn rand::RngCore| Reg::Var(rng.gen_range(0..regs));
    let mut stmts = Vec::new();
    let mut blocks = Vec::new();
    for b in 0..n {
        let start = stmts.len();
        for _ in 0..rng.gen_range(0..3) {
            let dst = rng.gen_range(0..regs);
            stmts.push(if rng.gen_bool(0.3) {
                Stmt::Assign {
                    dst: Reg::Var(dst),
                    expr: Expr::Const {
                        value: Const::Int(rng.gen_range(0..4)),
                        form: None,
                    },
                }
            } else {
                assign(dst, reg(rng))
            });
        }
        let target = rng.gen_range(0..n);
        let term = match rng.gen_range(0..7) {
            0 if b + 1 < n => None,
            0 | 1 => Some(Stmt::If {
                op: CondOp::Lt,
                lhs: reg(rng),
                rhs: CondRhs::Zero,
                target,
            }),
            2 => Some(Stmt::Goto { target }),
            3 => Some(Stmt::Return { value: Some(reg(rng)) }),
            4 => Some(Stmt::Switch {
                key: reg(rng),
                cases: vec![(0, target), (1, rng.gen_range(0..n))],
                default: rng.gen_range(0..n),
            }),
            5 => Some(Stmt::Throw { value: reg(rng) }),
            _ => Some(Stmt::Return { value: None }),
        };
        stmts.extend(term);
        if stmts.len() == start {
            stmts.push(Stmt::Nop);
        }
        blocks.push(start..stmts.len());
    }
    let mut handlers = Vec::new();
    if n > 1 && rng.gen_bool(0.3) {
        let covered: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        handlers.push(Handler {
            covered,
            target: rng.gen_range(1..n),
            catch_type: None,
        });
    }
    MethodIr {
        params: vec![(Reg::Param(0), jarsig::classfile::descriptor::FieldType::Int)],
        ret: None,
        is_static: true,
        stmts,
        blocks,
        handlers,
        local_names: Default::default(),
    }
}

/// Draws from a small label alphabet so that random sets overlap often.
pub fn random_triplets(rng: &mut impl Rng) -> TripletSet {
    const NODES: [&str; 6] = ["call a.B.run", "ret", "const 0", "if lt", "a.b.C.f", "c.D"];
    const EDGES: [&str; 3] = ["CFG", "DD", "CD"];
    let n = rng.gen_range(0..12);
    let set: BTreeSet<Triplet> = (0..n)
        .map(|_| {
            Triplet::new(
                *NODES.choose(rng).unwrap(),
                *EDGES.choose(rng).unwrap(),
                *NODES.choose(rng).unwrap(),
            )
        })
        .collect();
    TripletSet(set)
}

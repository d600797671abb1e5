//! Symbolic execution of the operand stack, one basic block at a time.
//!
//! A first pass walks reachable blocks from the entry to learn the stack
//! shape (slot categories) on entry to every block, rejecting joins whose
//! shapes disagree. A second pass emits statements for the reachable blocks
//! in bytecode order. Values live on the stack as register references: local
//! loads push the local's register, every other producer writes a fresh
//! temporary. Values still on the stack at a block boundary are copied into
//! the successor's join registers.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::classfile::code::{CodeAttribute, Instruction, Operand};
use crate::classfile::constant_pool::{Constant, ConstantPool};
use crate::classfile::descriptor::{class_constant_type, dotted_name, parse_field_descriptor, FieldType, MethodDescriptor};
use crate::classfile::opcodes::*;
use crate::classfile::{BootstrapMethod, ClassFile, MemberInfo};

use super::*;

/// Lifts `method` of `class`, attaching local-variable names when present.
pub fn lift_method(class: &ClassFile, method: &MemberInfo) -> Result<MethodIr, LiftError> {
    let code = method.code().ok_or(LiftError::NoCode)?;
    let desc = MethodDescriptor::parse(class.member_descriptor(method)?)?;
    let bootstrap = class.bootstrap_methods()?;
    let this = class.name()?;
    let mut ir = lift_impl(code, &class.constant_pool, &bootstrap, &desc, method.is_static(), &this)?;
    let slots = SlotMap::new(&desc, method.is_static());
    for (slot, name) in class.local_variable_names(code) {
        if slot < code.max_locals {
            ir.local_names.insert(slots.reg(slot), name);
        }
    }
    Ok(ir)
}

/// Lifts a code attribute. The receiver of an instance method is typed
/// `java.lang.Object`; use [`lift_method`] for the declaring class.
pub fn lift(
    code: &CodeAttribute,
    pool: &ConstantPool,
    bootstrap: &[BootstrapMethod],
    desc: &MethodDescriptor,
    is_static: bool,
) -> Result<MethodIr, LiftError> {
    lift_impl(code, pool, bootstrap, desc, is_static, "java.lang.Object")
}

/// Maps local slots to registers: parameter slots to `Param`, the rest to `Var`.
struct SlotMap {
    param_of_slot: HashMap<u16, u16>,
}

impl SlotMap {
    fn new(desc: &MethodDescriptor, is_static: bool) -> Self {
        let mut param_of_slot = HashMap::new();
        let mut slot = 0u16;
        let mut index = 0u16;
        if !is_static {
            param_of_slot.insert(0, 0);
            slot = 1;
            index = 1;
        }
        for p in &desc.params {
            param_of_slot.insert(slot, index);
            slot += p.slots();
            index += 1;
        }
        SlotMap { param_of_slot }
    }

    fn reg(&self, slot: u16) -> Reg {
        match self.param_of_slot.get(&slot) {
            Some(&p) => Reg::Param(p),
            None => Reg::Var(slot as u32),
        }
    }
}

struct Ctx<'a> {
    insns: &'a [Instruction],
    pool: &'a ConstantPool,
    bootstrap: &'a [BootstrapMethod],
    slots: SlotMap,
    /// Instruction index ranges of bytecode blocks.
    blocks: Vec<std::ops::Range<usize>>,
    block_at_offset: HashMap<u32, usize>,
    /// Caught type per handler block (`None` for catch-all or mixed types).
    handler_type: BTreeMap<usize, Option<String>>,
    /// Handler blocks covering each block.
    covering: Vec<Vec<usize>>,
}

fn lift_impl(
    code: &CodeAttribute,
    pool: &ConstantPool,
    bootstrap: &[BootstrapMethod],
    desc: &MethodDescriptor,
    is_static: bool,
    this_class: &str,
) -> Result<MethodIr, LiftError> {
    let insns = code.instructions.as_slice();
    if insns.is_empty() {
        return Err(LiftError::FallsOffEnd);
    }
    code.validate()?;
    if let Some(i) = insns.iter().find(|i| matches!(i.opcode, JSR | JSR_W | RET)) {
        return Err(LiftError::UnsupportedInstruction {
            offset: i.offset,
            mnemonic: i.mnemonic(),
        });
    }
    let ctx = build_ctx(code, pool, bootstrap, desc, is_static)?;

    // Pass 1: entry shapes of reachable blocks.
    let mut shapes: Vec<Option<Vec<u8>>> = vec![None; ctx.blocks.len()];
    shapes[0] = Some(Vec::new());
    let mut work = VecDeque::from([0usize]);
    let mut scratch_temp = code.max_locals as u32;
    while let Some(b) = work.pop_front() {
        let shape = shapes[b].clone().unwrap_or_default();
        let out = exec_block(&ctx, b, &shape, &mut scratch_temp)?;
        let mut next: Vec<(usize, Vec<u8>)> = out.succs.iter().map(|&s| (s, out.exit_shape.clone())).collect();
        next.extend(ctx.covering[b].iter().map(|&h| (h, vec![1u8])));
        for (s, shape) in next {
            match &shapes[s] {
                Some(existing) if *existing != shape => {
                    return Err(LiftError::InconsistentStackDepthAtJoin {
                        offset: insns[ctx.blocks[s].start].offset,
                    })
                }
                Some(_) => {}
                None => {
                    shapes[s] = Some(shape);
                    work.push_back(s);
                }
            }
        }
    }

    // Pass 2: emit reachable blocks in bytecode order.
    let mut ir_id = vec![usize::MAX; ctx.blocks.len()];
    let mut order = Vec::new();
    for (b, shape) in shapes.iter().enumerate() {
        if shape.is_some() {
            ir_id[b] = order.len();
            order.push(b);
        } else {
            log::debug!("pruned unreachable block at offset {}", insns[ctx.blocks[b].start].offset);
        }
    }
    let mut temp = code.max_locals as u32;
    let mut stmts = Vec::new();
    let mut ranges = Vec::with_capacity(order.len());
    for &b in &order {
        let shape = shapes[b].as_ref().expect("reachable");
        let out = exec_block(&ctx, b, shape, &mut temp)?;
        let start = stmts.len();
        stmts.extend(out.stmts);
        ranges.push(start..stmts.len());
    }
    for s in &mut stmts {
        for t in s.targets_mut() {
            *t = ir_id[*t];
        }
        let rename = |r: &mut Reg| {
            if let Reg::Join { block, .. } = r {
                *block = ir_id[*block as usize] as u32;
            }
        };
        s.uses_mut().into_iter().for_each(rename);
        s.def_mut().into_iter().for_each(rename);
    }

    let mut handlers = Vec::new();
    for e in &code.exception_table {
        let target = ctx.block_at_offset[&(e.handler_pc as u32)];
        let covered: Vec<BlockId> = (0..ctx.blocks.len())
            .filter(|&b| {
                let off = insns[ctx.blocks[b].start].offset;
                off >= e.start_pc as u32 && off < e.end_pc as u32 && shapes[b].is_some()
            })
            .map(|b| ir_id[b])
            .collect();
        if covered.is_empty() {
            continue;
        }
        let catch_type = if e.catch_type == 0 {
            None
        } else {
            Some(dotted_name(pool.class_name(e.catch_type)?))
        };
        handlers.push(Handler {
            covered,
            target: ir_id[target],
            catch_type,
        });
    }

    let mut params = Vec::new();
    if !is_static {
        params.push((Reg::Param(0), FieldType::Object(this_class.to_string())));
    }
    for p in &desc.params {
        params.push((Reg::Param(params.len() as u16), p.clone()));
    }
    Ok(MethodIr {
        params,
        ret: desc.ret.clone(),
        is_static,
        stmts,
        blocks: ranges,
        handlers,
        local_names: BTreeMap::new(),
    })
}

fn build_ctx<'a>(
    code: &'a CodeAttribute,
    pool: &'a ConstantPool,
    bootstrap: &'a [BootstrapMethod],
    desc: &MethodDescriptor,
    is_static: bool,
) -> Result<Ctx<'a>, LiftError> {
    let insns = code.instructions.as_slice();
    let index = code.index_of_offset();
    let len = code.code_length();
    let mut leaders = BTreeSet::from([0usize]);
    for (i, insn) in insns.iter().enumerate() {
        let targets = insn.operand.targets();
        for t in &targets {
            leaders.insert(index[t]);
        }
        if (!targets.is_empty() || ends_flow(insn.opcode)) && i + 1 < insns.len() {
            leaders.insert(i + 1);
        }
    }
    for e in &code.exception_table {
        leaders.insert(index[&(e.start_pc as u32)]);
        leaders.insert(index[&(e.handler_pc as u32)]);
        if (e.end_pc as u32) < len {
            leaders.insert(index[&(e.end_pc as u32)]);
        }
    }
    let starts: Vec<usize> = leaders.into_iter().collect();
    let blocks: Vec<std::ops::Range<usize>> = starts
        .iter()
        .enumerate()
        .map(|(k, &s)| s..starts.get(k + 1).copied().unwrap_or(insns.len()))
        .collect();
    let block_at_offset: HashMap<u32, usize> = blocks
        .iter()
        .enumerate()
        .map(|(b, r)| (insns[r.start].offset, b))
        .collect();
    let mut handler_type: BTreeMap<usize, Option<String>> = BTreeMap::new();
    let mut covering = vec![Vec::new(); blocks.len()];
    for e in &code.exception_table {
        let h = block_at_offset[&(e.handler_pc as u32)];
        let ty = if e.catch_type == 0 {
            None
        } else {
            Some(dotted_name(pool.class_name(e.catch_type)?))
        };
        handler_type
            .entry(h)
            .and_modify(|t| {
                if *t != ty {
                    *t = None;
                }
            })
            .or_insert(ty);
        for (b, r) in blocks.iter().enumerate() {
            let off = insns[r.start].offset;
            if off >= e.start_pc as u32 && off < e.end_pc as u32 && !covering[b].contains(&h) {
                covering[b].push(h);
            }
        }
    }
    Ok(Ctx {
        insns,
        pool,
        bootstrap,
        slots: SlotMap::new(desc, is_static),
        blocks,
        block_at_offset,
        handler_type,
        covering,
    })
}

struct BlockOut {
    stmts: Vec<Stmt>,
    exit_shape: Vec<u8>,
    succs: Vec<usize>,
}

struct Exec<'c, 'a> {
    ctx: &'c Ctx<'a>,
    stmts: Vec<Stmt>,
    stack: Vec<(Reg, u8)>,
    temp: &'c mut u32,
    /// First temporary allocated by this block; lower numbers are locals or
    /// temporaries of other blocks.
    temp_base: u32,
    offset: u32,
}

fn cat_of(ty: &FieldType) -> u8 {
    ty.slots() as u8
}

impl Exec<'_, '_> {
    fn fresh(&mut self) -> Reg {
        let r = Reg::Var(*self.temp);
        *self.temp += 1;
        r
    }

    fn pop(&mut self) -> Result<(Reg, u8), LiftError> {
        self.stack.pop().ok_or(LiftError::StackUnderflow { offset: self.offset })
    }

    fn pop_cat(&mut self, expected: u8) -> Result<Reg, LiftError> {
        let (r, c) = self.pop()?;
        if c != expected {
            return Err(LiftError::CategoryMismatch {
                offset: self.offset,
                expected,
                found: c,
            });
        }
        Ok(r)
    }

    fn pop_ty(&mut self, ty: Ty) -> Result<Reg, LiftError> {
        self.pop_cat(ty_cat(ty))
    }

    /// Pops entries covering exactly `slots` stack slots, bottom first.
    fn pop_slots(&mut self, slots: u8) -> Result<Vec<(Reg, u8)>, LiftError> {
        let mut got = 0;
        let mut out = Vec::new();
        while got < slots {
            let v = self.pop()?;
            got += v.1;
            out.push(v);
        }
        if got != slots {
            return Err(LiftError::CategoryMismatch {
                offset: self.offset,
                expected: 1,
                found: 2,
            });
        }
        out.reverse();
        Ok(out)
    }

    fn assign(&mut self, expr: Expr, cat: u8) {
        let t = self.fresh();
        self.stmts.push(Stmt::Assign { dst: t, expr });
        self.stack.push((t, cat));
    }

    fn constant(&mut self, value: Const, form: ConstForm) {
        let cat = if matches!(value, Const::Long(_) | Const::Double(_)) { 2 } else { 1 };
        self.assign(Expr::Const { value, form: Some(form) }, cat);
    }

    /// Copies stack entries aliasing `reg` into a temporary before `reg` is overwritten.
    fn spill(&mut self, reg: Reg) {
        if !self.stack.iter().any(|(r, _)| *r == reg) {
            return;
        }
        let t = self.fresh();
        self.stmts.push(Stmt::Assign {
            dst: t,
            expr: Expr::Copy(reg),
        });
        for e in &mut self.stack {
            if e.0 == reg {
                e.0 = t;
            }
        }
    }

    fn store(&mut self, slot: u16, cat: u8) -> Result<(), LiftError> {
        let v = self.pop_cat(cat)?;
        let dst = self.ctx.slots.reg(slot);
        let is_temp = matches!(v, Reg::Var(n) if n >= self.temp_base && n + 1 == *self.temp);
        // Padding nops between the push and the store do not block folding.
        let def_at = self.stmts.iter().rposition(|s| *s != Stmt::Nop);
        let last_defines_v = def_at.and_then(|i| self.stmts[i].def()) == Some(v);
        if is_temp && last_defines_v && !self.stack.iter().any(|(r, _)| *r == v) {
            // Write the value straight into the local, spilling aliases of the
            // local before the defining statement.
            let mut def = self.stmts.remove(def_at.expect("checked above"));
            *self.temp -= 1;
            self.spill(dst);
            if let Some(d) = def.def_mut() {
                *d = dst;
            }
            self.stmts.push(def);
        } else {
            self.spill(dst);
            if v != dst {
                self.stmts.push(Stmt::Assign {
                    dst,
                    expr: Expr::Copy(v),
                });
            }
        }
        Ok(())
    }

    fn target(&self, offset: u32) -> usize {
        self.ctx.block_at_offset[&offset]
    }

    fn field_ref(&self, idx: u16) -> Result<FieldRef, LiftError> {
        let r = self.ctx.pool.field_ref(idx)?;
        Ok(FieldRef {
            owner: class_constant_type(r.owner),
            name: r.name.to_string(),
            ty: parse_field_descriptor(r.descriptor)?,
        })
    }

    fn pool_const(&self, idx: u16) -> Result<Const, LiftError> {
        let pool = self.ctx.pool;
        Ok(match pool.get(idx)? {
            Constant::Integer(v) => Const::Int(*v),
            Constant::Float(b) => Const::Float(*b),
            Constant::Long(v) => Const::Long(*v),
            Constant::Double(b) => Const::Double(*b),
            Constant::String { value } => Const::String(pool.utf8(*value)?.to_string()),
            Constant::Class { name } => Const::Class(class_constant_type(pool.utf8(*name)?)),
            Constant::MethodType { descriptor } => Const::MethodType(pool.utf8(*descriptor)?.to_string()),
            Constant::MethodHandle { reference, .. } => Const::MethodHandle(render_member(pool, *reference)?),
            Constant::Dynamic { name_and_type, .. } => {
                let (n, d) = pool.name_and_type(*name_and_type)?;
                Const::Dynamic(format!("{n}:{d}"))
            }
            other => {
                return Err(LiftError::ClassFile(crate::classfile::ClassFileError::BadConstantPoolRef {
                    index: idx,
                    expected: if other.is_wide() { "Long or Double" } else { "loadable constant" },
                }))
            }
        })
    }

    fn invoke(&mut self, insn: &Instruction) -> Result<(), LiftError> {
        let op = insn.opcode;
        let pool = self.ctx.pool;
        let (idx, kind) = match (&insn.operand, op) {
            (Operand::Constant(i), INVOKEVIRTUAL) => (*i, InvokeKind::Virtual),
            (Operand::Constant(i), INVOKESPECIAL) => (*i, InvokeKind::Special),
            (Operand::Constant(i), INVOKESTATIC) => (*i, InvokeKind::Static),
            (Operand::Interface { index, .. }, _) => (*index, InvokeKind::Interface),
            (Operand::Constant(i), _) => (*i, InvokeKind::Dynamic),
            _ => unreachable!("decoder assigns invoke operands"),
        };
        let (method, bootstrap) = if kind == InvokeKind::Dynamic {
            let Constant::InvokeDynamic {
                bootstrap,
                name_and_type,
            } = pool.get(idx)?
            else {
                unreachable!("validated by the class parser")
            };
            let (name, d) = pool.name_and_type(*name_and_type)?;
            let (bsm_owner, bsm) = match self.ctx.bootstrap.get(*bootstrap as usize) {
                Some(b) => {
                    let owner = match pool.get(b.method_handle)? {
                        Constant::MethodHandle { reference, .. } => {
                            let m = pool.method_ref(*reference)?;
                            (dotted_name(m.owner), format!("{}.{}", dotted_name(m.owner), m.name))
                        }
                        _ => ("?".to_string(), "?".to_string()),
                    };
                    let args = b
                        .arguments
                        .iter()
                        .map(|&a| self.pool_const(a))
                        .collect::<Result<Vec<_>, _>>()?;
                    (
                        owner.0,
                        Bootstrap {
                            method: owner.1,
                            args,
                        },
                    )
                }
                None => (
                    "?".to_string(),
                    Bootstrap {
                        method: "?".to_string(),
                        args: vec![],
                    },
                ),
            };
            (
                MethodRef {
                    owner: bsm_owner,
                    name: name.to_string(),
                    descriptor: MethodDescriptor::parse(d)?,
                },
                Some(bsm),
            )
        } else {
            let m = pool.method_ref(idx)?;
            (
                MethodRef {
                    owner: class_constant_type(m.owner),
                    name: m.name.to_string(),
                    descriptor: MethodDescriptor::parse(m.descriptor)?,
                },
                None,
            )
        };
        let mut args = Vec::with_capacity(method.descriptor.params.len() + 1);
        for p in method.descriptor.params.iter().rev() {
            args.push(self.pop_cat(cat_of(p))?);
        }
        if !matches!(kind, InvokeKind::Static | InvokeKind::Dynamic) {
            args.push(self.pop_cat(1)?);
        }
        args.reverse();
        let dst = method.descriptor.ret.as_ref().map(|t| (self.fresh(), cat_of(t)));
        self.stmts.push(Stmt::Invoke {
            dst: dst.map(|d| d.0),
            call: Call {
                kind,
                method,
                bootstrap,
                args,
            },
        });
        if let Some(d) = dst {
            self.stack.push(d);
        }
        Ok(())
    }

    /// Executes one non-terminating instruction, or returns the terminator
    /// statement for branches, switches, returns and throws.
    fn step(&mut self, insn: &Instruction) -> Result<Option<Stmt>, LiftError> {
        self.offset = insn.offset;
        let op = insn.opcode;
        match op {
            NOP => self.stmts.push(Stmt::Nop),
            ACONST_NULL => self.constant(Const::Null, ConstForm::Inline),
            ICONST_M1..=ICONST_5 => self.constant(Const::Int(op as i32 - ICONST_0 as i32), ConstForm::Inline),
            LCONST_0 | LCONST_1 => self.constant(Const::Long((op - LCONST_0) as i64), ConstForm::Inline),
            FCONST_0..=FCONST_2 => self.constant(Const::Float(((op - FCONST_0) as f32).to_bits()), ConstForm::Inline),
            DCONST_0 | DCONST_1 => self.constant(Const::Double(((op - DCONST_0) as f64).to_bits()), ConstForm::Inline),
            BIPUSH => {
                let Operand::Byte(b) = insn.operand else { unreachable!() };
                self.constant(Const::Int(b as i32), ConstForm::Bipush)
            }
            SIPUSH => {
                let Operand::Short(s) = insn.operand else { unreachable!() };
                self.constant(Const::Int(s as i32), ConstForm::Sipush)
            }
            LDC | LDC_W | LDC2_W => {
                let Operand::Constant(i) = insn.operand else { unreachable!() };
                let c = self.pool_const(i)?;
                let cat = match &c {
                    Const::Long(_) | Const::Double(_) => 2,
                    Const::Dynamic(d) if d.ends_with(":J") || d.ends_with(":D") => 2,
                    _ => 1,
                };
                let form = match op {
                    LDC => ConstForm::Ldc,
                    LDC_W => ConstForm::LdcW,
                    _ => ConstForm::Ldc2W,
                };
                self.assign(Expr::Const { value: c, form: Some(form) }, cat);
            }
            ILOAD..=ALOAD => {
                let Operand::Local { index, .. } = insn.operand else { unreachable!() };
                let cat = if matches!(op, LLOAD | DLOAD) { 2 } else { 1 };
                self.stack.push((self.ctx.slots.reg(index), cat));
            }
            0x1a..=0x2d => {
                let k = op - ILOAD_0;
                let cat = if matches!(k / 4, 1 | 3) { 2 } else { 1 };
                self.stack.push((self.ctx.slots.reg((k % 4) as u16), cat));
            }
            ISTORE..=ASTORE => {
                let Operand::Local { index, .. } = insn.operand else { unreachable!() };
                let cat = if matches!(op, LSTORE | DSTORE) { 2 } else { 1 };
                self.store(index, cat)?;
            }
            0x3b..=0x4e => {
                let k = op - ISTORE_0;
                let cat = if matches!(k / 4, 1 | 3) { 2 } else { 1 };
                self.store((k % 4) as u16, cat)?;
            }
            IALOAD..=SALOAD => {
                let elem = ARRAY_TYS[(op - IALOAD) as usize];
                let index = self.pop_cat(1)?;
                let array = self.pop_cat(1)?;
                self.assign(Expr::ArrayLoad { elem, array, index }, ty_cat(elem));
            }
            IASTORE..=SASTORE => {
                let elem = ARRAY_TYS[(op - IASTORE) as usize];
                let value = self.pop_cat(ty_cat(elem))?;
                let index = self.pop_cat(1)?;
                let array = self.pop_cat(1)?;
                self.stmts.push(Stmt::ArrayStore {
                    elem,
                    array,
                    index,
                    value,
                });
            }
            POP => {
                self.pop_cat(1)?;
            }
            POP2 => {
                self.pop_slots(2)?;
            }
            DUP..=DUP2_X2 => {
                let (copy, skip) = match op {
                    DUP => (1, 0),
                    DUP_X1 => (1, 1),
                    DUP_X2 => (1, 2),
                    DUP2 => (2, 0),
                    DUP2_X1 => (2, 1),
                    _ => (2, 2),
                };
                let top = self.pop_slots(copy)?;
                let under = self.pop_slots(skip)?;
                self.stack.extend(top.iter().copied());
                self.stack.extend(under);
                self.stack.extend(top);
            }
            SWAP => {
                let a = self.pop_cat(1)?;
                let b = self.pop_cat(1)?;
                self.stack.push((a, 1));
                self.stack.push((b, 1));
            }
            0x60..=0x73 => {
                let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
                let bop = ops[((op - 0x60) / 4) as usize];
                let ty = NUM_TYS[((op - 0x60) % 4) as usize];
                self.binary(bop, ty, ty)?;
            }
            0x74..=0x77 => {
                let ty = NUM_TYS[(op - 0x74) as usize];
                let src = self.pop_ty(ty)?;
                self.assign(Expr::Neg { ty, src }, ty_cat(ty));
            }
            0x78..=0x7d => {
                let bop = [BinOp::Shl, BinOp::Shr, BinOp::Ushr][((op - 0x78) / 2) as usize];
                let ty = if (op - 0x78) % 2 == 0 { Ty::Int } else { Ty::Long };
                self.binary(bop, ty, Ty::Int)?;
            }
            0x7e..=0x83 => {
                let bop = [BinOp::And, BinOp::Or, BinOp::Xor][((op - 0x7e) / 2) as usize];
                let ty = if (op - 0x7e) % 2 == 0 { Ty::Int } else { Ty::Long };
                self.binary(bop, ty, ty)?;
            }
            IINC => {
                let Operand::Iinc { index, delta, .. } = insn.operand else { unreachable!() };
                let reg = self.ctx.slots.reg(index);
                self.spill(reg);
                let t = self.fresh();
                self.stmts.push(Stmt::Assign {
                    dst: t,
                    expr: Expr::Const {
                        value: Const::Int(delta as i32),
                        form: Some(ConstForm::Iinc),
                    },
                });
                self.stmts.push(Stmt::Assign {
                    dst: reg,
                    expr: Expr::Binary {
                        op: BinOp::Add,
                        ty: Ty::Int,
                        lhs: reg,
                        rhs: t,
                    },
                });
            }
            0x85..=0x93 => {
                let (from, to) = CONVERSIONS[(op - 0x85) as usize];
                let src = self.pop_ty(from)?;
                self.assign(Expr::Convert { from, to, src }, ty_cat(to));
            }
            LCMP..=DCMPG => {
                let (kind, ty) = match op {
                    LCMP => (CmpKind::Cmp, Ty::Long),
                    FCMPL => (CmpKind::CmpL, Ty::Float),
                    FCMPG => (CmpKind::CmpG, Ty::Float),
                    DCMPL => (CmpKind::CmpL, Ty::Double),
                    _ => (CmpKind::CmpG, Ty::Double),
                };
                let rhs = self.pop_ty(ty)?;
                let lhs = self.pop_ty(ty)?;
                self.assign(Expr::Compare { kind, ty, lhs, rhs }, 1);
            }
            IFEQ..=IF_ACMPNE | IFNULL | IFNONNULL => {
                let Operand::Branch(t) = insn.operand else { unreachable!() };
                let target = self.target(t);
                let (cond, rhs) = match op {
                    IFEQ..=IFLE => (COND_OPS[(op - IFEQ) as usize], CondRhs::Zero),
                    IF_ICMPEQ..=IF_ICMPLE => {
                        let r = self.pop_cat(1)?;
                        (COND_OPS[(op - IF_ICMPEQ) as usize], CondRhs::Reg(r))
                    }
                    IF_ACMPEQ | IF_ACMPNE => {
                        let r = self.pop_cat(1)?;
                        (if op == IF_ACMPEQ { CondOp::Eq } else { CondOp::Ne }, CondRhs::Reg(r))
                    }
                    IFNULL => (CondOp::Eq, CondRhs::Null),
                    _ => (CondOp::Ne, CondRhs::Null),
                };
                let lhs = self.pop_cat(1)?;
                return Ok(Some(Stmt::If {
                    op: cond,
                    lhs,
                    rhs,
                    target,
                }));
            }
            GOTO | GOTO_W => {
                let Operand::Branch(t) = insn.operand else { unreachable!() };
                return Ok(Some(Stmt::Goto { target: self.target(t) }));
            }
            TABLESWITCH | LOOKUPSWITCH => {
                let key = self.pop_cat(1)?;
                let (default, cases) = match &insn.operand {
                    Operand::TableSwitch { default, low, targets } => (
                        *default,
                        targets
                            .iter()
                            .enumerate()
                            .map(|(i, t)| (low.wrapping_add(i as i32), self.target(*t)))
                            .collect(),
                    ),
                    Operand::LookupSwitch { default, pairs } => {
                        (*default, pairs.iter().map(|(k, t)| (*k, self.target(*t))).collect())
                    }
                    _ => unreachable!(),
                };
                return Ok(Some(Stmt::Switch {
                    key,
                    cases,
                    default: self.target(default),
                }));
            }
            IRETURN..=ARETURN => {
                let cat = if matches!(op, LRETURN | DRETURN) { 2 } else { 1 };
                let v = self.pop_cat(cat)?;
                return Ok(Some(Stmt::Return { value: Some(v) }));
            }
            RETURN => return Ok(Some(Stmt::Return { value: None })),
            GETSTATIC | GETFIELD => {
                let Operand::Constant(i) = insn.operand else { unreachable!() };
                let field = self.field_ref(i)?;
                let object = if op == GETFIELD { Some(self.pop_cat(1)?) } else { None };
                let cat = cat_of(&field.ty);
                self.assign(Expr::GetField { object, field }, cat);
            }
            PUTSTATIC | PUTFIELD => {
                let Operand::Constant(i) = insn.operand else { unreachable!() };
                let field = self.field_ref(i)?;
                let value = self.pop_cat(cat_of(&field.ty))?;
                let object = if op == PUTFIELD { Some(self.pop_cat(1)?) } else { None };
                self.stmts.push(Stmt::PutField { object, field, value });
            }
            INVOKEVIRTUAL..=INVOKEDYNAMIC => self.invoke(insn)?,
            NEW | ANEWARRAY | CHECKCAST | INSTANCEOF => {
                let Operand::Constant(i) = insn.operand else { unreachable!() };
                let ty = class_constant_type(self.ctx.pool.class_name(i)?);
                match op {
                    NEW => self.assign(Expr::New(ty), 1),
                    ANEWARRAY => {
                        let n = self.pop_cat(1)?;
                        self.assign(Expr::NewArray { elem: ty, dims: vec![n] }, 1);
                    }
                    CHECKCAST => {
                        let src = self.pop_cat(1)?;
                        self.assign(Expr::CheckCast { ty, src }, 1);
                    }
                    _ => {
                        let src = self.pop_cat(1)?;
                        self.assign(Expr::InstanceOf { ty, src }, 1);
                    }
                }
            }
            NEWARRAY => {
                let Operand::ArrayType(t) = insn.operand else { unreachable!() };
                let elem = match t {
                    4 => "boolean",
                    5 => "char",
                    6 => "float",
                    7 => "double",
                    8 => "byte",
                    9 => "short",
                    10 => "int",
                    _ => "long",
                };
                let n = self.pop_cat(1)?;
                self.assign(
                    Expr::NewArray {
                        elem: elem.to_string(),
                        dims: vec![n],
                    },
                    1,
                );
            }
            MULTIANEWARRAY => {
                let Operand::MultiArray { index, dims } = insn.operand else { unreachable!() };
                let name = self.ctx.pool.class_name(index)?;
                let mut ty = parse_field_descriptor(name)?;
                for _ in 0..dims {
                    if let FieldType::Array(inner) = ty {
                        ty = *inner;
                    }
                }
                let mut lens = Vec::with_capacity(dims as usize);
                for _ in 0..dims {
                    lens.push(self.pop_cat(1)?);
                }
                lens.reverse();
                self.assign(
                    Expr::NewArray {
                        elem: ty.to_string(),
                        dims: lens,
                    },
                    1,
                );
            }
            ARRAYLENGTH => {
                let a = self.pop_cat(1)?;
                self.assign(Expr::ArrayLength(a), 1);
            }
            ATHROW => {
                let v = self.pop_cat(1)?;
                return Ok(Some(Stmt::Throw { value: v }));
            }
            MONITORENTER | MONITOREXIT => {
                let object = self.pop_cat(1)?;
                self.stmts.push(Stmt::Monitor {
                    enter: op == MONITORENTER,
                    object,
                });
            }
            _ => {
                return Err(LiftError::UnsupportedInstruction {
                    offset: insn.offset,
                    mnemonic: insn.mnemonic(),
                })
            }
        }
        Ok(None)
    }

    fn binary(&mut self, op: BinOp, ty: Ty, rhs_ty: Ty) -> Result<(), LiftError> {
        let rhs = self.pop_ty(rhs_ty)?;
        let lhs = self.pop_ty(ty)?;
        self.assign(Expr::Binary { op, ty, lhs, rhs }, ty_cat(ty));
        Ok(())
    }
}

const NUM_TYS: [Ty; 4] = [Ty::Int, Ty::Long, Ty::Float, Ty::Double];
const ARRAY_TYS: [Ty; 8] = [Ty::Int, Ty::Long, Ty::Float, Ty::Double, Ty::Ref, Ty::Byte, Ty::Char, Ty::Short];
const COND_OPS: [CondOp; 6] = [CondOp::Eq, CondOp::Ne, CondOp::Lt, CondOp::Ge, CondOp::Gt, CondOp::Le];
const CONVERSIONS: [(Ty, Ty); 15] = [
    (Ty::Int, Ty::Long),
    (Ty::Int, Ty::Float),
    (Ty::Int, Ty::Double),
    (Ty::Long, Ty::Int),
    (Ty::Long, Ty::Float),
    (Ty::Long, Ty::Double),
    (Ty::Float, Ty::Int),
    (Ty::Float, Ty::Long),
    (Ty::Float, Ty::Double),
    (Ty::Double, Ty::Int),
    (Ty::Double, Ty::Long),
    (Ty::Double, Ty::Float),
    (Ty::Int, Ty::Byte),
    (Ty::Int, Ty::Char),
    (Ty::Int, Ty::Short),
];

fn ty_cat(ty: Ty) -> u8 {
    if matches!(ty, Ty::Long | Ty::Double) {
        2
    } else {
        1
    }
}

fn render_member(pool: &ConstantPool, idx: u16) -> Result<String, LiftError> {
    let m = match pool.get(idx)? {
        Constant::Fieldref { .. } => pool.field_ref(idx)?,
        _ => pool.method_ref(idx)?,
    };
    Ok(format!("{}.{}{}", dotted_name(m.owner), m.name, m.descriptor))
}

fn exec_block(ctx: &Ctx<'_>, b: usize, shape: &[u8], temp: &mut u32) -> Result<BlockOut, LiftError> {
    let range = ctx.blocks[b].clone();
    let mut ex = Exec {
        ctx,
        stmts: Vec::new(),
        stack: shape
            .iter()
            .enumerate()
            .map(|(d, &c)| {
                (
                    Reg::Join {
                        block: b as u32,
                        depth: d as u16,
                    },
                    c,
                )
            })
            .collect(),
        temp_base: *temp,
        temp,
        offset: ctx.insns[range.start].offset,
    };
    if let Some(ty) = ctx.handler_type.get(&b) {
        if shape == [1] {
            ex.stmts.push(Stmt::Assign {
                dst: Reg::Join {
                    block: b as u32,
                    depth: 0,
                },
                expr: Expr::CaughtException(ty.clone()),
            });
        }
    }
    let mut terminator = None;
    for i in range.clone() {
        terminator = ex.step(&ctx.insns[i])?;
    }
    let mut succs: Vec<usize> = Vec::new();
    match &terminator {
        Some(t @ (Stmt::Return { .. } | Stmt::Throw { .. })) => {
            ex.stmts.push(t.clone());
            terminator = None;
        }
        Some(t) => {
            if matches!(t, Stmt::If { .. }) {
                if range.end >= ctx.insns.len() {
                    return Err(LiftError::FallsOffEnd);
                }
                succs.push(b + 1);
            }
            for s in t.targets() {
                if !succs.contains(&s) {
                    succs.push(s);
                }
            }
        }
        None => {
            if range.end >= ctx.insns.len() {
                return Err(LiftError::FallsOffEnd);
            }
            succs.push(b + 1);
        }
    }
    let exit_shape: Vec<u8> = ex.stack.iter().map(|e| e.1).collect();
    if !succs.is_empty() && !ex.stack.is_empty() {
        let mut moves: Vec<(Reg, usize)> = Vec::new();
        for &s in &succs {
            for d in 0..ex.stack.len() {
                let dst = Reg::Join {
                    block: s as u32,
                    depth: d as u16,
                };
                if ex.stack[d].0 != dst {
                    moves.push((dst, d));
                }
            }
        }
        let written: BTreeSet<Reg> = moves.iter().map(|m| m.0).collect();
        let mut clobbered: Vec<Reg> = ex.stack.iter().map(|e| e.0).filter(|r| written.contains(r)).collect();
        if let Some(t) = &terminator {
            clobbered.extend(t.uses().into_iter().filter(|r| written.contains(r)));
        }
        clobbered.sort();
        clobbered.dedup();
        for r in clobbered {
            let t = ex.fresh();
            ex.stmts.push(Stmt::Assign {
                dst: t,
                expr: Expr::Copy(r),
            });
            for e in &mut ex.stack {
                if e.0 == r {
                    e.0 = t;
                }
            }
            if let Some(term) = &mut terminator {
                for u in term.uses_mut() {
                    if *u == r {
                        *u = t;
                    }
                }
            }
        }
        for (dst, d) in moves {
            let src = ex.stack[d].0;
            if src != dst {
                ex.stmts.push(Stmt::Assign {
                    dst,
                    expr: Expr::Copy(src),
                });
            }
        }
    }
    if let Some(t) = terminator {
        ex.stmts.push(t);
    }
    if ex.stmts.is_empty() {
        ex.stmts.push(Stmt::Nop);
    }
    Ok(BlockOut {
        stmts: ex.stmts,
        exit_shape,
        succs,
    })
}

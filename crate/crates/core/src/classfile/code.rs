//! Instruction decoding, encoding and stack-effect bookkeeping for `Code`
//! attributes.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::constant_pool::{Constant, ConstantPool};
use super::descriptor::{parse_field_descriptor, MethodDescriptor};
use super::opcodes::*;
use super::{ClassFileError, RawAttribute};

/// Instruction operand. `T` is the branch-target representation: absolute
/// byte offsets in a decoded method, labels while assembling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand<T = u32> {
    None,
    Byte(i8),
    Short(i16),
    Local { index: u16, wide: bool },
    Iinc { index: u16, delta: i16, wide: bool },
    /// Constant-pool index (`ldc` family, member refs, type refs, `invokedynamic`).
    Constant(u16),
    Interface { index: u16, count: u8 },
    MultiArray { index: u16, dims: u8 },
    ArrayType(u8),
    Branch(T),
    TableSwitch { default: T, low: i32, targets: Vec<T> },
    LookupSwitch { default: T, pairs: Vec<(i32, T)> },
}

impl<T> Operand<T> {
    pub fn map_targets<U>(self, mut f: impl FnMut(T) -> U) -> Operand<U> {
        match self {
            Operand::None => Operand::None,
            Operand::Byte(b) => Operand::Byte(b),
            Operand::Short(s) => Operand::Short(s),
            Operand::Local { index, wide } => Operand::Local { index, wide },
            Operand::Iinc { index, delta, wide } => Operand::Iinc { index, delta, wide },
            Operand::Constant(c) => Operand::Constant(c),
            Operand::Interface { index, count } => Operand::Interface { index, count },
            Operand::MultiArray { index, dims } => Operand::MultiArray { index, dims },
            Operand::ArrayType(t) => Operand::ArrayType(t),
            Operand::Branch(t) => Operand::Branch(f(t)),
            Operand::TableSwitch {
                default,
                low,
                targets,
            } => {
                let default = f(default);
                Operand::TableSwitch {
                    default,
                    low,
                    targets: targets.into_iter().map(f).collect(),
                }
            }
            Operand::LookupSwitch { default, pairs } => {
                let default = f(default);
                Operand::LookupSwitch {
                    default,
                    pairs: pairs.into_iter().map(|(k, t)| (k, f(t))).collect(),
                }
            }
        }
    }

    pub fn targets(&self) -> Vec<&T> {
        match self {
            Operand::Branch(t) => vec![t],
            Operand::TableSwitch {
                default, targets, ..
            } => std::iter::once(default).chain(targets.iter()).collect(),
            Operand::LookupSwitch { default, pairs } => std::iter::once(default)
                .chain(pairs.iter().map(|(_, t)| t))
                .collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub offset: u32,
    pub opcode: u8,
    pub operand: Operand,
}

impl Instruction {
    pub fn mnemonic(&self) -> &'static str {
        mnemonic(self.opcode)
    }

    /// Encoded length when placed at `offset`.
    pub fn size_at(&self, offset: u32) -> u32 {
        encoded_size(self.opcode, &self.operand, offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExceptionEntry {
    pub start_pc: u16,
    pub end_pc: u16,
    pub handler_pc: u16,
    /// 0 for catch-all (`finally`).
    pub catch_type: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeAttribute {
    pub max_stack: u16,
    pub max_locals: u16,
    pub instructions: Vec<Instruction>,
    pub exception_table: Vec<ExceptionEntry>,
    pub attributes: Vec<RawAttribute>,
}

impl CodeAttribute {
    pub fn code_length(&self) -> u32 {
        self.instructions
            .last()
            .map_or(0, |i| i.offset + i.size_at(i.offset))
    }

    pub fn offsets(&self) -> BTreeSet<u32> {
        self.instructions.iter().map(|i| i.offset).collect()
    }

    pub fn index_of_offset(&self) -> HashMap<u32, usize> {
        self.instructions
            .iter()
            .enumerate()
            .map(|(i, insn)| (insn.offset, i))
            .collect()
    }

    /// Checks offset monotonicity, branch/switch targets and exception ranges.
    pub fn validate(&self) -> Result<(), ClassFileError> {
        let mut prev: Option<u32> = None;
        for insn in &self.instructions {
            if prev.is_some_and(|p| insn.offset <= p) {
                return Err(ClassFileError::MalformedCode(format!(
                    "offset {} not increasing",
                    insn.offset
                )));
            }
            prev = Some(insn.offset);
        }
        let offsets = self.offsets();
        for insn in &self.instructions {
            for &t in insn.operand.targets() {
                if !offsets.contains(&t) {
                    return Err(ClassFileError::BadBranchTarget {
                        offset: insn.offset,
                        target: t,
                    });
                }
            }
        }
        let len = self.code_length();
        for e in &self.exception_table {
            let (start, end, handler) = (e.start_pc as u32, e.end_pc as u32, e.handler_pc as u32);
            let end_ok = end == len || offsets.contains(&end);
            if !offsets.contains(&start) || !end_ok || start >= end || !offsets.contains(&handler) {
                return Err(ClassFileError::MalformedCode(format!(
                    "bad exception range [{start},{end}) -> {handler}"
                )));
            }
        }
        Ok(())
    }
}

fn switch_padding(offset: u32) -> u32 {
    (4 - ((offset + 1) % 4)) % 4
}

pub(crate) fn encoded_size<T>(opcode: u8, operand: &Operand<T>, offset: u32) -> u32 {
    match operand {
        Operand::None => 1,
        Operand::Byte(_) | Operand::ArrayType(_) => 2,
        Operand::Short(_) => 3,
        Operand::Local { wide, .. } => {
            if *wide {
                4
            } else {
                2
            }
        }
        Operand::Iinc { wide, .. } => {
            if *wide {
                6
            } else {
                3
            }
        }
        Operand::Constant(_) => match opcode {
            LDC => 2,
            INVOKEDYNAMIC => 5,
            _ => 3,
        },
        Operand::Interface { .. } => 5,
        Operand::MultiArray { .. } => 4,
        Operand::Branch(_) => {
            if opcode == GOTO_W || opcode == JSR_W {
                5
            } else {
                3
            }
        }
        Operand::TableSwitch { targets, .. } => 1 + switch_padding(offset) + 12 + 4 * targets.len() as u32,
        Operand::LookupSwitch { pairs, .. } => 1 + switch_padding(offset) + 8 + 8 * pairs.len() as u32,
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn u8(&mut self) -> Result<u8, ClassFileError> {
        let b = *self.bytes.get(self.pos).ok_or(ClassFileError::TruncatedInput)?;
        self.pos += 1;
        Ok(b)
    }
    fn u16(&mut self) -> Result<u16, ClassFileError> {
        Ok(u16::from_be_bytes([self.u8()?, self.u8()?]))
    }
    fn i32(&mut self) -> Result<i32, ClassFileError> {
        Ok(i32::from_be_bytes([self.u8()?, self.u8()?, self.u8()?, self.u8()?]))
    }
}

fn rel_target(offset: u32, rel: i32) -> Result<u32, ClassFileError> {
    let t = offset as i64 + rel as i64;
    if t < 0 || t > u32::MAX as i64 {
        return Err(ClassFileError::BadBranchTarget {
            offset,
            target: t.max(0) as u32,
        });
    }
    Ok(t as u32)
}

/// Decodes a raw bytecode array into instructions with absolute targets.
pub fn decode_instructions(code: &[u8]) -> Result<Vec<Instruction>, ClassFileError> {
    let mut r = ByteReader { bytes: code, pos: 0 };
    let mut out = Vec::new();
    while r.pos < code.len() {
        let offset = r.pos as u32;
        let mut opcode = r.u8()?;
        let operand = if opcode == WIDE {
            opcode = r.u8()?;
            match opcode {
                ILOAD..=ALOAD | ISTORE..=ASTORE | RET => Operand::Local {
                    index: r.u16()?,
                    wide: true,
                },
                IINC => Operand::Iinc {
                    index: r.u16()?,
                    delta: r.u16()? as i16,
                    wide: true,
                },
                _ => return Err(ClassFileError::InvalidOpcode { offset, opcode }),
            }
        } else {
            match opcode {
                BIPUSH => Operand::Byte(r.u8()? as i8),
                SIPUSH => Operand::Short(r.u16()? as i16),
                LDC => Operand::Constant(r.u8()? as u16),
                LDC_W | LDC2_W => Operand::Constant(r.u16()?),
                ILOAD..=ALOAD | ISTORE..=ASTORE | RET => Operand::Local {
                    index: r.u8()? as u16,
                    wide: false,
                },
                IINC => Operand::Iinc {
                    index: r.u8()? as u16,
                    delta: r.u8()? as i8 as i16,
                    wide: false,
                },
                IFEQ..=JSR | IFNULL | IFNONNULL => {
                    Operand::Branch(rel_target(offset, r.u16()? as i16 as i32)?)
                }
                GOTO_W | JSR_W => Operand::Branch(rel_target(offset, r.i32()?)?),
                TABLESWITCH => {
                    r.pos += switch_padding(offset) as usize;
                    let default = rel_target(offset, r.i32()?)?;
                    let low = r.i32()?;
                    let high = r.i32()?;
                    if high < low || (high as i64 - low as i64) > code.len() as i64 {
                        return Err(ClassFileError::MalformedCode(format!(
                            "tableswitch at {offset} has bounds {low}..{high}"
                        )));
                    }
                    let mut targets = Vec::with_capacity((high - low + 1) as usize);
                    for _ in low..=high {
                        targets.push(rel_target(offset, r.i32()?)?);
                    }
                    Operand::TableSwitch {
                        default,
                        low,
                        targets,
                    }
                }
                LOOKUPSWITCH => {
                    r.pos += switch_padding(offset) as usize;
                    let default = rel_target(offset, r.i32()?)?;
                    let n = r.i32()?;
                    if n < 0 || n as usize > code.len() {
                        return Err(ClassFileError::MalformedCode(format!(
                            "lookupswitch at {offset} has {n} pairs"
                        )));
                    }
                    let mut pairs = Vec::with_capacity(n as usize);
                    for _ in 0..n {
                        let key = r.i32()?;
                        pairs.push((key, rel_target(offset, r.i32()?)?));
                    }
                    Operand::LookupSwitch { default, pairs }
                }
                GETSTATIC..=INVOKESTATIC | NEW | ANEWARRAY | CHECKCAST | INSTANCEOF => {
                    Operand::Constant(r.u16()?)
                }
                INVOKEINTERFACE => {
                    let index = r.u16()?;
                    let count = r.u8()?;
                    r.u8()?;
                    Operand::Interface { index, count }
                }
                INVOKEDYNAMIC => {
                    let index = r.u16()?;
                    r.u16()?;
                    Operand::Constant(index)
                }
                NEWARRAY => Operand::ArrayType(r.u8()?),
                MULTIANEWARRAY => Operand::MultiArray {
                    index: r.u16()?,
                    dims: r.u8()?,
                },
                op if is_valid(op) => Operand::None,
                _ => return Err(ClassFileError::InvalidOpcode { offset, opcode }),
            }
        };
        if r.pos > code.len() {
            return Err(ClassFileError::TruncatedInput);
        }
        out.push(Instruction {
            offset,
            opcode,
            operand,
        });
    }
    Ok(out)
}

/// Encodes instructions; every instruction's recorded offset must equal its
/// position in the output.
pub fn encode_instructions(insns: &[Instruction]) -> Result<Vec<u8>, ClassFileError> {
    let mut out: Vec<u8> = Vec::new();
    for insn in insns {
        let offset = out.len() as u32;
        if insn.offset != offset {
            return Err(ClassFileError::MalformedCode(format!(
                "instruction {} recorded at {} but encodes at {}",
                insn.mnemonic(),
                insn.offset,
                offset
            )));
        }
        let rel16 = |t: u32| -> Result<[u8; 2], ClassFileError> {
            let rel = t as i64 - offset as i64;
            i16::try_from(rel)
                .map(|r| r.to_be_bytes())
                .map_err(|_| ClassFileError::MalformedCode(format!("branch at {offset} out of range")))
        };
        let rel32 = |t: u32| -> [u8; 4] { ((t as i64 - offset as i64) as i32).to_be_bytes() };
        match &insn.operand {
            Operand::Local { index, wide } | Operand::Iinc { index, wide, .. } if *wide => {
                out.push(WIDE);
                out.push(insn.opcode);
                out.extend_from_slice(&index.to_be_bytes());
                if let Operand::Iinc { delta, .. } = insn.operand {
                    out.extend_from_slice(&delta.to_be_bytes());
                }
            }
            Operand::Local { index, .. } => {
                out.push(insn.opcode);
                out.push(u8::try_from(*index).map_err(|_| narrow_err(insn))?);
            }
            Operand::Iinc { index, delta, .. } => {
                out.push(insn.opcode);
                out.push(u8::try_from(*index).map_err(|_| narrow_err(insn))?);
                out.push(i8::try_from(*delta).map_err(|_| narrow_err(insn))? as u8);
            }
            Operand::None => out.push(insn.opcode),
            Operand::Byte(b) => {
                out.push(insn.opcode);
                out.push(*b as u8);
            }
            Operand::Short(s) => {
                out.push(insn.opcode);
                out.extend_from_slice(&s.to_be_bytes());
            }
            Operand::Constant(idx) => {
                out.push(insn.opcode);
                match insn.opcode {
                    LDC => out.push(u8::try_from(*idx).map_err(|_| narrow_err(insn))?),
                    INVOKEDYNAMIC => {
                        out.extend_from_slice(&idx.to_be_bytes());
                        out.extend_from_slice(&[0, 0]);
                    }
                    _ => out.extend_from_slice(&idx.to_be_bytes()),
                }
            }
            Operand::Interface { index, count } => {
                out.push(insn.opcode);
                out.extend_from_slice(&index.to_be_bytes());
                out.push(*count);
                out.push(0);
            }
            Operand::MultiArray { index, dims } => {
                out.push(insn.opcode);
                out.extend_from_slice(&index.to_be_bytes());
                out.push(*dims);
            }
            Operand::ArrayType(t) => {
                out.push(insn.opcode);
                out.push(*t);
            }
            Operand::Branch(t) => {
                out.push(insn.opcode);
                if insn.opcode == GOTO_W || insn.opcode == JSR_W {
                    out.extend_from_slice(&rel32(*t));
                } else {
                    out.extend_from_slice(&rel16(*t)?);
                }
            }
            Operand::TableSwitch {
                default,
                low,
                targets,
            } => {
                out.push(insn.opcode);
                out.extend(std::iter::repeat(0).take(switch_padding(offset) as usize));
                out.extend_from_slice(&rel32(*default));
                out.extend_from_slice(&low.to_be_bytes());
                let high = *low as i64 + targets.len() as i64 - 1;
                out.extend_from_slice(&(high as i32).to_be_bytes());
                for t in targets {
                    out.extend_from_slice(&rel32(*t));
                }
            }
            Operand::LookupSwitch { default, pairs } => {
                out.push(insn.opcode);
                out.extend(std::iter::repeat(0).take(switch_padding(offset) as usize));
                out.extend_from_slice(&rel32(*default));
                out.extend_from_slice(&(pairs.len() as i32).to_be_bytes());
                for (k, t) in pairs {
                    out.extend_from_slice(&k.to_be_bytes());
                    out.extend_from_slice(&rel32(*t));
                }
            }
        }
    }
    Ok(out)
}

fn narrow_err(insn: &Instruction) -> ClassFileError {
    ClassFileError::MalformedCode(format!(
        "operand of {} at {} does not fit its short form",
        insn.mnemonic(),
        insn.offset
    ))
}

/// Operand-stack effect in slots: (popped, pushed).
pub fn stack_effect(insn: &Instruction, pool: &ConstantPool) -> Result<(u16, u16), ClassFileError> {
    let op = insn.opcode;
    let field_slots = |idx: u16| -> Result<u16, ClassFileError> {
        let r = pool.field_ref(idx)?;
        Ok(parse_field_descriptor(r.descriptor)?.slots())
    };
    Ok(match op {
        NOP | IINC | GOTO | GOTO_W | RET | RETURN => (0, 0),
        ACONST_NULL..=0x08 | FCONST_0..=FCONST_2 | BIPUSH | SIPUSH => (0, 1),
        LCONST_0 | LCONST_1 | DCONST_0 | DCONST_1 | LDC2_W => (0, 2),
        LDC | LDC_W => match insn.operand {
            Operand::Constant(i) if pool.get(i)?.is_wide() => (0, 2),
            _ => (0, 1),
        },
        ILOAD | FLOAD | ALOAD => (0, 1),
        LLOAD | DLOAD => (0, 2),
        0x1a..=0x1d | 0x22..=0x25 | 0x2a..=0x2d => (0, 1),
        0x1e..=0x21 | 0x26..=0x29 => (0, 2),
        0x2e | 0x30 | 0x32..=0x35 => (2, 1),
        0x2f | 0x31 => (2, 2),
        ISTORE | FSTORE | ASTORE => (1, 0),
        LSTORE | DSTORE => (2, 0),
        0x3b..=0x3e | 0x43..=0x46 | 0x4b..=0x4e => (1, 0),
        0x3f..=0x42 | 0x47..=0x4a => (2, 0),
        0x4f | 0x51 | 0x53..=0x56 => (3, 0),
        0x50 | 0x52 => (4, 0),
        POP => (1, 0),
        POP2 => (2, 0),
        DUP => (1, 2),
        DUP_X1 => (2, 3),
        DUP_X2 => (3, 4),
        DUP2 => (2, 4),
        DUP2_X1 => (3, 5),
        DUP2_X2 => (4, 6),
        SWAP => (2, 2),
        0x60..=0x73 => match (op - 0x60) % 4 {
            0 | 2 => (2, 1),
            _ => (4, 2),
        },
        0x74 | 0x76 => (1, 1),
        0x75 | 0x77 => (2, 2),
        0x78 | 0x7a | 0x7c => (2, 1),
        0x79 | 0x7b | 0x7d => (3, 2),
        0x7e | 0x80 | 0x82 => (2, 1),
        0x7f | 0x81 | 0x83 => (4, 2),
        0x85 | 0x87 | 0x8c | 0x8d => (1, 2),
        0x86 | 0x8b | 0x91..=0x93 => (1, 1),
        0x88 | 0x89 | 0x8e | 0x90 => (2, 1),
        0x8a | 0x8f => (2, 2),
        LCMP | DCMPL | DCMPG => (4, 1),
        FCMPL | FCMPG => (2, 1),
        IFEQ..=IFLE | IFNULL | IFNONNULL => (1, 0),
        IF_ICMPEQ..=IF_ACMPNE => (2, 0),
        JSR | JSR_W => (0, 1),
        TABLESWITCH | LOOKUPSWITCH => (1, 0),
        IRETURN | FRETURN | ARETURN => (1, 0),
        LRETURN | DRETURN => (2, 0),
        GETSTATIC | PUTSTATIC | GETFIELD | PUTFIELD => {
            let Operand::Constant(idx) = insn.operand else {
                return Err(narrow_err(insn));
            };
            let s = field_slots(idx)?;
            match op {
                GETSTATIC => (0, s),
                PUTSTATIC => (s, 0),
                GETFIELD => (1, s),
                _ => (1 + s, 0),
            }
        }
        INVOKEVIRTUAL..=INVOKEDYNAMIC => {
            let desc = match insn.operand {
                Operand::Constant(idx) if op == INVOKEDYNAMIC => match pool.get(idx)? {
                    Constant::InvokeDynamic { name_and_type, .. } => pool.name_and_type(*name_and_type)?.1,
                    _ => {
                        return Err(ClassFileError::BadConstantPoolRef {
                            index: idx,
                            expected: "InvokeDynamic",
                        })
                    }
                },
                Operand::Constant(idx) | Operand::Interface { index: idx, .. } => {
                    pool.method_ref(idx)?.descriptor
                }
                _ => return Err(narrow_err(insn)),
            };
            let d = MethodDescriptor::parse(desc)?;
            let receiver = u16::from(op != INVOKESTATIC && op != INVOKEDYNAMIC);
            (d.param_slots() + receiver, d.ret_slots())
        }
        NEW => (0, 1),
        NEWARRAY | ANEWARRAY | ARRAYLENGTH | CHECKCAST | INSTANCEOF => (1, 1),
        ATHROW | MONITORENTER | MONITOREXIT => (1, 0),
        MULTIANEWARRAY => match insn.operand {
            Operand::MultiArray { dims, .. } => (dims as u16, 1),
            _ => return Err(narrow_err(insn)),
        },
        _ => {
            return Err(ClassFileError::InvalidOpcode {
                offset: insn.offset,
                opcode: op,
            })
        }
    })
}

/// Maximum operand-stack depth (in slots) over all reachable instructions.
pub fn compute_max_stack(
    insns: &[Instruction],
    exception_table: &[ExceptionEntry],
    pool: &ConstantPool,
) -> Result<u16, ClassFileError> {
    Ok(flow_depths(insns, exception_table, pool)?.1)
}

/// Operand-stack depth (in slots) on entry to each instruction; `None` for
/// unreachable instructions.
pub fn stack_depths(
    insns: &[Instruction],
    exception_table: &[ExceptionEntry],
    pool: &ConstantPool,
) -> Result<Vec<Option<u16>>, ClassFileError> {
    let (depth_at, _) = flow_depths(insns, exception_table, pool)?;
    Ok((0..insns.len()).map(|i| depth_at.get(&i).copied()).collect())
}

fn flow_depths(
    insns: &[Instruction],
    exception_table: &[ExceptionEntry],
    pool: &ConstantPool,
) -> Result<(BTreeMap<usize, u16>, u16), ClassFileError> {
    if insns.is_empty() {
        return Ok((BTreeMap::new(), 0));
    }
    let index: HashMap<u32, usize> = insns.iter().enumerate().map(|(i, x)| (x.offset, i)).collect();
    let mut depth_at: BTreeMap<usize, u16> = BTreeMap::new();
    let mut work = VecDeque::new();
    let seed = |i: usize, d: u16, work: &mut VecDeque<usize>, depth_at: &mut BTreeMap<usize, u16>| {
        if let std::collections::btree_map::Entry::Vacant(e) = depth_at.entry(i) {
            e.insert(d);
            work.push_back(i);
        }
    };
    seed(0, 0, &mut work, &mut depth_at);
    for e in exception_table {
        if let Some(&h) = index.get(&(e.handler_pc as u32)) {
            seed(h, 1, &mut work, &mut depth_at);
        }
    }
    let mut max = 0u16;
    while let Some(i) = work.pop_front() {
        let insn = &insns[i];
        let depth = depth_at[&i];
        let (pops, pushes) = stack_effect(insn, pool)?;
        let after = depth
            .checked_sub(pops)
            .ok_or_else(|| ClassFileError::MalformedCode(format!("stack underflow at {}", insn.offset)))?
            + pushes;
        max = max.max(after).max(depth);
        let mut succ: Vec<usize> = insn
            .operand
            .targets()
            .into_iter()
            .filter_map(|t| index.get(t).copied())
            .collect();
        if !ends_flow(insn.opcode) && i + 1 < insns.len() {
            succ.push(i + 1);
        }
        for s in succ {
            seed(s, after, &mut work, &mut depth_at);
        }
    }
    Ok((depth_at, max))
}

//! Reference interpreter for the int-only bytecode subset emitted by
//! [`super::gen`]. It works directly on decoded instructions and shares no
//! code with the IR interpreter, so agreement between the two is evidence
//! that lifting and normalization preserve behaviour.

use std::collections::HashMap;

use jarsig::classfile::{ClassFile, CodeAttribute, Constant, Operand};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RefOutcome {
    Returned(Option<i32>),
    Threw(String),
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Int(i32),
    Exception,
}

const ARITHMETIC: &str = "java/lang/ArithmeticException";
const CATCHES_ARITHMETIC: [&str; 4] = [ARITHMETIC, "java/lang/RuntimeException", "java/lang/Exception", "java/lang/Throwable"];

fn int(s: Option<Slot>) -> Result<i32, String> {
    match s {
        Some(Slot::Int(v)) => Ok(v),
        other => Err(format!("expected int on stack, found {other:?}")),
    }
}

/// Runs the method body in `code` with `args` in the leading local slots.
pub fn run(class: &ClassFile, code: &CodeAttribute, args: &[i32], max_steps: usize) -> Result<RefOutcome, String> {
    let at: HashMap<u32, usize> = code.index_of_offset();
    let mut locals: Vec<Option<Slot>> = vec![None; code.max_locals as usize];
    for (i, a) in args.iter().enumerate() {
        locals[i] = Some(Slot::Int(*a));
    }
    let mut stack: Vec<Slot> = Vec::new();
    let mut pc = 0usize;
    for _ in 0..max_steps {
        let insn = code.instructions.get(pc).ok_or("fell off the end of the code")?;
        let mut next = pc + 1;
        let jump = |target: u32| -> Result<usize, String> { at.get(&target).copied().ok_or(format!("bad target {target}")) };
        let m = insn.mnemonic();
        let mut throw: Option<&str> = None;
        match m {
            "nop" => {}
            "iconst_m1" | "iconst_0" | "iconst_1" | "iconst_2" | "iconst_3" | "iconst_4" | "iconst_5" => {
                let v = if m == "iconst_m1" { -1 } else { m[7..].parse().unwrap() };
                stack.push(Slot::Int(v));
            }
            "bipush" | "sipush" => match insn.operand {
                Operand::Byte(b) => stack.push(Slot::Int(b as i32)),
                Operand::Short(s) => stack.push(Slot::Int(s as i32)),
                _ => return Err("bad push operand".into()),
            },
            "ldc" | "ldc_w" => {
                let Operand::Constant(idx) = insn.operand else { return Err("bad ldc".into()) };
                match class.constant_pool.get(idx).map_err(|e| e.to_string())? {
                    Constant::Integer(v) => stack.push(Slot::Int(*v)),
                    other => return Err(format!("unsupported constant {other:?}")),
                }
            }
            _ if m.starts_with("iload") || m.starts_with("aload") => {
                let slot = local_index(m, &insn.operand)?;
                let v = locals[slot].ok_or(format!("read of unset local {slot}"))?;
                stack.push(v);
            }
            _ if m.starts_with("istore") || m.starts_with("astore") => {
                let slot = local_index(m, &insn.operand)?;
                locals[slot] = Some(stack.pop().ok_or("stack underflow")?);
            }
            "iinc" => {
                let Operand::Iinc { index, delta, .. } = insn.operand else { return Err("bad iinc".into()) };
                let v = int(locals[index as usize])?;
                locals[index as usize] = Some(Slot::Int(v.wrapping_add(delta as i32)));
            }
            "pop" => {
                stack.pop().ok_or("stack underflow")?;
            }
            "dup" => {
                let v = *stack.last().ok_or("stack underflow")?;
                stack.push(v);
            }
            "swap" => {
                let n = stack.len();
                if n < 2 {
                    return Err("stack underflow".into());
                }
                stack.swap(n - 1, n - 2);
            }
            "ineg" => {
                let v = int(stack.pop())?;
                stack.push(Slot::Int(v.wrapping_neg()));
            }
            "iadd" | "isub" | "imul" | "idiv" | "irem" | "iand" | "ior" | "ixor" | "ishl" | "ishr" | "iushr" => {
                let b = int(stack.pop())?;
                let a = int(stack.pop())?;
                let r = match m {
                    "iadd" => a.wrapping_add(b),
                    "isub" => a.wrapping_sub(b),
                    "imul" => a.wrapping_mul(b),
                    "idiv" | "irem" if b == 0 => {
                        throw = Some(ARITHMETIC);
                        0
                    }
                    "idiv" => a.wrapping_div(b),
                    "irem" => a.wrapping_rem(b),
                    "iand" => a & b,
                    "ior" => a | b,
                    "ixor" => a ^ b,
                    "ishl" => a.wrapping_shl(b as u32 & 31),
                    "ishr" => a.wrapping_shr(b as u32 & 31),
                    _ => ((a as u32) >> (b as u32 & 31)) as i32,
                };
                if throw.is_none() {
                    stack.push(Slot::Int(r));
                }
            }
            "ifeq" | "ifne" | "iflt" | "ifge" | "ifgt" | "ifle" => {
                let v = int(stack.pop())?;
                if compare(&m[2..], v, 0) {
                    next = jump(branch(&insn.operand)?)?;
                }
            }
            "if_icmpeq" | "if_icmpne" | "if_icmplt" | "if_icmpge" | "if_icmpgt" | "if_icmple" => {
                let b = int(stack.pop())?;
                let a = int(stack.pop())?;
                if compare(&m[7..], a, b) {
                    next = jump(branch(&insn.operand)?)?;
                }
            }
            "goto" | "goto_w" => next = jump(branch(&insn.operand)?)?,
            "tableswitch" => {
                let key = int(stack.pop())?;
                let Operand::TableSwitch { default, low, targets } = &insn.operand else { return Err("bad tableswitch".into()) };
                let i = key as i64 - *low as i64;
                let t = if (0..targets.len() as i64).contains(&i) { targets[i as usize] } else { *default };
                next = jump(t)?;
            }
            "lookupswitch" => {
                let key = int(stack.pop())?;
                let Operand::LookupSwitch { default, pairs } = &insn.operand else { return Err("bad lookupswitch".into()) };
                let t = pairs.iter().find(|(k, _)| *k == key).map_or(*default, |p| p.1);
                next = jump(t)?;
            }
            "ireturn" => return Ok(RefOutcome::Returned(Some(int(stack.pop())?))),
            "return" => return Ok(RefOutcome::Returned(None)),
            other => return Err(format!("instruction `{other}` is outside the reference subset")),
        }
        if let Some(ex) = throw {
            let off = insn.offset as u16;
            let handler = code.exception_table.iter().find(|e| {
                (e.start_pc..e.end_pc).contains(&off)
                    && (e.catch_type == 0
                        || class
                            .constant_pool
                            .class_name(e.catch_type)
                            .is_ok_and(|n| CATCHES_ARITHMETIC.contains(&n)))
            });
            match handler {
                Some(h) => {
                    stack.clear();
                    stack.push(Slot::Exception);
                    next = jump(h.handler_pc as u32)?;
                }
                None => return Ok(RefOutcome::Threw(ex.replace('/', "."))),
            }
        }
        pc = next;
    }
    Ok(RefOutcome::StepLimit)
}

fn local_index(mnemonic: &str, operand: &Operand) -> Result<usize, String> {
    match operand {
        Operand::Local { index, .. } => Ok(*index as usize),
        Operand::None => mnemonic
            .rsplit('_')
            .next()
            .and_then(|d| d.parse().ok())
            .ok_or(format!("no slot in `{mnemonic}`")),
        _ => Err(format!("bad local operand for `{mnemonic}`")),
    }
}

fn branch(operand: &Operand) -> Result<u32, String> {
    match operand {
        Operand::Branch(t) => Ok(*t),
        _ => Err("missing branch target".into()),
    }
}

fn compare(cond: &str, a: i32, b: i32) -> bool {
    match cond {
        "eq" => a == b,
        "ne" => a != b,
        "lt" => a < b,
        "ge" => a >= b,
        "gt" => a > b,
        _ => a <= b,
    }
}

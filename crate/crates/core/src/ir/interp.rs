//! Reference interpreter for lifted IR, used to check that transformations
//! preserve behaviour. It covers arithmetic, control flow, exceptions, static
//! fields, one-dimensional arrays and string building; other calls are
//! reported as unsupported.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{BinOp, CmpKind, ConcatPart, Const, CondOp, CondRhs, Expr, MethodIr, Reg, Stmt, Ty};

#[derive(Debug, Clone)]
pub enum Value {
    Int(i32),
    Long(i64),
    Float(f32),
    Double(f64),
    Null,
    Str(String),
    /// Heap object handle.
    Ref(usize),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Long(a), Value::Long(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Double(a), Value::Double(b)) => a.to_bits() == b.to_bits(),
            (Value::Null, Value::Null) => true,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Ref(a), Value::Ref(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Long(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{}", java_float(*v as f64)),
            Value::Double(v) => write!(f, "{}", java_float(*v)),
            Value::Null => f.write_str("null"),
            Value::Str(s) => f.write_str(s),
            Value::Ref(h) => write!(f, "@{h}"),
        }
    }
}

fn java_float(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e7 {
        format!("{v:.1}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "Infinity" } else { "-Infinity" }.into()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Returned(Option<Value>),
    /// Uncaught exception, by class name.
    Threw(String),
    StepLimit,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpError {
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("type error at statement {stmt}: {detail}")]
    Type { stmt: usize, detail: String },
    #[error("read of undefined register {0}")]
    Undefined(Reg),
}

#[derive(Debug, Clone, PartialEq)]
enum Obj {
    Array(Vec<Value>),
    Builder(String),
    Instance(String),
}

fn superclasses(ex: &str) -> &'static [&'static str] {
    match ex {
        "java.lang.ArithmeticException"
        | "java.lang.NullPointerException"
        | "java.lang.ArrayIndexOutOfBoundsException"
        | "java.lang.NegativeArraySizeException"
        | "java.lang.ClassCastException" => &["java.lang.RuntimeException", "java.lang.Exception", "java.lang.Throwable"],
        _ => &["java.lang.Throwable"],
    }
}

fn catches(catch_type: Option<&str>, ex: &str) -> bool {
    match catch_type {
        None => true,
        Some(t) => t == ex || superclasses(ex).contains(&t),
    }
}

struct Machine<'a> {
    ir: &'a MethodIr,
    regs: BTreeMap<Reg, Value>,
    heap: Vec<Obj>,
    statics: BTreeMap<String, Value>,
    stmt: usize,
}

enum Flow {
    Next,
    Jump(usize),
    Done(Option<Value>),
    Raise(String),
}

fn zero_of(elem: &str) -> Value {
    match elem {
        "long" => Value::Long(0),
        "float" => Value::Float(0.0),
        "double" => Value::Double(0.0),
        "int" | "short" | "byte" | "char" | "boolean" => Value::Int(0),
        _ => Value::Null,
    }
}

impl Machine<'_> {
    fn get(&self, r: Reg) -> Result<Value, InterpError> {
        self.regs.get(&r).cloned().ok_or(InterpError::Undefined(r))
    }

    fn type_err<T>(&self, detail: impl Into<String>) -> Result<T, InterpError> {
        Err(InterpError::Type {
            stmt: self.stmt,
            detail: detail.into(),
        })
    }

    fn int(&self, r: Reg) -> Result<i32, InterpError> {
        match self.get(r)? {
            Value::Int(v) => Ok(v),
            v => self.type_err(format!("{r} = {v:?} is not an int")),
        }
    }

    fn array(&mut self, r: Reg) -> Result<Result<&mut Vec<Value>, String>, InterpError> {
        match self.get(r)? {
            Value::Null => Ok(Err("java.lang.NullPointerException".into())),
            Value::Ref(h) if matches!(self.heap[h], Obj::Array(_)) => match &mut self.heap[h] {
                Obj::Array(a) => Ok(Ok(a)),
                _ => unreachable!(),
            },
            v => self.type_err(format!("{v:?} is not an array")),
        }
    }

    fn binary(&self, op: BinOp, ty: Ty, a: Value, b: Value) -> Result<Result<Value, String>, InterpError> {
        use BinOp::*;
        let div0 = || Ok(Err("java.lang.ArithmeticException".to_string()));
        Ok(Ok(match (ty, a, b) {
            (Ty::Int, Value::Int(a), Value::Int(b)) => Value::Int(match op {
                Add => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Mul => a.wrapping_mul(b),
                Div if b == 0 => return div0(),
                Div => a.wrapping_div(b),
                Rem if b == 0 => return div0(),
                Rem => a.wrapping_rem(b),
                Shl => a.wrapping_shl(b as u32 & 31),
                Shr => a.wrapping_shr(b as u32 & 31),
                Ushr => ((a as u32) >> (b as u32 & 31)) as i32,
                And => a & b,
                Or => a | b,
                Xor => a ^ b,
            }),
            (Ty::Long, Value::Long(a), Value::Int(b)) if matches!(op, Shl | Shr | Ushr) => Value::Long(match op {
                Shl => a.wrapping_shl(b as u32 & 63),
                Shr => a.wrapping_shr(b as u32 & 63),
                _ => ((a as u64) >> (b as u32 & 63)) as i64,
            }),
            (Ty::Long, Value::Long(a), Value::Long(b)) => Value::Long(match op {
                Add => a.wrapping_add(b),
                Sub => a.wrapping_sub(b),
                Mul => a.wrapping_mul(b),
                Div if b == 0 => return div0(),
                Div => a.wrapping_div(b),
                Rem if b == 0 => return div0(),
                Rem => a.wrapping_rem(b),
                And => a & b,
                Or => a | b,
                Xor => a ^ b,
                _ => return self.type_err("long shift by long"),
            }),
            (Ty::Float, Value::Float(a), Value::Float(b)) => Value::Float(match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                Div => a / b,
                Rem => a % b,
                _ => return self.type_err("bitwise float op"),
            }),
            (Ty::Double, Value::Double(a), Value::Double(b)) => Value::Double(match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                Div => a / b,
                Rem => a % b,
                _ => return self.type_err("bitwise double op"),
            }),
            (ty, a, b) => return self.type_err(format!("{} {a:?} {b:?}", ty.name())),
        }))
    }

    fn convert(&self, from: Ty, to: Ty, v: Value) -> Result<Value, InterpError> {
        let wide: f64 = match (&from, &v) {
            (Ty::Int, Value::Int(x)) => *x as f64,
            (Ty::Long, Value::Long(x)) => *x as f64,
            (Ty::Float, Value::Float(x)) => *x as f64,
            (Ty::Double, Value::Double(x)) => *x,
            _ => return self.type_err(format!("convert {v:?} from {}", from.name())),
        };
        Ok(match (from, to, v) {
            (Ty::Int, Ty::Long, Value::Int(x)) => Value::Long(x as i64),
            (Ty::Long, Ty::Int, Value::Long(x)) => Value::Int(x as i32),
            (Ty::Long, Ty::Float, Value::Long(x)) => Value::Float(x as f32),
            (Ty::Int, Ty::Byte, Value::Int(x)) => Value::Int(x as i8 as i32),
            (Ty::Int, Ty::Char, Value::Int(x)) => Value::Int(x as u16 as i32),
            (Ty::Int, Ty::Short, Value::Int(x)) => Value::Int(x as i16 as i32),
            (_, Ty::Int, _) => Value::Int(wide as i32),
            (_, Ty::Long, _) => Value::Long(wide as i64),
            (_, Ty::Float, _) => Value::Float(wide as f32),
            (_, Ty::Double, _) => Value::Double(wide),
            _ => return self.type_err("unsupported conversion"),
        })
    }

    fn render(&self, v: &Value) -> String {
        match v {
            Value::Ref(h) => match &self.heap[*h] {
                Obj::Builder(s) => s.clone(),
                _ => format!("@{h}"),
            },
            v => v.to_string(),
        }
    }

    fn eval(&mut self, expr: &Expr) -> Result<Result<Value, String>, InterpError> {
        Ok(Ok(match expr {
            Expr::Const { value, .. } => match value {
                Const::Int(v) => Value::Int(*v),
                Const::Long(v) => Value::Long(*v),
                Const::Float(b) => Value::Float(f32::from_bits(*b)),
                Const::Double(b) => Value::Double(f64::from_bits(*b)),
                Const::Null => Value::Null,
                Const::String(s) => Value::Str(s.clone()),
                other => return Err(InterpError::Unsupported(format!("constant {other}"))),
            },
            Expr::Copy(r) => self.get(*r)?,
            Expr::Binary { op, ty, lhs, rhs } => {
                let (a, b) = (self.get(*lhs)?, self.get(*rhs)?);
                return self.binary(*op, *ty, a, b);
            }
            Expr::Neg { ty, src } => match (ty, self.get(*src)?) {
                (Ty::Int, Value::Int(v)) => Value::Int(v.wrapping_neg()),
                (Ty::Long, Value::Long(v)) => Value::Long(v.wrapping_neg()),
                (Ty::Float, Value::Float(v)) => Value::Float(-v),
                (Ty::Double, Value::Double(v)) => Value::Double(-v),
                (_, v) => return self.type_err(format!("neg {v:?}")),
            },
            Expr::Convert { from, to, src } => {
                let v = self.get(*src)?;
                self.convert(*from, *to, v)?
            }
            Expr::Compare { kind, lhs, rhs, .. } => {
                let (a, b) = (self.get(*lhs)?, self.get(*rhs)?);
                let ord = match (&a, &b) {
                    (Value::Long(a), Value::Long(b)) => Some(a.cmp(b)),
                    (Value::Float(a), Value::Float(b)) => a.partial_cmp(b),
                    (Value::Double(a), Value::Double(b)) => a.partial_cmp(b),
                    _ => return self.type_err(format!("compare {a:?} {b:?}")),
                };
                Value::Int(match ord {
                    Some(o) => o as i32,
                    None if *kind == CmpKind::CmpG => 1,
                    None => -1,
                })
            }
            Expr::GetField { object: None, field } => {
                let key = field.to_string();
                self.statics
                    .get(&key)
                    .cloned()
                    .unwrap_or_else(|| zero_of(&field.ty.to_string()))
            }
            Expr::GetField { object: Some(_), .. } => {
                return Err(InterpError::Unsupported("instance field read".into()))
            }
            Expr::ArrayLoad { array, index, .. } => {
                let i = self.int(*index)?;
                match self.array(*array)? {
                    Err(e) => return Ok(Err(e)),
                    Ok(a) => match a.get(i as usize) {
                        Some(v) if i >= 0 => v.clone(),
                        _ => return Ok(Err("java.lang.ArrayIndexOutOfBoundsException".into())),
                    },
                }
            }
            Expr::ArrayLength(r) => match self.array(*r)? {
                Err(e) => return Ok(Err(e)),
                Ok(a) => Value::Int(a.len() as i32),
            },
            Expr::New(class) => {
                let obj = if class == "java.lang.StringBuilder" {
                    Obj::Builder(String::new())
                } else {
                    Obj::Instance(class.clone())
                };
                self.heap.push(obj);
                Value::Ref(self.heap.len() - 1)
            }
            Expr::NewArray { elem, dims } if dims.len() == 1 => {
                let n = self.int(dims[0])?;
                if n < 0 {
                    return Ok(Err("java.lang.NegativeArraySizeException".into()));
                }
                self.heap.push(Obj::Array(vec![zero_of(elem); n as usize]));
                Value::Ref(self.heap.len() - 1)
            }
            Expr::Concat(parts) => {
                let mut s = String::new();
                for p in parts {
                    match p {
                        ConcatPart::Lit(l) => s.push_str(l),
                        ConcatPart::Reg(r) => {
                            let v = self.get(*r)?;
                            s.push_str(&self.render(&v));
                        }
                    }
                }
                Value::Str(s)
            }
            Expr::CaughtException(_) => return self.type_err("caught exception outside handler entry"),
            other => return Err(InterpError::Unsupported(format!("{other:?}"))),
        }))
    }

    fn invoke(&mut self, call: &super::Call) -> Result<Result<Option<Value>, String>, InterpError> {
        let m = &call.method;
        let args: Vec<Value> = call.args.iter().map(|r| self.get(*r)).collect::<Result<_, _>>()?;
        let sb = m.owner == "java.lang.StringBuilder";
        if sb && (m.name == "<init>" || m.name == "append" || m.name == "toString") {
            let Value::Ref(h) = args[0] else {
                return Ok(Err("java.lang.NullPointerException".into()));
            };
            let text = args.get(1).map(|v| match (v, m.descriptor.params.first()) {
                (Value::Int(c), Some(crate::classfile::descriptor::FieldType::Char)) => {
                    char::from_u32(*c as u32).map(String::from).unwrap_or_default()
                }
                (Value::Int(b), Some(crate::classfile::descriptor::FieldType::Boolean)) => (*b != 0).to_string(),
                (v, _) => self.render(v),
            });
            let Obj::Builder(buf) = &mut self.heap[h] else {
                return self.type_err("not a StringBuilder");
            };
            return Ok(Ok(match m.name.as_str() {
                "toString" => Some(Value::Str(buf.clone())),
                "append" => {
                    buf.push_str(&text.unwrap_or_default());
                    Some(Value::Ref(h))
                }
                _ => {
                    buf.push_str(&text.unwrap_or_default());
                    None
                }
            }));
        }
        if m.owner == "java.lang.String" && m.name == "valueOf" && args.len() == 1 {
            return Ok(Ok(Some(Value::Str(self.render(&args[0])))));
        }
        if let Some(b) = &call.bootstrap {
            if b.method == "java.lang.invoke.StringConcatFactory.makeConcatWithConstants" {
                let Some(Const::String(recipe)) = b.args.first() else {
                    return Err(InterpError::Unsupported("concat recipe".into()));
                };
                let mut out = String::new();
                let mut next = args.iter();
                let mut consts = b.args[1..].iter();
                for c in recipe.chars() {
                    match c {
                        '\u{1}' => out.push_str(&next.next().map(|v| self.render(v)).unwrap_or_default()),
                        '\u{2}' => match consts.next() {
                            Some(Const::String(s)) => out.push_str(s),
                            Some(k) => out.push_str(&k.to_string()),
                            None => {}
                        },
                        c => out.push(c),
                    }
                }
                return Ok(Ok(Some(Value::Str(out))));
            }
        }
        Err(InterpError::Unsupported(format!("call {m}")))
    }

    fn exec(&mut self, s: &Stmt) -> Result<Flow, InterpError> {
        Ok(match s {
            Stmt::Assign { dst, expr } => match self.eval(expr)? {
                Ok(v) => {
                    self.regs.insert(*dst, v);
                    Flow::Next
                }
                Err(e) => Flow::Raise(e),
            },
            Stmt::Invoke { dst, call } => match self.invoke(call)? {
                Ok(v) => {
                    if let (Some(d), Some(v)) = (dst, v) {
                        self.regs.insert(*d, v);
                    }
                    Flow::Next
                }
                Err(e) => Flow::Raise(e),
            },
            Stmt::PutField {
                object: None,
                field,
                value,
            } => {
                let v = self.get(*value)?;
                self.statics.insert(field.to_string(), v);
                Flow::Next
            }
            Stmt::PutField { .. } => return Err(InterpError::Unsupported("instance field write".into())),
            Stmt::ArrayStore {
                array, index, value, ..
            } => {
                let i = self.int(*index)?;
                let v = self.get(*value)?;
                match self.array(*array)? {
                    Err(e) => Flow::Raise(e),
                    Ok(a) => match a.get_mut(i as usize) {
                        Some(slot) if i >= 0 => {
                            *slot = v;
                            Flow::Next
                        }
                        _ => Flow::Raise("java.lang.ArrayIndexOutOfBoundsException".into()),
                    },
                }
            }
            Stmt::If { op, lhs, rhs, target } => {
                let a = self.get(*lhs)?;
                let taken = match (rhs, &a) {
                    (CondRhs::Zero, Value::Int(x)) => cond(*op, (*x).cmp(&0)),
                    (CondRhs::Null, v) => {
                        let eq = matches!(v, Value::Null);
                        if *op == CondOp::Eq { eq } else { !eq }
                    }
                    (CondRhs::Reg(r), Value::Int(x)) => match self.get(*r)? {
                        Value::Int(y) => cond(*op, x.cmp(&y)),
                        v => return self.type_err(format!("int compare with {v:?}")),
                    },
                    (CondRhs::Reg(r), _) => {
                        let eq = a == self.get(*r)?;
                        if *op == CondOp::Eq { eq } else { !eq }
                    }
                    (_, v) => return self.type_err(format!("branch on {v:?}")),
                };
                if taken {
                    Flow::Jump(*target)
                } else {
                    Flow::Next
                }
            }
            Stmt::Goto { target } => Flow::Jump(*target),
            Stmt::Switch { key, cases, default } => {
                let k = self.int(*key)?;
                Flow::Jump(cases.iter().find(|c| c.0 == k).map_or(*default, |c| c.1))
            }
            Stmt::Return { value } => Flow::Done(value.map(|r| self.get(r)).transpose()?),
            Stmt::Throw { value } => match self.get(*value)? {
                Value::Null => Flow::Raise("java.lang.NullPointerException".into()),
                Value::Ref(h) => match &self.heap[h] {
                    Obj::Instance(c) => Flow::Raise(c.clone()),
                    _ => return self.type_err("throwing a non-throwable"),
                },
                v => return self.type_err(format!("throw {v:?}")),
            },
            Stmt::Monitor { .. } | Stmt::Nop => Flow::Next,
        })
    }
}

fn cond(op: CondOp, o: std::cmp::Ordering) -> bool {
    use std::cmp::Ordering::*;
    match op {
        CondOp::Eq => o == Equal,
        CondOp::Ne => o != Equal,
        CondOp::Lt => o == Less,
        CondOp::Ge => o != Less,
        CondOp::Gt => o == Greater,
        CondOp::Le => o != Greater,
    }
}

/// Runs `ir` on `args` (one value per parameter register, receiver first)
/// for at most `max_steps` statements.
pub fn run(ir: &MethodIr, args: &[Value], max_steps: usize) -> Result<Outcome, InterpError> {
    let mut m = Machine {
        ir,
        regs: BTreeMap::new(),
        heap: Vec::new(),
        statics: BTreeMap::new(),
        stmt: 0,
    };
    for ((r, _), v) in ir.params.iter().zip(args) {
        m.regs.insert(*r, v.clone());
    }
    if ir.blocks.is_empty() {
        return Ok(Outcome::Returned(None));
    }
    let mut block = 0;
    let mut pc = ir.blocks[0].start;
    for _ in 0..max_steps {
        if pc >= m.ir.blocks[block].end {
            block += 1;
            if block >= m.ir.blocks.len() {
                return Err(InterpError::Unsupported("fell off the end".into()));
            }
            pc = m.ir.blocks[block].start;
            continue;
        }
        m.stmt = pc;
        match m.exec(&m.ir.stmts[pc])? {
            Flow::Next => pc += 1,
            Flow::Jump(b) => {
                block = b;
                pc = m.ir.blocks[b].start;
            }
            Flow::Done(v) => return Ok(Outcome::Returned(v)),
            Flow::Raise(ex) => {
                let handler = m
                    .ir
                    .handlers
                    .iter()
                    .find(|h| h.covered.contains(&block) && catches(h.catch_type.as_deref(), &ex));
                let Some(h) = handler else {
                    return Ok(Outcome::Threw(ex));
                };
                m.heap.push(Obj::Instance(ex));
                let exc = Value::Ref(m.heap.len() - 1);
                block = h.target;
                pc = m.ir.blocks[block].start;
                // The handler's first statement binds the caught value.
                if let Some(Stmt::Assign {
                    dst,
                    expr: Expr::CaughtException(_),
                }) = m.ir.stmts.get(pc)
                {
                    m.regs.insert(*dst, exc);
                    pc += 1;
                } else {
                    return m.type_err("handler does not start by binding the exception");
                }
            }
        }
    }
    Ok(Outcome::StepLimit)
}

//! Register-based three-address IR lifted from JVM bytecode, with control
//! flow and dependence analyses.

mod cfg;
mod deps;
pub mod interp;
mod lift;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use thiserror::Error;

use crate::classfile::descriptor::{FieldType, MethodDescriptor};
use crate::classfile::ClassFileError;

pub use cfg::{build_cfg, Cfg, CfgEdge, EdgeKind, Node};
pub use deps::{dependencies, post_dominator_sets, reaching_definitions, DepGraph};
pub use lift::{lift, lift_method};

pub type BlockId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LiftError {
    #[error("operand stack underflow at offset {offset}")]
    StackUnderflow { offset: u32 },
    #[error("inconsistent operand stack at join offset {offset}")]
    InconsistentStackDepthAtJoin { offset: u32 },
    #[error("unsupported instruction {mnemonic} at offset {offset}")]
    UnsupportedInstruction { offset: u32, mnemonic: &'static str },
    #[error("operand of category {found} where category {expected} is required at offset {offset}")]
    CategoryMismatch { offset: u32, expected: u8, found: u8 },
    #[error("control falls off the end of the code")]
    FallsOffEnd,
    #[error("method has no code")]
    NoCode,
    #[error(transparent)]
    ClassFile(#[from] ClassFileError),
}

/// Virtual register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reg {
    /// Method parameter by position; the receiver is `p0` for instance methods.
    Param(u16),
    /// Local slot `k` is `Var(k)`; temporaries are numbered from `max_locals`.
    Var(u32),
    /// Stack slot `depth` live on entry to `block`.
    Join { block: u32, depth: u16 },
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reg::Param(i) => write!(f, "p{i}"),
            Reg::Var(n) => write!(f, "r{n}"),
            Reg::Join { block, depth } => write!(f, "j{block}_{depth}"),
        }
    }
}

/// Value types named by typed instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ty {
    Int,
    Long,
    Float,
    Double,
    Byte,
    Char,
    Short,
    Ref,
}

impl Ty {
    pub fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Long => "long",
            Ty::Float => "float",
            Ty::Double => "double",
            Ty::Byte => "byte",
            Ty::Char => "char",
            Ty::Short => "short",
            Ty::Ref => "ref",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Ushr,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Rem => "rem",
            BinOp::Shl => "shl",
            BinOp::Shr => "shr",
            BinOp::Ushr => "ushr",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Ushr => ">>>",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
        }
    }
}

/// Three-way comparisons (`lcmp`, `fcmpl`, `dcmpg`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpKind {
    Cmp,
    /// NaN compares as -1.
    CmpL,
    /// NaN compares as 1.
    CmpG,
}

impl CmpKind {
    pub fn name(self) -> &'static str {
        match self {
            CmpKind::Cmp => "cmp",
            CmpKind::CmpL => "cmpl",
            CmpKind::CmpG => "cmpg",
        }
    }
}

/// Branch condition operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CondOp {
    Eq,
    Ne,
    Lt,
    Ge,
    Gt,
    Le,
}

impl CondOp {
    pub fn negate(self) -> CondOp {
        match self {
            CondOp::Eq => CondOp::Ne,
            CondOp::Ne => CondOp::Eq,
            CondOp::Lt => CondOp::Ge,
            CondOp::Ge => CondOp::Lt,
            CondOp::Gt => CondOp::Le,
            CondOp::Le => CondOp::Gt,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CondOp::Eq => "eq",
            CondOp::Ne => "ne",
            CondOp::Lt => "lt",
            CondOp::Ge => "ge",
            CondOp::Gt => "gt",
            CondOp::Le => "le",
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CondOp::Eq => "==",
            CondOp::Ne => "!=",
            CondOp::Lt => "<",
            CondOp::Ge => ">=",
            CondOp::Gt => ">",
            CondOp::Le => "<=",
        }
    }
}

/// Right-hand side of a branch condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CondRhs {
    Zero,
    Null,
    Reg(Reg),
}

/// How a constant was encoded in bytecode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstForm {
    /// `iconst_<n>`, `lconst_<n>`, `aconst_null`, ...
    Inline,
    Bipush,
    Sipush,
    Ldc,
    LdcW,
    Ldc2W,
    Iinc,
}

impl ConstForm {
    pub fn name(self) -> &'static str {
        match self {
            ConstForm::Inline => "inline",
            ConstForm::Bipush => "bipush",
            ConstForm::Sipush => "sipush",
            ConstForm::Ldc => "ldc",
            ConstForm::LdcW => "ldc_w",
            ConstForm::Ldc2W => "ldc2_w",
            ConstForm::Iinc => "iinc",
        }
    }

    /// The encoding a compiler picks by default for `value`.
    pub fn shortest(value: &Const) -> ConstForm {
        match *value {
            Const::Int(-1..=5) => ConstForm::Inline,
            Const::Int(-128..=127) => ConstForm::Bipush,
            Const::Int(-32768..=32767) => ConstForm::Sipush,
            Const::Long(0 | 1) | Const::Null => ConstForm::Inline,
            Const::Float(b) if [0.0f32, 1.0, 2.0].iter().any(|v| v.to_bits() == b) => ConstForm::Inline,
            Const::Double(b) if [0.0f64, 1.0].iter().any(|v| v.to_bits() == b) => ConstForm::Inline,
            Const::Long(_) | Const::Double(_) => ConstForm::Ldc2W,
            _ => ConstForm::Ldc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Const {
    Int(i32),
    Long(i64),
    /// IEEE bits.
    Float(u32),
    /// IEEE bits.
    Double(u64),
    Null,
    String(String),
    /// Class literal, rendered as a Java type.
    Class(String),
    MethodType(String),
    MethodHandle(String),
    Dynamic(String),
}

impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const::Int(v) => write!(f, "{v}"),
            Const::Long(v) => write!(f, "{v}L"),
            Const::Float(b) => write!(f, "{:?}f", f32::from_bits(*b)),
            Const::Double(b) => write!(f, "{:?}d", f64::from_bits(*b)),
            Const::Null => f.write_str("null"),
            Const::String(s) => write!(f, "{s:?}"),
            Const::Class(c) => write!(f, "class {c}"),
            Const::MethodType(d) => write!(f, "methodtype {d:?}"),
            Const::MethodHandle(h) => write!(f, "methodhandle {h}"),
            Const::Dynamic(d) => write!(f, "dynamic {d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldRef {
    /// Dotted owner class name.
    pub owner: String,
    pub name: String,
    pub ty: FieldType,
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}:{}", self.owner, self.name, self.ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodRef {
    /// Dotted owner class name (or array type for `clone` on arrays).
    pub owner: String,
    pub name: String,
    pub descriptor: MethodDescriptor,
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}.{}{}",
            self.descriptor.return_type_name(),
            self.owner,
            self.name,
            self.descriptor.param_list()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InvokeKind {
    Virtual,
    Special,
    Static,
    Interface,
    Dynamic,
}

impl InvokeKind {
    pub fn name(self) -> &'static str {
        match self {
            InvokeKind::Virtual => "virtual",
            InvokeKind::Special => "special",
            InvokeKind::Static => "static",
            InvokeKind::Interface => "interface",
            InvokeKind::Dynamic => "dynamic",
        }
    }
}

/// Call-site target. For `invokedynamic`, `method.owner` is the bootstrap
/// method's owner and `bootstrap_args` holds its static arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Call {
    pub kind: InvokeKind,
    pub method: MethodRef,
    pub bootstrap: Option<Bootstrap>,
    pub args: Vec<Reg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bootstrap {
    /// `owner.name` of the bootstrap method.
    pub method: String,
    pub args: Vec<Const>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConcatPart {
    Lit(String),
    Reg(Reg),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const { value: Const, form: Option<ConstForm> },
    Copy(Reg),
    Binary { op: BinOp, ty: Ty, lhs: Reg, rhs: Reg },
    Neg { ty: Ty, src: Reg },
    Convert { from: Ty, to: Ty, src: Reg },
    Compare { kind: CmpKind, ty: Ty, lhs: Reg, rhs: Reg },
    GetField { object: Option<Reg>, field: FieldRef },
    ArrayLoad { elem: Ty, array: Reg, index: Reg },
    ArrayLength(Reg),
    New(String),
    /// Element type, then one length per allocated dimension.
    NewArray { elem: String, dims: Vec<Reg> },
    CheckCast { ty: String, src: Reg },
    InstanceOf { ty: String, src: Reg },
    /// Value on entry to an exception handler.
    CaughtException(Option<String>),
    /// String concatenation recognised by normalization.
    Concat(Vec<ConcatPart>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Stmt {
    Assign { dst: Reg, expr: Expr },
    Invoke { dst: Option<Reg>, call: Call },
    PutField { object: Option<Reg>, field: FieldRef, value: Reg },
    ArrayStore { elem: Ty, array: Reg, index: Reg, value: Reg },
    If { op: CondOp, lhs: Reg, rhs: CondRhs, target: BlockId },
    Goto { target: BlockId },
    Switch { key: Reg, cases: Vec<(i32, BlockId)>, default: BlockId },
    Return { value: Option<Reg> },
    Throw { value: Reg },
    Monitor { enter: bool, object: Reg },
    Nop,
}

impl Expr {
    pub fn uses(&self) -> Vec<Reg> {
        let mut v = Vec::new();
        self.visit_uses(|r| v.push(*r));
        v
    }

    fn visit_uses(&self, mut f: impl FnMut(&Reg)) {
        match self {
            Expr::Const { .. } | Expr::New(_) | Expr::CaughtException(_) => {}
            Expr::Copy(r) | Expr::ArrayLength(r) => f(r),
            Expr::Neg { src, .. }
            | Expr::Convert { src, .. }
            | Expr::CheckCast { src, .. }
            | Expr::InstanceOf { src, .. } => f(src),
            Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => {
                f(lhs);
                f(rhs);
            }
            Expr::GetField { object, .. } => object.iter().for_each(f),
            Expr::ArrayLoad { array, index, .. } => {
                f(array);
                f(index);
            }
            Expr::NewArray { dims, .. } => dims.iter().for_each(f),
            Expr::Concat(parts) => {
                for p in parts {
                    if let ConcatPart::Reg(r) = p {
                        f(r);
                    }
                }
            }
        }
    }

    pub fn uses_mut(&mut self) -> Vec<&mut Reg> {
        match self {
            Expr::Const { .. } | Expr::New(_) | Expr::CaughtException(_) => vec![],
            Expr::Copy(r) | Expr::ArrayLength(r) => vec![r],
            Expr::Neg { src, .. }
            | Expr::Convert { src, .. }
            | Expr::CheckCast { src, .. }
            | Expr::InstanceOf { src, .. } => vec![src],
            Expr::Binary { lhs, rhs, .. } | Expr::Compare { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::GetField { object, .. } => object.iter_mut().collect(),
            Expr::ArrayLoad { array, index, .. } => vec![array, index],
            Expr::NewArray { dims, .. } => dims.iter_mut().collect(),
            Expr::Concat(parts) => parts
                .iter_mut()
                .filter_map(|p| match p {
                    ConcatPart::Reg(r) => Some(r),
                    ConcatPart::Lit(_) => None,
                })
                .collect(),
        }
    }
}

impl Stmt {
    pub fn def(&self) -> Option<Reg> {
        match self {
            Stmt::Assign { dst, .. } => Some(*dst),
            Stmt::Invoke { dst, .. } => *dst,
            _ => None,
        }
    }

    pub fn def_mut(&mut self) -> Option<&mut Reg> {
        match self {
            Stmt::Assign { dst, .. } => Some(dst),
            Stmt::Invoke { dst, .. } => dst.as_mut(),
            _ => None,
        }
    }

    /// Registers read, in operand order.
    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Stmt::Assign { expr, .. } => expr.uses(),
            Stmt::Invoke { call, .. } => call.args.clone(),
            Stmt::PutField { object, value, .. } => object.iter().copied().chain([*value]).collect(),
            Stmt::ArrayStore { array, index, value, .. } => vec![*array, *index, *value],
            Stmt::If { lhs, rhs, .. } => match rhs {
                CondRhs::Reg(r) => vec![*lhs, *r],
                _ => vec![*lhs],
            },
            Stmt::Switch { key, .. } => vec![*key],
            Stmt::Return { value } => value.iter().copied().collect(),
            Stmt::Throw { value } | Stmt::Monitor { object: value, .. } => vec![*value],
            Stmt::Goto { .. } | Stmt::Nop => vec![],
        }
    }

    pub fn uses_mut(&mut self) -> Vec<&mut Reg> {
        match self {
            Stmt::Assign { expr, .. } => expr.uses_mut(),
            Stmt::Invoke { call, .. } => call.args.iter_mut().collect(),
            Stmt::PutField { object, value, .. } => object.iter_mut().chain([value]).collect(),
            Stmt::ArrayStore { array, index, value, .. } => vec![array, index, value],
            Stmt::If { lhs, rhs, .. } => match rhs {
                CondRhs::Reg(r) => vec![lhs, r],
                _ => vec![lhs],
            },
            Stmt::Switch { key, .. } => vec![key],
            Stmt::Return { value } => value.iter_mut().collect(),
            Stmt::Throw { value } | Stmt::Monitor { object: value, .. } => vec![value],
            Stmt::Goto { .. } | Stmt::Nop => vec![],
        }
    }

    /// Explicit branch targets (not the fallthrough successor).
    pub fn targets(&self) -> Vec<BlockId> {
        match self {
            Stmt::If { target, .. } | Stmt::Goto { target } => vec![*target],
            Stmt::Switch { cases, default, .. } => {
                let mut v: Vec<BlockId> = cases.iter().map(|c| c.1).collect();
                v.push(*default);
                v
            }
            _ => vec![],
        }
    }

    pub fn targets_mut(&mut self) -> Vec<&mut BlockId> {
        match self {
            Stmt::If { target, .. } | Stmt::Goto { target } => vec![target],
            Stmt::Switch { cases, default, .. } => cases.iter_mut().map(|c| &mut c.1).chain([default]).collect(),
            _ => vec![],
        }
    }

    /// True when control never reaches the following statement.
    pub fn ends_flow(&self) -> bool {
        matches!(
            self,
            Stmt::Goto { .. } | Stmt::Switch { .. } | Stmt::Return { .. } | Stmt::Throw { .. }
        )
    }

    pub fn is_terminator(&self) -> bool {
        self.ends_flow() || matches!(self, Stmt::If { .. })
    }
}

fn fmt_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    let suffix = |ty: &Ty| if *ty == Ty::Int { String::new() } else { format!(":{}", ty.name()) };
    match e {
        Expr::Const { value, form } => {
            write!(f, "{value}")?;
            match form {
                Some(form) if *form != ConstForm::shortest(value) => write!(f, " [{}]", form.name()),
                _ => Ok(()),
            }
        }
        Expr::Copy(r) => write!(f, "{r}"),
        Expr::Binary { op, ty, lhs, rhs } => write!(f, "{lhs} {}{} {rhs}", op.symbol(), suffix(ty)),
        Expr::Neg { ty, src } => write!(f, "neg{} {src}", suffix(ty)),
        Expr::Convert { from, to, src } => write!(f, "({}<-{}) {src}", to.name(), from.name()),
        Expr::Compare { kind, ty, lhs, rhs } => write!(f, "{}:{} {lhs} {rhs}", kind.name(), ty.name()),
        Expr::GetField { object: Some(o), field } => write!(f, "{o}.{field}"),
        Expr::GetField { object: None, field } => write!(f, "static {field}"),
        Expr::ArrayLoad { elem, array, index } => write!(f, "{array}[{index}]:{}", elem.name()),
        Expr::ArrayLength(r) => write!(f, "length {r}"),
        Expr::New(c) => write!(f, "new {c}"),
        Expr::NewArray { elem, dims } => {
            write!(f, "newarray {elem}")?;
            for d in dims {
                write!(f, "[{d}]")?;
            }
            Ok(())
        }
        Expr::CheckCast { ty, src } => write!(f, "({ty}) {src}"),
        Expr::InstanceOf { ty, src } => write!(f, "{src} instanceof {ty}"),
        Expr::CaughtException(Some(t)) => write!(f, "caughtexception {t}"),
        Expr::CaughtException(None) => f.write_str("caughtexception"),
        Expr::Concat(parts) => {
            f.write_str("concat(")?;
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                match p {
                    ConcatPart::Lit(s) => write!(f, "{s:?}")?,
                    ConcatPart::Reg(r) => write!(f, "{r}")?,
                }
            }
            f.write_str(")")
        }
    }
}

fn fmt_call(f: &mut fmt::Formatter<'_>, call: &Call) -> fmt::Result {
    write!(f, "invoke {} {}", call.kind.name(), call.method)?;
    if let Some(b) = &call.bootstrap {
        write!(f, " bsm {}", b.method)?;
        for a in &b.args {
            write!(f, " {a}")?;
        }
    }
    f.write_str(" (")?;
    for (i, a) in call.args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Assign { dst, expr } => {
                write!(f, "{dst} := ")?;
                fmt_expr(f, expr)
            }
            Stmt::Invoke { dst, call } => {
                if let Some(d) = dst {
                    write!(f, "{d} := ")?;
                }
                fmt_call(f, call)
            }
            Stmt::PutField {
                object: Some(o),
                field,
                value,
            } => write!(f, "{o}.{field} := {value}"),
            Stmt::PutField {
                object: None,
                field,
                value,
            } => write!(f, "static {field} := {value}"),
            Stmt::ArrayStore {
                elem,
                array,
                index,
                value,
            } => write!(f, "{array}[{index}]:{} := {value}", elem.name()),
            Stmt::If { op, lhs, rhs, target } => {
                write!(f, "if {lhs} {} ", op.symbol())?;
                match rhs {
                    CondRhs::Zero => f.write_str("0")?,
                    CondRhs::Null => f.write_str("null")?,
                    CondRhs::Reg(r) => write!(f, "{r}")?,
                }
                write!(f, " goto B{target}")
            }
            Stmt::Goto { target } => write!(f, "goto B{target}"),
            Stmt::Switch { key, cases, default } => {
                write!(f, "switch {key} [")?;
                for (k, t) in cases {
                    write!(f, "{k}: B{t}, ")?;
                }
                write!(f, "default: B{default}]")
            }
            Stmt::Return { value: Some(v) } => write!(f, "return {v}"),
            Stmt::Return { value: None } => f.write_str("return"),
            Stmt::Throw { value } => write!(f, "throw {value}"),
            Stmt::Monitor { enter, object } => {
                write!(f, "monitor{} {object}", if *enter { "enter" } else { "exit" })
            }
            Stmt::Nop => f.write_str("nop"),
        }
    }
}

/// Exception handler: blocks it covers, its entry block, and the caught type
/// (`None` for catch-all).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Handler {
    pub covered: Vec<BlockId>,
    pub target: BlockId,
    pub catch_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodIr {
    /// Parameter registers with declared types; the receiver is typed as its
    /// declaring class.
    pub params: Vec<(Reg, FieldType)>,
    pub ret: Option<FieldType>,
    pub is_static: bool,
    pub stmts: Vec<Stmt>,
    /// Statement ranges; they partition `stmts` in order.
    pub blocks: Vec<Range<usize>>,
    pub handlers: Vec<Handler>,
    /// Debug names of local registers.
    pub local_names: BTreeMap<Reg, String>,
}

impl MethodIr {
    pub fn block_stmts(&self, b: BlockId) -> &[Stmt] {
        &self.stmts[self.blocks[b].clone()]
    }

    pub fn block_of(&self, stmt: usize) -> BlockId {
        self.blocks.partition_point(|r| r.end <= stmt)
    }

    /// Whether control can run off the end of block `b` into `b + 1`.
    pub fn falls_through(&self, b: BlockId) -> bool {
        self.block_stmts(b).last().is_none_or(|s| !s.ends_flow())
    }

    /// Normal-flow successors of `b` with their edge kinds, in branch order
    /// (fallthrough first).
    pub fn successors(&self, b: BlockId) -> Vec<(BlockId, EdgeKind)> {
        let mut out = Vec::new();
        if self.falls_through(b) && b + 1 < self.blocks.len() {
            out.push((b + 1, EdgeKind::Fallthrough));
        }
        if let Some(last) = self.block_stmts(b).last() {
            let kind = if matches!(last, Stmt::Switch { .. }) {
                EdgeKind::SwitchCase
            } else {
                EdgeKind::BranchTaken
            };
            for t in last.targets() {
                if !out.iter().any(|(s, _)| *s == t) {
                    out.push((t, kind));
                }
            }
        }
        out
    }

    /// Exception handlers covering block `b`, in table order, deduplicated.
    pub fn handlers_of(&self, b: BlockId) -> Vec<BlockId> {
        let mut out = Vec::new();
        for h in &self.handlers {
            if h.covered.contains(&b) && !out.contains(&h.target) {
                out.push(h.target);
            }
        }
        out
    }

    /// Statements in bracketed one-line form, `[r0 := 1; return r0]`.
    pub fn compact(&self) -> String {
        let parts: Vec<String> = self.stmts.iter().map(ToString::to_string).collect();
        format!("[{}]", parts.join("; "))
    }

    /// Line-oriented dump: one statement per line, grouped by block.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for MethodIr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("params:")?;
        for (r, ty) in &self.params {
            write!(f, " {r}:{ty}")?;
        }
        match &self.ret {
            Some(t) => writeln!(f, " -> {t}")?,
            None => writeln!(f, " -> void")?,
        }
        for (reg, name) in &self.local_names {
            writeln!(f, "local {reg} {name}")?;
        }
        for h in &self.handlers {
            let covered: Vec<String> = h.covered.iter().map(|b| format!("B{b}")).collect();
            writeln!(
                f,
                "handler [{}] -> B{} {}",
                covered.join(","),
                h.target,
                h.catch_type.as_deref().unwrap_or("*")
            )?;
        }
        for (b, range) in self.blocks.iter().enumerate() {
            writeln!(f, "B{b}:")?;
            for i in range.clone() {
                writeln!(f, "  {i}: {}", self.stmts[i])?;
            }
        }
        Ok(())
    }
}

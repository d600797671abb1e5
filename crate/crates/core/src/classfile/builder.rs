//! Programmatic construction of class files.
//!
//! [`ClassBuilder`] owns a constant pool and collects members; [`CodeBuilder`]
//! is a small assembler with forward-referenceable labels. Branch targets are
//! resolved and offsets laid out when the method is finished.

use super::code::{compute_max_stack, CodeAttribute, ExceptionEntry, Instruction, Operand};
use super::constant_pool::{Constant, ConstantPool};
use super::descriptor::{internal_name, MethodDescriptor};
use super::opcodes::*;
use super::{Attribute, ClassFile, ClassFileError, MemberInfo, RawAttribute, ACC_PUBLIC, ACC_STATIC, ACC_SUPER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label(usize);

/// Exception-table row whose positions are instruction indices. `end` may
/// equal the instruction count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedHandler {
    pub start: usize,
    pub end: usize,
    pub handler: usize,
    pub catch_type: u16,
}

/// Converts offset-addressed code into index-addressed form.
pub fn to_indexed(code: &CodeAttribute) -> (Vec<(u8, Operand<usize>)>, Vec<IndexedHandler>) {
    let index = code.index_of_offset();
    let n = code.instructions.len();
    let at = |off: u32| -> usize { index.get(&off).copied().unwrap_or(n) };
    let insns = code
        .instructions
        .iter()
        .map(|i| (i.opcode, i.operand.clone().map_targets(at)))
        .collect();
    let handlers = code
        .exception_table
        .iter()
        .map(|e| IndexedHandler {
            start: at(e.start_pc as u32),
            end: at(e.end_pc as u32),
            handler: at(e.handler_pc as u32),
            catch_type: e.catch_type,
        })
        .collect();
    (insns, handlers)
}

/// Lays out index-addressed instructions at concrete offsets.
///
/// `max_stack` is recomputed from `pool`. Sub-attributes are carried over
/// unchanged, so callers that move instructions should drop offset-bearing
/// tables themselves.
pub fn assemble(
    insns: Vec<(u8, Operand<usize>)>,
    handlers: &[IndexedHandler],
    max_locals: u16,
    attributes: Vec<RawAttribute>,
    pool: &ConstantPool,
) -> Result<CodeAttribute, ClassFileError> {
    let mut offsets = Vec::with_capacity(insns.len() + 1);
    let mut off = 0u32;
    for (op, operand) in &insns {
        offsets.push(off);
        off += super::code::encoded_size(*op, operand, off);
    }
    offsets.push(off);
    if off > 65535 {
        return Err(ClassFileError::MalformedCode(format!("code length {off} exceeds 65535")));
    }
    let resolve = |i: usize| -> Result<u32, ClassFileError> {
        offsets
            .get(i)
            .copied()
            .ok_or_else(|| ClassFileError::MalformedCode(format!("target index {i} out of range")))
    };
    let mut instructions = Vec::with_capacity(insns.len());
    for (k, (opcode, operand)) in insns.into_iter().enumerate() {
        let mut err = None;
        let operand = operand.map_targets(|t| {
            resolve(t).unwrap_or_else(|e| {
                err = Some(e);
                0
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        instructions.push(Instruction {
            offset: offsets[k],
            opcode,
            operand,
        });
    }
    let exception_table = handlers
        .iter()
        .map(|h| {
            Ok(ExceptionEntry {
                start_pc: resolve(h.start)? as u16,
                end_pc: resolve(h.end)? as u16,
                handler_pc: resolve(h.handler)? as u16,
                catch_type: h.catch_type,
            })
        })
        .collect::<Result<Vec<_>, ClassFileError>>()?;
    let max_stack = compute_max_stack(&instructions, &exception_table, pool)?;
    let code = CodeAttribute {
        max_stack,
        max_locals,
        instructions,
        exception_table,
        attributes,
    };
    code.validate()?;
    Ok(code)
}

pub struct ClassBuilder {
    pool: ConstantPool,
    major_version: u16,
    access_flags: u16,
    this_class: u16,
    super_class: u16,
    interfaces: Vec<u16>,
    fields: Vec<MemberInfo>,
    methods: Vec<MemberInfo>,
}

impl ClassBuilder {
    /// Public class `name` (dotted) extending `java.lang.Object`, version 52.
    pub fn new(name: &str) -> Result<Self, ClassFileError> {
        let mut pool = ConstantPool::new();
        let this_class = pool.class_index(&internal_name(name))?;
        let super_class = pool.class_index("java/lang/Object")?;
        Ok(ClassBuilder {
            pool,
            major_version: 52,
            access_flags: ACC_PUBLIC | ACC_SUPER,
            this_class,
            super_class,
            interfaces: Vec::new(),
            fields: Vec::new(),
            methods: Vec::new(),
        })
    }

    pub fn access_flags(mut self, flags: u16) -> Self {
        self.access_flags = flags;
        self
    }

    pub fn major_version(mut self, major: u16) -> Self {
        self.major_version = major;
        self
    }

    pub fn super_class(mut self, name: &str) -> Result<Self, ClassFileError> {
        self.super_class = self.pool.class_index(&internal_name(name))?;
        Ok(self)
    }

    pub fn interface(mut self, name: &str) -> Result<Self, ClassFileError> {
        let i = self.pool.class_index(&internal_name(name))?;
        self.interfaces.push(i);
        Ok(self)
    }

    pub fn pool_mut(&mut self) -> &mut ConstantPool {
        &mut self.pool
    }

    pub fn field(&mut self, access_flags: u16, name: &str, descriptor: &str) -> Result<(), ClassFileError> {
        super::descriptor::parse_field_descriptor(descriptor)?;
        let name_index = self.pool.utf8_index(name)?;
        let descriptor_index = self.pool.utf8_index(descriptor)?;
        self.fields.push(MemberInfo {
            access_flags,
            name_index,
            descriptor_index,
            attributes: Vec::new(),
        });
        Ok(())
    }

    /// Starts assembling a method body against this class's pool.
    pub fn code(&mut self) -> CodeBuilder<'_> {
        CodeBuilder::new(&mut self.pool)
    }

    /// Adds a method. `code` is `None` for abstract and native methods.
    /// `max_locals` is raised to cover the parameters.
    pub fn method(
        &mut self,
        access_flags: u16,
        name: &str,
        descriptor: &str,
        code: Option<CodeAttribute>,
    ) -> Result<(), ClassFileError> {
        let desc = MethodDescriptor::parse(descriptor)?;
        let name_index = self.pool.utf8_index(name)?;
        let descriptor_index = self.pool.utf8_index(descriptor)?;
        let mut attributes = Vec::new();
        if let Some(mut code) = code {
            self.pool.utf8_index("Code")?;
            let params = desc.param_slots() + u16::from(access_flags & ACC_STATIC == 0);
            code.max_locals = code.max_locals.max(params);
            attributes.push(Attribute::Code(code));
        }
        self.methods.push(MemberInfo {
            access_flags,
            name_index,
            descriptor_index,
            attributes,
        });
        Ok(())
    }

    /// Adds `public <init>()V` calling the superclass constructor.
    pub fn default_constructor(&mut self) -> Result<(), ClassFileError> {
        let super_name = self.pool.class_name(self.super_class)?.to_string();
        let mut c = self.code();
        c.op(ALOAD_0);
        c.invoke(INVOKESPECIAL, &super_name.replace('/', "."), "<init>", "()V")?;
        c.op(RETURN);
        let code = c.finish()?;
        self.method(ACC_PUBLIC, "<init>", "()V", Some(code))
    }

    pub fn build(self) -> ClassFile {
        ClassFile {
            minor_version: 0,
            major_version: self.major_version,
            constant_pool: self.pool,
            access_flags: self.access_flags,
            this_class: self.this_class,
            super_class: self.super_class,
            interfaces: self.interfaces,
            fields: self.fields,
            methods: self.methods,
            attributes: Vec::new(),
        }
    }
}

/// Bytecode assembler. Owner and class names are given dotted.
pub struct CodeBuilder<'a> {
    pool: &'a mut ConstantPool,
    insns: Vec<(u8, Operand<Label>)>,
    labels: Vec<Option<usize>>,
    handlers: Vec<(Label, Label, Label, u16)>,
    max_locals: u16,
}

impl<'a> CodeBuilder<'a> {
    pub fn new(pool: &'a mut ConstantPool) -> Self {
        CodeBuilder {
            pool,
            insns: Vec::new(),
            labels: Vec::new(),
            handlers: Vec::new(),
            max_locals: 0,
        }
    }

    pub fn pool(&mut self) -> &mut ConstantPool {
        self.pool
    }

    pub fn label(&mut self) -> Label {
        self.labels.push(None);
        Label(self.labels.len() - 1)
    }

    /// Binds `label` to the next emitted instruction.
    pub fn place(&mut self, label: Label) {
        self.labels[label.0] = Some(self.insns.len());
    }

    pub fn raw(&mut self, opcode: u8, operand: Operand<Label>) -> &mut Self {
        self.insns.push((opcode, operand));
        self
    }

    /// An instruction without operands.
    pub fn op(&mut self, opcode: u8) -> &mut Self {
        self.raw(opcode, Operand::None)
    }

    /// Pushes an int with the shortest encoding.
    pub fn iconst(&mut self, v: i32) -> Result<&mut Self, ClassFileError> {
        Ok(match v {
            -1..=5 => self.op((ICONST_0 as i32 + v) as u8),
            -128..=127 => self.raw(BIPUSH, Operand::Byte(v as i8)),
            -32768..=32767 => self.raw(SIPUSH, Operand::Short(v as i16)),
            _ => {
                let idx = self.pool.intern(Constant::Integer(v))?;
                self.ldc(idx)
            }
        })
    }

    pub fn lconst(&mut self, v: i64) -> Result<&mut Self, ClassFileError> {
        Ok(match v {
            0 => self.op(LCONST_0),
            1 => self.op(LCONST_1),
            _ => {
                let idx = self.pool.intern(Constant::Long(v))?;
                self.raw(LDC2_W, Operand::Constant(idx))
            }
        })
    }

    pub fn sconst(&mut self, s: &str) -> Result<&mut Self, ClassFileError> {
        let idx = self.pool.string_index(s)?;
        Ok(self.ldc(idx))
    }

    /// `ldc` or `ldc_w` for a single-slot constant already in the pool.
    pub fn ldc(&mut self, index: u16) -> &mut Self {
        let op = if index <= 255 { LDC } else { LDC_W };
        self.raw(op, Operand::Constant(index))
    }

    /// Local load/store given the generic opcode (`ILOAD`..`ALOAD`,
    /// `ISTORE`..`ASTORE`); picks the `_n` or `wide` form as needed.
    pub fn local(&mut self, opcode: u8, index: u16) -> &mut Self {
        let slots = if matches!(opcode, LLOAD | DLOAD | LSTORE | DSTORE) { 2 } else { 1 };
        self.max_locals = self.max_locals.max(index + slots);
        let (base_short, generic_base) = if (ILOAD..=ALOAD).contains(&opcode) {
            (ILOAD_0, ILOAD)
        } else {
            (ISTORE_0, ISTORE)
        };
        if index <= 3 {
            self.op(base_short + (opcode - generic_base) * 4 + index as u8)
        } else {
            self.raw(
                opcode,
                Operand::Local {
                    index,
                    wide: index > 255,
                },
            )
        }
    }

    pub fn iinc(&mut self, index: u16, delta: i16) -> &mut Self {
        self.max_locals = self.max_locals.max(index + 1);
        let wide = index > 255 || !(-128..=127).contains(&delta);
        self.raw(IINC, Operand::Iinc { index, delta, wide })
    }

    pub fn branch(&mut self, opcode: u8, target: Label) -> &mut Self {
        self.raw(opcode, Operand::Branch(target))
    }

    pub fn tableswitch(&mut self, low: i32, default: Label, targets: Vec<Label>) -> &mut Self {
        self.raw(TABLESWITCH, Operand::TableSwitch { default, low, targets })
    }

    pub fn lookupswitch(&mut self, default: Label, mut pairs: Vec<(i32, Label)>) -> &mut Self {
        pairs.sort_by_key(|p| p.0);
        self.raw(LOOKUPSWITCH, Operand::LookupSwitch { default, pairs })
    }

    /// `getfield`/`putfield`/`getstatic`/`putstatic`.
    pub fn field(&mut self, opcode: u8, owner: &str, name: &str, descriptor: &str) -> Result<&mut Self, ClassFileError> {
        let idx = self.pool.field_ref_index(&internal_name(owner), name, descriptor)?;
        Ok(self.raw(opcode, Operand::Constant(idx)))
    }

    /// `invokevirtual`/`invokespecial`/`invokestatic`/`invokeinterface`.
    pub fn invoke(&mut self, opcode: u8, owner: &str, name: &str, descriptor: &str) -> Result<&mut Self, ClassFileError> {
        let interface = opcode == INVOKEINTERFACE;
        let idx = self
            .pool
            .method_ref_index(&internal_name(owner), name, descriptor, interface)?;
        if interface {
            let count = MethodDescriptor::parse(descriptor)?.param_slots() + 1;
            Ok(self.raw(
                opcode,
                Operand::Interface {
                    index: idx,
                    count: count as u8,
                },
            ))
        } else {
            Ok(self.raw(opcode, Operand::Constant(idx)))
        }
    }

    /// `new`/`anewarray`/`checkcast`/`instanceof`.
    pub fn type_op(&mut self, opcode: u8, class: &str) -> Result<&mut Self, ClassFileError> {
        let idx = self.pool.class_index(&internal_name(class))?;
        Ok(self.raw(opcode, Operand::Constant(idx)))
    }

    /// Registers a handler for `[start, end)`. `catch` is a dotted class
    /// name or `None` for catch-all.
    pub fn try_catch(&mut self, start: Label, end: Label, handler: Label, catch: Option<&str>) -> Result<(), ClassFileError> {
        let ty = match catch {
            Some(c) => self.pool.class_index(&internal_name(c))?,
            None => 0,
        };
        self.handlers.push((start, end, handler, ty));
        Ok(())
    }

    pub fn finish(self) -> Result<CodeAttribute, ClassFileError> {
        let labels = self.labels;
        let resolve = |l: Label| -> Result<usize, ClassFileError> {
            labels[l.0].ok_or_else(|| ClassFileError::MalformedCode(format!("label {} never placed", l.0)))
        };
        let mut insns = Vec::with_capacity(self.insns.len());
        for (op, operand) in self.insns {
            let mut err = None;
            let operand = operand.map_targets(|l| {
                resolve(l).unwrap_or_else(|e| {
                    err = Some(e);
                    0
                })
            });
            if let Some(e) = err {
                return Err(e);
            }
            insns.push((op, operand));
        }
        let handlers = self
            .handlers
            .iter()
            .map(|&(s, e, h, t)| {
                Ok(IndexedHandler {
                    start: resolve(s)?,
                    end: resolve(e)?,
                    handler: resolve(h)?,
                    catch_type: t,
                })
            })
            .collect::<Result<Vec<_>, ClassFileError>>()?;
        assemble(insns, &handlers, self.max_locals, Vec::new(), self.pool)
    }
}

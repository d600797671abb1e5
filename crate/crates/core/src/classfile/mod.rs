//! JVM class-file and JAR model: parsing, emission, and construct listing.

pub mod asm;
pub mod builder;
pub mod code;
pub mod constant_pool;
mod construct;
pub mod descriptor;
mod emit;
mod jar;
pub mod opcodes;
mod parse;

use thiserror::Error;

pub use code::{CodeAttribute, ExceptionEntry, Instruction, Operand};
pub use constant_pool::{Constant, ConstantPool, MemberRef};
pub use construct::{list_constructs, unqualify_name, ConstructId, ConstructKind};
pub use emit::emit_class;
pub use jar::{is_metadata_path, parse_jar, write_entries, DosTime, JarArchive, JarEntry, JarError};
pub use parse::parse_class;

pub const MIN_MAJOR_VERSION: u16 = 45;
pub const MAX_MAJOR_VERSION: u16 = 65;

pub const ACC_PUBLIC: u16 = 0x0001;
pub const ACC_PRIVATE: u16 = 0x0002;
pub const ACC_PROTECTED: u16 = 0x0004;
pub const ACC_STATIC: u16 = 0x0008;
pub const ACC_FINAL: u16 = 0x0010;
pub const ACC_SUPER: u16 = 0x0020;
pub const ACC_BRIDGE: u16 = 0x0040;
pub const ACC_NATIVE: u16 = 0x0100;
pub const ACC_INTERFACE: u16 = 0x0200;
pub const ACC_ABSTRACT: u16 = 0x0400;
pub const ACC_SYNTHETIC: u16 = 0x1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassFileError {
    #[error("bad magic number {0:#010x}")]
    BadMagic(u32),
    #[error("unexpected end of input")]
    TruncatedInput,
    #[error("unsupported class-file major version {0} (supported: 45..=65)")]
    UnsupportedVersion(u16),
    #[error("constant pool index {index} does not refer to a {expected} entry")]
    BadConstantPoolRef { index: u16, expected: &'static str },
    #[error("unknown constant-pool tag {0}")]
    BadConstantTag(u8),
    #[error("malformed modified UTF-8 string")]
    BadUtf8,
    #[error("malformed descriptor {0:?}")]
    BadDescriptor(String),
    #[error("invalid opcode {opcode:#04x} at offset {offset}")]
    InvalidOpcode { offset: u32, opcode: u8 },
    #[error("branch at offset {offset} targets {target}, which is not an instruction boundary")]
    BadBranchTarget { offset: u32, target: u32 },
    #[error("malformed code: {0}")]
    MalformedCode(String),
    #[error("{0} trailing bytes after class structure")]
    TrailingBytes(usize),
    #[error("constant pool overflow")]
    PoolOverflow,
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
}

/// An attribute kept as opaque bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAttribute {
    pub name_index: u16,
    pub info: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attribute {
    Code(CodeAttribute),
    Other(RawAttribute),
}

/// Field or method entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberInfo {
    pub access_flags: u16,
    pub name_index: u16,
    pub descriptor_index: u16,
    pub attributes: Vec<Attribute>,
}

pub type FieldInfo = MemberInfo;
pub type MethodInfo = MemberInfo;

impl MemberInfo {
    pub fn code(&self) -> Option<&CodeAttribute> {
        self.attributes.iter().find_map(|a| match a {
            Attribute::Code(c) => Some(c),
            Attribute::Other(_) => None,
        })
    }

    pub fn code_mut(&mut self) -> Option<&mut CodeAttribute> {
        self.attributes.iter_mut().find_map(|a| match a {
            Attribute::Code(c) => Some(c),
            Attribute::Other(_) => None,
        })
    }

    pub fn is_static(&self) -> bool {
        self.access_flags & ACC_STATIC != 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapMethod {
    pub method_handle: u16,
    pub arguments: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassFile {
    pub minor_version: u16,
    pub major_version: u16,
    pub constant_pool: ConstantPool,
    pub access_flags: u16,
    pub this_class: u16,
    /// 0 only for `java.lang.Object`.
    pub super_class: u16,
    pub interfaces: Vec<u16>,
    pub fields: Vec<FieldInfo>,
    pub methods: Vec<MethodInfo>,
    pub attributes: Vec<RawAttribute>,
}

impl ClassFile {
    /// Dotted fully qualified name of this class.
    pub fn name(&self) -> Result<String, ClassFileError> {
        Ok(descriptor::dotted_name(self.constant_pool.class_name(self.this_class)?))
    }

    pub fn super_name(&self) -> Result<Option<String>, ClassFileError> {
        if self.super_class == 0 {
            return Ok(None);
        }
        Ok(Some(descriptor::dotted_name(
            self.constant_pool.class_name(self.super_class)?,
        )))
    }

    pub fn interface_names(&self) -> Result<Vec<String>, ClassFileError> {
        self.interfaces
            .iter()
            .map(|&i| Ok(descriptor::dotted_name(self.constant_pool.class_name(i)?)))
            .collect()
    }

    pub fn is_interface(&self) -> bool {
        self.access_flags & ACC_INTERFACE != 0
    }

    pub fn member_name(&self, m: &MemberInfo) -> Result<&str, ClassFileError> {
        self.constant_pool.utf8(m.name_index)
    }

    pub fn member_descriptor(&self, m: &MemberInfo) -> Result<&str, ClassFileError> {
        self.constant_pool.utf8(m.descriptor_index)
    }

    pub fn attribute_name(&self, a: &RawAttribute) -> Result<&str, ClassFileError> {
        self.constant_pool.utf8(a.name_index)
    }

    /// Decodes the `BootstrapMethods` attribute, empty if absent.
    pub fn bootstrap_methods(&self) -> Result<Vec<BootstrapMethod>, ClassFileError> {
        let Some(attr) = self
            .attributes
            .iter()
            .find(|a| self.attribute_name(a).ok() == Some("BootstrapMethods"))
        else {
            return Ok(Vec::new());
        };
        let b = &attr.info;
        let u16_at = |p: usize| -> Result<u16, ClassFileError> {
            Ok(u16::from_be_bytes([
                *b.get(p).ok_or(ClassFileError::TruncatedInput)?,
                *b.get(p + 1).ok_or(ClassFileError::TruncatedInput)?,
            ]))
        };
        let n = u16_at(0)? as usize;
        let mut pos = 2;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let method_handle = u16_at(pos)?;
            let argc = u16_at(pos + 2)? as usize;
            pos += 4;
            let mut arguments = Vec::with_capacity(argc);
            for _ in 0..argc {
                arguments.push(u16_at(pos)?);
                pos += 2;
            }
            out.push(BootstrapMethod {
                method_handle,
                arguments,
            });
        }
        Ok(out)
    }

    /// Local-variable names from a method's `LocalVariableTable`, keyed by slot.
    /// The first entry for a slot wins.
    pub fn local_variable_names(&self, code: &CodeAttribute) -> Vec<(u16, String)> {
        let mut out: Vec<(u16, String)> = Vec::new();
        for attr in &code.attributes {
            if self.attribute_name(attr).ok() != Some("LocalVariableTable") {
                continue;
            }
            let b = &attr.info;
            if b.len() < 2 {
                continue;
            }
            let n = u16::from_be_bytes([b[0], b[1]]) as usize;
            for k in 0..n {
                let p = 2 + k * 10;
                if p + 10 > b.len() {
                    break;
                }
                let name_index = u16::from_be_bytes([b[p + 4], b[p + 5]]);
                let slot = u16::from_be_bytes([b[p + 8], b[p + 9]]);
                if let Ok(name) = self.constant_pool.utf8(name_index) {
                    if !out.iter().any(|(s, _)| *s == slot) {
                        out.push((slot, name.to_string()));
                    }
                }
            }
        }
        out.sort();
        out
    }
}

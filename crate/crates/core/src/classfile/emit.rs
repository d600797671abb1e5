use super::code::{encode_instructions, CodeAttribute};
use super::constant_pool::{encode_modified_utf8, Constant, ConstantPool};
use super::{Attribute, ClassFile, ClassFileError, MemberInfo, RawAttribute};

/// Serializes a class model. `parse_class(&emit_class(c)?)` reproduces `c`.
///
/// Module and Package constants are rejected; the pool must already contain
/// a `Code` Utf8 entry when any method carries code.
pub fn emit_class(class: &ClassFile) -> Result<Vec<u8>, ClassFileError> {
    let pool = &class.constant_pool;
    let mut out = Vec::with_capacity(256);
    out.extend_from_slice(&0xCAFE_BABEu32.to_be_bytes());
    out.extend_from_slice(&class.minor_version.to_be_bytes());
    out.extend_from_slice(&class.major_version.to_be_bytes());
    write_pool(&mut out, pool)?;
    out.extend_from_slice(&class.access_flags.to_be_bytes());
    out.extend_from_slice(&class.this_class.to_be_bytes());
    out.extend_from_slice(&class.super_class.to_be_bytes());
    write_len16(&mut out, class.interfaces.len())?;
    for i in &class.interfaces {
        out.extend_from_slice(&i.to_be_bytes());
    }
    let code_name = pool
        .iter()
        .find(|(_, c)| matches!(c, Constant::Utf8(s) if s == "Code"))
        .map(|(i, _)| i);
    write_members(&mut out, &class.fields, code_name)?;
    write_members(&mut out, &class.methods, code_name)?;
    write_attributes(&mut out, &class.attributes)?;
    Ok(out)
}

fn write_len16(out: &mut Vec<u8>, n: usize) -> Result<(), ClassFileError> {
    let n = u16::try_from(n).map_err(|_| ClassFileError::UnsupportedFeature(format!("table of {n} entries")))?;
    out.extend_from_slice(&n.to_be_bytes());
    Ok(())
}

fn write_pool(out: &mut Vec<u8>, pool: &ConstantPool) -> Result<(), ClassFileError> {
    write_len16(out, pool.count())?;
    for (_, c) in pool.iter() {
        out.push(c.tag());
        match c {
            Constant::Utf8(s) => {
                let bytes = encode_modified_utf8(s);
                write_len16(out, bytes.len())?;
                out.extend_from_slice(&bytes);
            }
            Constant::Integer(v) => out.extend_from_slice(&v.to_be_bytes()),
            Constant::Float(bits) => out.extend_from_slice(&bits.to_be_bytes()),
            Constant::Long(v) => out.extend_from_slice(&v.to_be_bytes()),
            Constant::Double(bits) => out.extend_from_slice(&bits.to_be_bytes()),
            Constant::Class { name: a } | Constant::String { value: a } | Constant::MethodType { descriptor: a } => {
                out.extend_from_slice(&a.to_be_bytes())
            }
            Constant::Fieldref { class: a, name_and_type: b }
            | Constant::Methodref { class: a, name_and_type: b }
            | Constant::InterfaceMethodref { class: a, name_and_type: b }
            | Constant::NameAndType { name: a, descriptor: b }
            | Constant::Dynamic { bootstrap: a, name_and_type: b }
            | Constant::InvokeDynamic { bootstrap: a, name_and_type: b } => {
                out.extend_from_slice(&a.to_be_bytes());
                out.extend_from_slice(&b.to_be_bytes());
            }
            Constant::MethodHandle { kind, reference } => {
                out.push(*kind);
                out.extend_from_slice(&reference.to_be_bytes());
            }
            Constant::Module { .. } | Constant::Package { .. } => {
                return Err(ClassFileError::UnsupportedFeature(format!(
                    "{} constant",
                    c.kind_name()
                )))
            }
            Constant::Unusable => unreachable!("pool iterator skips unusable slots"),
        }
    }
    Ok(())
}

fn write_attributes(out: &mut Vec<u8>, attrs: &[RawAttribute]) -> Result<(), ClassFileError> {
    write_len16(out, attrs.len())?;
    for a in attrs {
        write_raw(out, a.name_index, &a.info)?;
    }
    Ok(())
}

fn write_raw(out: &mut Vec<u8>, name_index: u16, info: &[u8]) -> Result<(), ClassFileError> {
    out.extend_from_slice(&name_index.to_be_bytes());
    let len = u32::try_from(info.len()).map_err(|_| ClassFileError::UnsupportedFeature("attribute over 4 GiB".into()))?;
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(info);
    Ok(())
}

fn write_members(out: &mut Vec<u8>, members: &[MemberInfo], code_name: Option<u16>) -> Result<(), ClassFileError> {
    write_len16(out, members.len())?;
    for m in members {
        out.extend_from_slice(&m.access_flags.to_be_bytes());
        out.extend_from_slice(&m.name_index.to_be_bytes());
        out.extend_from_slice(&m.descriptor_index.to_be_bytes());
        write_len16(out, m.attributes.len())?;
        for a in &m.attributes {
            match a {
                Attribute::Other(raw) => write_raw(out, raw.name_index, &raw.info)?,
                Attribute::Code(code) => {
                    let name = code_name.ok_or_else(|| {
                        ClassFileError::MalformedCode("constant pool lacks a \"Code\" Utf8 entry".into())
                    })?;
                    write_raw(out, name, &encode_code(code)?)?;
                }
            }
        }
    }
    Ok(())
}

pub(crate) fn encode_code(code: &CodeAttribute) -> Result<Vec<u8>, ClassFileError> {
    let bytes = encode_instructions(&code.instructions)?;
    let mut out = Vec::with_capacity(bytes.len() + 16);
    out.extend_from_slice(&code.max_stack.to_be_bytes());
    out.extend_from_slice(&code.max_locals.to_be_bytes());
    if bytes.is_empty() || bytes.len() >= 65536 {
        return Err(ClassFileError::MalformedCode(format!("code length {} out of range", bytes.len())));
    }
    out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
    out.extend_from_slice(&bytes);
    write_len16(&mut out, code.exception_table.len())?;
    for e in &code.exception_table {
        for v in [e.start_pc, e.end_pc, e.handler_pc, e.catch_type] {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    write_attributes(&mut out, &code.attributes)?;
    Ok(out)
}

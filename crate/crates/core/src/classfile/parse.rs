use super::code::{decode_instructions, CodeAttribute, ExceptionEntry, Operand};
use super::constant_pool::*;
use super::descriptor::{parse_field_descriptor, MethodDescriptor};
use super::opcodes::*;
use super::{Attribute, ClassFile, ClassFileError, MemberInfo, RawAttribute};

const MAGIC: u32 = 0xCAFE_BABE;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassFileError> {
        let end = self.pos.checked_add(n).ok_or(ClassFileError::TruncatedInput)?;
        let s = self.bytes.get(self.pos..end).ok_or(ClassFileError::TruncatedInput)?;
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ClassFileError> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16, ClassFileError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }
    fn u32(&mut self) -> Result<u32, ClassFileError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
    fn u64(&mut self) -> Result<u64, ClassFileError> {
        Ok((u64::from(self.u32()?) << 32) | u64::from(self.u32()?))
    }
}

/// Decodes a class file and checks that every constant-pool reference made
/// by the class structure and its bytecode resolves to the expected tag.
pub fn parse_class(bytes: &[u8]) -> Result<ClassFile, ClassFileError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.u32()?;
    if magic != MAGIC {
        return Err(ClassFileError::BadMagic(magic));
    }
    let minor_version = r.u16()?;
    let major_version = r.u16()?;
    if !(super::MIN_MAJOR_VERSION..=super::MAX_MAJOR_VERSION).contains(&major_version) {
        return Err(ClassFileError::UnsupportedVersion(major_version));
    }
    let constant_pool = read_pool(&mut r)?;
    let access_flags = r.u16()?;
    let this_class = r.u16()?;
    let super_class = r.u16()?;
    let n = r.u16()?;
    let mut interfaces = Vec::with_capacity(n as usize);
    for _ in 0..n {
        interfaces.push(r.u16()?);
    }
    let fields = read_members(&mut r, &constant_pool, false)?;
    let methods = read_members(&mut r, &constant_pool, true)?;
    let attributes = read_raw_attributes(&mut r)?;
    if r.pos != bytes.len() {
        return Err(ClassFileError::TrailingBytes(bytes.len() - r.pos));
    }
    let class = ClassFile {
        minor_version,
        major_version,
        constant_pool,
        access_flags,
        this_class,
        super_class,
        interfaces,
        fields,
        methods,
        attributes,
    };
    validate_refs(&class)?;
    Ok(class)
}

fn read_pool(r: &mut Reader<'_>) -> Result<ConstantPool, ClassFileError> {
    let count = r.u16()? as usize;
    if count == 0 {
        return Err(ClassFileError::MalformedCode("constant_pool_count is 0".into()));
    }
    let mut entries = Vec::with_capacity(count);
    entries.push(Constant::Unusable);
    while entries.len() < count {
        let tag = r.u8()?;
        let c = match tag {
            TAG_UTF8 => {
                let len = r.u16()? as usize;
                Constant::Utf8(decode_modified_utf8(r.take(len)?)?)
            }
            TAG_INTEGER => Constant::Integer(r.u32()? as i32),
            TAG_FLOAT => Constant::Float(r.u32()?),
            TAG_LONG => Constant::Long(r.u64()? as i64),
            TAG_DOUBLE => Constant::Double(r.u64()?),
            TAG_CLASS => Constant::Class { name: r.u16()? },
            TAG_STRING => Constant::String { value: r.u16()? },
            TAG_FIELDREF => Constant::Fieldref {
                class: r.u16()?,
                name_and_type: r.u16()?,
            },
            TAG_METHODREF => Constant::Methodref {
                class: r.u16()?,
                name_and_type: r.u16()?,
            },
            TAG_INTERFACE_METHODREF => Constant::InterfaceMethodref {
                class: r.u16()?,
                name_and_type: r.u16()?,
            },
            TAG_NAME_AND_TYPE => Constant::NameAndType {
                name: r.u16()?,
                descriptor: r.u16()?,
            },
            TAG_METHOD_HANDLE => Constant::MethodHandle {
                kind: r.u8()?,
                reference: r.u16()?,
            },
            TAG_METHOD_TYPE => Constant::MethodType { descriptor: r.u16()? },
            TAG_DYNAMIC => Constant::Dynamic {
                bootstrap: r.u16()?,
                name_and_type: r.u16()?,
            },
            TAG_INVOKE_DYNAMIC => Constant::InvokeDynamic {
                bootstrap: r.u16()?,
                name_and_type: r.u16()?,
            },
            TAG_MODULE => Constant::Module { name: r.u16()? },
            TAG_PACKAGE => Constant::Package { name: r.u16()? },
            other => return Err(ClassFileError::BadConstantTag(other)),
        };
        let wide = c.is_wide();
        entries.push(c);
        if wide {
            if entries.len() >= count {
                return Err(ClassFileError::MalformedCode(
                    "wide constant occupies the last pool slot".into(),
                ));
            }
            entries.push(Constant::Unusable);
        }
    }
    Ok(ConstantPool::from_entries(entries))
}

fn read_raw_attributes(r: &mut Reader<'_>) -> Result<Vec<RawAttribute>, ClassFileError> {
    let n = r.u16()?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let name_index = r.u16()?;
        let len = r.u32()? as usize;
        out.push(RawAttribute {
            name_index,
            info: r.take(len)?.to_vec(),
        });
    }
    Ok(out)
}

fn read_members(
    r: &mut Reader<'_>,
    pool: &ConstantPool,
    methods: bool,
) -> Result<Vec<MemberInfo>, ClassFileError> {
    let n = r.u16()?;
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let access_flags = r.u16()?;
        let name_index = r.u16()?;
        let descriptor_index = r.u16()?;
        let mut attributes = Vec::new();
        for raw in read_raw_attributes(r)? {
            if methods && pool.utf8(raw.name_index)? == "Code" {
                attributes.push(Attribute::Code(parse_code(&raw.info)?));
            } else {
                attributes.push(Attribute::Other(raw));
            }
        }
        out.push(MemberInfo {
            access_flags,
            name_index,
            descriptor_index,
            attributes,
        });
    }
    Ok(out)
}

fn parse_code(info: &[u8]) -> Result<CodeAttribute, ClassFileError> {
    let mut r = Reader { bytes: info, pos: 0 };
    let max_stack = r.u16()?;
    let max_locals = r.u16()?;
    let len = r.u32()? as usize;
    let instructions = decode_instructions(r.take(len)?)?;
    let n = r.u16()?;
    let mut exception_table = Vec::with_capacity(n as usize);
    for _ in 0..n {
        exception_table.push(ExceptionEntry {
            start_pc: r.u16()?,
            end_pc: r.u16()?,
            handler_pc: r.u16()?,
            catch_type: r.u16()?,
        });
    }
    let attributes = read_raw_attributes(&mut r)?;
    if r.pos != info.len() {
        return Err(ClassFileError::MalformedCode("Code attribute length mismatch".into()));
    }
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

fn expect(index: u16, ok: bool, expected: &'static str) -> Result<(), ClassFileError> {
    if ok {
        Ok(())
    } else {
        Err(ClassFileError::BadConstantPoolRef { index, expected })
    }
}

fn validate_refs(class: &ClassFile) -> Result<(), ClassFileError> {
    let pool = &class.constant_pool;
    for (i, c) in pool.iter() {
        match *c {
            Constant::Class { name } | Constant::Module { name } | Constant::Package { name } => {
                pool.utf8(name)?;
            }
            Constant::String { value } => {
                pool.utf8(value)?;
            }
            Constant::Fieldref { class, name_and_type }
            | Constant::Methodref { class, name_and_type }
            | Constant::InterfaceMethodref { class, name_and_type } => {
                pool.class_name(class)?;
                let (_, desc) = pool.name_and_type(name_and_type)?;
                let well_formed = if matches!(c, Constant::Fieldref { .. }) {
                    parse_field_descriptor(desc).is_ok()
                } else {
                    MethodDescriptor::parse(desc).is_ok()
                };
                expect(i, well_formed, "member reference with a valid descriptor")?;
            }
            Constant::NameAndType { name, descriptor } => {
                pool.utf8(name)?;
                pool.utf8(descriptor)?;
            }
            Constant::MethodType { descriptor } => {
                pool.utf8(descriptor)?;
            }
            Constant::MethodHandle { reference, .. } => {
                let ok = matches!(
                    pool.get(reference)?,
                    Constant::Fieldref { .. } | Constant::Methodref { .. } | Constant::InterfaceMethodref { .. }
                );
                expect(reference, ok, "member reference")?;
            }
            Constant::Dynamic { name_and_type, .. } | Constant::InvokeDynamic { name_and_type, .. } => {
                pool.name_and_type(name_and_type)?;
            }
            _ => {}
        }
    }
    pool.class_name(class.this_class)?;
    if class.super_class != 0 {
        pool.class_name(class.super_class)?;
    }
    for &i in &class.interfaces {
        pool.class_name(i)?;
    }
    for f in &class.fields {
        pool.utf8(f.name_index)?;
        let d = pool.utf8(f.descriptor_index)?;
        parse_field_descriptor(d)?;
    }
    for m in &class.methods {
        pool.utf8(m.name_index)?;
        let d = pool.utf8(m.descriptor_index)?;
        MethodDescriptor::parse(d)?;
        if let Some(code) = m.code() {
            validate_code_refs(code, pool)?;
        }
    }
    for a in &class.attributes {
        pool.utf8(a.name_index)?;
    }
    Ok(())
}

fn validate_code_refs(code: &CodeAttribute, pool: &ConstantPool) -> Result<(), ClassFileError> {
    for e in &code.exception_table {
        if e.catch_type != 0 {
            pool.class_name(e.catch_type)?;
        }
    }
    for insn in &code.instructions {
        let op = insn.opcode;
        let idx = match insn.operand {
            Operand::Constant(i) | Operand::Interface { index: i, .. } | Operand::MultiArray { index: i, .. } => i,
            _ => continue,
        };
        let c = pool.get(idx)?;
        let (ok, expected) = match op {
            LDC | LDC_W => (
                matches!(
                    c,
                    Constant::Integer(_)
                        | Constant::Float(_)
                        | Constant::String { .. }
                        | Constant::Class { .. }
                        | Constant::MethodType { .. }
                        | Constant::MethodHandle { .. }
                        | Constant::Dynamic { .. }
                ),
                "loadable single-slot constant",
            ),
            LDC2_W => (matches!(c, Constant::Long(_) | Constant::Double(_) | Constant::Dynamic { .. }), "Long or Double"),
            GETSTATIC..=PUTFIELD => (matches!(c, Constant::Fieldref { .. }), "Fieldref"),
            INVOKEVIRTUAL => (matches!(c, Constant::Methodref { .. }), "Methodref"),
            INVOKESPECIAL | INVOKESTATIC => (
                matches!(c, Constant::Methodref { .. } | Constant::InterfaceMethodref { .. }),
                "Methodref",
            ),
            INVOKEINTERFACE => (matches!(c, Constant::InterfaceMethodref { .. }), "InterfaceMethodref"),
            INVOKEDYNAMIC => (matches!(c, Constant::InvokeDynamic { .. }), "InvokeDynamic"),
            NEW | ANEWARRAY | CHECKCAST | INSTANCEOF | MULTIANEWARRAY => (matches!(c, Constant::Class { .. }), "Class"),
            _ => (true, ""),
        };
        expect(idx, ok, expected)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_magic() {
        let bytes = [0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 52];
        assert_eq!(parse_class(&bytes), Err(ClassFileError::BadMagic(0xdead_beef)));
    }

    #[test]
    fn rejects_unsupported_versions() {
        for major in [44u16, 66, 70] {
            let mut bytes = vec![0xca, 0xfe, 0xba, 0xbe, 0, 0];
            bytes.extend_from_slice(&major.to_be_bytes());
            assert_eq!(parse_class(&bytes), Err(ClassFileError::UnsupportedVersion(major)));
        }
    }

    #[test]
    fn truncated_header() {
        assert_eq!(parse_class(&[0xca, 0xfe]), Err(ClassFileError::TruncatedInput));
    }
}

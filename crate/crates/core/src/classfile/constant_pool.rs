use super::ClassFileError;

pub const TAG_UTF8: u8 = 1;
pub const TAG_INTEGER: u8 = 3;
pub const TAG_FLOAT: u8 = 4;
pub const TAG_LONG: u8 = 5;
pub const TAG_DOUBLE: u8 = 6;
pub const TAG_CLASS: u8 = 7;
pub const TAG_STRING: u8 = 8;
pub const TAG_FIELDREF: u8 = 9;
pub const TAG_METHODREF: u8 = 10;
pub const TAG_INTERFACE_METHODREF: u8 = 11;
pub const TAG_NAME_AND_TYPE: u8 = 12;
pub const TAG_METHOD_HANDLE: u8 = 15;
pub const TAG_METHOD_TYPE: u8 = 16;
pub const TAG_DYNAMIC: u8 = 17;
pub const TAG_INVOKE_DYNAMIC: u8 = 18;
pub const TAG_MODULE: u8 = 19;
pub const TAG_PACKAGE: u8 = 20;

/// One constant-pool slot. Floating-point values are kept as raw bits so the
/// pool stays `Eq` and NaN payloads survive a round trip.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constant {
    Utf8(String),
    Integer(i32),
    Float(u32),
    Long(i64),
    Double(u64),
    Class { name: u16 },
    String { value: u16 },
    Fieldref { class: u16, name_and_type: u16 },
    Methodref { class: u16, name_and_type: u16 },
    InterfaceMethodref { class: u16, name_and_type: u16 },
    NameAndType { name: u16, descriptor: u16 },
    MethodHandle { kind: u8, reference: u16 },
    MethodType { descriptor: u16 },
    Dynamic { bootstrap: u16, name_and_type: u16 },
    InvokeDynamic { bootstrap: u16, name_and_type: u16 },
    Module { name: u16 },
    Package { name: u16 },
    /// Slot 0, and the shadow slot following every Long/Double.
    Unusable,
}

impl Constant {
    pub fn tag(&self) -> u8 {
        match self {
            Constant::Utf8(_) => TAG_UTF8,
            Constant::Integer(_) => TAG_INTEGER,
            Constant::Float(_) => TAG_FLOAT,
            Constant::Long(_) => TAG_LONG,
            Constant::Double(_) => TAG_DOUBLE,
            Constant::Class { .. } => TAG_CLASS,
            Constant::String { .. } => TAG_STRING,
            Constant::Fieldref { .. } => TAG_FIELDREF,
            Constant::Methodref { .. } => TAG_METHODREF,
            Constant::InterfaceMethodref { .. } => TAG_INTERFACE_METHODREF,
            Constant::NameAndType { .. } => TAG_NAME_AND_TYPE,
            Constant::MethodHandle { .. } => TAG_METHOD_HANDLE,
            Constant::MethodType { .. } => TAG_METHOD_TYPE,
            Constant::Dynamic { .. } => TAG_DYNAMIC,
            Constant::InvokeDynamic { .. } => TAG_INVOKE_DYNAMIC,
            Constant::Module { .. } => TAG_MODULE,
            Constant::Package { .. } => TAG_PACKAGE,
            Constant::Unusable => 0,
        }
    }

    pub fn is_wide(&self) -> bool {
        matches!(self, Constant::Long(_) | Constant::Double(_))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Constant::Utf8(_) => "Utf8",
            Constant::Integer(_) => "Integer",
            Constant::Float(_) => "Float",
            Constant::Long(_) => "Long",
            Constant::Double(_) => "Double",
            Constant::Class { .. } => "Class",
            Constant::String { .. } => "String",
            Constant::Fieldref { .. } => "Fieldref",
            Constant::Methodref { .. } => "Methodref",
            Constant::InterfaceMethodref { .. } => "InterfaceMethodref",
            Constant::NameAndType { .. } => "NameAndType",
            Constant::MethodHandle { .. } => "MethodHandle",
            Constant::MethodType { .. } => "MethodType",
            Constant::Dynamic { .. } => "Dynamic",
            Constant::InvokeDynamic { .. } => "InvokeDynamic",
            Constant::Module { .. } => "Module",
            Constant::Package { .. } => "Package",
            Constant::Unusable => "Unusable",
        }
    }
}

/// A resolved field or method reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberRef<'a> {
    /// Internal (slash-separated) owner name, or an array descriptor.
    pub owner: &'a str,
    pub name: &'a str,
    pub descriptor: &'a str,
    pub interface: bool,
}

/// Constant pool with JVM 1-based indexing. Index 0 is never valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstantPool {
    entries: Vec<Constant>,
}

impl Default for ConstantPool {
    fn default() -> Self {
        Self::new()
    }
}

impl ConstantPool {
    pub fn new() -> Self {
        ConstantPool {
            entries: vec![Constant::Unusable],
        }
    }

    /// Builds a pool from raw slots, index 0 included.
    pub fn from_entries(entries: Vec<Constant>) -> Self {
        ConstantPool { entries }
    }

    /// The `constant_pool_count` value written to a class file.
    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Constant] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u16, &Constant)> {
        self.entries
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| !matches!(c, Constant::Unusable))
            .map(|(i, c)| (i as u16, c))
    }

    pub fn get(&self, index: u16) -> Result<&Constant, ClassFileError> {
        match self.entries.get(index as usize) {
            Some(Constant::Unusable) | None => Err(ClassFileError::BadConstantPoolRef {
                index,
                expected: "any",
            }),
            Some(c) => Ok(c),
        }
    }

    pub fn get_mut(&mut self, index: u16) -> Option<&mut Constant> {
        match self.entries.get_mut(index as usize) {
            Some(Constant::Unusable) | None => None,
            Some(c) => Some(c),
        }
    }

    fn bad(index: u16, expected: &'static str) -> ClassFileError {
        ClassFileError::BadConstantPoolRef { index, expected }
    }

    pub fn utf8(&self, index: u16) -> Result<&str, ClassFileError> {
        match self.get(index) {
            Ok(Constant::Utf8(s)) => Ok(s),
            _ => Err(Self::bad(index, "Utf8")),
        }
    }

    /// Internal name of a `Class` constant, e.g. `a/b/X` or `[La/b/X;`.
    pub fn class_name(&self, index: u16) -> Result<&str, ClassFileError> {
        match self.get(index) {
            Ok(Constant::Class { name }) => self.utf8(*name),
            _ => Err(Self::bad(index, "Class")),
        }
    }

    pub fn name_and_type(&self, index: u16) -> Result<(&str, &str), ClassFileError> {
        match self.get(index) {
            Ok(Constant::NameAndType { name, descriptor }) => {
                Ok((self.utf8(*name)?, self.utf8(*descriptor)?))
            }
            _ => Err(Self::bad(index, "NameAndType")),
        }
    }

    pub fn field_ref(&self, index: u16) -> Result<MemberRef<'_>, ClassFileError> {
        match self.get(index) {
            Ok(Constant::Fieldref {
                class,
                name_and_type,
            }) => self.member(*class, *name_and_type, false),
            _ => Err(Self::bad(index, "Fieldref")),
        }
    }

    /// Resolves a `Methodref` or `InterfaceMethodref`.
    pub fn method_ref(&self, index: u16) -> Result<MemberRef<'_>, ClassFileError> {
        match self.get(index) {
            Ok(Constant::Methodref {
                class,
                name_and_type,
            }) => self.member(*class, *name_and_type, false),
            Ok(Constant::InterfaceMethodref {
                class,
                name_and_type,
            }) => self.member(*class, *name_and_type, true),
            _ => Err(Self::bad(index, "Methodref")),
        }
    }

    fn member(&self, class: u16, nat: u16, interface: bool) -> Result<MemberRef<'_>, ClassFileError> {
        let owner = self.class_name(class)?;
        let (name, descriptor) = self.name_and_type(nat)?;
        Ok(MemberRef {
            owner,
            name,
            descriptor,
            interface,
        })
    }

    /// Appends a constant without deduplication and returns its index.
    pub fn push(&mut self, constant: Constant) -> Result<u16, ClassFileError> {
        let index = self.entries.len();
        let wide = constant.is_wide();
        if index + usize::from(wide) > u16::MAX as usize - 1 {
            return Err(ClassFileError::PoolOverflow);
        }
        self.entries.push(constant);
        if wide {
            self.entries.push(Constant::Unusable);
        }
        Ok(index as u16)
    }

    /// Returns the index of an equal constant, appending one if absent.
    pub fn intern(&mut self, constant: Constant) -> Result<u16, ClassFileError> {
        if let Some(pos) = self.entries.iter().position(|c| *c == constant) {
            if pos != 0 && !matches!(constant, Constant::Unusable) {
                return Ok(pos as u16);
            }
        }
        self.push(constant)
    }

    pub fn utf8_index(&mut self, s: &str) -> Result<u16, ClassFileError> {
        self.intern(Constant::Utf8(s.to_string()))
    }

    pub fn class_index(&mut self, internal_name: &str) -> Result<u16, ClassFileError> {
        let name = self.utf8_index(internal_name)?;
        self.intern(Constant::Class { name })
    }

    pub fn string_index(&mut self, s: &str) -> Result<u16, ClassFileError> {
        let value = self.utf8_index(s)?;
        self.intern(Constant::String { value })
    }

    pub fn name_and_type_index(&mut self, name: &str, descriptor: &str) -> Result<u16, ClassFileError> {
        let name = self.utf8_index(name)?;
        let descriptor = self.utf8_index(descriptor)?;
        self.intern(Constant::NameAndType { name, descriptor })
    }

    pub fn field_ref_index(&mut self, owner: &str, name: &str, descriptor: &str) -> Result<u16, ClassFileError> {
        let class = self.class_index(owner)?;
        let name_and_type = self.name_and_type_index(name, descriptor)?;
        self.intern(Constant::Fieldref {
            class,
            name_and_type,
        })
    }

    pub fn method_ref_index(
        &mut self,
        owner: &str,
        name: &str,
        descriptor: &str,
        interface: bool,
    ) -> Result<u16, ClassFileError> {
        let class = self.class_index(owner)?;
        let name_and_type = self.name_and_type_index(name, descriptor)?;
        self.intern(if interface {
            Constant::InterfaceMethodref {
                class,
                name_and_type,
            }
        } else {
            Constant::Methodref {
                class,
                name_and_type,
            }
        })
    }
}

/// Decodes JVM "modified UTF-8". Unpaired surrogates are replaced.
pub fn decode_modified_utf8(bytes: &[u8]) -> Result<String, ClassFileError> {
    let mut units: Vec<u16> = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if b & 0x80 == 0 {
            if b == 0 {
                return Err(ClassFileError::BadUtf8);
            }
            units.push(b as u16);
            i += 1;
        } else if b & 0xe0 == 0xc0 {
            let b2 = *bytes.get(i + 1).ok_or(ClassFileError::BadUtf8)?;
            if b2 & 0xc0 != 0x80 {
                return Err(ClassFileError::BadUtf8);
            }
            units.push((((b & 0x1f) as u16) << 6) | (b2 & 0x3f) as u16);
            i += 2;
        } else if b & 0xf0 == 0xe0 {
            let b2 = *bytes.get(i + 1).ok_or(ClassFileError::BadUtf8)?;
            let b3 = *bytes.get(i + 2).ok_or(ClassFileError::BadUtf8)?;
            if b2 & 0xc0 != 0x80 || b3 & 0xc0 != 0x80 {
                return Err(ClassFileError::BadUtf8);
            }
            units.push((((b & 0x0f) as u16) << 12) | (((b2 & 0x3f) as u16) << 6) | (b3 & 0x3f) as u16);
            i += 3;
        } else {
            return Err(ClassFileError::BadUtf8);
        }
    }
    Ok(String::from_utf16_lossy(&units))
}

pub fn encode_modified_utf8(s: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(s.len());
    for unit in s.encode_utf16() {
        match unit {
            0x0001..=0x007f => out.push(unit as u8),
            0x0000 | 0x0080..=0x07ff => {
                out.push(0xc0 | ((unit >> 6) & 0x1f) as u8);
                out.push(0x80 | (unit & 0x3f) as u8);
            }
            _ => {
                out.push(0xe0 | ((unit >> 12) & 0x0f) as u8);
                out.push(0x80 | ((unit >> 6) & 0x3f) as u8);
                out.push(0x80 | (unit & 0x3f) as u8);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wide_constants_take_two_slots() {
        let mut pool = ConstantPool::new();
        let a = pool.push(Constant::Long(7)).unwrap();
        let b = pool.push(Constant::Integer(1)).unwrap();
        assert_eq!((a, b), (1, 3));
        assert!(pool.get(2).is_err());
        assert_eq!(pool.count(), 4);
    }

    #[test]
    fn intern_reuses_entries() {
        let mut pool = ConstantPool::new();
        let a = pool.class_index("a/C").unwrap();
        let b = pool.class_index("a/C").unwrap();
        assert_eq!(a, b);
        assert_eq!(pool.class_name(a).unwrap(), "a/C");
    }

    #[test]
    fn modified_utf8_handles_nul_and_supplementary() {
        let s = "a\u{0}b\u{1F600}é";
        let bytes = encode_modified_utf8(s);
        assert!(!bytes.contains(&0));
        assert_eq!(decode_modified_utf8(&bytes).unwrap(), s);
    }

    #[test]
    fn wrong_tag_is_reported() {
        let mut pool = ConstantPool::new();
        let i = pool.push(Constant::Integer(3)).unwrap();
        assert!(matches!(
            pool.utf8(i),
            Err(ClassFileError::BadConstantPoolRef { expected: "Utf8", .. })
        ));
    }
}

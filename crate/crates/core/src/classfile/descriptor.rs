//! Field and method descriptors, rendered in Java source form with dotted
//! package names (`a.b.X`, `int[]`).

use std::fmt;

use super::ClassFileError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FieldType {
    Byte,
    Char,
    Double,
    Float,
    Int,
    Long,
    Short,
    Boolean,
    /// Dotted class name.
    Object(String),
    Array(Box<FieldType>),
}

impl FieldType {
    /// Operand-stack slots occupied by a value of this type.
    pub fn slots(&self) -> u16 {
        match self {
            FieldType::Long | FieldType::Double => 2,
            _ => 1,
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, FieldType::Object(_) | FieldType::Array(_))
    }

    pub fn to_descriptor(&self) -> String {
        let mut s = String::new();
        self.write_descriptor(&mut s);
        s
    }

    fn write_descriptor(&self, out: &mut String) {
        match self {
            FieldType::Byte => out.push('B'),
            FieldType::Char => out.push('C'),
            FieldType::Double => out.push('D'),
            FieldType::Float => out.push('F'),
            FieldType::Int => out.push('I'),
            FieldType::Long => out.push('J'),
            FieldType::Short => out.push('S'),
            FieldType::Boolean => out.push('Z'),
            FieldType::Object(name) => {
                out.push('L');
                out.push_str(&internal_name(name));
                out.push(';');
            }
            FieldType::Array(inner) => {
                out.push('[');
                inner.write_descriptor(out);
            }
        }
    }
}

impl fmt::Display for FieldType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldType::Byte => f.write_str("byte"),
            FieldType::Char => f.write_str("char"),
            FieldType::Double => f.write_str("double"),
            FieldType::Float => f.write_str("float"),
            FieldType::Int => f.write_str("int"),
            FieldType::Long => f.write_str("long"),
            FieldType::Short => f.write_str("short"),
            FieldType::Boolean => f.write_str("boolean"),
            FieldType::Object(name) => f.write_str(name),
            FieldType::Array(inner) => write!(f, "{inner}[]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodDescriptor {
    pub params: Vec<FieldType>,
    /// `None` for `void`.
    pub ret: Option<FieldType>,
}

impl MethodDescriptor {
    pub fn parse(desc: &str) -> Result<Self, ClassFileError> {
        let bad = || ClassFileError::BadDescriptor(desc.to_string());
        let bytes = desc.as_bytes();
        if bytes.first() != Some(&b'(') {
            return Err(bad());
        }
        let mut pos = 1;
        let mut params = Vec::new();
        while bytes.get(pos) != Some(&b')') {
            if pos >= bytes.len() {
                return Err(bad());
            }
            let (ty, next) = parse_field_type(desc, pos).ok_or_else(bad)?;
            params.push(ty);
            pos = next;
        }
        pos += 1;
        let ret = if desc.get(pos..) == Some("V") {
            None
        } else {
            let (ty, next) = parse_field_type(desc, pos).ok_or_else(bad)?;
            if next != desc.len() {
                return Err(bad());
            }
            Some(ty)
        };
        Ok(MethodDescriptor { params, ret })
    }

    pub fn param_slots(&self) -> u16 {
        self.params.iter().map(FieldType::slots).sum()
    }

    pub fn ret_slots(&self) -> u16 {
        self.ret.as_ref().map_or(0, FieldType::slots)
    }

    pub fn return_type_name(&self) -> String {
        self.ret.as_ref().map_or_else(|| "void".to_string(), ToString::to_string)
    }

    /// `(a.b.X,int)` style parameter list.
    pub fn param_list(&self) -> String {
        let parts: Vec<String> = self.params.iter().map(ToString::to_string).collect();
        format!("({})", parts.join(","))
    }

    pub fn to_descriptor(&self) -> String {
        let mut s = String::from("(");
        for p in &self.params {
            s.push_str(&p.to_descriptor());
        }
        s.push(')');
        match &self.ret {
            Some(r) => s.push_str(&r.to_descriptor()),
            None => s.push('V'),
        }
        s
    }
}

pub fn parse_field_descriptor(desc: &str) -> Result<FieldType, ClassFileError> {
    match parse_field_type(desc, 0) {
        Some((ty, end)) if end == desc.len() => Ok(ty),
        _ => Err(ClassFileError::BadDescriptor(desc.to_string())),
    }
}

fn parse_field_type(desc: &str, pos: usize) -> Option<(FieldType, usize)> {
    let b = *desc.as_bytes().get(pos)?;
    let prim = match b {
        b'B' => Some(FieldType::Byte),
        b'C' => Some(FieldType::Char),
        b'D' => Some(FieldType::Double),
        b'F' => Some(FieldType::Float),
        b'I' => Some(FieldType::Int),
        b'J' => Some(FieldType::Long),
        b'S' => Some(FieldType::Short),
        b'Z' => Some(FieldType::Boolean),
        _ => None,
    };
    if let Some(p) = prim {
        return Some((p, pos + 1));
    }
    match b {
        b'L' => {
            let end = pos + desc[pos..].find(';')?;
            let name = &desc[pos + 1..end];
            if name.is_empty() || name.contains(['.', '[', '(', ')']) {
                return None;
            }
            Some((FieldType::Object(dotted_name(name)), end + 1))
        }
        b'[' => {
            let (inner, next) = parse_field_type(desc, pos + 1)?;
            Some((FieldType::Array(Box::new(inner)), next))
        }
        _ => None,
    }
}

/// `a/b/X` → `a.b.X`.
pub fn dotted_name(internal: &str) -> String {
    internal.replace('/', ".")
}

/// `a.b.X` → `a/b/X`.
pub fn internal_name(dotted: &str) -> String {
    dotted.replace('.', "/")
}

/// Renders a `Class` constant's name (internal name or array descriptor)
/// as a Java type.
pub fn class_constant_type(internal: &str) -> String {
    if internal.starts_with('[') {
        match parse_field_descriptor(internal) {
            Ok(t) => t.to_string(),
            Err(_) => dotted_name(internal),
        }
    } else {
        dotted_name(internal)
    }
}

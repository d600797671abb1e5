use serde::{Deserialize, Serialize};

use super::descriptor::MethodDescriptor;
use super::{ClassFile, ClassFileError, ACC_BRIDGE, ACC_SYNTHETIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstructKind {
    Class,
    Interface,
    Method,
}

/// A class, interface or method identified by its fully qualified name.
///
/// Method names follow the `pkg.Cls: ret name(params)` form, for example
/// `a.C: void foo(a.b.X)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConstructId {
    pub kind: ConstructKind,
    pub fqn: String,
    pub unqualified: String,
    /// Declaring class for methods; the class itself otherwise.
    pub class_fqn: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bridge: bool,
}

impl ConstructId {
    pub fn class(fqn: &str, interface: bool) -> Self {
        ConstructId {
            kind: if interface {
                ConstructKind::Interface
            } else {
                ConstructKind::Class
            },
            fqn: fqn.to_string(),
            unqualified: unqualify_name(fqn),
            class_fqn: fqn.to_string(),
            synthetic: false,
            bridge: false,
        }
    }

    pub fn method(class_fqn: &str, name: &str, descriptor: &MethodDescriptor) -> Self {
        let fqn = method_fqn(class_fqn, name, descriptor);
        ConstructId {
            kind: ConstructKind::Method,
            unqualified: unqualify_name(&fqn),
            fqn,
            class_fqn: class_fqn.to_string(),
            synthetic: false,
            bridge: false,
        }
    }

    pub fn is_method(&self) -> bool {
        self.kind == ConstructKind::Method
    }

    /// The `ret name(params)` part of a method FQN, or the whole FQN for types.
    pub fn member_signature(&self) -> &str {
        match self.fqn.split_once(": ") {
            Some((_, sig)) if self.is_method() => sig,
            _ => &self.fqn,
        }
    }
}

pub fn method_fqn(class_fqn: &str, name: &str, descriptor: &MethodDescriptor) -> String {
    format!(
        "{class_fqn}: {} {name}{}",
        descriptor.return_type_name(),
        descriptor.param_list()
    )
}

/// One construct for the class or interface itself, then one per declared
/// method in declaration order.
pub fn list_constructs(class: &ClassFile) -> Result<Vec<ConstructId>, ClassFileError> {
    let name = class.name()?;
    let mut out = vec![ConstructId::class(&name, class.is_interface())];
    for m in &class.methods {
        let desc = MethodDescriptor::parse(class.member_descriptor(m)?)?;
        let mut id = ConstructId::method(&name, class.member_name(m)?, &desc);
        id.synthetic = m.access_flags & ACC_SYNTHETIC != 0;
        id.bridge = m.access_flags & ACC_BRIDGE != 0;
        out.push(id);
    }
    Ok(out)
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Strips package prefixes from every dotted name in `s`.
///
/// A dotted chain directly followed by `(` names a method, so its owner class
/// is kept (`r.a.b.X.bar(` becomes `X.bar(`); any other chain keeps only its
/// last segment. Chains starting with a digit and text inside double-quoted
/// literals are left alone.
pub fn unqualify_name(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '"' {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            out.extend(&chars[start..i]);
            continue;
        }
        let chain_start = is_ident_char(c) && (i == 0 || !(is_ident_char(chars[i - 1]) || chars[i - 1] == '.'));
        if !chain_start {
            out.push(c);
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && (is_ident_char(chars[i]) || (chars[i] == '.' && i + 1 < chars.len() && is_ident_char(chars[i + 1]))) {
            i += 1;
        }
        let chain: String = chars[start..i].iter().collect();
        if c.is_ascii_digit() {
            out.push_str(&chain);
            continue;
        }
        let keep = if chars.get(i) == Some(&'(') { 2 } else { 1 };
        let segs: Vec<&str> = chain.split('.').collect();
        let from = segs.len().saturating_sub(keep);
        out.push_str(&segs[from..].join("."));
    }
    out
}

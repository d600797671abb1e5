//! Produces modified variants of JARs for robustness experiments.
//!
//! * Type 1 re-emits every class through a compiler-variant transformer:
//!   local slots are permuted, some conditional branches are inverted around
//!   an extra `goto`, and `nop`s are sprinkled through the code.
//! * Type 2 merges several JARs into one, keeping each input's metadata
//!   under `META-INF/bundled/<n>/`.
//! * Type 3 merges like type 2 but drops all metadata and entry timestamps.
//! * Type 4 merges like type 2 and relocates every class under a package
//!   prefix, rewriting class and descriptor references in the constant pool.
//!
//! All randomness comes from a seeded ChaCha generator, so a given seed
//! always produces the same bytes.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::classfile::builder::{assemble, to_indexed};
use crate::classfile::code::stack_depths;
use crate::classfile::descriptor::MethodDescriptor;
use crate::classfile::opcodes::*;
use crate::classfile::{
    emit_class, is_metadata_path, parse_class, Attribute, ClassFile, ClassFileError, CodeAttribute, Constant, DosTime, JarArchive, JarEntry,
    JarError, MemberInfo, Operand,
};

#[derive(Debug, Error)]
pub enum ModifyError {
    #[error("relocation collision: {0} is produced by more than one input class")]
    RelocationCollision(String),
    #[error("entry {0} differs between inputs")]
    DuplicateEntry(String),
    #[error("invalid relocation prefix {0:?}")]
    BadPrefix(String),
    #[error("type {0} needs {1}")]
    Inputs(u8, &'static str),
    #[error("cannot rewrite {path}")]
    Class {
        path: String,
        #[source]
        source: ClassFileError,
    },
    #[error(transparent)]
    Jar(#[from] JarError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModKind {
    Type1,
    Type2,
    Type3,
    Type4,
}

impl TryFrom<u8> for ModKind {
    type Error = String;

    fn try_from(k: u8) -> Result<Self, String> {
        match k {
            1 => Ok(ModKind::Type1),
            2 => Ok(ModKind::Type2),
            3 => Ok(ModKind::Type3),
            4 => Ok(ModKind::Type4),
            _ => Err(format!("modification type must be 1-4, got {k}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModifyParams {
    pub seed: u64,
    /// Dotted package prefix for type 4, for example `r.`.
    pub prefix: String,
}

impl Default for ModifyParams {
    fn default() -> Self {
        ModifyParams {
            seed: 0,
            prefix: "r.".into(),
        }
    }
}

pub fn modify(inputs: &[JarArchive], kind: ModKind, params: &ModifyParams) -> Result<JarArchive, ModifyError> {
    match kind {
        ModKind::Type1 => {
            let [input] = inputs else {
                return Err(ModifyError::Inputs(1, "exactly one input JAR"));
            };
            recompile(input, params.seed)
        }
        ModKind::Type2 | ModKind::Type3 | ModKind::Type4 if inputs.is_empty() => {
            Err(ModifyError::Inputs(kind as u8 + 1, "at least one input JAR"))
        }
        ModKind::Type2 => Ok(JarArchive::from_entries(merge(inputs, true)?)?),
        ModKind::Type3 => {
            let mut entries = merge(inputs, false)?;
            for e in &mut entries {
                e.modified = DosTime::default();
            }
            Ok(JarArchive::from_entries(entries)?)
        }
        ModKind::Type4 => relocate(inputs, &params.prefix),
    }
}

fn class_err(path: &str) -> impl FnOnce(ClassFileError) -> ModifyError + '_ {
    move |source| ModifyError::Class {
        path: path.to_string(),
        source,
    }
}

/// Concatenates inputs in order. Identical repeated entries are kept once;
/// metadata either moves under `META-INF/bundled/<n>/` or is dropped.
fn merge(inputs: &[JarArchive], keep_metadata: bool) -> Result<Vec<JarEntry>, ModifyError> {
    let mut out: Vec<JarEntry> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    if keep_metadata {
        out.push(JarEntry::new("META-INF/MANIFEST.MF", b"Manifest-Version: 1.0\r\nCreated-By: jarsig modify\r\n\r\n".to_vec()));
    }
    for (n, jar) in inputs.iter().enumerate() {
        for e in &jar.entries {
            let mut e = e.clone();
            if is_metadata_path(&e.path) {
                if !keep_metadata {
                    continue;
                }
                let rest = e.path.strip_prefix("META-INF/").unwrap_or(&e.path);
                e.path = format!("META-INF/bundled/{n}/{rest}");
            } else if e.is_dir() {
                continue;
            }
            match seen.get(&e.path) {
                Some(&k) if out[k].data == e.data => {}
                Some(_) => return Err(ModifyError::DuplicateEntry(e.path)),
                None => {
                    seen.insert(e.path.clone(), out.len());
                    out.push(e);
                }
            }
        }
    }
    Ok(out)
}

fn recompile(input: &JarArchive, seed: u64) -> Result<JarArchive, ModifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(input.entries.len());
    for e in &input.entries {
        let mut e = e.clone();
        if let Some(class) = input.classes.get(&e.path) {
            let variant = compiler_variant(class, &mut rng).map_err(class_err(&e.path))?;
            e.data = emit_class(&variant).map_err(class_err(&e.path))?;
        }
        entries.push(e);
    }
    Ok(JarArchive::from_entries(entries)?)
}

/// Type-1 transformation of one class.
pub fn compiler_variant(class: &ClassFile, rng: &mut impl Rng) -> Result<ClassFile, ClassFileError> {
    let mut out = class.clone();
    for m in 0..out.methods.len() {
        let method = &out.methods[m];
        let Some(code) = method.code() else { continue };
        let desc = MethodDescriptor::parse(out.member_descriptor(method)?)?;
        let fixed_slots = desc.param_slots() + u16::from(!method.is_static());
        let new_code = vary_code(code, fixed_slots, &out, rng)?;
        *out.methods[m].code_mut().expect("code present") = new_code;
    }
    Ok(out)
}

/// Load/store kind (0 = int, 1 = long, 2 = float, 3 = double, 4 = reference),
/// whether it is a store, and the slot.
fn local_access(opcode: u8, operand: &Operand<usize>) -> Option<(u8, bool, u16)> {
    match (opcode, operand) {
        (ILOAD..=ALOAD, Operand::Local { index, .. }) => Some((opcode - ILOAD, false, *index)),
        (ISTORE..=ASTORE, Operand::Local { index, .. }) => Some((opcode - ISTORE, true, *index)),
        (ILOAD_0..=ALOAD_3, _) => Some(((opcode - ILOAD_0) / 4, false, ((opcode - ILOAD_0) % 4) as u16)),
        (ISTORE_0..=ASTORE_3, _) => Some(((opcode - ISTORE_0) / 4, true, ((opcode - ISTORE_0) % 4) as u16)),
        _ => None,
    }
}

fn encode_local(kind: u8, store: bool, index: u16) -> (u8, Operand<usize>) {
    let (short, generic) = if store { (ISTORE_0, ISTORE) } else { (ILOAD_0, ILOAD) };
    if index <= 3 {
        (short + kind * 4 + index as u8, Operand::None)
    } else {
        (generic + kind, Operand::Local { index, wide: index > 255 })
    }
}

fn condition_operands(opcode: u8) -> u16 {
    if (IF_ICMPEQ..=IF_ACMPNE).contains(&opcode) {
        2
    } else {
        1
    }
}

fn vary_code(code: &CodeAttribute, fixed_slots: u16, class: &ClassFile, rng: &mut impl Rng) -> Result<CodeAttribute, ClassFileError> {
    let (mut insns, handlers) = to_indexed(code);
    let depths = stack_depths(&code.instructions, &code.exception_table, &class.constant_pool)?;

    // Slot permutation over single-width locals above the parameters.
    let mut single = BTreeSet::new();
    let mut pinned = BTreeSet::new();
    for (op, operand) in &insns {
        match local_access(*op, operand) {
            Some((1 | 3, _, i)) => {
                pinned.insert(i);
                pinned.insert(i + 1);
            }
            Some((_, _, i)) => {
                single.insert(i);
            }
            None => match operand {
                Operand::Iinc { index, .. } => {
                    single.insert(*index);
                }
                _ if *op == RET => return Ok(code.clone()),
                _ => {}
            },
        }
    }
    let movable: Vec<u16> = single.into_iter().filter(|s| *s >= fixed_slots && !pinned.contains(s)).collect();
    let mut shuffled = movable.clone();
    shuffled.shuffle(rng);
    let perm: BTreeMap<u16, u16> = movable.into_iter().zip(shuffled).collect();
    for (op, operand) in &mut insns {
        if let Some((kind, store, i)) = local_access(*op, operand) {
            if let Some(&j) = perm.get(&i) {
                (*op, *operand) = encode_local(kind, store, j);
            }
        } else if let Operand::Iinc { index, delta, .. } = operand {
            if let Some(&j) = perm.get(index) {
                *operand = Operand::Iinc {
                    index: j,
                    delta: *delta,
                    wide: j > 255 || !(-128..=127).contains(delta),
                };
            }
        }
    }

    // Polarity flips and nop padding. Targets still name original indices
    // until `start` remaps them.
    let n = insns.len();
    let forced_nop = rng.gen_range(0..n.max(1));
    let mut out: Vec<(u8, Operand<usize>)> = Vec::with_capacity(n + n / 2);
    let mut start = Vec::with_capacity(n + 1);
    for (k, (op, operand)) in insns.into_iter().enumerate() {
        start.push(out.len());
        if k == forced_nop || rng.gen_bool(0.15) {
            out.push((NOP, Operand::None));
        }
        let flippable = is_conditional(op)
            && k + 1 < n
            && depths[k] == Some(condition_operands(op))
            && operand.targets().first().is_some_and(|t| **t != k + 1);
        match operand {
            Operand::Branch(target) if flippable && rng.gen_bool(0.5) => {
                out.push((negate_conditional(op).expect("conditional"), Operand::Branch(k + 1)));
                out.push((GOTO, Operand::Branch(target)));
            }
            operand => out.push((op, operand)),
        }
    }
    start.push(out.len());
    let out = out.into_iter().map(|(op, operand)| (op, operand.map_targets(|t| start[t]))).collect();
    let handlers: Vec<_> = handlers
        .into_iter()
        .map(|mut h| {
            h.start = start[h.start];
            h.end = start[h.end];
            h.handler = start[h.handler];
            h
        })
        .collect();
    // Debug tables and stack maps describe the old layout, so they go.
    assemble(out, &handlers, code.max_locals, Vec::new(), &class.constant_pool)
}

/// Package prefix in internal form (`r/`), validated.
fn internal_prefix(prefix: &str) -> Result<String, ModifyError> {
    let body = prefix.strip_suffix('.').unwrap_or(prefix);
    let ok = !body.is_empty()
        && body
            .split('.')
            .all(|seg| !seg.is_empty() && seg.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$') && !seg.starts_with(|c: char| c.is_ascii_digit()));
    if !ok {
        return Err(ModifyError::BadPrefix(prefix.to_string()));
    }
    Ok(format!("{}/", body.replace('.', "/")))
}

/// Decides which internal class names move: every name under a top-level
/// package that some input class lives in, and default-package input
/// classes by exact name. JDK packages never move.
struct Relocator {
    prefix: String,
    roots: BTreeSet<String>,
    exact: BTreeSet<String>,
}

impl Relocator {
    fn new(prefix: String, defined: &BTreeSet<String>) -> Self {
        let mut roots = BTreeSet::new();
        let mut exact = BTreeSet::new();
        for name in defined {
            match name.split_once('/') {
                Some((root, _)) if !matches!(root, "java" | "javax" | "jdk" | "sun") => {
                    roots.insert(root.to_string());
                }
                Some(_) => {}
                None => {
                    exact.insert(name.clone());
                }
            }
        }
        Relocator { prefix, roots, exact }
    }

    fn class(&self, name: &str) -> Option<String> {
        if name.starts_with('[') {
            let d = self.descriptor(name);
            return (d != name).then_some(d);
        }
        let moves = match name.split_once('/') {
            Some((root, _)) => self.roots.contains(root),
            None => self.exact.contains(name),
        };
        moves.then(|| format!("{}{name}", self.prefix))
    }

    /// Rewrites every `L...;` reference in a field or method descriptor.
    fn descriptor(&self, desc: &str) -> String {
        let mut out = String::with_capacity(desc.len() + 8);
        let mut rest = desc;
        while let Some(pos) = rest.find('L') {
            out.push_str(&rest[..=pos]);
            let after = &rest[pos + 1..];
            let Some(end) = after.find(';') else {
                out.push_str(after);
                return out;
            };
            let name = &after[..end];
            out.push_str(&self.class(name).unwrap_or_else(|| name.to_string()));
            rest = &after[end..];
        }
        out.push_str(rest);
        out
    }
}

fn relocate_class(class: &ClassFile, r: &Relocator) -> Result<ClassFile, ClassFileError> {
    let mut out = class.clone();
    let pool = &mut out.constant_pool;
    let mut class_names = Vec::new();
    let mut descriptors = Vec::new();
    for (i, c) in pool.iter() {
        match c {
            Constant::Class { name } => class_names.push((i, *name)),
            Constant::NameAndType { descriptor, .. } | Constant::MethodType { descriptor } => descriptors.push((i, *descriptor)),
            _ => {}
        }
    }
    for (i, name_idx) in class_names {
        let Some(new) = r.class(pool.utf8(name_idx)?) else { continue };
        let idx = pool.utf8_index(&new)?;
        if let Some(Constant::Class { name }) = pool.get_mut(i) {
            *name = idx;
        }
    }
    for (i, desc_idx) in descriptors {
        let new = r.descriptor(pool.utf8(desc_idx)?);
        let idx = pool.utf8_index(&new)?;
        match pool.get_mut(i) {
            Some(Constant::NameAndType { descriptor, .. } | Constant::MethodType { descriptor }) => *descriptor = idx,
            _ => unreachable!("collected above"),
        }
    }
    let rewrite_member = |m: &mut MemberInfo, pool: &mut crate::classfile::ConstantPool| -> Result<(), ClassFileError> {
        let new = r.descriptor(pool.utf8(m.descriptor_index)?);
        m.descriptor_index = pool.utf8_index(&new)?;
        Ok(())
    };
    for m in out.fields.iter_mut().chain(out.methods.iter_mut()) {
        rewrite_member(m, &mut out.constant_pool)?;
        for a in &mut m.attributes {
            if let Attribute::Code(c) = a {
                // Local variable tables carry descriptors we do not rewrite.
                c.attributes.clear();
            }
        }
    }
    Ok(out)
}

fn relocate(inputs: &[JarArchive], prefix: &str) -> Result<JarArchive, ModifyError> {
    let r = Relocator::new(
        internal_prefix(prefix)?,
        &inputs
            .iter()
            .flat_map(|j| j.classes.values())
            .filter_map(|c| c.constant_pool.class_name(c.this_class).ok().map(str::to_string))
            .collect(),
    );
    let mut out: Vec<JarEntry> = Vec::new();
    let mut produced: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    for e in merge(inputs, true).map_err(|e| match e {
        ModifyError::DuplicateEntry(p) if p.ends_with(".class") => ModifyError::RelocationCollision(p),
        e => e,
    })? {
        if !e.is_class() {
            out.push(e);
            continue;
        }
        let class = parse_class(&e.data).map_err(class_err(&e.path))?;
        let moved = relocate_class(&class, &r).map_err(class_err(&e.path))?;
        let name = moved.constant_pool.class_name(moved.this_class).map_err(class_err(&e.path))?.to_string();
        let path = format!("{name}.class");
        let data = emit_class(&moved).map_err(class_err(&e.path))?;
        if produced.insert(path.clone(), data.clone()).is_some() {
            return Err(ModifyError::RelocationCollision(name.replace('/', ".")));
        }
        out.push(JarEntry { path, data, modified: e.modified });
    }
    Ok(JarArchive::from_entries(out)?)
}

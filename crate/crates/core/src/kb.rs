//! Knowledge base of vulnerability fixes: for every CVE, the constructs its
//! fix added, removed or changed, with triplet signatures for changed
//! methods and the sibling members of each construct's class.
//!
//! On disk the knowledge base is a single UTF-8 file:
//!
//! ```text
//! JARSIG-KB <format version>
//! <pretty-printed JSON body>
//! sha256 <hex digest of everything above this line>
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::classfile::descriptor::MethodDescriptor;
use crate::classfile::{list_constructs, parse_class, unqualify_name, ClassFile, ConstructId, MemberInfo};
use crate::cpg::{diff, method_triplets, FixSignature, TripletSet};
use crate::ir::lift_method;

/// Bumped whenever the file layout, the label scheme or the normalization
/// pass list changes.
pub const FORMAT_VERSION: u32 = 1;

const MAGIC: &str = "JARSIG-KB";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{cve}: pre-fix and post-fix classes are identical after normalization")]
    EmptyDiff { cve: String },
    #[error("knowledge base format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt knowledge base file: {0}")]
    CorruptFile(String),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("{path}: {message}")]
    BadClass { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> KbError + '_ {
    move |source| KbError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub cve_id: String,
    pub pre_dir: PathBuf,
    pub post_dir: PathBuf,
    pub provenance: String,
}

/// Parses a manifest: one `cve_id pre_dir post_dir provenance...` entry per
/// line. Blank lines and lines starting with `#` are ignored; relative
/// directories are resolved against `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Vec<ManifestEntry>, KbError> {
    let mut out: Vec<ManifestEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.splitn(4, char::is_whitespace);
        let (Some(cve), Some(pre), Some(post)) = (it.next(), it.next(), it.next()) else {
            return Err(KbError::Manifest {
                line: i + 1,
                message: "expected `cve_id pre_dir post_dir [provenance]`".into(),
            });
        };
        if out.iter().any(|e| e.cve_id == cve) {
            return Err(KbError::Manifest {
                line: i + 1,
                message: format!("duplicate CVE id {cve}"),
            });
        }
        out.push(ManifestEntry {
            cve_id: cve.to_string(),
            pre_dir: base.join(pre),
            post_dir: base.join(post),
            provenance: it.next().unwrap_or("").trim().to_string(),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, KbError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new(".")))
}

/// Parses every `.class` file below `dir`, in path order.
pub fn load_class_dir(dir: &Path) -> Result<Vec<ClassFile>, KbError> {
    let mut paths = Vec::new();
    for e in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let e = e.map_err(|e| KbError::Io {
            path: dir.to_path_buf(),
            source: e.into(),
        })?;
        if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "class") {
            paths.push(e.into_path());
        }
    }
    if paths.is_empty() {
        return Err(KbError::BadClass {
            path: dir.to_path_buf(),
            message: "no class files".into(),
        });
    }
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(io_err(p))?;
            parse_class(&bytes).map_err(|e| KbError::BadClass {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Change {
    Added,
    Removed,
    Changed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstructRecord {
    pub id: ConstructId,
    pub change: Change,
    /// Present for changed methods whose bodies lifted in both versions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<FixSignature>,
    /// Unqualified sibling member signatures and field names of the
    /// declaring class, taken from the post-fix class when it exists.
    pub class_context: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CveEntry {
    pub provenance: String,
    pub records: Vec<ConstructRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    pub format_version: u32,
    pub entries: BTreeMap<String, CveEntry>,
    pub fqn_index: BTreeMap<String, BTreeSet<String>>,
    pub unqualified_index: BTreeMap<String, BTreeSet<(String, String)>>,
}

#[derive(Serialize, Deserialize)]
struct KbBody {
    format_version: u32,
    cves: BTreeMap<String, CveEntry>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::from_entries(BTreeMap::new())
    }
}

impl KnowledgeBase {
    pub fn from_entries(entries: BTreeMap<String, CveEntry>) -> Self {
        let mut fqn_index: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut unqualified_index: BTreeMap<String, BTreeSet<(String, String)>> = BTreeMap::new();
        for (cve, entry) in &entries {
            for r in &entry.records {
                fqn_index.entry(r.id.fqn.clone()).or_default().insert(cve.clone());
                unqualified_index
                    .entry(r.id.unqualified.clone())
                    .or_default()
                    .insert((cve.clone(), r.id.fqn.clone()));
            }
        }
        KnowledgeBase {
            format_version: FORMAT_VERSION,
            entries,
            fqn_index,
            unqualified_index,
        }
    }

    pub fn records(&self, cve: &str) -> &[ConstructRecord] {
        self.entries.get(cve).map_or(&[], |e| e.records.as_slice())
    }

    pub fn cve_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let body = KbBody {
            format_version: self.format_version,
            cves: self.entries.clone(),
        };
        let json = serde_json::to_string_pretty(&body).expect("knowledge base serializes");
        let head = format!("{MAGIC} {}\n{json}\n", self.format_version);
        let digest = hex::encode(Sha256::digest(head.as_bytes()));
        format!("{head}sha256 {digest}\n")
    }

    pub fn from_text(text: &str) -> Result<Self, KbError> {
        let corrupt = |m: &str| KbError::CorruptFile(m.to_string());
        let first = text.lines().next().ok_or_else(|| corrupt("empty file"))?;
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| corrupt("missing header"))?;
        if version != FORMAT_VERSION {
            return Err(KbError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let trimmed = text.strip_suffix('\n').ok_or_else(|| corrupt("missing checksum"))?;
        let cut = trimmed.rfind('\n').ok_or_else(|| corrupt("missing checksum"))?;
        let (head, tail) = (&text[..=cut], &trimmed[cut + 1..]);
        let digest = tail.strip_prefix("sha256 ").ok_or_else(|| corrupt("missing checksum"))?;
        if hex::encode(Sha256::digest(head.as_bytes())) != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let json = &head[first.len() + 1..];
        let body: KbBody = serde_json::from_str(json).map_err(|e| KbError::CorruptFile(e.to_string()))?;
        if body.format_version != version {
            return Err(corrupt("header and body versions differ"));
        }
        Ok(KnowledgeBase::from_entries(body.cves))
    }

    pub fn save(&self, path: &Path) -> Result<(), KbError> {
        fs::write(path, self.to_text()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_text(&text)
    }
}

pub fn query_fqn(kb: &KnowledgeBase, fqn: &str) -> BTreeSet<String> {
    kb.fqn_index.get(fqn).cloned().unwrap_or_default()
}

pub fn query_unqualified(kb: &KnowledgeBase, unqualified: &str) -> BTreeSet<(String, String)> {
    kb.unqualified_index.get(unqualified).cloned().unwrap_or_default()
}

/// Unqualified member signatures (`void foo(X)`) and `field name` entries of
/// a class.
pub fn member_context(class: &ClassFile) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for m in &class.methods {
        let (Ok(name), Ok(desc)) = (class.member_name(m), class.member_descriptor(m)) else { continue };
        if let Ok(d) = MethodDescriptor::parse(desc) {
            out.insert(unqualify_name(&format!("{} {name}{}", d.return_type_name(), d.param_list())));
        }
    }
    for f in &class.fields {
        if let Ok(name) = class.member_name(f) {
            out.insert(format!("field {name}"));
        }
    }
    out
}

struct Side<'a> {
    class: &'a ClassFile,
    method: Option<&'a MemberInfo>,
}

fn index_constructs(classes: &[ClassFile]) -> Result<BTreeMap<String, (ConstructId, Side<'_>)>, KbError> {
    let mut out = BTreeMap::new();
    for class in classes {
        let ids = list_constructs(class).map_err(|e| KbError::BadClass {
            path: PathBuf::from(class.name().unwrap_or_default()),
            message: e.to_string(),
        })?;
        for (k, id) in ids.into_iter().enumerate() {
            let method = if k == 0 { None } else { Some(&class.methods[k - 1]) };
            out.insert(id.fqn.clone(), (id, Side { class, method }));
        }
    }
    Ok(out)
}

/// Outcome counters of building one entry.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntryStats {
    pub lift_failures: usize,
}

fn sibling_context(class: &ClassFile, own: &ConstructId) -> BTreeSet<String> {
    let mut ctx = member_context(class);
    if own.is_method() {
        ctx.remove(&unqualify_name(own.member_signature()));
    }
    ctx
}

/// Diffs the constructs of pre-fix and post-fix classes of one CVE.
///
/// Added or removed classes are recorded at class level only. Methods
/// present in both versions are compared by normalized triplet sets; when
/// either side fails to lift, raw code bytes decide whether they changed and
/// the record carries no signature.
pub fn build_entry(cve: &str, pre: &[ClassFile], post: &[ClassFile]) -> Result<(Vec<ConstructRecord>, EntryStats), KbError> {
    let before = index_constructs(pre)?;
    let after = index_constructs(post)?;
    let class_of = |fqn: &str, map: &BTreeMap<String, (ConstructId, Side<'_>)>| map.contains_key(fqn);
    let mut records = Vec::new();
    let mut stats = EntryStats::default();

    let context_for = |id: &ConstructId| -> BTreeSet<String> {
        let side = after.get(&id.class_fqn).or_else(|| before.get(&id.class_fqn));
        side.map(|(_, s)| sibling_context(s.class, id)).unwrap_or_default()
    };

    for (fqn, (id, side)) in &before {
        let in_post = after.get(fqn);
        let owner_removed = id.is_method() && !class_of(&id.class_fqn, &after);
        match in_post {
            None if owner_removed => {}
            None => records.push(ConstructRecord {
                id: id.clone(),
                change: Change::Removed,
                signature: None,
                class_context: context_for(id),
            }),
            Some((_, post_side)) => {
                let (Some(m_pre), Some(m_post)) = (side.method, post_side.method) else { continue };
                let lifted = (lift_method(side.class, m_pre), lift_method(post_side.class, m_post));
                let (changed, signature) = match lifted {
                    (Ok(a), Ok(b)) => {
                        let (t_vul, t_fix): (TripletSet, TripletSet) = (method_triplets(&a), method_triplets(&b));
                        (t_vul != t_fix, Some(diff(&t_vul, &t_fix)))
                    }
                    (a, b) => {
                        for e in [a.err(), b.err()].into_iter().flatten() {
                            log::warn!("{cve}: cannot lift {fqn}: {e}");
                            stats.lift_failures += 1;
                        }
                        let code = |m: &'_ MemberInfo| m.code().map(|k| (k.instructions.clone(), k.exception_table.clone()));
                        (code(m_pre) != code(m_post), None)
                    }
                };
                if changed {
                    records.push(ConstructRecord {
                        id: id.clone(),
                        change: Change::Changed,
                        signature,
                        class_context: context_for(id),
                    });
                }
            }
        }
    }
    for (fqn, (id, _)) in &after {
        let owner_added = id.is_method() && !class_of(&id.class_fqn, &before);
        if !before.contains_key(fqn) && !owner_added {
            records.push(ConstructRecord {
                id: id.clone(),
                change: Change::Added,
                signature: None,
                class_context: context_for(id),
            });
        }
    }
    if records.is_empty() {
        return Err(KbError::EmptyDiff { cve: cve.to_string() });
    }
    records.sort_by(|a, b| a.id.fqn.cmp(&b.id.fqn).then(a.change.cmp(&b.change)));
    Ok((records, stats))
}

/// Summary of a manifest build.
#[derive(Debug, Default)]
pub struct BuildSummary {
    pub built: Vec<String>,
    pub empty_diff: Vec<String>,
    pub failed: Vec<(String, String)>,
    pub lift_failures: usize,
}

/// Builds a knowledge base from manifest entries, one entry per worker.
pub fn build(entries: &[ManifestEntry]) -> (KnowledgeBase, BuildSummary) {
    let results: Vec<(String, String, Result<(Vec<ConstructRecord>, EntryStats), KbError>)> = entries
        .par_iter()
        .map(|e| {
            let res = load_class_dir(&e.pre_dir)
                .and_then(|pre| Ok((pre, load_class_dir(&e.post_dir)?)))
                .and_then(|(pre, post)| build_entry(&e.cve_id, &pre, &post));
            (e.cve_id.clone(), e.provenance.clone(), res)
        })
        .collect();
    let mut map = BTreeMap::new();
    let mut summary = BuildSummary::default();
    for (cve, provenance, res) in results {
        match res {
            Ok((records, stats)) => {
                summary.lift_failures += stats.lift_failures;
                summary.built.push(cve.clone());
                map.insert(cve, CveEntry { provenance, records });
            }
            Err(KbError::EmptyDiff { .. }) => summary.empty_diff.push(cve),
            Err(e) => summary.failed.push((cve, e.to_string())),
        }
    }
    (KnowledgeBase::from_entries(map), summary)
}

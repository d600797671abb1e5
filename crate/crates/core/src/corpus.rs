//! Built-in synthetic corpus: ten fix pairs written in the assembly syntax
//! of [`crate::classfile::asm`], covering added, removed and changed
//! constructs (one fix only touches a static initializer).

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::classfile::asm::{assemble_classes, AsmError};
use crate::classfile::{emit_class, ClassFile, ClassFileError, DosTime, JarArchive, JarEntry, JarError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot assemble {id}")]
    Asm {
        id: String,
        #[source]
        source: AsmError,
    },
    #[error(transparent)]
    Class(#[from] ClassFileError),
    #[error(transparent)]
    Jar(#[from] JarError),
    #[error("cannot write {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct SyntheticCve {
    pub id: String,
    pub summary: String,
    pub pre: Vec<ClassFile>,
    pub post: Vec<ClassFile>,
}

const SOURCES: [(&str, &str, &str); 10] = [
    ("SYN-0001", include_str!("../corpus/syn-0001.pre.jasm"), include_str!("../corpus/syn-0001.post.jasm")),
    ("SYN-0002", include_str!("../corpus/syn-0002.pre.jasm"), include_str!("../corpus/syn-0002.post.jasm")),
    ("SYN-0003", include_str!("../corpus/syn-0003.pre.jasm"), include_str!("../corpus/syn-0003.post.jasm")),
    ("SYN-0004", include_str!("../corpus/syn-0004.pre.jasm"), include_str!("../corpus/syn-0004.post.jasm")),
    ("SYN-0005", include_str!("../corpus/syn-0005.pre.jasm"), include_str!("../corpus/syn-0005.post.jasm")),
    ("SYN-0006", include_str!("../corpus/syn-0006.pre.jasm"), include_str!("../corpus/syn-0006.post.jasm")),
    ("SYN-0007", include_str!("../corpus/syn-0007.pre.jasm"), include_str!("../corpus/syn-0007.post.jasm")),
    ("SYN-0008", include_str!("../corpus/syn-0008.pre.jasm"), include_str!("../corpus/syn-0008.post.jasm")),
    ("SYN-0009", include_str!("../corpus/syn-0009.pre.jasm"), include_str!("../corpus/syn-0009.post.jasm")),
    ("SYN-0010", include_str!("../corpus/syn-0010.pre.jasm"), include_str!("../corpus/syn-0010.post.jasm")),
];

/// Fixed entry timestamp so generated JARs are byte-for-byte reproducible.
const STAMP: DosTime = DosTime {
    year: 2021,
    month: 6,
    day: 1,
    hour: 12,
    minute: 0,
    second: 0,
};

pub fn synthetic_cves() -> Result<Vec<SyntheticCve>, CorpusError> {
    SOURCES
        .iter()
        .map(|(id, pre, post)| {
            let asm = |text: &str| assemble_classes(text).map_err(|source| CorpusError::Asm { id: id.to_string(), source });
            let summary = pre.lines().next().unwrap_or("").trim_start_matches('#').trim().to_string();
            Ok(SyntheticCve {
                id: id.to_string(),
                summary,
                pre: asm(pre)?,
                post: asm(post)?,
            })
        })
        .collect()
}

/// Packs classes into a JAR with a manifest and Maven descriptor under
/// `META-INF`.
pub fn class_jar(artifact: &str, classes: &[ClassFile]) -> Result<JarArchive, CorpusError> {
    let mut entries = vec![JarEntry::new(
        "META-INF/MANIFEST.MF",
        format!("Manifest-Version: 1.0\r\nImplementation-Title: {artifact}\r\n\r\n").into_bytes(),
    )];
    entries.push(JarEntry::new(
        format!("META-INF/maven/org.acme/{artifact}/pom.properties"),
        format!("groupId=org.acme\nartifactId={artifact}\nversion=1.0\n").into_bytes(),
    ));
    for c in classes {
        let name = c.constant_pool.class_name(c.this_class)?;
        entries.push(JarEntry::new(format!("{name}.class"), emit_class(c)?));
    }
    for e in &mut entries {
        e.modified = STAMP;
    }
    Ok(JarArchive::from_entries(entries)?)
}

/// Paths produced by [`write_corpus`].
#[derive(Debug, Clone)]
pub struct CorpusLayout {
    pub manifest: PathBuf,
    pub pre_jars: Vec<PathBuf>,
    pub post_jars: Vec<PathBuf>,
}

/// Writes `classes/<id>/{pre,post}/**.class`, `jars/{pre,post}/<id>.jar`
/// and a KB manifest under `dir`.
pub fn write_corpus(dir: &Path) -> Result<CorpusLayout, CorpusError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut manifest = String::from("# cve_id pre_dir post_dir provenance\n");
    let mut layout = CorpusLayout {
        manifest: dir.join("manifest.txt"),
        pre_jars: Vec::new(),
        post_jars: Vec::new(),
    };
    for cve in synthetic_cves()? {
        for (side, classes) in [("pre", &cve.pre), ("post", &cve.post)] {
            for c in classes.iter() {
                let name = c.constant_pool.class_name(c.this_class)?;
                let path = dir.join("classes").join(&cve.id).join(side).join(format!("{name}.class"));
                fs::create_dir_all(path.parent().expect("has parent")).map_err(io(&path))?;
                fs::write(&path, emit_class(c)?).map_err(io(&path))?;
            }
            let jar_dir = dir.join("jars").join(side);
            fs::create_dir_all(&jar_dir).map_err(io(&jar_dir))?;
            let jar_path = jar_dir.join(format!("{}.jar", cve.id));
            let artifact = format!("{}-{side}", cve.id.to_lowercase());
            fs::write(&jar_path, class_jar(&artifact, classes)?.to_bytes()?).map_err(io(&jar_path))?;
            if side == "pre" {
                layout.pre_jars.push(jar_path);
            } else {
                layout.post_jars.push(jar_path);
            }
        }
        manifest.push_str(&format!(
            "{0} classes/{0}/pre classes/{0}/post synthetic: {1}\n",
            cve.id, cve.summary
        ));
    }
    fs::write(&layout.manifest, manifest).map_err(io(&layout.manifest))?;
    Ok(layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{build_entry, Change};

    #[test]
    fn every_fix_has_a_usable_signature() {
        let cves = synthetic_cves().unwrap();
        assert_eq!(cves.len(), 10);
        let mut kinds = std::collections::BTreeSet::new();
        for cve in &cves {
            let (records, stats) = build_entry(&cve.id, &cve.pre, &cve.post).unwrap();
            assert_eq!(stats.lift_failures, 0, "{}", cve.id);
            for r in &records {
                kinds.insert(r.change);
                assert!(r.class_context.len() >= 3, "{}: {} has a thin class context", cve.id, r.id.fqn);
                if r.change == Change::Changed {
                    let sig = r.signature.as_ref().unwrap();
                    assert!(!sig.pt.is_empty(), "{}: {} has empty PT", cve.id, r.id.fqn);
                    assert!(!sig.ct.is_empty(), "{}: {} has empty CT", cve.id, r.id.fqn);
                }
            }
        }
        assert_eq!(kinds.len(), 3);
        let clinit = build_entry("SYN-0004", &cves[3].pre, &cves[3].post).unwrap().0;
        assert_eq!(clinit.len(), 1);
        assert!(clinit[0].id.fqn.ends_with("void <clinit>()"));
    }
}

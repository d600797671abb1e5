#![allow(dead_code)]

pub mod gen;
pub mod oracles;
pub mod refvm;

use std::collections::{BTreeMap, BTreeSet};

use jarsig::classfile::JarArchive;
use jarsig::corpus::{class_jar, synthetic_cves, SyntheticCve};
use jarsig::kb::{build_entry, CveEntry, KnowledgeBase};
use jarsig::scanner::{scan_view, JarView, ScanConfig};

pub struct Corpus {
    pub cves: Vec<SyntheticCve>,
    pub kb: KnowledgeBase,
}

impl Corpus {
    pub fn build() -> Self {
        let cves = synthetic_cves().unwrap();
        let entries: BTreeMap<String, CveEntry> = cves
            .iter()
            .map(|c| {
                let (records, _) = build_entry(&c.id, &c.pre, &c.post).unwrap();
                (c.id.clone(), CveEntry { provenance: c.summary.clone(), records })
            })
            .collect();
        Corpus { cves, kb: KnowledgeBase::from_entries(entries) }
    }

    pub fn pre_jars(&self) -> Vec<(String, JarArchive)> {
        self.cves.iter().map(|c| (c.id.clone(), class_jar(&c.id, &c.pre).unwrap())).collect()
    }

    pub fn post_jars(&self) -> Vec<(String, JarArchive)> {
        self.cves.iter().map(|c| (c.id.clone(), class_jar(&c.id, &c.post).unwrap())).collect()
    }

    /// `(jar id, cve)` pairs flagged when scanning each JAR on its own.
    pub fn flagged_each(&self, jars: &[(String, JarArchive)], cfg: &ScanConfig) -> BTreeSet<(String, String)> {
        let mut out = BTreeSet::new();
        for (id, jar) in jars {
            let (findings, _) = scan_view(&JarView::new(jar), &self.kb, cfg);
            for f in findings {
                out.insert((id.clone(), f.cve));
            }
        }
        out
    }
}

/// The checked-in compiler-variant pairs as `(name, a, b)`.
pub fn variant_pairs() -> Vec<(String, jarsig::classfile::ClassFile, jarsig::classfile::ClassFile)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/variants");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.unwrap().file_name().to_str()?.strip_suffix(".a.jasm").map(str::to_string))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let load = |side: &str| {
                let text = std::fs::read_to_string(dir.join(format!("{n}.{side}.jasm"))).unwrap();
                oracles::assemble_one(&text).unwrap()
            };
            let (a, b) = (load("a"), load("b"));
            (n, a, b)
        })
        .collect()
}

/// Schema violations of a JSON report against `docs/report.schema.json`.
pub fn report_schema_errors(json: &str) -> Vec<String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let instance: serde_json::Value = match serde_json::from_str(json) {
        Ok(v) => v,
        Err(e) => return vec![format!("invalid JSON: {e}")],
    };
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(&instance).map(|e| format!("{}: {e}", e.instance_path())).collect()
}

//! Matching scanned JARs against the knowledge base.
//!
//! Default mode locates KB constructs by fully qualified name. Repack mode
//! locates them by unqualified name and accepts a class only when enough of
//! its recorded siblings are present, then compares package-free triplets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classfile::{list_constructs, parse_jar, unqualify_name, ClassFile, ConstructKind, JarArchive, MemberInfo};
use crate::cpg::{method_triplets, unqualify, FixSignature, TripletSet};
use crate::ir::lift_method;
use crate::kb::{member_context, Change, ConstructRecord, KnowledgeBase};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Default,
    Repack,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Default => "default",
            Mode::Repack => "repack",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Mode::Default),
            "repack" => Ok(Mode::Repack),
            other => Err(format!("unknown mode `{other}` (expected default or repack)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub theta_pt: f64,
    pub theta_cc: f64,
    pub theta_ct: f64,
    pub modes: BTreeSet<Mode>,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            theta_pt: 0.5,
            theta_cc: 0.3,
            theta_ct: 0.3,
            modes: BTreeSet::from([Mode::Default]),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dependency command failed: {0}")]
    Command(String),
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        for (name, v) in [("theta_pt", self.theta_pt), ("theta_cc", self.theta_cc), ("theta_ct", self.theta_ct)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScanError::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if self.modes.is_empty() {
            return Err(ScanError::Config("no scan mode enabled".into()));
        }
        Ok(())
    }
}

/// Where to find the JARs to scan.
#[derive(Debug, Clone)]
pub enum DependencySource {
    /// Every `*.jar` below a directory.
    Dir(PathBuf),
    /// A file listing one JAR path per line.
    ListFile(PathBuf),
    /// A shell command printing one JAR path per line.
    Command(String),
}

/// Resolves a dependency source to deduplicated absolute JAR paths, in
/// sorted order. An empty result is logged as a warning, not an error.
pub fn retrieve_dependencies(source: &DependencySource) -> Result<Vec<PathBuf>, ScanError> {
    let cwd = std::env::current_dir().map_err(|source| ScanError::Io {
        path: PathBuf::from("."),
        source,
    })?;
    let absolute = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { cwd.join(p) };
    let lines = |text: &str, base: &Path| -> Vec<PathBuf> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| absolute(&base.join(l)))
            .collect()
    };
    let found: Vec<PathBuf> = match source {
        DependencySource::Dir(dir) => {
            let mut out = Vec::new();
            for e in walkdir::WalkDir::new(dir) {
                let e = e.map_err(|e| ScanError::Io {
                    path: dir.clone(),
                    source: e.into(),
                })?;
                if e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "jar") {
                    out.push(absolute(e.path()));
                }
            }
            out
        }
        DependencySource::ListFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScanError::Io {
                path: path.clone(),
                source,
            })?;
            lines(&text, path.parent().unwrap_or(Path::new("")))
        }
        DependencySource::Command(cmd) => {
            let out = Command::new("sh")
                .arg("-c")
                .arg(cmd)
                .output()
                .map_err(|e| ScanError::Command(e.to_string()))?;
            if !out.status.success() {
                return Err(ScanError::Command(format!(
                    "`{cmd}` exited with {}: {}",
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                )));
            }
            lines(&String::from_utf8_lossy(&out.stdout), Path::new(""))
        }
    };
    let unique: BTreeSet<PathBuf> = found.into_iter().collect();
    if unique.is_empty() {
        log::warn!("no JARs found in {source:?}");
    }
    Ok(unique.into_iter().collect())
}

/// Lookup structure over the classes of one archive.
pub struct JarView<'a> {
    classes: BTreeMap<String, &'a ClassFile>,
    /// Unqualified class name to the fully qualified names carrying it.
    by_simple_name: BTreeMap<String, Vec<String>>,
}

impl<'a> JarView<'a> {
    pub fn new(archive: &'a JarArchive) -> Self {
        Self::from_classes(archive.classes.values())
    }

    pub fn from_classes(classes: impl IntoIterator<Item = &'a ClassFile>) -> Self {
        let mut map = BTreeMap::new();
        let mut by_simple_name: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for c in classes {
            let Ok(name) = c.name() else { continue };
            by_simple_name.entry(unqualify_name(&name)).or_default().push(name.clone());
            map.insert(name, c);
        }
        JarView {
            classes: map,
            by_simple_name,
        }
    }

    pub fn class(&self, fqn: &str) -> Option<&'a ClassFile> {
        self.classes.get(fqn).copied()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// The method of `class` whose `ret name(params)` signature equals
/// `member`, comparing unqualified forms when `loose` is set.
fn find_method<'c>(class: &'c ClassFile, member: &str, loose: bool) -> Option<&'c MemberInfo> {
    let ids = list_constructs(class).ok()?;
    let want = if loose { unqualify_name(member) } else { member.to_string() };
    ids.iter().skip(1).position(|id| {
        let sig = id.member_signature();
        if loose {
            unqualify_name(sig) == want
        } else {
            sig == want
        }
    })
    .map(|k| &class.methods[k])
}

/// Fraction of the recorded sibling members found in `scanned`, comparing
/// unqualified forms. An empty context yields 0.
pub fn match_class_context(kb_context: &BTreeSet<String>, scanned: &ClassFile) -> f64 {
    if kb_context.is_empty() {
        return 0.0;
    }
    let present = member_context(scanned);
    let hits = kb_context.iter().filter(|m| present.contains(&unqualify_name(m))).count();
    hits as f64 / kb_context.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Vulnerable,
    Fixed,
    Skipped,
}

/// Cardinalities behind a triplet-matching decision.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub nt_hit: usize,
    pub pt_hit: usize,
    pub ct_hit: usize,
    pub nt: usize,
    pub pt: usize,
    pub ct: usize,
}

/// Decides a changed method given its triplets `t_m` and the fix signature.
/// In repack mode the caller passes unqualified `t_m` and `sig`.
pub fn match_triplets(t_m: &TripletSet, sig: &FixSignature, cfg: &ScanConfig, mode: Mode) -> (Verdict, Counts) {
    let counts = Counts {
        nt_hit: sig.nt.intersection_len(t_m),
        pt_hit: sig.pt.intersection_len(t_m),
        ct_hit: sig.ct.intersection_len(t_m),
        nt: sig.nt.len(),
        pt: sig.pt.len(),
        ct: sig.ct.len(),
    };
    if mode == Mode::Repack && (counts.ct == 0 || counts.ct_hit as f64 / counts.ct as f64 <= cfg.theta_ct) {
        return (Verdict::Fixed, counts);
    }
    let vulnerable = if counts.nt > 0 {
        counts.nt_hit >= counts.pt_hit
    } else {
        counts.pt == 0 || (counts.pt_hit as f64 / counts.pt as f64) < cfg.theta_pt
    };
    (if vulnerable { Verdict::Vulnerable } else { Verdict::Fixed }, counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructVerdict {
    pub fqn: String,
    /// Where the construct was found in the scanned JAR, when that differs
    /// from the recorded name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<String>,
    pub change: Change,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts: Option<Counts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Where a record's declaring class (and the record's own construct) sits in
/// the scanned JAR.
struct Located<'a> {
    class: &'a ClassFile,
    class_fqn: String,
}

fn locate<'a>(record: &ConstructRecord, view: &JarView<'a>, cfg: &ScanConfig, mode: Mode) -> Option<Located<'a>> {
    match mode {
        Mode::Default => view.class(&record.id.class_fqn).map(|class| Located {
            class,
            class_fqn: record.id.class_fqn.clone(),
        }),
        Mode::Repack => {
            let simple = unqualify_name(&record.id.class_fqn);
            let mut best: Option<(f64, &String)> = None;
            for fqn in view.by_simple_name.get(&simple).into_iter().flatten() {
                let ratio = match_class_context(&record.class_context, view.classes[fqn]);
                if ratio > cfg.theta_cc && best.is_none_or(|(r, f)| ratio > r || (ratio == r && fqn < f)) {
                    best = Some((ratio, fqn));
                }
            }
            best.map(|(_, fqn)| Located {
                class: view.classes[fqn],
                class_fqn: fqn.clone(),
            })
        }
    }
}

/// Applies the presence, absence and triplet rules to one record. `None`
/// means the record yields no verdict in this JAR: a method whose declaring
/// class is absent, an absent added class, or an absent changed method.
pub fn classify_construct(record: &ConstructRecord, view: &JarView<'_>, cfg: &ScanConfig, mode: Mode) -> Option<ConstructVerdict> {
    let loc = locate(record, view, cfg, mode);
    let is_class = record.id.kind != ConstructKind::Method;
    let method = match (&loc, is_class) {
        (Some(l), false) => find_method(l.class, record.id.member_signature(), mode == Mode::Repack),
        _ => None,
    };
    let present = if is_class { loc.is_some() } else { method.is_some() };
    let matched = loc.as_ref().and_then(|l| {
        let fqn = if is_class {
            l.class_fqn.clone()
        } else {
            format!("{}: {}", l.class_fqn, record.id.member_signature())
        };
        (fqn != record.id.fqn && present).then(|| unqualify_relocated(&fqn, &l.class_fqn, record))
    });
    let verdict = |verdict, reason: &str| ConstructVerdict {
        fqn: record.id.fqn.clone(),
        matched: matched.clone(),
        change: record.change,
        verdict,
        counts: None,
        reason: Some(reason.to_string()),
    };
    if !is_class && loc.is_none() {
        return None;
    }
    match record.change {
        Change::Removed if present => Some(verdict(Verdict::Vulnerable, "removed construct present")),
        Change::Removed => Some(verdict(Verdict::Fixed, "removed construct absent")),
        Change::Added if present => Some(verdict(Verdict::Fixed, "added construct present")),
        Change::Added if !is_class => Some(verdict(Verdict::Vulnerable, "added method absent from present class")),
        Change::Added => None,
        Change::Changed => {
            let (Some(l), Some(m)) = (&loc, method) else { return None };
            let Some(sig) = &record.signature else {
                return Some(verdict(Verdict::Skipped, "no fix signature recorded"));
            };
            let lifted = match lift_method(l.class, m) {
                Ok(ir) => ir,
                Err(e) => {
                    log::warn!("cannot lift {}: {e}", record.id.fqn);
                    return Some(verdict(Verdict::Skipped, &format!("lift failure: {e}")));
                }
            };
            let t_m = method_triplets(&lifted);
            let (v, counts) = match mode {
                Mode::Default => match_triplets(&t_m, sig, cfg, mode),
                Mode::Repack => match_triplets(&unqualify(&t_m), &sig.unqualified(), cfg, mode),
            };
            Some(ConstructVerdict {
                counts: Some(counts),
                reason: None,
                ..verdict(v, "")
            })
        }
    }
}

/// Rebuilds a matched method name with the scanned class's package and the
/// recorded member signature, since relocation may also rename types in it.
fn unqualify_relocated(fqn: &str, class_fqn: &str, record: &ConstructRecord) -> String {
    if record.id.is_method() {
        format!("{class_fqn}: {}", unqualify_name(record.id.member_signature()))
    } else {
        fqn.to_string()
    }
}

/// Majority vote over non-skipped verdicts: vulnerable iff at least as many
/// vulnerable as fixed. All-skipped input is not flagged.
pub fn aggregate(verdicts: &[ConstructVerdict]) -> bool {
    let vulnerable = verdicts.iter().filter(|v| v.verdict == Verdict::Vulnerable).count();
    let fixed = verdicts.iter().filter(|v| v.verdict == Verdict::Fixed).count();
    if vulnerable + fixed == 0 {
        if !verdicts.is_empty() {
            log::warn!("all construct verdicts skipped");
        }
        return false;
    }
    vulnerable >= fixed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub cve: String,
    pub mode: Mode,
    pub constructs: Vec<ConstructVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JarReport {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub elapsed_ms: u64,
    /// CVEs flagged by at least one mode, one entry per firing mode.
    pub findings: Vec<Finding>,
    /// CVEs whose constructs were evaluated but not flagged.
    pub not_flagged: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub report_version: u32,
    pub config: ScanConfig,
    pub kb_cves: usize,
    pub jars: Vec<JarReport>,
}

impl ScanReport {
    pub fn finding_count(&self) -> usize {
        self.jars.iter().map(|j| j.findings.len()).sum()
    }

    pub fn has_errors(&self) -> bool {
        self.jars.iter().any(|j| j.error.is_some())
    }

    /// Flagged CVE ids per JAR path, merging modes.
    pub fn flagged(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        self.jars
            .iter()
            .map(|j| (j.path.as_str(), j.findings.iter().map(|f| f.cve.as_str()).collect()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<40} {:<18} {:<8} {:>4} {:>4} {:>4}", "JAR", "CVE", "MODE", "VULN", "FIX", "SKIP");
        for j in &self.jars {
            let name = Path::new(&j.path).file_name().map_or(j.path.clone(), |n| n.to_string_lossy().into_owned());
            if let Some(e) = &j.error {
                let _ = writeln!(out, "{name:<40} error: {e}");
                continue;
            }
            for f in &j.findings {
                let n = |v| f.constructs.iter().filter(|c| c.verdict == v).count();
                let _ = writeln!(
                    out,
                    "{name:<40} {:<18} {:<8} {:>4} {:>4} {:>4}",
                    f.cve,
                    f.mode,
                    n(Verdict::Vulnerable),
                    n(Verdict::Fixed),
                    n(Verdict::Skipped)
                );
            }
        }
        let _ = writeln!(out, "{} finding(s) in {} JAR(s)", self.finding_count(), self.jars.len());
        out
    }
}

/// Evaluates every KB CVE against one set of classes. A CVE is considered
/// only when the declaring class of at least one of its records is found.
pub fn scan_view(view: &JarView<'_>, kb: &KnowledgeBase, cfg: &ScanConfig) -> (Vec<Finding>, Vec<Finding>) {
    let mut findings = Vec::new();
    let mut not_flagged = Vec::new();
    for cve in kb.cve_ids() {
        for &mode in &cfg.modes {
            let records = kb.records(cve);
            if !records.iter().any(|r| locate(r, view, cfg, mode).is_some()) {
                continue;
            }
            let verdicts: Vec<ConstructVerdict> = records
                .iter()
                .filter_map(|r| classify_construct(r, view, cfg, mode))
                .collect();
            if verdicts.is_empty() {
                continue;
            }
            let f = Finding {
                cve: cve.to_string(),
                mode,
                constructs: verdicts,
            };
            if aggregate(&f.constructs) {
                findings.push(f);
            } else {
                not_flagged.push(f);
            }
        }
    }
    (findings, not_flagged)
}

pub fn scan_archive(path: &str, archive: &JarArchive, kb: &KnowledgeBase, cfg: &ScanConfig) -> JarReport {
    let start = Instant::now();
    for (entry, e) in &archive.failures {
        log::warn!("{path}: skipping {entry}: {e}");
    }
    let (findings, not_flagged) = scan_view(&JarView::new(archive), kb, cfg);
    JarReport {
        path: path.to_string(),
        error: None,
        elapsed_ms: start.elapsed().as_millis() as u64,
        findings,
        not_flagged,
    }
}

/// Scans every JAR independently; the report lists JARs in input order.
pub fn scan(jars: &[PathBuf], kb: &KnowledgeBase, cfg: &ScanConfig) -> Result<ScanReport, ScanError> {
    cfg.validate()?;
    let reports = jars
        .par_iter()
        .map(|p| {
            let start = Instant::now();
            let path = p.display().to_string();
            let archive = std::fs::read(p)
                .map_err(|e| e.to_string())
                .and_then(|b| parse_jar(&b).map_err(|e| e.to_string()));
            match archive {
                Ok(a) => scan_archive(&path, &a, kb, cfg),
                Err(e) => {
                    log::warn!("{path}: {e}");
                    JarReport {
                        path,
                        error: Some(e),
                        elapsed_ms: start.elapsed().as_millis() as u64,
                        findings: vec![],
                        not_flagged: vec![],
                    }
                }
            }
        })
        .collect();
    Ok(ScanReport {
        report_version: REPORT_VERSION,
        config: cfg.clone(),
        kb_cves: kb.entries.len(),
        jars: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classfile::builder::ClassBuilder;
    use crate::classfile::opcodes::*;
    use crate::classfile::ACC_PUBLIC;
    use crate::cpg::Triplet;
    use crate::kb::build_entry;

    fn set(names: &[&str]) -> TripletSet {
        names.iter().map(|n| Triplet::new(*n, "CFG-succ", "x")).collect()
    }

    fn sig(nt: &[&str], pt: &[&str], ct: &[&str]) -> FixSignature {
        FixSignature {
            nt: set(nt),
            pt: set(pt),
            ct: set(ct),
        }
    }

    #[test]
    fn defaults() {
        let c = ScanConfig::default();
        assert_eq!((c.theta_pt, c.theta_cc, c.theta_ct), (0.5, 0.3, 0.3));
        assert!(c.validate().is_ok());
        assert!(ScanConfig { theta_pt: 1.5, ..c }.validate().is_err());
    }

    #[test]
    fn triplet_rule_examples() {
        let cfg = ScanConfig::default();
        let s = sig(&["n1", "n2"], &["p1", "p2"], &["c"]);
        assert_eq!(match_triplets(&set(&["n1", "n2", "p1"]), &s, &cfg, Mode::Default).0, Verdict::Vulnerable);
        assert_eq!(match_triplets(&set(&["n1", "p1"]), &s, &cfg, Mode::Default).0, Verdict::Vulnerable);
        assert_eq!(match_triplets(&set(&["c", "p1", "p2"]), &s, &cfg, Mode::Default).0, Verdict::Fixed);

        let only_pt = sig(&[], &["p1", "p2", "p3", "p4"], &[]);
        assert_eq!(match_triplets(&set(&["p1"]), &only_pt, &cfg, Mode::Default).0, Verdict::Vulnerable);
        assert_eq!(match_triplets(&set(&["p1", "p2"]), &only_pt, &cfg, Mode::Default).0, Verdict::Fixed);
    }

    #[test]
    fn repack_gate() {
        let cfg = ScanConfig::default();
        let s = sig(&["n"], &["p"], &["c1", "c2", "c3"]);
        let (v, c) = match_triplets(&set(&["n", "c1"]), &s, &cfg, Mode::Repack);
        assert_eq!((v, c.ct_hit), (Verdict::Vulnerable, 1));
        assert_eq!(match_triplets(&set(&["n"]), &s, &cfg, Mode::Repack).0, Verdict::Fixed);
        let no_ct = sig(&["n"], &["p"], &[]);
        assert_eq!(match_triplets(&set(&["n"]), &no_ct, &cfg, Mode::Repack).0, Verdict::Fixed);
        assert_eq!(match_triplets(&set(&["n"]), &no_ct, &cfg, Mode::Default).0, Verdict::Vulnerable);
    }

    fn verdicts(vs: &[Verdict]) -> Vec<ConstructVerdict> {
        vs.iter()
            .map(|&verdict| ConstructVerdict {
                fqn: String::new(),
                matched: None,
                change: Change::Changed,
                verdict,
                counts: None,
                reason: None,
            })
            .collect()
    }

    #[test]
    fn majority() {
        use Verdict::*;
        assert!(aggregate(&verdicts(&[Vulnerable, Vulnerable, Fixed])));
        assert!(aggregate(&verdicts(&[Vulnerable, Fixed])));
        assert!(!aggregate(&verdicts(&[Fixed, Fixed, Fixed])));
        assert!(!aggregate(&verdicts(&[Skipped, Skipped])));
        assert!(aggregate(&verdicts(&[Skipped, Skipped, Vulnerable])));
    }

    fn class(name: &str, methods: &[(&str, i32)]) -> ClassFile {
        let mut b = ClassBuilder::new(name).unwrap();
        b.field(ACC_PUBLIC, "state", "I").unwrap();
        for (m, k) in methods {
            let mut c = b.code();
            c.iconst(*k).unwrap().op(IRETURN);
            let code = c.finish().unwrap();
            b.method(ACC_PUBLIC, m, "()I", Some(code)).unwrap();
        }
        b.build()
    }

    #[test]
    fn class_context_ratio() {
        let ctx: BTreeSet<String> = ["int a()", "int b()", "int c()"].map(String::from).into();
        let c = class("x.C", &[("a", 0)]);
        let r = match_class_context(&ctx, &c);
        assert!((r - 1.0 / 3.0).abs() < 1e-12 && r > 0.3);
        assert_eq!(match_class_context(&ctx, &class("x.C", &[("z", 0)])), 0.0);
        assert_eq!(match_class_context(&BTreeSet::new(), &c), 0.0);
    }

    #[test]
    fn presence_rules() {
        let pre = class("a.C", &[("keep", 1), ("old", 2), ("m", 3)]);
        let post = class("a.C", &[("keep", 1), ("new", 2), ("m", 4)]);
        let (records, _) = build_entry("CVE-T", &[pre.clone()], &[post.clone()]).unwrap();
        let cfg = ScanConfig::default();
        let run = |c: &ClassFile| -> Vec<(Change, Verdict)> {
            let view = JarView::from_classes([c]);
            records
                .iter()
                .filter_map(|r| classify_construct(r, &view, &cfg, Mode::Default))
                .map(|v| (v.change, v.verdict))
                .collect()
        };
        let mut on_pre = run(&pre);
        on_pre.sort();
        assert_eq!(
            on_pre,
            vec![(Change::Added, Verdict::Vulnerable), (Change::Removed, Verdict::Vulnerable), (Change::Changed, Verdict::Vulnerable)]
        );
        assert!(run(&post).iter().all(|(_, v)| *v == Verdict::Fixed));
        let unrelated = class("b.D", &[("keep", 1)]);
        assert!(run(&unrelated).is_empty());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("repack".parse::<Mode>().unwrap(), Mode::Repack);
        assert!("fast".parse::<Mode>().is_err());
    }

    #[test]
    fn dependency_sources() {
        let dir = tempfile::tempdir().unwrap();
        assert!(retrieve_dependencies(&DependencySource::Dir(dir.path().into())).unwrap().is_empty());
        for n in ["a.jar", "b.jar", "c.jar", "notes.txt"] {
            std::fs::write(dir.path().join(n), b"").unwrap();
        }
        assert_eq!(retrieve_dependencies(&DependencySource::Dir(dir.path().into())).unwrap().len(), 3);
        let cmd = format!("echo {0}/a.jar; echo {0}/b.jar; echo {0}/a.jar", dir.path().display());
        let got = retrieve_dependencies(&DependencySource::Command(cmd)).unwrap();
        assert_eq!(got, vec![dir.path().join("a.jar"), dir.path().join("b.jar")]);
        let list = dir.path().join("deps.txt");
        std::fs::write(&list, "a.jar\n\n# skip\nc.jar\n").unwrap();
        assert_eq!(retrieve_dependencies(&DependencySource::ListFile(list)).unwrap().len(), 2);
        assert!(retrieve_dependencies(&DependencySource::Command("exit 4".into())).is_err());
    }
}

mod common;

use std::collections::BTreeSet;
use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use jarsig::classfile::{emit_class, list_constructs, parse_class, unqualify_name, JarArchive};
use jarsig::kb::{build_entry, Change, CveEntry, KbError, KnowledgeBase};
use jarsig::modharness::{compiler_variant, modify, ModKind, ModifyParams};
use jarsig::scanner::{scan_view, Finding, JarView, Mode, ScanConfig, Verdict};

use common::{gen, oracles, Corpus};

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(Corpus::build)
}

/// Per CVE: 0 = leave out, 1 = pre-fix JAR, 2 = post-fix JAR.
fn selection() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..3, 10)
}

fn selected_jars(pick: &[u8]) -> Vec<JarArchive> {
    let c = corpus();
    let (pre, post) = (c.pre_jars(), c.post_jars());
    pick.iter()
        .enumerate()
        .filter_map(|(i, p)| match p {
            1 => Some(pre[i].1.clone()),
            2 => Some(post[i].1.clone()),
            _ => None,
        })
        .collect()
}

fn both_modes() -> ScanConfig {
    ScanConfig {
        modes: [Mode::Default, Mode::Repack].into(),
        ..Default::default()
    }
}

type VerdictKey = (String, Mode, String, Change, Verdict);

fn verdict_keys(findings: &[Finding], not_flagged: &[Finding]) -> BTreeSet<VerdictKey> {
    findings
        .iter()
        .chain(not_flagged)
        .flat_map(|f| f.constructs.iter().map(move |c| (f.cve.clone(), f.mode, c.fqn.clone(), c.change, c.verdict)))
        .collect()
}

fn flagged(jar: &JarArchive, cfg: &ScanConfig) -> BTreeSet<String> {
    scan_view(&JarView::new(jar), &corpus().kb, cfg).0.into_iter().map(|f| f.cve).collect()
}

fn unqualified_constructs(jar: &JarArchive) -> Vec<String> {
    let mut v: Vec<String> = jar
        .classes
        .values()
        .flat_map(|c| list_constructs(c).unwrap())
        .map(|id| unqualify_name(&id.fqn))
        .collect();
    v.sort();
    v
}

#[test]
fn identical_sides_are_rejected() {
    for cve in &corpus().cves {
        for side in [&cve.pre, &cve.post] {
            assert!(matches!(build_entry(&cve.id, side, side), Err(KbError::EmptyDiff { .. })), "{}", cve.id);
        }
    }
}

#[test]
fn exact_pre_fix_classes_are_fully_detected_and_post_fix_fully_fixed() {
    let c = corpus();
    let cfg = ScanConfig::default();
    for ((id, pre), (_, post)) in c.pre_jars().iter().zip(c.post_jars()) {
        let records = c.kb.records(id);
        let expected = records
            .iter()
            .filter(|r| !(r.change == Change::Added && r.id.fqn == r.id.class_fqn))
            .count();
        let (flag, rest) = scan_view(&JarView::new(pre), &c.kb, &cfg);
        assert!(rest.is_empty(), "{id}: {rest:?}");
        let mine: Vec<_> = flag.iter().filter(|f| &f.cve == id).flat_map(|f| &f.constructs).collect();
        assert_eq!(mine.len(), expected, "{id}");
        assert!(mine.iter().all(|v| v.verdict == Verdict::Vulnerable), "{id}: {mine:?}");

        let (flag, rest) = scan_view(&JarView::new(&post), &c.kb, &cfg);
        assert!(flag.is_empty(), "{id}: {flag:?}");
        assert!(rest.iter().flat_map(|f| &f.constructs).all(|v| v.verdict != Verdict::Vulnerable));
    }
}

#[test]
fn kb_indexes_agree_with_records() {
    let kb = &corpus().kb;
    for (cve, entry) in &kb.entries {
        for r in &entry.records {
            assert!(kb.fqn_index[&r.id.fqn].contains(cve));
            assert!(kb.unqualified_index[&r.id.unqualified].contains(&(cve.clone(), r.id.fqn.clone())));
        }
    }
    for (fqn, cves) in &kb.fqn_index {
        for cve in cves {
            assert!(kb.records(cve).iter().any(|r| &r.id.fqn == fqn));
        }
    }
    for (unq, hits) in &kb.unqualified_index {
        for (cve, fqn) in hits {
            assert!(kb.records(cve).iter().any(|r| &r.id.fqn == fqn && &r.id.unqualified == unq));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kb_subsets_round_trip(pick in prop::collection::vec(any::<bool>(), 10)) {
        let kb = &corpus().kb;
        let entries = kb
            .entries
            .iter()
            .zip(&pick)
            .filter(|(_, keep)| **keep)
            .map(|((k, v), _)| (k.clone(), v.clone()))
            .collect::<std::collections::BTreeMap<String, CveEntry>>();
        let sub = KnowledgeBase::from_entries(entries);
        prop_assert_eq!(KnowledgeBase::from_text(&sub.to_text()).unwrap(), sub.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.jsig");
        sub.save(&path).unwrap();
        prop_assert_eq!(KnowledgeBase::load(&path).unwrap(), sub);
    }

    #[test]
    fn merged_and_stripped_bundles_keep_verdicts(pick in selection(), strip in any::<bool>()) {
        let jars = selected_jars(&pick);
        prop_assume!(!jars.is_empty());
        let cfg = both_modes();
        let mut separate = BTreeSet::new();
        for j in &jars {
            let (f, n) = scan_view(&JarView::new(j), &corpus().kb, &cfg);
            separate.extend(verdict_keys(&f, &n));
        }
        let kind = if strip { ModKind::Type3 } else { ModKind::Type2 };
        let merged = modify(&jars, kind, &ModifyParams::default()).unwrap();
        prop_assert_eq!(merged.metadata_present, !strip);
        let (f, n) = scan_view(&JarView::new(&merged), &corpus().kb, &cfg);
        prop_assert_eq!(verdict_keys(&f, &n), separate);
    }

    #[test]
    fn repack_mode_only_adds_findings(
        pick in selection(),
        pt in 0.05f64..=1.0,
        cc in 0.0f64..0.95,
        ct in 0.0f64..=1.0,
        relocate in any::<bool>(),
    ) {
        let jars = selected_jars(&pick);
        prop_assume!(!jars.is_empty());
        let kind = if relocate { ModKind::Type4 } else { ModKind::Type2 };
        let bundle = modify(&jars, kind, &ModifyParams::default()).unwrap();
        let base = ScanConfig { theta_pt: pt, theta_cc: cc, theta_ct: ct, ..Default::default() };
        let both = ScanConfig { modes: [Mode::Default, Mode::Repack].into(), ..base.clone() };
        prop_assert!(flagged(&bundle, &base).is_subset(&flagged(&bundle, &both)));
    }

    #[test]
    fn relocation_is_transparent_to_repack_mode(
        idx in 0usize..10,
        post in any::<bool>(),
        prefix in "[a-z]{1,3}(\\.[a-z]{1,3}){0,2}\\.",
    ) {
        let c = corpus();
        let jar = if post { c.post_jars()[idx].1.clone() } else { c.pre_jars()[idx].1.clone() };
        let relocated = modify(&[jar.clone()], ModKind::Type4, &ModifyParams { prefix, ..Default::default() }).unwrap();
        let repack = ScanConfig { modes: [Mode::Repack].into(), ..Default::default() };
        let summary = |(f, n): (Vec<Finding>, Vec<Finding>)| {
            let mut v: Vec<(bool, String, Vec<(Change, Verdict)>)> = f
                .into_iter()
                .map(|x| (true, x))
                .chain(n.into_iter().map(|x| (false, x)))
                .map(|(hit, x)| {
                    let mut cs: Vec<_> = x.constructs.iter().map(|c| (c.change, c.verdict)).collect();
                    cs.sort();
                    (hit, x.cve, cs)
                })
                .collect();
            v.sort();
            v
        };
        let original = summary(scan_view(&JarView::new(&jar), &c.kb, &ScanConfig::default()));
        let moved = summary(scan_view(&JarView::new(&relocated), &c.kb, &repack));
        prop_assert_eq!(moved, original);
        prop_assert!(flagged(&relocated, &ScanConfig::default()).is_empty());
    }

    #[test]
    fn relocation_keeps_unqualified_signatures(pick in selection(), prefix in "[a-z]{1,4}\\.") {
        let jars = selected_jars(&pick);
        prop_assume!(!jars.is_empty());
        let merged = modify(&jars, ModKind::Type2, &ModifyParams::default()).unwrap();
        let relocated = modify(&jars, ModKind::Type4, &ModifyParams { prefix: prefix.clone(), ..Default::default() }).unwrap();
        prop_assert!(relocated.failures.is_empty());
        prop_assert_eq!(unqualified_constructs(&relocated), unqualified_constructs(&merged));
        for c in relocated.classes.values() {
            prop_assert!(c.name().unwrap().starts_with(&prefix));
        }
    }

    #[test]
    fn modify_is_deterministic(pick in selection(), kind in 1u8..=4, seed in any::<u64>()) {
        let mut jars = selected_jars(&pick);
        prop_assume!(!jars.is_empty());
        let kind = ModKind::try_from(kind).unwrap();
        if kind == ModKind::Type1 {
            jars.truncate(1);
        }
        let params = ModifyParams { seed, ..Default::default() };
        let a = modify(&jars, kind, &params).unwrap().to_bytes().unwrap();
        let b = modify(&jars, kind, &params).unwrap().to_bytes().unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn scanning_is_deterministic(pick in selection(), pt in 0.05f64..=1.0) {
        let jars = selected_jars(&pick);
        prop_assume!(!jars.is_empty());
        let bundle = modify(&jars, ModKind::Type4, &ModifyParams::default()).unwrap();
        let cfg = ScanConfig { theta_pt: pt, ..both_modes() };
        let run = || serde_json::to_string(&scan_view(&JarView::new(&bundle), &corpus().kb, &cfg)).unwrap();
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn class_files_round_trip(seed in any::<u64>(), variant in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut class = oracles::assemble_one(&gen::int_method_source(&mut rng)).unwrap();
        if variant {
            class = compiler_variant(&class, &mut rng).unwrap();
        }
        let bytes = emit_class(&class).unwrap();
        let parsed = parse_class(&bytes).unwrap();
        prop_assert_eq!(&parsed, &class);
        prop_assert_eq!(emit_class(&parsed).unwrap(), bytes);
    }
}

#[test]
fn corpus_classes_round_trip() {
    for cve in &corpus().cves {
        for class in cve.pre.iter().chain(&cve.post) {
            let bytes = emit_class(class).unwrap();
            let parsed = parse_class(&bytes).unwrap();
            assert_eq!(&parsed, class);
            assert_eq!(emit_class(&parsed).unwrap(), bytes);
        }
    }
}

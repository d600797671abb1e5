mod common;

use jarsig::modharness::{modify, ModKind, ModifyParams};
use jarsig::scanner::{Mode, ScanConfig};

use common::Corpus;

#[test]
fn unmodified_pre_and_post() {
    let c = Corpus::build();
    let cfg = ScanConfig::default();
    assert_eq!(c.flagged_each(&c.pre_jars(), &cfg).len(), 10);
    assert!(c.flagged_each(&c.post_jars(), &cfg).is_empty());
}

#[test]
fn type1_variants() {
    let c = Corpus::build();
    let cfg = ScanConfig::default();
    for seed in 0..5 {
        let p = ModifyParams { seed, ..Default::default() };
        let pre: Vec<_> = c.pre_jars().iter().map(|(id, j)| (id.clone(), modify(&[j.clone()], ModKind::Type1, &p).unwrap())).collect();
        let post: Vec<_> = c.post_jars().iter().map(|(id, j)| (id.clone(), modify(&[j.clone()], ModKind::Type1, &p).unwrap())).collect();
        assert_eq!(c.flagged_each(&pre, &cfg).len(), 10, "seed {seed}");
        assert!(c.flagged_each(&post, &cfg).is_empty(), "seed {seed}: {:?}", c.flagged_each(&post, &cfg));
    }
}

#[test]
fn type4_relocated_bundle() {
    let c = Corpus::build();
    let cfg = ScanConfig {
        modes: [Mode::Default, Mode::Repack].into(),
        ..Default::default()
    };
    let pre: Vec<_> = c.pre_jars().into_iter().map(|(_, j)| j).collect();
    let post: Vec<_> = c.post_jars().into_iter().map(|(_, j)| j).collect();
    let r_pre = modify(&pre, ModKind::Type4, &ModifyParams::default()).unwrap();
    let r_post = modify(&post, ModKind::Type4, &ModifyParams::default()).unwrap();
    let (f_pre, _) = jarsig::scanner::scan_view(&jarsig::scanner::JarView::new(&r_pre), &c.kb, &cfg);
    let (f_post, _) = jarsig::scanner::scan_view(&jarsig::scanner::JarView::new(&r_post), &c.kb, &cfg);
    assert_eq!(f_pre.len(), 10, "{f_pre:#?}");
    assert!(f_pre.iter().all(|f| f.mode == Mode::Repack));
    assert!(f_post.is_empty(), "{f_post:#?}");
}

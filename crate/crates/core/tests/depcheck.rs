use std::collections::BTreeMap;

use raceset::depcheck::{self, CheckOptions, DependenceKind, PairVerdict, Verdict};
use raceset::kmodel::KernelModel;
use raceset::modeltext::parse_model;

fn fixture(name: &str) -> KernelModel {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gespmm_is_race_free() {
    let m = fixture("gespmm_alg2.model");
    let r = depcheck::races(&m, &CheckOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::RaceFree, "{:#?}", r.races);
}

#[test]
fn removing_the_barrier_races_on_shared_memory() {
    let m = fixture("gespmm_nobarrier.model");
    let r = depcheck::races(&m, &CheckOptions::default()).unwrap();
    let Verdict::RaceFound(ws) = &r.verdict else { panic!("{:?}", r.verdict) };
    assert!(ws.iter().any(|w| w.array == "sm_k"));
    assert!(ws.iter().any(|w| w.array == "sm_v"));
    for w in ws {
        assert!(w.array.starts_with("sm_"), "{w:?}");
        assert_eq!(w.source.phase, w.target.phase);
        assert_ne!(w.source.value("tid_x"), w.target.value("tid_x"));
    }
}

#[test]
fn polyp_raw_from_s_to_t() {
    let m = fixture("polyp.model");
    let mut opts = CheckOptions::default();
    opts.solve = opts.solve.with_param("n", 4);
    let deps = depcheck::dependences(&m, DependenceKind::RaW, &opts).unwrap();
    let st = deps.iter().find(|d| d.source == "S" && d.target == "T" && d.array == "C").unwrap();
    assert!(matches!(st.verdict, PairVerdict::Found(_)), "{:?}", st.verdict);
    let params = BTreeMap::from([("n".to_string(), 4)]);
    assert!(st.relation.contains(&[2], &[2, 2], &params).unwrap());
    assert!(!st.relation.contains(&[2], &[2, 3], &params).unwrap());
    // no grid, no races
    assert_eq!(depcheck::races(&m, &opts).unwrap().verdict, Verdict::RaceFree);
}

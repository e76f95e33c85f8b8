mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use raceset::depcheck::DependenceKind;
use raceset::iset::text::parse_set;
use raceset::kmodel::AccessKind;
use raceset::miniir;
use raceset::modeltext::parse_model;
use raceset::oracle::{
    detect_races, enumerate_set, ordered_pairs, run, run_ir, run_model, AccessLog, ConcreteInstance, EnumBox,
    OracleError, Program, RunOptions,
};

fn ir(src: &str) -> miniir::Function {
    miniir::parse(src).unwrap_or_else(|e| panic!("{e}"))
}

fn inst(src: &str) -> ConcreteInstance {
    ConcreteInstance::parse(src).unwrap_or_else(|e| panic!("{e}"))
}

fn pair_keys(log: &AccessLog) -> BTreeSet<(usize, usize)> {
    detect_races(log)
        .pairs
        .iter()
        .map(|p| {
            let (a, b) = (p.first.serial, p.second.serial);
            (a.min(b), a.max(b))
        })
        .collect()
}

#[test]
fn instance_errors_name_the_line() {
    let e = ConcreteInstance::parse("param n = 4\nparam m = four\n").unwrap_err();
    assert!(matches!(e, OracleError::Instance { line: 2, .. }), "{e}");
    let e = ConcreteInstance::parse("# comment\n\nfrob x\n").unwrap_err();
    assert!(matches!(e, OracleError::Instance { line: 3, .. }), "{e}");
    let e = ConcreteInstance::parse("array A = 1, 2\n").unwrap_err();
    assert!(matches!(e, OracleError::Instance { line: 1, .. }), "{e}");
    let e = ConcreteInstance::parse("grid 2 x 4\n").unwrap_err();
    assert!(matches!(e, OracleError::Instance { line: 1, .. }), "{e}");
}

#[test]
fn grid_sets_dimension_params() {
    let i = inst("grid 2,3 / 4\n");
    let g = i.grid.unwrap();
    assert_eq!(g.blocks, [2, 3, 1]);
    assert_eq!(g.threads, [4, 1, 1]);
    assert_eq!(i.params["griddim_y"], 3);
    assert_eq!(i.params["blockdim_x"], 4);
    assert_eq!(i.params["blockdim_z"], 1);
}

#[test]
fn malformed_csr_is_rejected() {
    let e = ConcreteInstance::parse(&fixture("instances/bad_csr.inst")).unwrap_err();
    assert!(matches!(e, OracleError::InvalidInstance(_)), "{e}");
    // column out of range
    let src = "param K = 2\narray rowPtr = [0, 1, 2]\narray colInd = [0, 2]\ncsr rowPtr colInd K\n";
    assert!(matches!(ConcreteInstance::parse(src), Err(OracleError::InvalidInstance(_))));
    // last row pointer must equal the number of nonzeros
    let src = "param K = 2\narray rowPtr = [0, 1, 3]\narray colInd = [0, 1]\ncsr rowPtr colInd K\n";
    assert!(matches!(ConcreteInstance::parse(src), Err(OracleError::InvalidInstance(_))));
    for ok in ["spmv_loose", "spmv_mid", "spmv_tight", "gespmm"] {
        instance(ok).validate().unwrap();
    }
}

#[test]
fn single_thread_never_races() {
    let f = ir(&fixture("polyp.mir"));
    let log = run_ir(&instance("polyp"), &f, None).unwrap();
    assert!(log.entries.iter().any(|e| e.kind == AccessKind::Write));
    assert!(detect_races(&log).is_race_free());

    // the racy kernel too, once it runs on one thread
    let f = ir(&fixture("stencil_nobarrier.mir"));
    let one = inst("grid 1 / 1\nparam n = 8\n");
    assert!(detect_races(&run_ir(&one, &f, None).unwrap()).is_race_free());
}

#[test]
fn reads_alone_do_not_race() {
    let f = ir("kernel @k(%n: i32, %A: ptr global f32 [%n]) {
entry:
  %v = load f32 %A[0]
  %w = load f32 %A[1]
  ret
}");
    let log = run_ir(&inst("grid 2 / 4\nparam n = 2\n"), &f, None).unwrap();
    assert_eq!(log.len(), 16);
    assert!(detect_races(&log).pairs.is_empty());
}

#[test]
fn staged_values_are_written_before_they_are_read() {
    let c = cross_check("gespmm_alg2", "gespmm");
    let shared: Vec<_> = c.log.entries.iter().filter(|e| e.array == "sm_k").collect();
    assert!(!shared.is_empty());
    for r in shared.iter().filter(|e| e.kind == AccessKind::Read) {
        let w = shared
            .iter()
            .filter(|w| w.kind == AccessKind::Write && w.block == r.block && w.cell == r.cell && w.phase < r.phase)
            .max_by_key(|w| w.phase)
            .unwrap_or_else(|| panic!("read without an earlier write: {r:?}"));
        // the latest write is from the same tile: one phase earlier
        assert_eq!(w.phase + 1, r.phase);
    }
    assert!(c.oracle.is_race_free());
}

#[test]
fn verdict_is_independent_of_log_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    for (k, i) in [("gespmm_nobarrier", "gespmm"), ("stencil_nobarrier", "stencil"), ("stencil", "stencil")] {
        let c = cross_check(k, i);
        let base = pair_keys(&c.log);
        for _ in 0..5 {
            let mut shuffled = c.log.clone();
            shuffled.entries.shuffle(&mut rng);
            assert_eq!(pair_keys(&shuffled), base, "{k}/{i}");
            assert_eq!(shuffled.normalized(), c.log.normalized());
        }
    }
}

#[test]
fn enumeration_is_lexicographic() {
    let s = parse_set("[n] -> { [i, j] : 0 <= i < n and 0 <= j <= i }").unwrap();
    let params = BTreeMap::from([("n".to_string(), 3)]);
    let pts = enumerate_set(&s, &params, EnumBox::radius(5)).unwrap();
    assert_eq!(pts, vec![vec![0, 0], vec![1, 0], vec![1, 1], vec![2, 0], vec![2, 1], vec![2, 2]]);

    // the box clips
    let pts = enumerate_set(&s, &params, EnumBox::new(1, 1)).unwrap();
    assert_eq!(pts, vec![vec![1, 1]]);

    let none = parse_set("{ [i] : i > 3 and i < 2 }").unwrap();
    assert!(enumerate_set(&none, &BTreeMap::new(), EnumBox::radius(10)).unwrap().is_empty());
    let empty_box = EnumBox::new(1, 0);
    assert!(enumerate_set(&s, &params, empty_box).unwrap().is_empty());

    let wide = parse_set("{ [a, b, c, d, e, f] : a >= 0 }").unwrap();
    assert!(matches!(
        enumerate_set(&wide, &BTreeMap::new(), EnumBox::radius(100)),
        Err(OracleError::BoxTooLarge(_))
    ));
    // unbound parameter
    assert!(enumerate_set(&s, &BTreeMap::new(), EnumBox::radius(2)).is_err());
}

#[test]
fn runaway_loop_hits_the_step_limit() {
    let f = ir("kernel @spin() {
entry:
  br head
head:
  %i = phi i32 [0, entry], [%i.next, head]
  %i.next = add i32 %i, 0
  br head
}");
    let e = run_ir(&inst("grid 1 / 1\n"), &f, None).unwrap_err();
    assert!(matches!(e, OracleError::StepLimitExceeded { block: [0, 0, 0], thread: [0, 0, 0] }), "{e}");
}

#[test]
fn out_of_bounds_is_reported() {
    let f = ir("kernel @k(%n: i32, %A: ptr global i32 [%n]) {
entry:
  %t = call tid.x
  %i = add i32 %t, 1
  store i32 0, %A[%i]
  ret
}");
    let e = run_ir(&inst("grid 1 / 4\nparam n = 4\n"), &f, None).unwrap_err();
    assert_eq!(
        e,
        OracleError::OutOfBounds {
            array: "A".into(),
            cell: vec![4]
        }
    );
}

#[test]
fn divergent_barrier_is_reported() {
    let f = ir("kernel @k() {
entry:
  %t = call tid.x
  %p = icmp slt i32 %t, 2
  br %p, wait, done
wait:
  barrier
  br done
done:
  ret
}");
    let e = run_ir(&inst("grid 1 / 4\n"), &f, None).unwrap_err();
    assert!(matches!(e, OracleError::BarrierDivergence { .. }), "{e}");
}

#[test]
fn missing_parameter() {
    let f = ir("kernel @k(%n: i32, %A: ptr global i32 [%n]) {
entry:
  store i32 0, %A[0]
  ret
}");
    assert!(matches!(run_ir(&inst("grid 1 / 1\n"), &f, None), Err(OracleError::MissingValue(_))));
    let m = parse_model(&fixture("polyp.model")).unwrap();
    assert!(matches!(
        run_model(&inst("grid 1 / 1\n"), &m, &RunOptions::default()),
        Err(OracleError::MissingValue(_))
    ));
}

#[test]
fn model_and_ir_runs_log_the_same_accesses() {
    type Key = (String, Vec<i64>, String, Vec<i64>, bool);
    // extracted statements carry the grid dims first
    let key = |log: &AccessLog, skip: usize| -> BTreeSet<Key> {
        log.entries
            .iter()
            .map(|e| (e.site.clone().unwrap(), e.point.clone().unwrap()[skip..].to_vec(), e.array.clone(), e.cell.clone(), e.kind == AccessKind::Write))
            .collect()
    };
    let i = instance("polyp");
    let m = parse_model(&fixture("polyp.model")).unwrap();
    let by_model = run(&i, Program::Model(&m)).unwrap();
    let c = cross_check("polyp", "polyp");
    let grid_dims = c.extraction.model.grid.dims().len();
    assert_eq!(key(&by_model, 0), key(&c.log, grid_dims));
    assert_eq!(by_model.len(), c.log.len());
}

#[test]
fn flow_pairs_are_ordered() {
    let m = parse_model(&fixture("polyp.model")).unwrap();
    let log = run_model(&instance("polyp"), &m, &RunOptions::default()).unwrap();
    let raw = ordered_pairs(&log, DependenceKind::RaW);
    assert!(!raw.is_empty());
    for (a, b) in &raw {
        assert_eq!(a.kind, AccessKind::Write);
        assert_eq!(b.kind, AccessKind::Read);
        assert_eq!(a.cell, b.cell);
        assert!(a.happens_before(b));
    }
    let war = ordered_pairs(&log, DependenceKind::WaR);
    assert!(war.iter().all(|(a, b)| a.kind == AccessKind::Read && b.kind == AccessKind::Write));
}

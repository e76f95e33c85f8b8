mod common;

use std::collections::BTreeMap;

use common::*;
use raceset::depcheck::{races, CheckOptions, Verdict};
use raceset::iset::AffineExpr;
use raceset::miniir::{
    self, barrier_count, extract_model, extract_with_layout, find_grid_iterators, find_loops, propagate, propagate_with,
    ExtractOptions, GridShape, Intrinsic, MiniIrError, Opaque, PropagatedExpr,
};
use raceset::kmodel::Axis;
use raceset::modeltext::parse_model;

fn parse(src: &str) -> miniir::Function {
    miniir::parse(src).unwrap_or_else(|e| panic!("{e}"))
}

fn grid(blocks: i64, threads: i64) -> ExtractOptions {
    ExtractOptions {
        grid: Some(GridShape {
            blocks: [blocks, 1, 1],
            threads: [threads, 1, 1],
        }),
        ..Default::default()
    }
}

fn atom(n: &str) -> AffineExpr {
    AffineExpr::param(n)
}

const ROW: &str = "kernel @row(%n: i32, %A: ptr global f32 [%n]) {
entry:
  %t = call tid.x
  %b = call bid.x
  %bd = call blockdim.x
  %base = mul i32 %b, %bd
  %row = add i32 %base, %t
  store f32 0, %A[%row]
  ret
}";

#[test]
fn gespmm_fixture_shape() {
    let f = parse(&fixture("gespmm_alg2.mir"));
    let loops = find_loops(&f).unwrap();
    assert_eq!(loops.len(), 2);
    assert_eq!(barrier_count(&f), 2);
    assert_eq!(loops.iter().filter(|l| l.parent.is_none()).count(), 1, "{loops:?}");

    let nb = parse(&fixture("gespmm_nobarrier.mir"));
    // only the barrier between staging and use is gone
    assert_eq!(barrier_count(&nb), 1);
    assert_eq!(find_loops(&nb).unwrap().len(), 2);
}

#[test]
fn every_fixture_parses() {
    for name in [
        "gespmm_alg2",
        "gespmm_nobarrier",
        "polyp",
        "stencil",
        "stencil_nobarrier",
        "global_overlap",
        "spmv_csr",
        "spmv_scatter",
        "id_misuse",
        "empty",
    ] {
        miniir::parse(&fixture(&format!("{name}.mir"))).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn empty_kernel_has_entry_and_no_statements() {
    let f = parse(&fixture("empty.mir"));
    assert_eq!(f.blocks.len(), 1);
    assert!(find_loops(&f).unwrap().is_empty());
    assert_eq!(barrier_count(&f), 0);
    let m = extract_model(&f, &ExtractOptions::default()).unwrap();
    assert!(m.statements.is_empty());
    assert_eq!(races(&m, &CheckOptions::default()).unwrap().verdict, Verdict::RaceFree);
}

#[test]
fn use_before_definition() {
    let src = "kernel @k(%A: ptr global i32 [4]) {
entry:
  store i32 %x, %A[0]
  %x = add i32 1, 2
  ret
}";
    assert!(matches!(miniir::parse(src), Err(MiniIrError::SsaViolation(_))));

    let twice = "kernel @k() {
entry:
  %x = add i32 1, 2
  %x = add i32 1, 3
  ret
}";
    assert!(matches!(miniir::parse(twice), Err(MiniIrError::SsaViolation(_))));
}

#[test]
fn syntax_errors_carry_lines() {
    let src = "kernel @k() {
entry:
  %x = frobnicate i32 1, 2
  ret
}";
    assert_eq!(
        miniir::parse(src),
        Err(MiniIrError::UnknownOpcode {
            line: 3,
            op: "frobnicate".into()
        })
    );
    let src = "kernel @k() {
entry:
  %x = add i32 1
  ret
}";
    match miniir::parse(src) {
        Err(MiniIrError::SyntaxError { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    assert!(matches!(miniir::parse("kernel k() {}"), Err(MiniIrError::SyntaxError { line: 1, .. })));
}

#[test]
fn grid_iterators_bound_to_intrinsics() {
    let f = parse(ROW);
    let ids = find_grid_iterators(&f).unwrap();
    let by_reg: BTreeMap<_, _> = ids.iter().map(|b| (b.register.as_str(), (b.intrinsic, b.model_name.as_str()))).collect();
    assert_eq!(by_reg["t"], (Intrinsic::Tid(Axis::X), "tid_x"));
    assert_eq!(by_reg["b"], (Intrinsic::Bid(Axis::X), "bid_x"));
    assert_eq!(by_reg["bd"].0, Intrinsic::BlockDim(Axis::X));

    // no intrinsics: no bindings
    let f = parse(&fixture("empty.mir"));
    assert!(find_grid_iterators(&f).unwrap().is_empty());
}

#[test]
fn row_index_is_affine_once_block_size_is_fixed() {
    let f = parse(ROW);
    let consts = BTreeMap::from([("blockdim.x".to_string(), 4)]);
    let v = propagate_with(&f, &consts).unwrap();
    let expected = atom("bid.x").scale(4).add(&atom("tid.x"));
    assert_eq!(v["row"], PropagatedExpr::Affine(expected));

    // symbolic block size: the product is not affine
    let v = propagate(&f).unwrap();
    assert!(!matches!(v["row"], PropagatedExpr::Affine(_)), "{}", v["row"]);
    assert!(matches!(
        extract_model(&f, &ExtractOptions::default()),
        Err(MiniIrError::UnsupportedIdPattern(_))
    ));
    let m = extract_model(&f, &grid(2, 4)).unwrap();
    assert_eq!(m.statements.len(), 1);
}

#[test]
fn id_misuse_is_rejected() {
    let f = parse(&fixture("id_misuse.mir"));
    assert!(matches!(
        extract_model(&f, &ExtractOptions::default()),
        Err(MiniIrError::UnsupportedIdPattern(_))
    ));
}

#[test]
fn propagation_reaches_a_fixed_point() {
    // every atom left in a propagated value is a leaf: substituting the
    // propagated values into it again changes nothing
    for name in ["gespmm_alg2", "stencil", "spmv_csr", "polyp"] {
        let f = parse(&fixture(&format!("{name}.mir")));
        let consts = BTreeMap::from([("blockdim.x".to_string(), 4), ("griddim.x".to_string(), 2)]);
        let v = propagate_with(&f, &consts).unwrap();
        for (r, e) in &v {
            let PropagatedExpr::Affine(e) = e else { continue };
            for a in e.param_coeffs().keys() {
                let Some(reg) = a.strip_prefix('%') else { continue };
                if let Some(PropagatedExpr::Affine(inner)) = v.get(reg) {
                    assert_eq!(inner, &atom(a), "{name}: %{r} mentions %{reg} = {inner}");
                }
            }
        }
        assert_eq!(propagate_with(&f, &consts).unwrap(), v, "{name}: not deterministic");
    }
}

#[test]
fn loads_stay_opaque() {
    let f = parse(&fixture("spmv_csr.mir"));
    let v = propagate_with(&f, &BTreeMap::from([("blockdim.x".to_string(), 4)])).unwrap();
    assert!(matches!(&v["rs"], PropagatedExpr::Opaque(Opaque::Load { array, .. }) if array == "rowPtr"));
    assert!(!matches!(v["col"], PropagatedExpr::Affine(_)));
}

#[test]
fn irreducible_control_flow() {
    let src = "kernel @k(%c: i32) {
entry:
  %p = icmp slt i32 %c, 0
  br %p, a, b
a:
  br b
b:
  br a
}";
    let f = parse(src);
    assert!(matches!(find_loops(&f), Err(MiniIrError::IrreducibleCfg(_))));
}

#[test]
fn non_affine_loop_bound() {
    // the iterator doubles each trip
    let src = "kernel @k(%n: i32, %A: ptr global i32 [%n]) {
entry:
  br head
head:
  %i = phi i32 [1, entry], [%i.next, body]
  %more = icmp slt i32 %i, %n
  br %more, body, done
body:
  store i32 0, %A[%i]
  %i.next = mul i32 %i, 2
  br head
done:
  ret
}";
    let f = parse(src);
    assert!(matches!(find_loops(&f), Err(MiniIrError::NonAffineBound { .. })), "{:?}", find_loops(&f));
}

#[test]
fn loop_bounds_are_recovered() {
    let f = parse(&fixture("spmv_csr.mir"));
    let loops = find_loops(&f).unwrap();
    assert_eq!(loops.len(), 1);
    assert_eq!(loops[0].header, "head");
    assert_eq!(loops[0].exit, "store");
    assert_eq!(loops[0].back_edge, ("body".to_string(), "head".to_string()));
}

#[test]
fn extracted_polyp_matches_hand_model() {
    let f = parse(&fixture("polyp.mir"));
    let ir = extract_model(&f, &grid(1, 1)).unwrap();
    let hand = parse_model(&fixture("polyp.model")).unwrap();
    let opts = CheckOptions::default();
    let a = races(&ir, &opts).unwrap().verdict;
    let b = races(&hand, &opts).unwrap().verdict;
    assert_eq!(a.token(), b.token());
    assert_eq!(a, Verdict::RaceFree);
}

#[test]
fn section_hints_rename_statements() {
    let f = parse(&fixture("stencil.mir"));
    let mut opts = grid(2, 4);
    opts.section_hints = BTreeMap::from([("fill".to_string(), "Load".to_string())]);
    let m = extract_model(&f, &opts).unwrap();
    assert!(m.statement("Load").is_some());
    assert!(m.statement("fill").is_none());
    assert!(m.statement("body").is_some());
}

#[test]
fn barriers_separate_phases() {
    let f = parse(&fixture("stencil.mir"));
    let ex = extract_with_layout(&f, &grid(2, 4)).unwrap();
    let m = &ex.model;
    let phase = |l: &str| m.schedule.phase(l).unwrap().constant_term();
    assert!(phase("fill") < phase("body"));
    assert_eq!(races(m, &CheckOptions::default()).unwrap().verdict, Verdict::RaceFree);

    let nb = parse(&fixture("stencil_nobarrier.mir"));
    let m = extract_model(&nb, &grid(2, 4)).unwrap();
    assert!(matches!(races(&m, &CheckOptions::default()).unwrap().verdict, Verdict::RaceFound(_)));
}

#[test]
fn layout_covers_every_access() {
    for (k, i) in IR_PAIRS {
        let c = cross_check(k, i);
        assert!(
            c.log.entries.iter().all(|e| e.site.is_some() && e.point.is_some()),
            "{k}/{i}: access without a statement instance"
        );
    }
}

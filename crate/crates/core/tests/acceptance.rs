//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use raceset::depcheck::{dependences, races, CheckOptions, DependenceKind, Verdict};
use raceset::isccemit;
use raceset::kmodel::KernelModel;
use raceset::miniir::{self, ExtractOptions};
use raceset::modeltext::parse_model;
use raceset::oracle::{detect_races, enumerate_set, ordered_pairs, run_ir, run_model, EnumBox, RunOptions};

type Outcome = Result<String, String>;

fn model(name: &str) -> KernelModel {
    parse_model(&fixture(&format!("{name}.model"))).unwrap()
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Both encodings of the two-barrier Ge-SpMM kernel are race-free, fast.
fn criterion_1() -> Outcome {
    let limit = Duration::from_secs(10);
    let t = Instant::now();
    let hand = races(&model("gespmm_alg2"), &CheckOptions::default()).map_err(|e| e.to_string())?;
    let hand_time = t.elapsed();
    ensure(hand.verdict == Verdict::RaceFree, format!("hand model: {}", hand.verdict.token()))?;
    ensure(hand_time < limit, format!("hand model took {hand_time:?}"))?;

    let t = Instant::now();
    let f = miniir::parse(&fixture("gespmm_alg2.mir")).map_err(|e| e.to_string())?;
    let m = miniir::extract_model(&f, &ExtractOptions::default()).map_err(|e| e.to_string())?;
    let ir = races(&m, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let ir_time = t.elapsed();
    ensure(ir.verdict == Verdict::RaceFree, format!("mini-IR: {}", ir.verdict.token()))?;
    ensure(ir_time < limit, format!("mini-IR took {ir_time:?}"))?;
    Ok(format!("hand {hand_time:.2?}, mini-IR {ir_time:.2?}"))
}

/// Without the barriers the check reports a shared-memory race, the oracle
/// observes one, and the reported witness is an access the oracle logged.
fn criterion_2() -> Outcome {
    let hand = races(&model("gespmm_nobarrier"), &CheckOptions::default()).map_err(|e| e.to_string())?;
    let Verdict::RaceFound(ws) = &hand.verdict else {
        return Err(format!("hand model: {}", hand.verdict.token()));
    };
    ensure(
        ws.iter().any(|w| w.array == "sm_k" || w.array == "sm_v"),
        "hand model witness is not on sm_k/sm_v",
    )?;

    let c = cross_check("gespmm_nobarrier", "gespmm");
    ensure(!c.oracle.is_race_free(), "oracle found no race")?;
    let Verdict::RaceFound(ws) = &c.symbolic else {
        return Err(format!("mini-IR: {}", c.symbolic.token()));
    };
    let w = ws
        .iter()
        .find(|w| w.array == "sm_k" || w.array == "sm_v")
        .ok_or("mini-IR witness is not on sm_k/sm_v")?;
    let matches = |r: &raceset::depcheck::InstanceRef, e: &raceset::oracle::AccessLogEntry| {
        let vals: Vec<i64> = r.values.iter().map(|(_, v)| *v).collect();
        e.site.as_deref() == Some(r.statement.as_str())
            && e.point.as_deref() == Some(vals.as_slice())
            && e.array == w.array
            && e.cell == w.cell
    };
    let found = c.oracle.pairs.iter().any(|p| {
        (matches(&w.source, &p.first) && matches(&w.target, &p.second))
            || (matches(&w.source, &p.second) && matches(&w.target, &p.first))
    });
    ensure(found, format!("witness {w:?} is not an oracle race pair"))?;
    Ok(format!("{} oracle pairs; witness on {}{:?}", c.oracle.pairs.len(), w.array, w.cell))
}

/// The S -> T flow dependence on C at n = 4 is exactly the set of ordered
/// write/read pairs the oracle observes.
fn criterion_3() -> Outcome {
    let m = model("polyp");
    let inst = instance("polyp");
    let deps = dependences(&m, DependenceKind::RaW, &CheckOptions::default()).map_err(|e| e.to_string())?;
    let d = deps
        .iter()
        .find(|d| d.source == "S" && d.target == "T" && d.array == "C")
        .ok_or("no S -> T dependence on C")?;
    let pairs = enumerate_set(&d.relation.wrapped(), &inst.params, EnumBox::radius(8)).map_err(|e| e.to_string())?;
    let symbolic: BTreeSet<(Vec<i64>, Vec<i64>)> = pairs.into_iter().map(|p| (p[..1].to_vec(), p[1..].to_vec())).collect();
    ensure(!symbolic.is_empty(), "dependence is empty")?;

    let log = run_model(&inst, &m, &RunOptions::default()).map_err(|e| e.to_string())?;
    let observed: BTreeSet<(Vec<i64>, Vec<i64>)> = ordered_pairs(&log, DependenceKind::RaW)
        .into_iter()
        .filter(|(a, b)| a.site.as_deref() == Some("S") && b.site.as_deref() == Some("T") && a.array == "C")
        .map(|(a, b)| (a.point.unwrap(), b.point.unwrap()))
        .collect();
    ensure(symbolic == observed, format!("symbolic {symbolic:?} vs oracle {observed:?}"))?;
    Ok(format!("{} pairs", symbolic.len()))
}

/// Set operations agree with enumeration on seeded random inputs.
fn criterion_4() -> Outcome {
    let s = seed();
    let r = property_suite(s, 1000);
    ensure(r.cases == 1000, format!("ran {} cases", r.cases))?;
    ensure(r.ok(), format!("seed {s:#x}: {:?}", r.mismatches.iter().take(3).collect::<Vec<_>>()))?;
    Ok(format!("seed {s:#x}, {} cases, {} bounded-inconclusive", r.cases, r.inconclusive_bounded))
}

/// Extraction + symbolic check agrees with the interpreter on every mini-IR
/// fixture and instance; propagated affine values and phases match runtime.
fn criterion_5() -> Outcome {
    let mut values = 0;
    let mut phases = 0;
    for (k, i) in IR_PAIRS {
        let c = cross_check(k, i);
        ensure(
            c.agree(),
            format!("{k}/{i}: symbolic {} vs oracle {}", c.symbolic.token(), c.oracle.token()),
        )?;
        let (n, bad) = affine_agreement(&c);
        ensure(bad.is_empty(), format!("{k}/{i}: {}", bad.join("; ")))?;
        values += n;
        let (n, bad) = phase_agreement(&c);
        ensure(bad.is_empty(), format!("{k}/{i}: {}", bad.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))?;
        phases += n;
    }
    ensure(values > 0 && phases > 0, "nothing compared")?;
    Ok(format!("{} kernel/instance pairs, {values} values, {phases} phases", IR_PAIRS.len()))
}

/// Loop bounds read from memory become parameters constrained by the
/// array's value range; the verdict only improves as the instance narrows.
fn criterion_6() -> Outcome {
    let f = miniir::parse(&fixture("spmv_csr.mir")).map_err(|e| e.to_string())?;
    let opts = ExtractOptions {
        grid: instance("spmv_loose").grid,
        ..Default::default()
    };
    let m = miniir::extract_model(&f, &opts).map_err(|e| e.to_string())?;
    let data: Vec<_> = m.params.iter().filter(|p| p.source.as_ref().is_some_and(|s| s.array == "rowPtr")).collect();
    ensure(data.len() == 2, format!("{} rowPtr parameters", data.len()))?;
    let constraints: Vec<String> = m.param_constraints().iter().map(|c| c.to_string()).collect();
    for p in &data {
        ensure(
            constraints.iter().any(|c| c.contains(&p.name) && c.contains("nnz")),
            format!("no containment constraint for {}: {constraints:?}", p.name),
        )?;
    }
    let body = m.statement("body").ok_or("no loop body statement")?;
    let bound = body.domain.to_string();
    ensure(data.iter().all(|p| bound.contains(&p.name)), format!("body domain {bound}"))?;
    ensure(
        races(&m, &CheckOptions::default()).map_err(|e| e.to_string())?.verdict == Verdict::RaceFree,
        "spmv_csr not race-free for all row pointers",
    )?;

    // loose ⊇ mid ⊇ tight
    let insts = ["spmv_loose", "spmv_mid", "spmv_tight"].map(instance);
    let nz = |i: &raceset::oracle::ConcreteInstance| -> BTreeSet<(i64, i64)> {
        let rp = &i.arrays["rowPtr"];
        let ci = &i.arrays["colInd"];
        (0..rp.len() - 1)
            .flat_map(|r| (rp[r]..rp[r + 1]).map(move |k| (r as i64, ci[k as usize])))
            .collect()
    };
    ensure(nz(&insts[1]).is_subset(&nz(&insts[0])), "mid not inside loose")?;
    ensure(nz(&insts[2]).is_subset(&nz(&insts[1])), "tight not inside mid")?;

    let mut summary = Vec::new();
    for k in ["spmv_csr", "spmv_scatter"] {
        let ranks: Vec<(u8, bool)> = ["spmv_loose", "spmv_mid", "spmv_tight"]
            .iter()
            .map(|i| {
                let c = cross_check(k, i);
                (rank(&c.symbolic), c.oracle.is_race_free())
            })
            .collect();
        ensure(
            ranks.windows(2).all(|w| w[1].0 <= w[0].0 && (w[1].1 || !w[0].1)),
            format!("{k}: not monotone {ranks:?}"),
        )?;
        summary.push(format!("{k} {:?}", ranks.iter().map(|r| r.0).collect::<Vec<_>>()));
    }
    Ok(summary.join(", "))
}

/// Emitted scripts are byte-identical to the checked-in ones, run after run.
fn criterion_7() -> Outcome {
    for name in ["polyp", "gespmm_alg2"] {
        let golden = fixture(&format!("golden/{name}.iscc"));
        ensure(!golden.contains('\r'), format!("{name}: golden has CR"))?;
        let m = model(name);
        let a = isccemit::emit(&m).map_err(|e| e.to_string())?.text();
        let b = isccemit::emit(&model(name)).map_err(|e| e.to_string())?.text();
        ensure(a == b, format!("{name}: two runs differ"))?;
        ensure(a == golden, format!("{name}: differs from golden"))?;
    }
    Ok("polyp, gespmm_alg2".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("1 two-barrier kernel race-free", criterion_1),
        ("2 barrier-free kernel races, confirmed by oracle", criterion_2),
        ("3 flow dependence equals observed pairs", criterion_3),
        ("4 set operations match enumeration", criterion_4),
        ("5 extraction agrees with interpreter", criterion_5),
        ("6 data-dependent bounds, monotone verdicts", criterion_6),
        ("7 deterministic script emission", criterion_7),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("PASS criterion {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL criterion {name}: panicked");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of 7 acceptance criteria failed");
        std::process::exit(1);
    }
    sidecar_checks();
    println!("all 7 acceptance criteria passed");
}

/// The interpreter does not need a layout: sites are optional.
fn sidecar_checks() {
    let f = miniir::parse(&fixture("stencil.mir")).unwrap();
    let log = run_ir(&instance("stencil"), &f, None).unwrap();
    assert!(!log.is_empty());
    assert!(log.entries.iter().all(|e| e.site.is_none()));
    assert!(detect_races(&log).is_race_free());
}

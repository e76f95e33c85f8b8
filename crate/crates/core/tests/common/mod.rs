//! Shared helpers: fixture loading and the seeded random-set property suite.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raceset::iset::expr::{gcd_normalize, Normalized};
use raceset::iset::{lex_lt, AffineExpr, Conj, Constraint, EmptinessVerdict, IntRel, IntSet, SolveOptions};
use raceset::oracle::{enumerate_set, EnumBox};

pub fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// `RACESET_SEED` if set, else a fixed seed.
pub fn seed() -> u64 {
    std::env::var("RACESET_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

/// `coeffs . x + c >= 0` (or `== 0`).
#[derive(Debug, Clone)]
pub struct Lin {
    pub coeffs: Vec<i64>,
    pub c: i64,
    pub eq: bool,
}

impl Lin {
    fn value(&self, p: &[i64]) -> i64 {
        self.coeffs.iter().zip(p).map(|(a, x)| a * x).sum::<i64>() + self.c
    }

    pub fn holds(&self, p: &[i64]) -> bool {
        let v = self.value(p);
        if self.eq {
            v == 0
        } else {
            v >= 0
        }
    }

    pub fn constraint(&self, names: &[String]) -> Constraint {
        let mut e = AffineExpr::constant(self.c);
        for (n, a) in names.iter().zip(&self.coeffs) {
            if *a != 0 {
                e = e.with_dim(n, *a);
            }
        }
        if self.eq {
            Constraint::equals_zero(e)
        } else {
            Constraint::non_negative(e)
        }
    }
}

/// Reference DNF evaluated directly.
#[derive(Debug, Clone)]
pub struct RefSet {
    pub arity: usize,
    pub disjuncts: Vec<Vec<Lin>>,
}

impl RefSet {
    pub fn holds(&self, p: &[i64]) -> bool {
        self.disjuncts.iter().any(|d| d.iter().all(|l| l.holds(p)))
    }

    pub fn conjs(&self, names: &[String]) -> Vec<Conj> {
        self.disjuncts
            .iter()
            .map(|d| Conj::new(d.iter().map(|l| l.constraint(names)).collect()))
            .collect()
    }

    pub fn set(&self, names: &[String]) -> IntSet {
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        IntSet::from_disjuncts(Some("S"), &refs, self.conjs(names)).unwrap()
    }
}

pub fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub const R: i64 = 10;

/// A disjunct bounded by a box inside `[-R, R]`, plus a few random
/// constraints with coefficients in `[-k, k]`.
fn random_conj(rng: &mut ChaCha8Rng, arity: usize, k: i64) -> Vec<Lin> {
    let mut out = Vec::new();
    for d in 0..arity {
        let lo = rng.gen_range(-R..=R);
        let hi = rng.gen_range(lo..=R);
        let mut up = vec![0; arity];
        up[d] = 1;
        out.push(Lin {
            coeffs: up.clone(),
            c: -lo,
            eq: false,
        });
        up[d] = -1;
        out.push(Lin {
            coeffs: up,
            c: hi,
            eq: false,
        });
    }
    for _ in 0..rng.gen_range(1..=2) {
        let coeffs: Vec<i64> = (0..arity).map(|_| rng.gen_range(-k..=k)).collect();
        out.push(Lin {
            coeffs,
            c: rng.gen_range(-R..=R),
            eq: rng.gen_bool(0.15),
        });
    }
    out
}

pub fn random_set(rng: &mut ChaCha8Rng, arity: usize, k: i64) -> RefSet {
    let n = rng.gen_range(1..=2);
    RefSet {
        arity,
        disjuncts: (0..n).map(|_| random_conj(rng, arity, k)).collect(),
    }
}

fn box_points(arity: usize, lo: i64, hi: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|p: Vec<i64>| {
                (lo..=hi).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn enumerated(s: &IntSet) -> Result<Vec<Vec<i64>>, String> {
    enumerate_set(s, &BTreeMap::new(), EnumBox::radius(R)).map_err(|e| e.to_string())
}

fn expect(set: &IntSet, f: impl Fn(&[i64]) -> bool) -> Result<(), String> {
    let got = enumerated(set)?;
    let want: Vec<Vec<i64>> = box_points(set.arity(), -R, R).into_iter().filter(|p| f(p)).collect();
    if got == want {
        Ok(())
    } else {
        let extra: Vec<_> = got.iter().filter(|p| !want.contains(p)).take(3).collect();
        let missing: Vec<_> = want.iter().filter(|p| !got.contains(p)).take(3).collect();
        Err(format!("{set}: extra {extra:?}, missing {missing:?}"))
    }
}

#[derive(Debug, Default)]
pub struct SuiteReport {
    pub cases: usize,
    pub mismatches: Vec<String>,
    pub unsound_empty: usize,
    pub inconclusive_bounded: usize,
    pub per_op: BTreeMap<&'static str, usize>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.unsound_empty == 0 && self.inconclusive_bounded == 0
    }
}

/// Random sets and relations (at most 3 dims, coefficients in [-3, 3],
/// every dim bounded within [-10, 10]); every operation is compared point
/// by point with a direct evaluation of the generating constraints.
pub fn property_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = SuiteReport::default();
    let opts = SolveOptions::default();
    for case in 0..cases {
        let op = case % 9;
        let arity = rng.gen_range(1..=3);
        let x = names("x", arity);
        let outcome: Result<(), String> = match op {
            0 => {
                let (a, b) = (random_set(&mut rng, arity, 3), random_set(&mut rng, arity, 3));
                *rep.per_op.entry("intersect").or_default() += 1;
                expect(&a.set(&x), |p| a.holds(p)).and_then(|_| {
                    let s = a.set(&x).intersect(&b.set(&x)).map_err(|e| e.to_string())?;
                    expect(&s, |p| a.holds(p) && b.holds(p))
                })
            }
            1 => {
                let (a, b) = (random_set(&mut rng, arity, 3), random_set(&mut rng, arity, 3));
                *rep.per_op.entry("union").or_default() += 1;
                a.set(&x)
                    .union_same(&b.set(&x))
                    .map_err(|e| e.to_string())
                    .and_then(|s| expect(&s, |p| a.holds(p) || b.holds(p)))
            }
            2 => {
                let (a, b) = (random_set(&mut rng, arity, 3), random_set(&mut rng, arity, 3));
                *rep.per_op.entry("subtract").or_default() += 1;
                a.set(&x)
                    .subtract(&b.set(&x))
                    .map_err(|e| e.to_string())
                    .and_then(|s| expect(&s, |p| a.holds(p) && !b.holds(p)))
            }
            3 => {
                let mut a = random_set(&mut rng, arity, 3);
                // extra constraints make empty sets common
                for d in a.disjuncts.iter_mut() {
                    let more = random_conj(&mut rng, arity, 3);
                    d.extend(more.into_iter().skip(2 * arity));
                }
                *rep.per_op.entry("is_empty").or_default() += 1;
                let any = box_points(arity, -R, R).iter().any(|p| a.holds(p));
                match a.set(&x).is_empty(&opts) {
                    EmptinessVerdict::Empty if any => {
                        rep.unsound_empty += 1;
                        Err(format!("{}: Empty but has points", a.set(&x)))
                    }
                    EmptinessVerdict::Empty => Ok(()),
                    EmptinessVerdict::NonEmpty(w) => {
                        let p: Vec<i64> = x.iter().map(|n| w.dim(n).unwrap_or(i64::MIN)).collect();
                        if a.holds(&p) {
                            Ok(())
                        } else {
                            Err(format!("{}: witness {p:?} is not a member", a.set(&x)))
                        }
                    }
                    EmptinessVerdict::Inconclusive { reason, .. } => {
                        rep.inconclusive_bounded += 1;
                        Err(format!("{}: inconclusive on a bounded set: {reason}", a.set(&x)))
                    }
                }
            }
            4 => {
                let n_in = rng.gen_range(1..=2);
                let n_out = rng.gen_range(1..=(3 - n_in));
                let a = random_set(&mut rng, n_in + n_out, 3);
                let ins = names("a", n_in);
                let outs = names("b", n_out);
                let all: Vec<String> = ins.iter().chain(outs.iter()).cloned().collect();
                *rep.per_op.entry("inverse").or_default() += 1;
                let r = rel(&ins, &outs, "A", "B", a.conjs(&all));
                expect(r.inverse().wrapped(), |p| {
                    let mut q = p[n_out..].to_vec();
                    q.extend_from_slice(&p[..n_out]);
                    a.holds(&q)
                })
            }
            5 => {
                let mid = rng.gen_range(1..=2);
                let r1 = random_set(&mut rng, 1 + mid, 3);
                let r2 = random_set(&mut rng, mid + 1, 3);
                let (ai, bm, bm2, co) = (names("a", 1), names("b", mid), names("m", mid), names("c", 1));
                let all1: Vec<String> = ai.iter().chain(bm.iter()).cloned().collect();
                let all2: Vec<String> = bm2.iter().chain(co.iter()).cloned().collect();
                let first = rel(&ai, &bm, "A", "B", r1.conjs(&all1));
                let second = rel(&bm2, &co, "B", "C", r2.conjs(&all2));
                *rep.per_op.entry("compose").or_default() += 1;
                let mids = box_points(mid, -R, R);
                IntRel::compose(&first, &second)
                    .map_err(|e| e.to_string())
                    .and_then(|c| {
                        expect(c.wrapped(), |p| {
                            mids.iter().any(|y| {
                                let mut q1 = vec![p[0]];
                                q1.extend_from_slice(y);
                                let mut q2 = y.clone();
                                q2.push(p[1]);
                                r1.holds(&q1) && r2.holds(&q2)
                            })
                        })
                    })
            }
            6 => {
                let d = arity;
                *rep.per_op.entry("lex_lt").or_default() += 1;
                let r = lex_lt(d);
                let pts = box_points(d, 0, 2);
                let mut bad = None;
                'outer: for a in &pts {
                    for b in &pts {
                        let got = r.contains(a, b, &BTreeMap::new()).unwrap_or(false);
                        if got != (a < b) {
                            bad = Some(format!("lex_lt({d}) on {a:?} {b:?}: {got}"));
                            break 'outer;
                        }
                    }
                }
                bad.map_or(Ok(()), Err)
            }
            7 => {
                let a = random_set(&mut rng, arity, 1);
                *rep.per_op.entry("project_out").or_default() += 1;
                let last = x[arity - 1].clone();
                a.set(&x)
                    .project_out(&[last.as_str()])
                    .map_err(|e| e.to_string())
                    .and_then(|s| {
                        expect(&s, |p| {
                            (-R..=R).any(|v| {
                                let mut q = p.to_vec();
                                q.push(v);
                                a.holds(&q)
                            })
                        })
                    })
            }
            _ => {
                let g = rng.gen_range(1..=3);
                let lin = Lin {
                    coeffs: (0..arity).map(|_| g * rng.gen_range(-3..=3)).collect(),
                    c: rng.gen_range(-R..=R),
                    eq: rng.gen_bool(0.4),
                };
                *rep.per_op.entry("gcd_normalize").or_default() += 1;
                let c = lin.constraint(&x);
                let norm = gcd_normalize(&c);
                let dims = |p: &[i64]| -> BTreeMap<String, i64> { x.iter().cloned().zip(p.iter().copied()).collect() };
                let none = BTreeMap::new();
                let bad = box_points(arity, -R, R).into_iter().find(|p| {
                    let want = lin.holds(p);
                    let got = match &norm {
                        Normalized::Kept(k) => k.holds(&dims(p), &none).unwrap_or(!want),
                        Normalized::Tautology => true,
                        Normalized::ProvenInfeasible => false,
                    };
                    got != want
                });
                bad.map_or(Ok(()), |p| Err(format!("gcd_normalize({c}) -> {norm:?} differs at {p:?}")))
            }
        };
        rep.cases += 1;
        if let Err(m) = outcome {
            rep.mismatches.push(format!("case {case}: {m}"));
        }
    }
    rep
}

fn rel(ins: &[String], outs: &[String], a: &str, b: &str, conjs: Vec<Conj>) -> IntRel {
    let i: Vec<&str> = ins.iter().map(String::as_str).collect();
    let o: Vec<&str> = outs.iter().map(String::as_str).collect();
    IntRel::from_disjuncts(Some(a), &i, Some(b), &o, conjs).unwrap()
}

// ---------------------------------------------------------------------------
// end-to-end agreement between extraction + symbolic check and the oracle

use raceset::depcheck::{races, CheckOptions, Verdict};
use raceset::miniir::{self, ExtractOptions, Extraction, Function, InstKind, PropagatedExpr};
use raceset::oracle::{detect_races, run_ir, AccessLog, ConcreteInstance, OracleVerdict};

/// Every mini-IR fixture that extracts, with each instance it ships with.
pub const IR_PAIRS: &[(&str, &str)] = &[
    ("gespmm_alg2", "gespmm"),
    ("gespmm_alg2", "gespmm_one_block"),
    ("gespmm_nobarrier", "gespmm"),
    ("gespmm_nobarrier", "gespmm_one_block"),
    ("polyp", "polyp"),
    ("stencil", "stencil"),
    ("stencil_nobarrier", "stencil"),
    ("global_overlap", "global_overlap"),
    ("spmv_csr", "spmv_loose"),
    ("spmv_csr", "spmv_mid"),
    ("spmv_csr", "spmv_tight"),
    ("spmv_scatter", "spmv_loose"),
    ("spmv_scatter", "spmv_mid"),
    ("spmv_scatter", "spmv_tight"),
    ("empty", "empty"),
];

pub fn instance(name: &str) -> ConcreteInstance {
    ConcreteInstance::parse(&fixture(&format!("instances/{name}.inst"))).unwrap()
}

pub struct CrossCheck {
    pub function: Function,
    pub extraction: Extraction,
    pub instance: ConcreteInstance,
    pub log: AccessLog,
    pub oracle: OracleVerdict,
    pub symbolic: Verdict,
}

impl CrossCheck {
    pub fn agree(&self) -> bool {
        match &self.symbolic {
            Verdict::RaceFree => self.oracle.is_race_free(),
            Verdict::RaceFound(_) => !self.oracle.is_race_free(),
            // permitted only when the oracle finds a race
            Verdict::Inconclusive(_) => !self.oracle.is_race_free(),
        }
    }
}

/// Extract with the instance's grid, check symbolically narrowed to the
/// instance, and run the oracle on the same instance.
pub fn cross_check(kernel: &str, inst: &str) -> CrossCheck {
    let function = miniir::parse(&fixture(&format!("{kernel}.mir"))).unwrap();
    let instance = instance(inst);
    let opts = ExtractOptions {
        grid: instance.grid,
        ..Default::default()
    };
    let extraction = miniir::extract_with_layout(&function, &opts).unwrap_or_else(|e| panic!("{kernel}: {e}"));
    let log = run_ir(&instance, &function, Some(&extraction)).unwrap_or_else(|e| panic!("{kernel}/{inst}: {e}"));
    let oracle = detect_races(&log);
    let check = CheckOptions {
        specialize: Some(instance.specialization(&extraction.model)),
        ..Default::default()
    };
    let symbolic = races(&extraction.model, &check).unwrap().verdict;
    CrossCheck {
        function,
        extraction,
        instance,
        log,
        oracle,
        symbolic,
    }
}

/// For every logged access, each index register with an affine propagated
/// value must evaluate to the value the interpreter computed. Returns the
/// number of comparisons and the mismatches.
pub fn affine_agreement(c: &CrossCheck) -> (usize, Vec<String>) {
    let consts: BTreeMap<String, i64> = match c.instance.grid {
        Some(g) => ["x", "y", "z"]
            .iter()
            .enumerate()
            .flat_map(|(i, a)| [(format!("blockdim.{a}"), g.threads[i]), (format!("griddim.{a}"), g.blocks[i])])
            .collect(),
        None => BTreeMap::new(),
    };
    let values = miniir::propagate_with(&c.function, &consts).unwrap();
    let mut by_line = BTreeMap::new();
    for b in &c.function.blocks {
        for i in &b.insts {
            if let InstKind::Load { addr } | InstKind::Store { addr, .. } = &i.kind {
                by_line.insert(i.line, addr.clone());
            }
        }
    }
    let mut n = 0;
    let mut bad = Vec::new();
    for e in &c.log.entries {
        let Some(addr) = e.line.and_then(|l| by_line.get(&l)) else { continue };
        for op in &addr.index {
            let miniir::Operand::Reg(r) = op else { continue };
            let Some(PropagatedExpr::Affine(expr)) = values.get(r) else { continue };
            n += 1;
            let got = raceset::miniir::analysis::eval_atoms(expr, &e.regs);
            if got != e.regs.get(r).copied() {
                bad.push(format!("line {:?}: %{r} = {expr} gives {got:?}, interpreter {:?}", e.line, e.regs.get(r)));
            }
        }
    }
    (n, bad)
}

/// Each logged access whose statement instance is known must run in the
/// phase the model's schedule assigns it.
pub fn phase_agreement(c: &CrossCheck) -> (usize, Vec<String>) {
    let m = &c.extraction.model;
    let mut n = 0;
    let mut bad = Vec::new();
    for e in &c.log.entries {
        let (Some(label), Some(point)) = (&e.site, &e.point) else { continue };
        let s = m.statement(label).unwrap();
        let dims: BTreeMap<String, i64> = s.dims.iter().cloned().zip(point.iter().copied()).collect();
        let phase = m.schedule.phase(label).unwrap();
        // parameters: the instance, plus whatever the phase needs from registers
        let mut params = c.instance.params.clone();
        for p in phase.param_coeffs().keys() {
            if !params.contains_key(p) {
                if let Some(v) = e.regs.get(p) {
                    params.insert(p.clone(), *v);
                }
            }
        }
        n += 1;
        match phase.eval(&dims, &params) {
            Some(v) if v == e.phase => {}
            other => bad.push(format!("{label}{point:?}: model phase {other:?}, oracle {}", e.phase)),
        }
    }
    (n, bad)
}

/// RaceFree < Inconclusive < RaceFound.
pub fn rank(v: &Verdict) -> u8 {
    match v {
        Verdict::RaceFree => 0,
        Verdict::Inconclusive(_) => 1,
        Verdict::RaceFound(_) => 2,
    }
}

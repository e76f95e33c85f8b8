//! Dependence test and race verdicts.
//!
//! Every pair of accesses to the same array with at least one write is
//! joined through the common cell. Ordered pairs (happens-before) are
//! dependences; pairs of distinct threads ordered neither way are races.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::iset::rel::lex_lt_conjs;
use crate::iset::{AffineExpr, Conj, Constraint, EmptinessVerdict, IntRel, IntSet, SolveOptions, WitnessPoint};
use crate::kmodel::{
    primed, Access, AccessKind, IndexExpr, KernelModel, MemSpace, ModelError, ParamScope, Statement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum DependenceKind {
    RaW,
    WaW,
    WaR,
}

impl DependenceKind {
    pub const ALL: [DependenceKind; 3] = [DependenceKind::RaW, DependenceKind::WaW, DependenceKind::WaR];

    /// Kind of an ordered pair `(first, second)`; `None` for two reads.
    pub fn of(first: AccessKind, second: AccessKind) -> Option<Self> {
        match (first, second) {
            (AccessKind::Write, AccessKind::Read) => Some(DependenceKind::RaW),
            (AccessKind::Write, AccessKind::Write) => Some(DependenceKind::WaW),
            (AccessKind::Read, AccessKind::Write) => Some(DependenceKind::WaR),
            (AccessKind::Read, AccessKind::Read) => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DependenceKind::RaW => "RaW",
            DependenceKind::WaW => "WaW",
            DependenceKind::WaR => "WaR",
        }
    }
}

/// A concrete statement instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceRef {
    pub statement: String,
    /// Values of the statement dims, in tuple order.
    pub values: Vec<(String, i64)>,
    pub phase: i64,
}

impl InstanceRef {
    pub fn value(&self, dim: &str) -> Option<i64> {
        self.values.iter().find(|(d, _)| d == dim).map(|(_, v)| *v)
    }
}

/// A conflicting pair of instances, checked against every constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConflictWitness {
    pub kind: DependenceKind,
    pub array: String,
    pub source: InstanceRef,
    pub target: InstanceRef,
    pub cell: Vec<i64>,
    pub params: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PairVerdict {
    Empty,
    Found(ConflictWitness),
    Inconclusive(String),
}

/// One access pair and the emptiness of its conflict set.
#[derive(Debug, Clone, Serialize)]
pub struct ConflictCheck {
    pub kind: DependenceKind,
    pub array: String,
    pub source: String,
    pub target: String,
    pub verdict: PairVerdict,
}

/// Ordered conflicting instance pairs for one access pair.
#[derive(Debug, Clone)]
pub struct Dependence {
    pub kind: DependenceKind,
    pub array: String,
    pub source: String,
    pub target: String,
    /// `source[dims] -> target[dims']`.
    pub relation: IntRel,
    pub verdict: PairVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Verdict {
    RaceFree,
    RaceFound(Vec<ConflictWitness>),
    Inconclusive(Vec<String>),
}

impl Verdict {
    pub fn token(&self) -> &'static str {
        match self {
            Verdict::RaceFree => "RaceFree",
            Verdict::RaceFound(_) => "RaceFound",
            Verdict::Inconclusive(_) => "Inconclusive",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Verdict::RaceFree => 0,
            Verdict::RaceFound(_) => 1,
            Verdict::Inconclusive(_) => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DependenceReport {
    pub kernel: String,
    /// Filled in dependence mode only.
    pub dependences: Vec<Dependence>,
    pub races: Vec<ConflictCheck>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

/// Concrete array contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub extents: Vec<i64>,
    pub data: Vec<i64>,
}

impl Table {
    pub fn offset(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.extents.len() {
            return None;
        }
        let mut off = 0i64;
        for (i, e) in idx.iter().zip(self.extents.iter()) {
            if *i < 0 || i >= e {
                return None;
            }
            off = off * e + i;
        }
        usize::try_from(off).ok().filter(|o| *o < self.data.len())
    }

    pub fn get(&self, idx: &[i64]) -> Option<i64> {
        self.offset(idx).map(|o| self.data[o])
    }

    /// Every index tuple with its value.
    pub fn entries(&self) -> Vec<(Vec<i64>, i64)> {
        let mut out = Vec::new();
        for (off, v) in self.data.iter().enumerate() {
            let mut idx = vec![0; self.extents.len()];
            let mut rest = off as i64;
            for k in (0..self.extents.len()).rev() {
                let e = self.extents[k].max(1);
                idx[k] = rest % e;
                rest /= e;
            }
            out.push((idx, *v));
        }
        out
    }
}

/// Concrete values used to narrow the symbolic check to one instance.
#[derive(Debug, Clone, Default)]
pub struct Specialization {
    pub params: BTreeMap<String, i64>,
    pub tables: BTreeMap<String, Table>,
}

#[derive(Debug, Clone, Default)]
pub struct CheckOptions {
    pub solve: SolveOptions,
    pub specialize: Option<Specialization>,
}

impl CheckOptions {
    fn solve_options(&self, model: &KernelModel) -> SolveOptions {
        let mut s = self.solve.clone();
        if let Some(sp) = &self.specialize {
            for p in &model.params {
                if p.source.is_none() {
                    if let Some(v) = sp.params.get(&p.name) {
                        s.param_bounds.insert(p.name.clone(), (*v, *v));
                    }
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairCase {
    SameThread,
    SameBlock,
    OtherBlock,
}

/// Shapes shared by every check of one access pair.
struct PairSpace<'m> {
    model: &'m KernelModel,
    a: &'m Statement,
    b: &'m Statement,
    /// b's dims renamed.
    bmap: BTreeMap<String, String>,
    /// Parameters private to b, renamed to dims of the pair set.
    pmap: BTreeMap<String, String>,
    cells: Vec<String>,
    dims: Vec<String>,
}

impl<'m> PairSpace<'m> {
    fn new(model: &'m KernelModel, a: &'m Statement, b: &'m Statement, arity: usize, case: PairCase) -> Self {
        let bmap: BTreeMap<String, String> = b.dims.iter().map(|d| (d.clone(), primed(d))).collect();
        let private = |s: ParamScope| match case {
            PairCase::SameThread => false,
            PairCase::SameBlock => s == ParamScope::Thread,
            PairCase::OtherBlock => s != ParamScope::Kernel,
        };
        let pmap: BTreeMap<String, String> = model
            .params
            .iter()
            .filter(|p| private(p.scope))
            .map(|p| (p.name.clone(), primed(&p.name)))
            .collect();
        let cells: Vec<String> = (0..arity).map(|k| format!("_c{k}")).collect();
        let mut dims: Vec<String> = a.dims.clone();
        dims.extend(b.dims.iter().map(|d| primed(d)));
        dims.extend(cells.iter().cloned());
        dims.extend(pmap.values().cloned());
        PairSpace {
            model,
            a,
            b,
            bmap,
            pmap,
            cells,
            dims,
        }
    }

    fn set(&self, conjs: Vec<Conj>) -> Result<IntSet, ModelError> {
        let d: Vec<&str> = self.dims.iter().map(String::as_str).collect();
        Ok(IntSet::from_disjuncts(None, &d, conjs)?)
    }

    /// Map a conjunction over b's names into the pair space.
    fn lift_b(&self, c: &Conj) -> Conj {
        let new_dims: Vec<String> = self.pmap.values().cloned().collect();
        Conj {
            constraints: c
                .constraints
                .iter()
                .map(|k| {
                    k.map_expr(|e| {
                        e.rename_dims(&self.bmap)
                            .rename_params(&self.pmap)
                            .params_to_dims(&new_dims)
                    })
                })
                .collect(),
            exists: c.exists.clone(),
        }
    }

    fn lift_b_expr(&self, e: &AffineExpr) -> AffineExpr {
        let new_dims: Vec<String> = self.pmap.values().cloned().collect();
        e.rename_dims(&self.bmap).rename_params(&self.pmap).params_to_dims(&new_dims)
    }

    /// Domain and access of one side, with the access landing on the cell dims.
    fn side(&self, second: bool, acc: &Access) -> Result<IntSet, ModelError> {
        let s = if second { self.b } else { self.a };
        let dom = self.model.full_domain(s)?;
        let rel = self.model.access_relation(s, acc)?.intersect_domain(&dom)?;
        // rename the relation's output dims to the cell names
        let map: BTreeMap<String, String> = rel
            .out_dims()
            .iter()
            .cloned()
            .zip(self.cells.iter().cloned())
            .collect();
        let conjs: Vec<Conj> = rel
            .disjuncts()
            .iter()
            .map(|c| {
                let c = c.rename_dims(&map);
                if second {
                    self.lift_b(&c)
                } else {
                    c
                }
            })
            .collect();
        self.set(conjs)
    }

    fn eq_dims(&self, names: &[String]) -> Vec<Constraint> {
        names
            .iter()
            .map(|d| Constraint::eq(&AffineExpr::dim(d), &AffineExpr::dim(&primed(d))))
            .collect()
    }

    /// One disjunct per way the two tuples can differ.
    fn differ(&self, names: &[String]) -> Vec<Conj> {
        names
            .iter()
            .flat_map(|d| {
                let x = AffineExpr::dim(d);
                let y = AffineExpr::dim(&primed(d));
                [Conj::new(vec![Constraint::lt(&x, &y)]), Conj::new(vec![Constraint::gt(&x, &y)])]
            })
            .collect()
    }

    fn phases(&self) -> (AffineExpr, AffineExpr) {
        let pa = self.model.schedule.times[&self.a.label][0].clone();
        let pb = self.lift_b_expr(&self.model.schedule.times[&self.b.label][0]);
        (pa, pb)
    }

    fn times(&self) -> (Vec<AffineExpr>, Vec<AffineExpr>) {
        let ta = self.model.schedule.times[&self.a.label].clone();
        let tb = self.model.schedule.times[&self.b.label]
            .iter()
            .map(|e| self.lift_b_expr(e))
            .collect();
        (ta, tb)
    }

    /// Instance-specific restrictions: data parameters and data-dependent
    /// coordinates take the values of the concrete tables.
    fn specialization(&self, sp: &Specialization, acc_a: &Access, acc_b: &Access) -> Result<Vec<IntSet>, ModelError> {
        let mut out = Vec::new();
        for p in &self.model.params {
            let Some(src) = &p.source else { continue };
            let Some(table) = sp.tables.get(&src.array) else { continue };
            out.push(self.set(data_param_conjs(self.model, sp, table, &p.name, &src.index, None)?)?);
            if let Some(renamed) = self.pmap.get(&p.name) {
                out.push(self.set(data_param_conjs(
                    self.model,
                    sp,
                    table,
                    renamed,
                    &src.index,
                    Some(&self.bmap),
                )?)?);
            }
        }
        for (second, acc) in [(false, acc_a), (true, acc_b)] {
            for (k, ix) in acc.index.iter().enumerate() {
                let IndexExpr::Data { array, index } = ix else { continue };
                let Some(table) = sp.tables.get(array) else { continue };
                let cell = AffineExpr::dim(&self.cells[k]);
                let mut conjs = Vec::new();
                for (q, v) in table.entries() {
                    let mut cs = vec![Constraint::eq(&cell, &AffineExpr::constant(v))];
                    for (e, qi) in index.iter().zip(q.iter()) {
                        let e = if second { self.lift_b_expr(e) } else { e.clone() };
                        cs.push(Constraint::eq(&e, &AffineExpr::constant(*qi)));
                    }
                    conjs.push(Conj::new(cs));
                }
                out.push(self.set(conjs)?);
            }
        }
        Ok(out)
    }

    fn witness(&self, kind: DependenceKind, array: &str, w: &WitnessPoint) -> ConflictWitness {
        let dims = w.dim_map();
        let mut params = w.param_map();
        let (pa, pb) = self.phases();
        let phase_a = pa.eval(&dims, &params).unwrap_or(0);
        let phase_b = pb.eval(&dims, &params).unwrap_or(0);
        // b's private copies of data parameters
        for d in self.pmap.values() {
            if let Some(v) = dims.get(d) {
                params.insert(d.clone(), *v);
            }
        }
        ConflictWitness {
            kind,
            array: array.to_string(),
            source: InstanceRef {
                statement: self.a.label.clone(),
                values: self.a.dims.iter().map(|d| (d.clone(), dims[d])).collect(),
                phase: phase_a,
            },
            target: InstanceRef {
                statement: self.b.label.clone(),
                values: self.b.dims.iter().map(|d| (d.clone(), dims[&primed(d)])).collect(),
                phase: phase_b,
            },
            cell: self.cells.iter().map(|c| dims[c]).collect(),
            params,
        }
    }
}

/// `name = table[index]` for every grid point the index ranges over.
fn data_param_conjs(
    model: &KernelModel,
    sp: &Specialization,
    table: &Table,
    name: &str,
    index: &[AffineExpr],
    rename: Option<&BTreeMap<String, String>>,
) -> Result<Vec<Conj>, ModelError> {
    let used: BTreeSet<String> = index.iter().flat_map(|e| e.coeffs().keys().cloned()).collect();
    let bindings: Vec<_> = model
        .grid
        .blocks
        .iter()
        .chain(model.grid.threads.iter())
        .filter(|b| used.contains(&b.dim))
        .collect();
    let mut extents = Vec::new();
    for b in &bindings {
        let e = b
            .extent
            .eval(&BTreeMap::new(), &sp.params)
            .ok_or_else(|| ModelError::Invalid(format!("extent of {} is not fixed by the instance", b.dim)))?;
        extents.push(e);
    }
    let total: i64 = extents.iter().product();
    if total > 4096 {
        return Err(ModelError::Invalid("grid too large to specialize".into()));
    }
    // the first instance keeps its parameters; the second one's are pair dims
    let target = if rename.is_some() { AffineExpr::dim(name) } else { AffineExpr::param(name) };
    let mut out = Vec::new();
    for n in 0..total.max(1) {
        let mut rest = n;
        let mut point = BTreeMap::new();
        for (b, e) in bindings.iter().zip(extents.iter()).rev() {
            point.insert(b.dim.clone(), rest % e);
            rest /= e;
        }
        let idx: Option<Vec<i64>> = index.iter().map(|e| e.eval(&point, &sp.params)).collect();
        let Some(v) = idx.and_then(|i| table.get(&i)) else { continue };
        let mut cs = vec![Constraint::eq(&target, &AffineExpr::constant(v))];
        for (d, val) in &point {
            let dn = match rename {
                Some(m) => m.get(d).cloned().unwrap_or_else(|| d.clone()),
                None => d.clone(),
            };
            cs.push(Constraint::eq(&AffineExpr::dim(&dn), &AffineExpr::constant(*val)));
        }
        out.push(Conj::new(cs));
    }
    Ok(out)
}

fn intersect_all(base: IntSet, parts: &[IntSet], opts: &SolveOptions) -> Result<IntSet, ModelError> {
    let mut acc = base.coalesce(opts);
    for p in parts {
        acc = acc.intersect(p)?.coalesce(opts);
    }
    Ok(acc)
}

fn judge(space: &PairSpace, set: &IntSet, kind: DependenceKind, array: &str, opts: &SolveOptions) -> PairVerdict {
    match set.is_empty(opts) {
        EmptinessVerdict::Empty => PairVerdict::Empty,
        EmptinessVerdict::NonEmpty(w) => PairVerdict::Found(space.witness(kind, array, &w)),
        EmptinessVerdict::Inconclusive { reason, search_box } => PairVerdict::Inconclusive(format!(
            "{reason} (search radius {}, parameter samples {:?})",
            search_box.radius, search_box.param_samples
        )),
    }
}

struct Built<'m> {
    space: PairSpace<'m>,
    set: IntSet,
}

fn build<'m>(
    model: &'m KernelModel,
    a: &'m Statement,
    acc_a: &Access,
    b: &'m Statement,
    acc_b: &Access,
    case: PairCase,
    extra: Vec<Conj>,
    opts: &CheckOptions,
    solve: &SolveOptions,
) -> Result<Built<'m>, ModelError> {
    let space = PairSpace::new(model, a, b, acc_a.index.len(), case);
    let mut parts = vec![space.side(true, acc_b)?];
    let mut cs = Vec::new();
    let grid = &model.grid;
    match case {
        PairCase::SameThread => cs.extend(space.eq_dims(&grid.dims())),
        PairCase::SameBlock => cs.extend(space.eq_dims(&grid.block_dims())),
        PairCase::OtherBlock => {}
    }
    let base = Conj::new(cs);
    let mut disj: Vec<Conj> = Vec::new();
    match case {
        PairCase::SameThread => {}
        PairCase::SameBlock => disj = space.differ(&grid.thread_dims()),
        PairCase::OtherBlock => disj = space.differ(&grid.block_dims()),
    }
    if !disj.is_empty() {
        parts.push(space.set(disj)?);
    }
    if !extra.is_empty() {
        parts.push(space.set(extra)?);
    }
    parts.push(space.set(vec![base])?);
    if let Some(sp) = &opts.specialize {
        parts.extend(space.specialization(sp, acc_a, acc_b)?);
    }
    let first = space.side(false, acc_a)?;
    let set = intersect_all(first, &parts, solve)?;
    Ok(Built { space, set })
}

fn cases(model: &KernelModel, space: MemSpace) -> Vec<PairCase> {
    if model.grid.threads.is_empty() && model.grid.blocks.is_empty() {
        return vec![];
    }
    let mut out = Vec::new();
    if !model.grid.threads.is_empty() {
        out.push(PairCase::SameBlock);
    }
    if space == MemSpace::Global && !model.grid.blocks.is_empty() {
        out.push(PairCase::OtherBlock);
    }
    out
}

/// Every access pair `(a, b)` with at least one write to the same array.
fn access_pairs(model: &KernelModel, ordered: bool) -> Vec<(usize, usize, usize, usize)> {
    let mut flat = Vec::new();
    for (si, s) in model.statements.iter().enumerate() {
        for (ai, _) in s.accesses().enumerate() {
            flat.push((si, ai));
        }
    }
    let acc = |si: usize, ai: usize| {
        let s = &model.statements[si];
        s.accesses().nth(ai).unwrap()
    };
    let mut out = Vec::new();
    for (x, &(sa, aa)) in flat.iter().enumerate() {
        for (y, &(sb, ab)) in flat.iter().enumerate() {
            if !ordered && y < x {
                continue;
            }
            let (ka, a) = acc(sa, aa);
            let (kb, b) = acc(sb, ab);
            if a.array == b.array && DependenceKind::of(ka, kb).is_some() {
                out.push((sa, aa, sb, ab));
            }
        }
    }
    out
}

/// Race check: conflicting accesses by distinct threads that no barrier
/// orders. Within one block two instances are unordered across threads
/// exactly when their phases are equal.
pub fn races(model: &KernelModel, opts: &CheckOptions) -> Result<DependenceReport, ModelError> {
    let solve = opts.solve_options(model);
    let mut checks = Vec::new();
    for (sa, aa, sb, ab) in access_pairs(model, false) {
        let a = &model.statements[sa];
        let b = &model.statements[sb];
        let (ka, acc_a) = a.accesses().nth(aa).unwrap();
        let (kb, acc_b) = b.accesses().nth(ab).unwrap();
        let arr = model.array(&acc_a.array).ok_or_else(|| ModelError::UnknownArray(acc_a.array.clone()))?;
        // writer first, for reporting
        let (a, acc_a, ka, b, acc_b, kb) = if ka == AccessKind::Read {
            (b, acc_b, kb, a, acc_a, ka)
        } else {
            (a, acc_a, ka, b, acc_b, kb)
        };
        let kind = DependenceKind::of(ka, kb).unwrap();
        let mut verdict = PairVerdict::Empty;
        for case in cases(model, arr.space) {
            let extra = if case == PairCase::SameBlock {
                // not ordered either way: equal phases
                let sp = PairSpace::new(model, a, b, acc_a.index.len(), case);
                let (pa, pb) = sp.phases();
                vec![Conj::new(vec![Constraint::eq(&pa, &pb)])]
            } else {
                vec![]
            };
            let built = build(model, a, acc_a, b, acc_b, case, extra, opts, &solve)?;
            let v = judge(&built.space, &built.set, kind, &acc_a.array, &solve);
            verdict = match (verdict, v) {
                (PairVerdict::Found(w), _) | (_, PairVerdict::Found(w)) => PairVerdict::Found(w),
                (PairVerdict::Inconclusive(r), _) | (_, PairVerdict::Inconclusive(r)) => PairVerdict::Inconclusive(r),
                _ => PairVerdict::Empty,
            };
            if matches!(verdict, PairVerdict::Found(_)) {
                break;
            }
        }
        checks.push(ConflictCheck {
            kind,
            array: acc_a.array.clone(),
            source: a.label.clone(),
            target: b.label.clone(),
            verdict,
        });
    }
    let mut witnesses = Vec::new();
    let mut reasons = Vec::new();
    for c in &checks {
        match &c.verdict {
            PairVerdict::Found(w) => witnesses.push(w.clone()),
            PairVerdict::Inconclusive(r) => reasons.push(format!(
                "{} {} -> {} on {}: {r}",
                c.kind.name(),
                c.source,
                c.target,
                c.array
            )),
            PairVerdict::Empty => {}
        }
    }
    let mut notes = model.notes.clone();
    let verdict = if !witnesses.is_empty() {
        notes.extend(reasons.iter().map(|r| format!("inconclusive: {r}")));
        Verdict::RaceFound(witnesses)
    } else if !reasons.is_empty() {
        Verdict::Inconclusive(reasons)
    } else {
        Verdict::RaceFree
    };
    Ok(DependenceReport {
        kernel: model.name.clone(),
        dependences: Vec::new(),
        races: checks,
        verdict,
        notes,
    })
}

/// Ordered conflicting pairs of one kind: `a` happens before `b`.
pub fn dependences(model: &KernelModel, kind: DependenceKind, opts: &CheckOptions) -> Result<Vec<Dependence>, ModelError> {
    let solve = opts.solve_options(model);
    let mut out = Vec::new();
    for (sa, aa, sb, ab) in access_pairs(model, true) {
        let a = &model.statements[sa];
        let b = &model.statements[sb];
        let (ka, acc_a) = a.accesses().nth(aa).unwrap();
        let (kb, acc_b) = b.accesses().nth(ab).unwrap();
        if DependenceKind::of(ka, kb) != Some(kind) {
            continue;
        }
        let arr = model.array(&acc_a.array).ok_or_else(|| ModelError::UnknownArray(acc_a.array.clone()))?;
        let mut pieces: Vec<Built> = Vec::new();
        // same thread: schedule order
        {
            let sp = PairSpace::new(model, a, b, acc_a.index.len(), PairCase::SameThread);
            let (ta, tb) = sp.times();
            let extra = lex_lt_conjs(&ta, &tb)?;
            pieces.push(build(model, a, acc_a, b, acc_b, PairCase::SameThread, extra, opts, &solve)?);
        }
        // other threads of the block: earlier phase
        if !model.grid.threads.is_empty() && arr.space != MemSpace::Local {
            let sp = PairSpace::new(model, a, b, acc_a.index.len(), PairCase::SameBlock);
            let (pa, pb) = sp.phases();
            let extra = vec![Conj::new(vec![Constraint::lt(&pa, &pb)])];
            pieces.push(build(model, a, acc_a, b, acc_b, PairCase::SameBlock, extra, opts, &solve)?);
        }
        let mut verdict = PairVerdict::Empty;
        let mut relation: Option<IntRel> = None;
        for p in &pieces {
            let v = judge(&p.space, &p.set, kind, &acc_a.array, &solve);
            verdict = match (verdict, v) {
                (PairVerdict::Found(w), _) | (_, PairVerdict::Found(w)) => PairVerdict::Found(w),
                (PairVerdict::Inconclusive(r), _) | (_, PairVerdict::Inconclusive(r)) => PairVerdict::Inconclusive(r),
                _ => PairVerdict::Empty,
            };
            let mut hidden: Vec<&str> = p.space.cells.iter().map(String::as_str).collect();
            hidden.extend(p.space.pmap.values().map(String::as_str));
            let projected = p.set.project_out(&hidden)?;
            let ins: Vec<&str> = a.dims.iter().map(String::as_str).collect();
            let outs: Vec<String> = b.dims.iter().map(|d| primed(d)).collect();
            let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
            let r = IntRel::from_disjuncts(
                Some(&a.label),
                &ins,
                Some(&b.label),
                &outs_ref,
                projected.disjuncts().iter().filter_map(Conj::simplify).collect(),
            )?
            .with_params(&model.param_names());
            relation = Some(match relation {
                None => r,
                Some(prev) => prev.union_same(&r)?,
            });
        }
        out.push(Dependence {
            kind,
            array: acc_a.array.clone(),
            source: a.label.clone(),
            target: b.label.clone(),
            relation: relation.expect("at least one piece"),
            verdict,
        });
    }
    Ok(out)
}

/// Race check plus the three dependence kinds.
pub fn full_report(model: &KernelModel, opts: &CheckOptions) -> Result<DependenceReport, ModelError> {
    let mut report = races(model, opts)?;
    for k in DependenceKind::ALL {
        report.dependences.extend(dependences(model, k, opts)?);
    }
    Ok(report)
}

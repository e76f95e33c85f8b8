//! Expression propagation, grid iterators and loop recognition.
//!
//! Register values are propagated as polynomials of degree at most two over
//! *atoms*: scalar parameters (`%n`), id intrinsics (`tid.x`, `bid.x`,
//! `blockdim.x`, `griddim.x`), loop-header phis (`%ptr`) and loaded values
//! (`%col`). Every atom has a runtime value, so a propagated form can be
//! evaluated against an interpreter's register file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::ast::*;
use super::cfg::{Dominators, LoopForest};
use super::MiniIrError;
use crate::iset::{AffineExpr, Constraint, ConstraintKind};
use crate::kmodel::Axis;

/// Propagated value of a register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropagatedExpr {
    /// Affine over parameters, id intrinsics and loop inductions (as
    /// parameter-kind names of the expression).
    Affine(AffineExpr),
    Opaque(Opaque),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Opaque {
    /// The register is a load; `index` is the propagated address.
    Load { array: String, index: Vec<PropagatedExpr> },
    /// Affine, but over at least one loaded value.
    DataDependent(AffineExpr),
    NonAffine(String),
}

impl fmt::Display for PropagatedExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropagatedExpr::Affine(e) => write!(f, "{e}"),
            PropagatedExpr::Opaque(Opaque::Load { array, index }) => {
                let ix: Vec<String> = index.iter().map(|e| e.to_string()).collect();
                write!(f, "load {array}[{}]", ix.join(", "))
            }
            PropagatedExpr::Opaque(Opaque::DataDependent(e)) => write!(f, "data({e})"),
            PropagatedExpr::Opaque(Opaque::NonAffine(r)) => write!(f, "opaque({r})"),
        }
    }
}

impl PropagatedExpr {
    pub fn affine(&self) -> Option<&AffineExpr> {
        match self {
            PropagatedExpr::Affine(e) => Some(e),
            _ => None,
        }
    }

    /// Evaluate with atom values (`%reg` names without the `%` are looked up
    /// in `regs`; intrinsics by their dotted name).
    pub fn eval(&self, atoms: &BTreeMap<String, i64>) -> Option<i64> {
        match self {
            PropagatedExpr::Affine(e) | PropagatedExpr::Opaque(Opaque::DataDependent(e)) => eval_atoms(e, atoms),
            _ => None,
        }
    }
}

/// Evaluate an atom expression; atom `%r` reads `atoms["r"]`, `tid.x` reads `atoms["tid.x"]`.
pub fn eval_atoms(e: &AffineExpr, atoms: &BTreeMap<String, i64>) -> Option<i64> {
    let mut acc = e.constant_term() as i128;
    for (n, c) in e.param_coeffs() {
        let key = n.strip_prefix('%').unwrap_or(n);
        acc += *c as i128 * *atoms.get(key)? as i128;
    }
    i64::try_from(acc).ok()
}

/// Replace parameter-kind names using `f`; names mapped to `None` stay.
pub(crate) fn substitute(e: &AffineExpr, f: &mut dyn FnMut(&str) -> Option<AffineExpr>) -> AffineExpr {
    let mut out = AffineExpr::constant(e.constant_term());
    for (d, c) in e.coeffs() {
        out = out.add(&AffineExpr::dim(d).scale(*c));
    }
    for (p, c) in e.param_coeffs() {
        let t = f(p).unwrap_or_else(|| AffineExpr::param(p));
        out = out.add(&t.scale(*c));
    }
    out
}

pub(crate) fn reg_atom(r: &str) -> String {
    format!("%{r}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum AtomKind {
    Param,
    Intrinsic(Intrinsic),
    /// Header phi advanced by a loop-invariant step; `step` when constant.
    Induction { lp: usize, step: Option<i64> },
    /// Any other loop-header phi.
    Carried { lp: usize },
    Load { array: String, index: Vec<Val>, block: usize, pos: usize },
}

/// Degree-two polynomial over atoms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub(crate) struct Poly {
    pub lin: AffineExpr,
    pub quad: BTreeMap<(String, String), i64>,
}

impl Poly {
    fn constant(c: i64) -> Poly {
        Poly {
            lin: AffineExpr::constant(c),
            quad: BTreeMap::new(),
        }
    }

    fn atom(a: &str) -> Poly {
        Poly {
            lin: AffineExpr::param(a),
            quad: BTreeMap::new(),
        }
    }

    fn as_const(&self) -> Option<i64> {
        (self.quad.is_empty() && self.lin.is_constant()).then(|| self.lin.constant_term())
    }

    fn add(&self, o: &Poly, sign: i64) -> Poly {
        let mut quad = self.quad.clone();
        for (k, c) in &o.quad {
            let e = quad.entry(k.clone()).or_insert(0);
            *e += sign * c;
            if *e == 0 {
                quad.remove(k);
            }
        }
        Poly {
            lin: self.lin.add(&o.lin.scale(sign)),
            quad,
        }
    }

    fn scale(&self, k: i64) -> Poly {
        if k == 0 {
            return Poly::constant(0);
        }
        Poly {
            lin: self.lin.scale(k),
            quad: self.quad.iter().map(|(n, c)| (n.clone(), c * k)).collect(),
        }
    }

    fn mul(&self, o: &Poly) -> Result<Poly, String> {
        if let Some(k) = self.as_const() {
            return Ok(o.scale(k));
        }
        if let Some(k) = o.as_const() {
            return Ok(self.scale(k));
        }
        if !self.quad.is_empty() || !o.quad.is_empty() {
            return Err("product of degree above two".into());
        }
        let a0 = self.lin.constant_term();
        let b0 = o.lin.constant_term();
        let mut out = Poly::constant(a0 * b0);
        out.lin = out
            .lin
            .add(&o.lin.clone().plus_const(-b0).scale(a0))
            .add(&self.lin.clone().plus_const(-a0).scale(b0));
        for (x, a) in self.lin.param_coeffs() {
            for (y, b) in o.lin.param_coeffs() {
                let key = if x <= y { (x.clone(), y.clone()) } else { (y.clone(), x.clone()) };
                let e = out.quad.entry(key.clone()).or_insert(0);
                *e += a * b;
                if *e == 0 {
                    out.quad.remove(&key);
                }
            }
        }
        Ok(out)
    }

    fn atoms(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = self.lin.param_coeffs().keys().cloned().collect();
        for (a, b) in self.quad.keys() {
            s.insert(a.clone());
            s.insert(b.clone());
        }
        s
    }
}

/// Propagation state of one register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Val {
    pub poly: Result<Poly, String>,
    /// Id intrinsics the value was computed from by arithmetic.
    pub ids: BTreeSet<String>,
}

impl Val {
    fn bad(reason: impl Into<String>, ids: BTreeSet<String>) -> Val {
        Val {
            poly: Err(reason.into()),
            ids,
        }
    }

    fn of(p: Poly, ids: BTreeSet<String>) -> Val {
        Val { poly: Ok(p), ids }
    }
}

/// Result of propagating a whole function.
#[derive(Debug, Clone)]
pub(crate) struct Propagation {
    pub vals: BTreeMap<String, Val>,
    pub atoms: BTreeMap<String, AtomKind>,
    /// Registers that may differ between threads of one block.
    pub varying: BTreeSet<String>,
    /// Non-affine arithmetic on ids: `(line, message)`.
    pub id_misuse: Vec<(usize, String)>,
}

fn is_id(i: Intrinsic) -> bool {
    matches!(i, Intrinsic::Tid(_) | Intrinsic::Bid(_))
}

impl Propagation {
    pub fn compute(f: &Function, forest: &LoopForest, dom: &Dominators, consts: &BTreeMap<String, i64>) -> Propagation {
        let mut p = Propagation {
            vals: BTreeMap::new(),
            atoms: BTreeMap::new(),
            varying: BTreeSet::new(),
            id_misuse: Vec::new(),
        };
        for prm in &f.params {
            if matches!(prm.ty, ParamType::Scalar(_)) {
                let a = reg_atom(&prm.name);
                p.atoms.insert(a.clone(), AtomKind::Param);
                p.vals.insert(prm.name.clone(), Val::of(Poly::atom(&a), BTreeSet::new()));
            }
        }
        let header_of: BTreeMap<usize, usize> = forest.loops.iter().enumerate().map(|(i, l)| (l.header, i)).collect();
        for &b in dom.reverse_postorder() {
            for (pos, inst) in f.blocks[b].insts.iter().enumerate() {
                let Some(r) = &inst.result else { continue };
                let v = p.eval_inst(f, forest, &header_of, b, pos, inst, consts);
                p.vals.insert(r.clone(), v);
            }
        }
        p.compute_varying(f, forest);
        p
    }

    fn operand(&self, o: &Operand) -> Val {
        match o {
            Operand::Int(v) => Val::of(Poly::constant(*v), BTreeSet::new()),
            Operand::Reg(r) => self
                .vals
                .get(r)
                .cloned()
                .unwrap_or_else(|| Val::bad(format!("%{r} has no value"), BTreeSet::new())),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn eval_inst(
        &mut self,
        f: &Function,
        forest: &LoopForest,
        header_of: &BTreeMap<usize, usize>,
        b: usize,
        pos: usize,
        inst: &Instruction,
        consts: &BTreeMap<String, i64>,
    ) -> Val {
        let r = inst.result.as_deref().unwrap_or("");
        match &inst.kind {
            InstKind::Intrinsic(i) => {
                if let Some(v) = consts.get(&i.name()) {
                    return Val::of(Poly::constant(*v), BTreeSet::new());
                }
                let a = i.name();
                self.atoms.insert(a.clone(), AtomKind::Intrinsic(*i));
                let ids = if is_id(*i) { BTreeSet::from([a.clone()]) } else { BTreeSet::new() };
                Val::of(Poly::atom(&a), ids)
            }
            InstKind::Bin { op, lhs, rhs } => {
                let (l, rr) = (self.operand(lhs), self.operand(rhs));
                let ids: BTreeSet<String> = l.ids.union(&rr.ids).cloned().collect();
                let (lp, rp) = match (&l.poly, &rr.poly) {
                    (Ok(a), Ok(b)) => (a, b),
                    (Err(e), _) | (_, Err(e)) => return Val::bad(e.clone(), ids),
                };
                if let (Some(a), Some(c)) = (lp.as_const(), rp.as_const()) {
                    if let Some(v) = op.apply(a, c) {
                        return Val::of(Poly::constant(v), BTreeSet::new());
                    }
                }
                let res = match op {
                    BinOp::Add => Ok(lp.add(rp, 1)),
                    BinOp::Sub => Ok(lp.add(rp, -1)),
                    BinOp::Mul => lp.mul(rp),
                    BinOp::Shl => match rp.as_const() {
                        Some(k) if (0..62).contains(&k) => Ok(lp.scale(1 << k)),
                        _ => Err("shift by a variable amount".to_string()),
                    },
                    BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv => Err("floating-point arithmetic".into()),
                    _ => Err(format!("non-affine operation '{op:?}'").to_lowercase()),
                };
                if !ids.is_empty() {
                    let bad_quad = match &res {
                        Ok(p) => p.quad.keys().find(|(x, y)| !grid_product(x, y) && (ids_in(x) || ids_in(y))).cloned(),
                        Err(_) => None,
                    };
                    if let Err(e) = &res {
                        self.id_misuse.push((inst.line, format!("%{r}: {e} on {}", join(&ids))));
                    } else if let Some((x, y)) = bad_quad {
                        self.id_misuse.push((inst.line, format!("%{r}: product of {x} and {y}")));
                    }
                }
                match res {
                    Ok(p) => Val::of(p, ids),
                    Err(e) => Val::bad(e, ids),
                }
            }
            InstKind::Select { cond, a, b: bb } => {
                let (x, y) = (self.operand(a), self.operand(bb));
                let ids: BTreeSet<String> = x.ids.union(&y.ids).cloned().collect();
                if x.poly == y.poly {
                    return Val { poly: x.poly, ids };
                }
                let _ = cond;
                if !ids.is_empty() {
                    self.id_misuse.push((inst.line, format!("%{r}: select over {}", join(&ids))));
                }
                Val::bad("select", ids)
            }
            InstKind::Cmp { .. } => Val::bad("comparison result", BTreeSet::new()),
            InstKind::Load { addr } => {
                let (array, index) = self.resolve_address(f, addr);
                let a = reg_atom(r);
                self.atoms.insert(
                    a.clone(),
                    AtomKind::Load {
                        array,
                        index,
                        block: b,
                        pos,
                    },
                );
                Val::of(Poly::atom(&a), BTreeSet::new())
            }
            InstKind::GetElem { .. } => Val::bad("pointer", BTreeSet::new()),
            InstKind::Call { callee, .. } => Val::bad(format!("result of call to @{callee}"), BTreeSet::new()),
            InstKind::Atomic { .. } => Val::bad("atomic result", BTreeSet::new()),
            InstKind::Phi { incoming } => {
                if let Some(&lp) = header_of.get(&b) {
                    let a = reg_atom(r);
                    let kind = match induction_step(f, &forest.loops[lp].latches, incoming, r, &self.vals) {
                        Some(step) => AtomKind::Induction { lp, step },
                        None => AtomKind::Carried { lp },
                    };
                    self.atoms.insert(a.clone(), kind);
                    let ids = incoming
                        .iter()
                        .filter(|(_, l)| !forest.loops[lp].latches.contains(&f.index[l]))
                        .flat_map(|(o, _)| self.operand(o).ids)
                        .collect();
                    return Val::of(Poly::atom(&a), ids);
                }
                let vals: Vec<Val> = incoming.iter().map(|(o, _)| self.operand(o)).collect();
                let ids: BTreeSet<String> = vals.iter().flat_map(|v| v.ids.iter().cloned()).collect();
                if vals.windows(2).all(|w| w[0].poly == w[1].poly) {
                    if let Some(v) = vals.into_iter().next() {
                        return Val { poly: v.poly, ids };
                    }
                }
                Val::bad(format!("merge of values at '{}'", f.blocks[b].label), ids)
            }
            InstKind::Store { .. } | InstKind::Barrier(_) | InstKind::Br(_) | InstKind::CondBr { .. } | InstKind::Ret => {
                Val::bad("no value", BTreeSet::new())
            }
        }
    }

    /// Array name and per-coordinate values of an address, following `getelem`.
    pub fn resolve_address(&self, f: &Function, addr: &Address) -> (String, Vec<Val>) {
        if addr.index.is_empty() {
            for (_, _, inst) in f.instructions() {
                if inst.result.as_deref() == Some(addr.base.as_str()) {
                    if let InstKind::GetElem { addr: inner } = &inst.kind {
                        return (inner.base.clone(), inner.index.iter().map(|o| self.operand(o)).collect());
                    }
                }
            }
            // plain scalar access through an array name
            return (addr.base.clone(), vec![Val::of(Poly::constant(0), BTreeSet::new())]);
        }
        (addr.base.clone(), addr.index.iter().map(|o| self.operand(o)).collect())
    }

    /// Uniformity: a register varies within a block if it is computed from
    /// `tid.*`, from a load at a varying address, from a written array, or
    /// merges values at a join.
    fn compute_varying(&mut self, f: &Function, forest: &LoopForest) {
        let written: BTreeSet<String> = f.written_arrays().into_iter().collect();
        let mut changed = true;
        while changed {
            changed = false;
            for (b, _, inst) in f.instructions() {
                let Some(r) = &inst.result else { continue };
                if self.varying.contains(r) {
                    continue;
                }
                let vary = |o: &Operand| matches!(o, Operand::Reg(x) if self.varying.contains(x));
                let v = match &inst.kind {
                    InstKind::Intrinsic(i) => matches!(i, Intrinsic::Tid(_)),
                    InstKind::Load { addr } => {
                        let (array, _) = self.resolve_address(f, addr);
                        written.contains(&array) || addr.index.iter().any(vary) || self.pointer_varies(f, &addr.base)
                    }
                    InstKind::Phi { incoming } => {
                        let is_header = forest.loops.iter().any(|l| l.header == b);
                        incoming.iter().any(|(o, _)| vary(o))
                            || (!is_header && incoming.windows(2).any(|w| w[0].0 != w[1].0))
                    }
                    InstKind::Atomic { .. } | InstKind::Call { .. } => true,
                    k => k.uses().into_iter().any(vary),
                };
                if v {
                    self.varying.insert(r.clone());
                    changed = true;
                }
            }
        }
    }

    fn pointer_varies(&self, f: &Function, base: &str) -> bool {
        f.instructions().any(|(_, _, i)| {
            i.result.as_deref() == Some(base)
                && i.kind
                    .uses()
                    .iter()
                    .any(|o| matches!(o, Operand::Reg(x) if self.varying.contains(x)))
        })
    }

    pub fn is_varying(&self, o: &Operand) -> bool {
        matches!(o, Operand::Reg(r) if self.varying.contains(r))
    }

    /// Public form of a value.
    pub fn public(&self, v: &Val) -> PropagatedExpr {
        let p = match &v.poly {
            Err(e) => return PropagatedExpr::Opaque(Opaque::NonAffine(e.clone())),
            Ok(p) => p,
        };
        if let Some(((x, y), _)) = p.quad.iter().next() {
            return PropagatedExpr::Opaque(Opaque::NonAffine(format!("product of {x} and {y}")));
        }
        let mut data = false;
        for a in p.atoms() {
            match self.atoms.get(&a) {
                Some(AtomKind::Carried { .. }) => {
                    return PropagatedExpr::Opaque(Opaque::NonAffine(format!("loop-carried value {a}")))
                }
                Some(AtomKind::Load { .. }) => data = true,
                _ => {}
            }
        }
        if !data {
            return PropagatedExpr::Affine(p.lin.clone());
        }
        let atoms = p.atoms();
        if atoms.len() == 1 && p.lin.constant_term() == 0 {
            let a = atoms.iter().next().unwrap();
            if p.lin.param_coeff(a) == 1 {
                if let Some(AtomKind::Load { array, index, .. }) = self.atoms.get(a) {
                    return PropagatedExpr::Opaque(Opaque::Load {
                        array: array.clone(),
                        index: index.iter().map(|v| self.public(v)).collect(),
                    });
                }
            }
        }
        PropagatedExpr::Opaque(Opaque::DataDependent(p.lin.clone()))
    }
}

fn ids_in(atom: &str) -> bool {
    atom.starts_with("tid.") || atom.starts_with("bid.")
}

/// `bid.a * blockdim.a` is the one product of ids that has a meaning: the
/// first global thread index of a block.
fn grid_product(x: &str, y: &str) -> bool {
    let (Some(a), Some(b)) = (Intrinsic::parse(x), Intrinsic::parse(y)) else {
        return false;
    };
    matches!((a, b), (Intrinsic::Bid(p), Intrinsic::BlockDim(q)) | (Intrinsic::BlockDim(q), Intrinsic::Bid(p)) if p == q)
}

fn join(s: &BTreeSet<String>) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(", ")
}

/// For a header phi, the step when every back-edge value is `phi + step`
/// with a loop-invariant step. `Some(None)` when the step is not constant.
fn induction_step(
    f: &Function,
    latches: &[usize],
    incoming: &[(Operand, String)],
    phi: &str,
    vals: &BTreeMap<String, Val>,
) -> Option<Option<i64>> {
    let mut step: Option<Option<i64>> = None;
    for (o, l) in incoming {
        if !latches.contains(&f.index[l]) {
            continue;
        }
        let Operand::Reg(v) = o else { return None };
        let def = f.instructions().find(|(_, _, i)| i.result.as_deref() == Some(v.as_str()))?.2;
        let s = match &def.kind {
            InstKind::Bin { op: BinOp::Add, lhs, rhs } => {
                if *lhs == Operand::Reg(phi.to_string()) {
                    step_of(rhs, vals, 1)
                } else if *rhs == Operand::Reg(phi.to_string()) {
                    step_of(lhs, vals, 1)
                } else {
                    return None;
                }
            }
            InstKind::Bin { op: BinOp::Sub, lhs, rhs } if *lhs == Operand::Reg(phi.to_string()) => step_of(rhs, vals, -1),
            _ => return None,
        };
        match step {
            None => step = Some(s),
            Some(prev) if prev == s => {}
            Some(_) => return None,
        }
    }
    step
}

fn step_of(o: &Operand, vals: &BTreeMap<String, Val>, sign: i64) -> Option<i64> {
    match o {
        Operand::Int(v) if *v != 0 => Some(sign * v),
        Operand::Reg(r) => match vals.get(r).map(|v| &v.poly) {
            Some(Ok(p)) => p.as_const().filter(|c| *c != 0).map(|c| sign * c),
            _ => None,
        },
        _ => None,
    }
}

/// Condition of a branch as a DNF over atoms.
pub(crate) type Dnf = Vec<Vec<Constraint>>;

fn affine_of(v: &Val) -> Result<AffineExpr, String> {
    match &v.poly {
        Ok(p) if p.quad.is_empty() => Ok(p.lin.clone()),
        Ok(_) => Err("non-linear comparison".into()),
        Err(e) => Err(e.clone()),
    }
}

pub(crate) fn negate(d: &Dnf) -> Dnf {
    let mut out: Dnf = vec![vec![]];
    for conj in d {
        let alts: Vec<Constraint> = conj.iter().flat_map(|c| c.complement()).collect();
        let mut next = Vec::new();
        for prefix in &out {
            for a in &alts {
                let mut c = prefix.clone();
                c.push(a.clone());
                next.push(c);
            }
        }
        out = next;
    }
    out
}

impl Propagation {
    /// The condition computed by register `cond` (an `icmp`, or `and`/`or`
    /// of conditions, or `xor` with 1).
    pub fn condition(&self, f: &Function, cond: &Operand) -> Result<Dnf, String> {
        let reg = match cond {
            Operand::Int(v) => return Ok(if *v != 0 { vec![vec![]] } else { vec![] }),
            Operand::Reg(r) => r,
        };
        let def = f
            .instructions()
            .find(|(_, _, i)| i.result.as_deref() == Some(reg.as_str()))
            .map(|t| t.2)
            .ok_or_else(|| format!("%{reg} is not a condition"))?;
        match &def.kind {
            InstKind::Cmp { pred, lhs, rhs } => {
                let a = affine_of(&self.operand(lhs))?;
                let b = affine_of(&self.operand(rhs))?;
                Ok(match pred {
                    CmpPred::Eq => vec![vec![Constraint::eq(&a, &b)]],
                    CmpPred::Ne => vec![vec![Constraint::lt(&a, &b)], vec![Constraint::gt(&a, &b)]],
                    CmpPred::Slt => vec![vec![Constraint::lt(&a, &b)]],
                    CmpPred::Sle => vec![vec![Constraint::le(&a, &b)]],
                    CmpPred::Sgt => vec![vec![Constraint::gt(&a, &b)]],
                    CmpPred::Sge => vec![vec![Constraint::ge(&a, &b)]],
                })
            }
            InstKind::Bin { op: BinOp::And, lhs, rhs } => {
                let (x, y) = (self.condition(f, lhs)?, self.condition(f, rhs)?);
                let mut out = Vec::new();
                for a in &x {
                    for b in &y {
                        out.push(a.iter().chain(b.iter()).cloned().collect());
                    }
                }
                Ok(out)
            }
            InstKind::Bin { op: BinOp::Or, lhs, rhs } => {
                let mut x = self.condition(f, lhs)?;
                x.extend(self.condition(f, rhs)?);
                Ok(x)
            }
            InstKind::Bin { op: BinOp::Xor, lhs, rhs: Operand::Int(1) } => Ok(negate(&self.condition(f, lhs)?)),
            _ => Err(format!("%{reg} is not an affine comparison")),
        }
    }
}

/// One loop as recognized in the function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopInfo {
    pub header: String,
    /// `(latch, header)`.
    pub back_edge: (String, String),
    pub induction: Induction,
    /// Conjunction over atoms that holds exactly for the iterations that run.
    pub bound: Vec<Constraint>,
    /// Block the loop exits to.
    pub exit: String,
    pub body: Vec<String>,
    /// Index of the enclosing loop in the returned list.
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Induction {
    /// Phi register.
    pub phi: String,
    pub init: PropagatedExpr,
    pub step: i64,
}

pub(crate) fn loop_infos(
    f: &Function,
    forest: &LoopForest,
    prop: &Propagation,
) -> Result<Vec<LoopInfo>, MiniIrError> {
    // registers feeding some address
    let mut feeds: BTreeSet<String> = BTreeSet::new();
    let defs: BTreeMap<&str, &Instruction> = f
        .instructions()
        .filter_map(|(_, _, i)| i.result.as_deref().map(|r| (r, i)))
        .collect();
    let mut work: Vec<String> = Vec::new();
    for (_, _, inst) in f.instructions() {
        if let Some(a) = inst.kind.address() {
            work.extend(a.index.iter().filter_map(|o| match o {
                Operand::Reg(r) => Some(r.clone()),
                _ => None,
            }));
        }
    }
    while let Some(r) = work.pop() {
        if !feeds.insert(r.clone()) {
            continue;
        }
        if let Some(d) = defs.get(r.as_str()) {
            let more: Vec<&Operand> = match &d.kind {
                InstKind::Bin { .. } | InstKind::Select { .. } | InstKind::GetElem { .. } => d.kind.uses(),
                InstKind::Phi { incoming } if !forest.loops.iter().any(|l| defs_block(f, &r) == Some(l.header)) => {
                    incoming.iter().map(|(o, _)| o).collect()
                }
                _ => vec![],
            };
            work.extend(more.into_iter().filter_map(|o| match o {
                Operand::Reg(x) => Some(x.clone()),
                _ => None,
            }));
        }
    }
    let mut out = Vec::new();
    for (li, l) in forest.loops.iter().enumerate() {
        let header = &f.blocks[l.header];
        let hl = header.label.clone();
        if l.latches.len() != 1 {
            return Err(MiniIrError::UnsupportedConstruct(format!(
                "loop at '{hl}' has {} back edges",
                l.latches.len()
            )));
        }
        for &b in &l.body {
            for &s in &f.succs[b] {
                if !l.body.contains(&s) && b != l.header {
                    return Err(MiniIrError::UnsupportedConstruct(format!(
                        "loop at '{hl}' is left from '{}', not only from its header",
                        f.blocks[b].label
                    )));
                }
            }
            if b != l.header && matches!(f.blocks[b].insts.last().map(|i| &i.kind), Some(InstKind::Ret)) {
                return Err(MiniIrError::UnsupportedConstruct(format!("return inside the loop at '{hl}'")));
            }
        }
        let inds: Vec<(&String, Option<i64>)> = header
            .insts
            .iter()
            .filter_map(|i| i.result.as_ref())
            .filter_map(|r| match prop.atoms.get(&reg_atom(r)) {
                Some(AtomKind::Induction { lp, step }) if *lp == li => Some((r, *step)),
                _ => None,
            })
            .collect();
        let feeding: Vec<&String> = inds.iter().map(|(r, _)| *r).filter(|r| feeds.contains(*r)).collect();
        if feeding.len() > 1 {
            return Err(MiniIrError::MultipleInductions(hl));
        }
        let Some(InstKind::CondBr { cond, then_, else_ }) = header.insts.last().map(|i| &i.kind) else {
            return Err(MiniIrError::NonAffineBound {
                header: hl,
                reason: "the header does not end with a conditional branch".into(),
            });
        };
        let (then_in, else_in) = (l.body.contains(&f.index[then_]), l.body.contains(&f.index[else_]));
        if then_in == else_in {
            return Err(MiniIrError::NonAffineBound {
                header: hl,
                reason: "the header branch does not leave the loop".into(),
            });
        }
        let dnf = prop.condition(f, cond).map_err(|reason| MiniIrError::NonAffineBound {
            header: hl.clone(),
            reason,
        })?;
        let dnf = if then_in { dnf } else { negate(&dnf) };
        if dnf.len() != 1 {
            return Err(MiniIrError::NonAffineBound {
                header: hl,
                reason: "the loop condition is not a single conjunction".into(),
            });
        }
        let bound = dnf.into_iter().next().unwrap();
        let tested: Vec<&(&String, Option<i64>)> = inds
            .iter()
            .filter(|(r, _)| bound.iter().any(|c| c.expr.param_coeff(&reg_atom(r)) != 0))
            .collect();
        let carried = bound.iter().flat_map(|c| c.expr.param_coeffs().keys()).find(
            |a| matches!(prop.atoms.get(*a), Some(AtomKind::Carried { lp }) if *lp == li),
        );
        if let Some(a) = carried {
            return Err(MiniIrError::NonAffineBound {
                header: hl,
                reason: format!("the condition tests {a}, which is not an induction variable"),
            });
        }
        let (phi, step) = match tested.as_slice() {
            [(r, Some(s))] => ((*r).clone(), *s),
            [(r, None)] => {
                return Err(MiniIrError::NonAffineBound {
                    header: hl,
                    reason: format!("%{r} does not advance by a constant step"),
                })
            }
            [] => {
                return Err(MiniIrError::NonAffineBound {
                    header: hl,
                    reason: "the condition does not test an induction variable".into(),
                })
            }
            _ => {
                return Err(MiniIrError::NonAffineBound {
                    header: hl,
                    reason: "the condition tests more than one induction variable".into(),
                })
            }
        };
        let atom = reg_atom(&phi);
        let mut decreasing = false;
        for c in &bound {
            let k = c.expr.param_coeff(&atom) * step;
            if k == 0 {
                continue;
            }
            if c.kind == ConstraintKind::EqualsZero || k > 0 {
                return Err(MiniIrError::NonAffineBound {
                    header: hl,
                    reason: format!("'{c}' does not bound %{phi} in the direction it moves"),
                });
            }
            decreasing = true;
        }
        if !decreasing {
            return Err(MiniIrError::NonAffineBound {
                header: hl,
                reason: format!("the condition does not bound %{phi}"),
            });
        }
        let init_op = header
            .insts
            .iter()
            .find(|i| i.result.as_deref() == Some(phi.as_str()))
            .and_then(|i| match &i.kind {
                InstKind::Phi { incoming } => incoming
                    .iter()
                    .find(|(_, lab)| !l.latches.contains(&f.index[lab]))
                    .map(|(o, _)| o.clone()),
                _ => None,
            })
            .ok_or_else(|| MiniIrError::NonAffineBound {
                header: hl.clone(),
                reason: "induction without an initial value".into(),
            })?;
        let init = prop.public(&prop.operand(&init_op));
        let latch = f.blocks[l.latches[0]].label.clone();
        out.push(LoopInfo {
            header: hl.clone(),
            back_edge: (latch, hl),
            induction: Induction { phi, init, step },
            bound,
            exit: if then_in { else_.clone() } else { then_.clone() },
            body: l.body.iter().map(|&b| f.blocks[b].label.clone()).collect(),
            parent: l.parent,
        });
    }
    Ok(out)
}

fn defs_block(f: &Function, r: &str) -> Option<usize> {
    f.instructions().find(|(_, _, i)| i.result.as_deref() == Some(r)).map(|t| t.0)
}

/// One use of a grid intrinsic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdBinding {
    pub register: String,
    pub intrinsic: Intrinsic,
    /// Model name: dimension `tid_x`/`bid_x`, or parameter `blockdim_x`/`griddim_x`.
    pub model_name: String,
}

pub fn model_name(i: Intrinsic) -> String {
    let base = match i {
        Intrinsic::Tid(_) => "tid",
        Intrinsic::Bid(_) => "bid",
        Intrinsic::BlockDim(_) => "blockdim",
        Intrinsic::GridDim(_) => "griddim",
    };
    format!("{base}_{}", i.axis().suffix())
}

/// Axes used by block ids and thread ids (x always included).
pub(crate) fn used_axes(f: &Function) -> (BTreeSet<Axis>, BTreeSet<Axis>) {
    let mut blocks = BTreeSet::from([Axis::X]);
    let mut threads = BTreeSet::from([Axis::X]);
    for (_, _, i) in f.instructions() {
        match i.kind {
            InstKind::Intrinsic(Intrinsic::Bid(a)) | InstKind::Intrinsic(Intrinsic::GridDim(a)) => {
                blocks.insert(a);
            }
            InstKind::Intrinsic(Intrinsic::Tid(a)) | InstKind::Intrinsic(Intrinsic::BlockDim(a)) => {
                threads.insert(a);
            }
            _ => {}
        }
    }
    (blocks, threads)
}

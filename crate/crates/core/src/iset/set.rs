//! Parameterized integer sets in disjunctive normal form.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{gcd_normalize, AffineExpr, Constraint, ConstraintKind, Normalized};
use super::solver::{Outcome, Problem, SearchLimits};
use super::IsetError;

/// Upper bound on disjuncts in a single set.
pub const MAX_DISJUNCTS: usize = 4096;

/// A conjunction of constraints, optionally under existential quantifiers.
///
/// Existential names always start with `_e`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Conj {
    pub constraints: Vec<Constraint>,
    pub exists: Vec<String>,
}

impl Conj {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Conj {
            constraints,
            exists: Vec::new(),
        }
    }

    pub fn rename_dims(&self, map: &BTreeMap<String, String>) -> Conj {
        Conj {
            constraints: self
                .constraints
                .iter()
                .map(|c| c.map_expr(|e| e.rename_dims(map)))
                .collect(),
            exists: self
                .exists
                .iter()
                .map(|e| map.get(e).cloned().unwrap_or_else(|| e.clone()))
                .collect(),
        }
    }

    /// Rename existentials so none collide with `taken`.
    fn freshen(&self, taken: &mut BTreeSet<String>) -> Conj {
        let mut map = BTreeMap::new();
        for e in &self.exists {
            let mut i = 0;
            let name = loop {
                let n = format!("_e{i}");
                if !taken.contains(&n) {
                    break n;
                }
                i += 1;
            };
            taken.insert(name.clone());
            map.insert(e.clone(), name);
        }
        self.rename_dims(&map)
    }

    fn and(&self, other: &Conj) -> Conj {
        let mut taken: BTreeSet<String> = self.exists.iter().cloned().collect();
        let other = other.freshen(&mut taken);
        let mut out = self.clone();
        out.constraints.extend(other.constraints);
        out.exists.extend(other.exists);
        out
    }

    /// gcd-normalize, drop tautologies and duplicates, eliminate existentials
    /// where that is exact. `None` when a constraint is proven infeasible.
    pub fn simplify(&self) -> Option<Conj> {
        let mut cs: Vec<Constraint> = Vec::new();
        for c in &self.constraints {
            match gcd_normalize(c) {
                Normalized::Kept(c) => {
                    if !cs.contains(&c) {
                        cs.push(c)
                    }
                }
                Normalized::Tautology => {}
                Normalized::ProvenInfeasible => return None,
            }
        }
        let mut exists = self.exists.clone();
        let mut changed = true;
        while changed {
            changed = false;
            let mut i = 0;
            while i < exists.len() {
                let e = exists[i].clone();
                let uses: Vec<usize> = (0..cs.len()).filter(|&k| cs[k].expr.coeff(&e) != 0).collect();
                if uses.is_empty() {
                    exists.remove(i);
                    changed = true;
                    continue;
                }
                if let Some(&k) = uses
                    .iter()
                    .find(|&&k| cs[k].is_equality() && cs[k].expr.coeff(&e).abs() == 1)
                {
                    let eq = cs.remove(k);
                    let c = eq.expr.coeff(&e);
                    // e = -(rest)/c
                    let rest = eq.expr.substitute_dim(&e, &AffineExpr::zero());
                    let def = rest.scale(-c);
                    let mut next = Vec::new();
                    for x in cs.drain(..) {
                        match gcd_normalize(&x.map_expr(|ex| ex.substitute_dim(&e, &def))) {
                            Normalized::Kept(x) => {
                                if !next.contains(&x) {
                                    next.push(x)
                                }
                            }
                            Normalized::Tautology => {}
                            Normalized::ProvenInfeasible => return None,
                        }
                    }
                    cs = next;
                    exists.remove(i);
                    changed = true;
                    continue;
                }
                let unit_only = uses
                    .iter()
                    .all(|&k| !cs[k].is_equality() && cs[k].expr.coeff(&e).abs() == 1);
                if unit_only {
                    let (with, without): (Vec<Constraint>, Vec<Constraint>) =
                        cs.drain(..).partition(|x| x.expr.coeff(&e) != 0);
                    cs = without;
                    let lowers: Vec<&Constraint> = with.iter().filter(|x| x.expr.coeff(&e) > 0).collect();
                    let uppers: Vec<&Constraint> = with.iter().filter(|x| x.expr.coeff(&e) < 0).collect();
                    for l in &lowers {
                        for u in &uppers {
                            let sum = l.expr.add(&u.expr);
                            match gcd_normalize(&Constraint::non_negative(sum)) {
                                Normalized::Kept(x) => {
                                    if !cs.contains(&x) {
                                        cs.push(x)
                                    }
                                }
                                Normalized::Tautology => {}
                                Normalized::ProvenInfeasible => return None,
                            }
                        }
                    }
                    exists.remove(i);
                    changed = true;
                    continue;
                }
                i += 1;
            }
        }
        Some(Conj {
            constraints: cs,
            exists,
        })
    }

    fn problem(&self, dims: &[String], params: &[String]) -> Problem {
        let vars: Vec<String> = params
            .iter()
            .chain(dims.iter())
            .chain(self.exists.iter())
            .cloned()
            .collect();
        let index: BTreeMap<&str, usize> = vars.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        let n = vars.len();
        let mut eqs = Vec::new();
        let mut ineqs = Vec::new();
        for c in &self.constraints {
            let mut row = vec![0i128; n + 1];
            for (name, k) in c.expr.coeffs() {
                row[index[name.as_str()]] += *k as i128;
            }
            for (name, k) in c.expr.param_coeffs() {
                row[index[name.as_str()]] += *k as i128;
            }
            row[n] = c.expr.constant_term() as i128;
            match c.kind {
                ConstraintKind::EqualsZero => eqs.push(row),
                ConstraintKind::NonNegative => ineqs.push(row),
            }
        }
        Problem {
            vars,
            nparams: params.len(),
            eqs,
            ineqs,
        }
    }
}

/// Options for emptiness decisions.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Inclusive bounds applied to parameters before deciding.
    pub param_bounds: BTreeMap<String, (i64, i64)>,
    pub limits: SearchLimits,
}

impl SolveOptions {
    pub fn with_param(mut self, name: &str, value: i64) -> Self {
        self.param_bounds.insert(name.to_string(), (value, value));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct WitnessPoint {
    pub space: Option<String>,
    pub dim_values: Vec<(String, i64)>,
    pub param_values: Vec<(String, i64)>,
}

impl WitnessPoint {
    pub fn dim(&self, name: &str) -> Option<i64> {
        self.dim_values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn param(&self, name: &str) -> Option<i64> {
        self.param_values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn dim_map(&self) -> BTreeMap<String, i64> {
        self.dim_values.iter().cloned().collect()
    }

    pub fn param_map(&self) -> BTreeMap<String, i64> {
        self.param_values.iter().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmptinessVerdict {
    Empty,
    NonEmpty(WitnessPoint),
    Inconclusive { reason: String, search_box: SearchBox },
}

/// The search region used when a decision stays open.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SearchBox {
    pub radius: i64,
    pub param_samples: Vec<i64>,
    pub param_bounds: Vec<(String, i64, i64)>,
}

impl EmptinessVerdict {
    pub fn is_empty(&self) -> bool {
        matches!(self, EmptinessVerdict::Empty)
    }

    pub fn witness(&self) -> Option<&WitnessPoint> {
        match self {
            EmptinessVerdict::NonEmpty(w) => Some(w),
            _ => None,
        }
    }
}

/// A labeled set `[params] -> { space[dims] : disjunct or ... }`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSet {
    pub(crate) space: Option<String>,
    pub(crate) dims: Vec<String>,
    pub(crate) params: Vec<String>,
    pub(crate) disjuncts: Vec<Conj>,
}

fn merge_params(a: &[String], b: &[String]) -> Vec<String> {
    let s: BTreeSet<String> = a.iter().chain(b.iter()).cloned().collect();
    s.into_iter().collect()
}

impl IntSet {
    /// The set of all points of the space.
    pub fn universe(space: Option<&str>, dims: &[&str]) -> Self {
        IntSet {
            space: space.map(str::to_string),
            dims: dims.iter().map(|s| s.to_string()).collect(),
            params: Vec::new(),
            disjuncts: vec![Conj::default()],
        }
    }

    pub fn empty(space: Option<&str>, dims: &[&str]) -> Self {
        IntSet {
            disjuncts: Vec::new(),
            ..Self::universe(space, dims)
        }
    }

    /// Build from a single conjunction; parameters are collected from the constraints.
    pub fn from_constraints(space: Option<&str>, dims: &[&str], constraints: Vec<Constraint>) -> Result<Self, IsetError> {
        Self::from_disjuncts(space, dims, vec![Conj::new(constraints)])
    }

    pub fn from_disjuncts(space: Option<&str>, dims: &[&str], disjuncts: Vec<Conj>) -> Result<Self, IsetError> {
        let dims: Vec<String> = dims.iter().map(|s| s.to_string()).collect();
        let mut params = BTreeSet::new();
        for d in &disjuncts {
            for c in &d.constraints {
                params.extend(c.expr.param_coeffs().keys().cloned());
                for n in c.expr.coeffs().keys() {
                    if !dims.contains(n) && !d.exists.contains(n) {
                        return Err(IsetError::UnknownName(n.clone()));
                    }
                }
            }
        }
        for p in &params {
            if dims.contains(p) {
                return Err(IsetError::NameClash(p.clone()));
            }
        }
        let set = IntSet {
            space: space.map(str::to_string),
            dims,
            params: params.into_iter().collect(),
            disjuncts,
        };
        set.normalized()
    }

    pub fn space(&self) -> Option<&str> {
        self.space.as_deref()
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn disjuncts(&self) -> &[Conj] {
        &self.disjuncts
    }

    pub fn arity(&self) -> usize {
        self.dims.len()
    }

    /// True when no disjunct survived simplification.
    pub fn is_obviously_empty(&self) -> bool {
        self.disjuncts.is_empty()
    }

    /// Declare additional parameters (kept sorted).
    pub fn with_params(mut self, extra: &[String]) -> Self {
        self.params = merge_params(&self.params, extra);
        self
    }

    pub fn with_space(mut self, space: Option<&str>) -> Self {
        self.space = space.map(str::to_string);
        self
    }

    fn normalized(mut self) -> Result<Self, IsetError> {
        let mut out: Vec<Conj> = Vec::new();
        for d in self.disjuncts {
            if let Some(d) = d.simplify() {
                if !out.contains(&d) {
                    out.push(d);
                }
            }
        }
        if out.len() > MAX_DISJUNCTS {
            return Err(IsetError::TooManyDisjuncts(out.len()));
        }
        self.disjuncts = out;
        Ok(self)
    }

    /// Positional renaming of `other`'s dims onto `self`'s.
    fn aligned(&self, other: &IntSet) -> Result<Vec<Conj>, IsetError> {
        if self.space != other.space {
            return Err(IsetError::SpaceMismatch {
                left: self.space.clone().unwrap_or_default(),
                right: other.space.clone().unwrap_or_default(),
            });
        }
        if self.arity() != other.arity() {
            return Err(IsetError::ArityMismatch {
                expected: self.arity(),
                found: other.arity(),
            });
        }
        Ok(other.renamed_disjuncts(&self.dims))
    }

    pub(crate) fn renamed_disjuncts(&self, to: &[String]) -> Vec<Conj> {
        if self.dims == to {
            return self.disjuncts.clone();
        }
        // through temporaries so swaps do not clobber
        let tmp: BTreeMap<String, String> = self
            .dims
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), format!("\u{1}{i}")))
            .collect();
        let fin: BTreeMap<String, String> = to
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("\u{1}{i}"), d.clone()))
            .collect();
        self.disjuncts
            .iter()
            .map(|c| c.rename_dims(&tmp).rename_dims(&fin))
            .collect()
    }

    /// Rename dimensions positionally.
    pub fn rename(&self, to: &[&str]) -> Result<IntSet, IsetError> {
        if to.len() != self.arity() {
            return Err(IsetError::ArityMismatch {
                expected: self.arity(),
                found: to.len(),
            });
        }
        let to: Vec<String> = to.iter().map(|s| s.to_string()).collect();
        Ok(IntSet {
            disjuncts: self.renamed_disjuncts(&to),
            dims: to,
            ..self.clone()
        })
    }

    pub fn intersect(&self, other: &IntSet) -> Result<IntSet, IsetError> {
        let theirs = self.aligned(other)?;
        let mut out = Vec::new();
        for a in &self.disjuncts {
            for b in &theirs {
                out.push(a.and(b));
            }
        }
        IntSet {
            space: self.space.clone(),
            dims: self.dims.clone(),
            params: merge_params(&self.params, &other.params),
            disjuncts: out,
        }
        .normalized()
    }

    /// Union within one space.
    pub fn union_same(&self, other: &IntSet) -> Result<IntSet, IsetError> {
        let theirs = self.aligned(other)?;
        let mut disjuncts = self.disjuncts.clone();
        disjuncts.extend(theirs);
        IntSet {
            space: self.space.clone(),
            dims: self.dims.clone(),
            params: merge_params(&self.params, &other.params),
            disjuncts,
        }
        .normalized()
    }

    /// Add constraints to every disjunct.
    pub fn constrain(&self, constraints: &[Constraint]) -> Result<IntSet, IsetError> {
        let extra = IntSet::from_constraints(
            self.space.as_deref(),
            &self.dims.iter().map(String::as_str).collect::<Vec<_>>(),
            constraints.to_vec(),
        )?;
        self.intersect(&extra)
    }

    /// Points of `self` not in `other`.
    ///
    /// Each conjunct of `other` is removed by splitting into disjoint pieces
    /// `c1' or (c1 and c2') or ...`; pieces proven empty are dropped.
    pub fn subtract(&self, other: &IntSet) -> Result<IntSet, IsetError> {
        self.subtract_with(other, &SolveOptions::default())
    }

    pub fn subtract_with(&self, other: &IntSet, opts: &SolveOptions) -> Result<IntSet, IsetError> {
        let theirs = self.aligned(other)?;
        let params = merge_params(&self.params, &other.params);
        let mut current: Vec<Conj> = self.disjuncts.clone();
        for b in &theirs {
            let b = b.simplify();
            let Some(b) = b else { continue };
            if !b.exists.is_empty() {
                return Err(IsetError::QuantifiedSubtrahend);
            }
            let mut next = Vec::new();
            for a in &current {
                let mut prefix = a.clone();
                for c in &b.constraints {
                    for comp in c.complement() {
                        let mut piece = prefix.clone();
                        piece.constraints.push(comp);
                        if let Some(p) = piece.simplify() {
                            if !conj_infeasible(&p, &self.dims, &params, opts) {
                                next.push(p);
                            }
                        }
                    }
                    prefix.constraints.push(c.clone());
                    match prefix.simplify() {
                        Some(p) if !conj_infeasible(&p, &self.dims, &params, opts) => prefix = p,
                        _ => break,
                    }
                }
                if next.len() > MAX_DISJUNCTS {
                    return Err(IsetError::TooManyDisjuncts(next.len()));
                }
            }
            current = next;
        }
        IntSet {
            space: self.space.clone(),
            dims: self.dims.clone(),
            params,
            disjuncts: current,
        }
        .normalized()
    }

    /// Existentially quantify the named dims.
    pub fn project_out(&self, names: &[&str]) -> Result<IntSet, IsetError> {
        for n in names {
            if !self.dims.iter().any(|d| d == n) {
                return Err(IsetError::UnknownName(n.to_string()));
            }
        }
        let keep: Vec<String> = self
            .dims
            .iter()
            .filter(|d| !names.contains(&d.as_str()))
            .cloned()
            .collect();
        let mut out = Vec::new();
        for d in &self.disjuncts {
            let mut taken: BTreeSet<String> = d.exists.iter().cloned().collect();
            let mut map = BTreeMap::new();
            for n in names {
                let mut i = 0;
                let fresh = loop {
                    let f = format!("_e{i}");
                    if !taken.contains(&f) {
                        break f;
                    }
                    i += 1;
                };
                taken.insert(fresh.clone());
                map.insert(n.to_string(), fresh);
            }
            let mut c = d.rename_dims(&map);
            c.exists.extend(map.into_values());
            out.push(c);
        }
        IntSet {
            space: self.space.clone(),
            dims: keep,
            params: self.params.clone(),
            disjuncts: out,
        }
        .normalized()
    }

    /// Decide emptiness. `Empty` is only returned with a proof; `NonEmpty`
    /// always carries a point that was checked against the constraints.
    pub fn is_empty(&self, opts: &SolveOptions) -> EmptinessVerdict {
        let mut reasons = Vec::new();
        for d in &self.disjuncts {
            match self.solve_conj(d, opts) {
                Outcome::Infeasible(_) => {}
                Outcome::Point(p) => {
                    let np = self.params.len();
                    let w = WitnessPoint {
                        space: self.space.clone(),
                        param_values: self.params.iter().cloned().zip(p[..np].iter().copied()).collect(),
                        dim_values: self
                            .dims
                            .iter()
                            .cloned()
                            .zip(p[np..np + self.dims.len()].iter().copied())
                            .collect(),
                    };
                    let exists: BTreeMap<String, i64> = d
                        .exists
                        .iter()
                        .cloned()
                        .zip(p[np + self.dims.len()..].iter().copied())
                        .collect();
                    let mut all = w.dim_map();
                    all.extend(exists);
                    let ok = d
                        .constraints
                        .iter()
                        .all(|c| c.holds(&all, &w.param_map()) == Some(true));
                    if ok {
                        return EmptinessVerdict::NonEmpty(w);
                    }
                    reasons.push("witness failed re-validation".to_string());
                }
                Outcome::Unknown(r) => reasons.push(r),
            }
        }
        if reasons.is_empty() {
            EmptinessVerdict::Empty
        } else {
            reasons.dedup();
            EmptinessVerdict::Inconclusive {
                reason: reasons.join("; "),
                search_box: SearchBox {
                    radius: opts.limits.box_radius,
                    param_samples: opts.limits.param_samples.clone(),
                    param_bounds: opts
                        .param_bounds
                        .iter()
                        .map(|(k, (l, h))| (k.clone(), *l, *h))
                        .collect(),
                },
            }
        }
    }

    fn solve_conj(&self, d: &Conj, opts: &SolveOptions) -> Outcome {
        let mut d = d.clone();
        for (p, (lo, hi)) in &opts.param_bounds {
            if self.params.contains(p) {
                d.constraints.push(Constraint::ge(&AffineExpr::param(p), &AffineExpr::constant(*lo)));
                d.constraints.push(Constraint::le(&AffineExpr::param(p), &AffineExpr::constant(*hi)));
            }
        }
        d.problem(&self.dims, &self.params).solve(&opts.limits)
    }

    /// Membership of a concrete point.
    pub fn contains(&self, point: &[i64], params: &BTreeMap<String, i64>) -> Result<bool, IsetError> {
        if point.len() != self.arity() {
            return Err(IsetError::ArityMismatch {
                expected: self.arity(),
                found: point.len(),
            });
        }
        let dims: BTreeMap<String, i64> = self.dims.iter().cloned().zip(point.iter().copied()).collect();
        for d in &self.disjuncts {
            if d.exists.is_empty() {
                let mut ok = true;
                for c in &d.constraints {
                    match c.holds(&dims, params) {
                        Some(true) => {}
                        Some(false) => {
                            ok = false;
                            break;
                        }
                        None => return Err(IsetError::UnboundParameter(format!("{c}"))),
                    }
                }
                if ok {
                    return Ok(true);
                }
                continue;
            }
            // fix dims and params, search the existentials
            let cs: Vec<Constraint> = d
                .constraints
                .iter()
                .map(|c| {
                    let mut e = c.expr.clone();
                    for (n, v) in &dims {
                        e = e.substitute_dim(n, &AffineExpr::constant(*v));
                    }
                    let mut fixed = AffineExpr::constant(e.constant_term());
                    for (n, k) in e.coeffs() {
                        fixed = fixed.with_dim(n, *k);
                    }
                    for (n, k) in e.param_coeffs() {
                        let v = params.get(n).ok_or_else(|| IsetError::UnboundParameter(n.clone()))?;
                        fixed = fixed.plus_const(k * v);
                    }
                    Ok(Constraint { expr: fixed, kind: c.kind })
                })
                .collect::<Result<_, IsetError>>()?;
            let inner = Conj {
                constraints: cs,
                exists: Vec::new(),
            };
            let limits = SearchLimits::default();
            match inner.problem(&d.exists, &[]).solve(&limits) {
                Outcome::Point(_) => return Ok(true),
                Outcome::Infeasible(_) => {}
                Outcome::Unknown(r) => return Err(IsetError::Undecided(r)),
            }
        }
        Ok(false)
    }

    /// Drop disjuncts that are provably empty.
    pub fn coalesce(&self, opts: &SolveOptions) -> IntSet {
        let mut out = self.clone();
        out.disjuncts
            .retain(|d| !matches!(self.solve_conj(d, opts), Outcome::Infeasible(_)));
        out
    }

    /// Swap a set of dims for parameters of the same name (used when fixing
    /// thread coordinates, for instance).
    pub fn dims_to_params(&self, names: &[&str]) -> IntSet {
        let names_s: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let disjuncts = self
            .disjuncts
            .iter()
            .map(|d| Conj {
                constraints: d
                    .constraints
                    .iter()
                    .map(|c| {
                        c.map_expr(|e| {
                            let mut out = e.clone();
                            for n in &names_s {
                                let k = out.coeff(n);
                                if k != 0 {
                                    out = out.substitute_dim(n, &AffineExpr::zero()).with_param(n, k);
                                }
                            }
                            out
                        })
                    })
                    .collect(),
                exists: d.exists.clone(),
            })
            .collect();
        IntSet {
            space: self.space.clone(),
            dims: self.dims.iter().filter(|d| !names_s.contains(d)).cloned().collect(),
            params: merge_params(&self.params, &names_s),
            disjuncts,
        }
    }
}

fn conj_infeasible(c: &Conj, dims: &[String], params: &[String], opts: &SolveOptions) -> bool {
    // rational tier only: cheap pruning during subtraction
    let limits = SearchLimits {
        max_nodes: 0,
        ..opts.limits.clone()
    };
    matches!(
        c.problem(dims, params).solve(&limits),
        Outcome::Infeasible(_)
    )
}

/// Sets keyed by space label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnionSet {
    sets: BTreeMap<String, IntSet>,
}

impl UnionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_set(s: IntSet) -> Self {
        let mut u = Self::new();
        u.sets.insert(s.space.clone().unwrap_or_default(), s);
        u
    }

    pub fn insert(&mut self, s: IntSet) -> Result<(), IsetError> {
        let key = s.space.clone().unwrap_or_default();
        let merged = match self.sets.remove(&key) {
            Some(prev) => prev.union_same(&s)?,
            None => s,
        };
        self.sets.insert(key, merged);
        Ok(())
    }

    pub fn union(&self, other: &UnionSet) -> Result<UnionSet, IsetError> {
        let mut out = self.clone();
        for s in other.sets.values() {
            out.insert(s.clone())?;
        }
        Ok(out)
    }

    pub fn get(&self, space: &str) -> Option<&IntSet> {
        self.sets.get(space)
    }

    pub fn iter(&self) -> impl Iterator<Item = &IntSet> {
        self.sets.values()
    }

    pub fn spaces(&self) -> Vec<&str> {
        self.sets.keys().map(String::as_str).collect()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn params(&self) -> Vec<String> {
        let s: BTreeSet<String> = self.sets.values().flat_map(|s| s.params.iter().cloned()).collect();
        s.into_iter().collect()
    }

    pub fn contains(&self, space: &str, point: &[i64], params: &BTreeMap<String, i64>) -> Result<bool, IsetError> {
        match self.sets.get(space) {
            Some(s) if s.arity() == point.len() => s.contains(point, params),
            _ => Ok(false),
        }
    }
}

/// Union of two sets, keyed by space.
pub fn union(a: &IntSet, b: &IntSet) -> Result<UnionSet, IsetError> {
    let mut u = UnionSet::from_set(a.clone());
    u.insert(b.clone())?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k() -> AffineExpr {
        AffineExpr::dim("k")
    }
    fn n() -> AffineExpr {
        AffineExpr::param("n")
    }
    fn c(v: i64) -> AffineExpr {
        AffineExpr::constant(v)
    }

    fn s_range(lo: i64, hi_excl: i64) -> IntSet {
        IntSet::from_constraints(
            Some("S"),
            &["k"],
            vec![Constraint::ge(&k(), &c(lo)), Constraint::lt(&k(), &c(hi_excl))],
        )
        .unwrap()
    }

    fn members(s: &IntSet, lo: i64, hi: i64) -> Vec<i64> {
        (lo..=hi)
            .filter(|v| s.contains(&[*v], &BTreeMap::new()).unwrap())
            .collect()
    }

    #[test]
    fn intersect_conjoins_bounds() {
        let a = IntSet::from_constraints(Some("S"), &["k"], vec![Constraint::ge(&k(), &c(0)), Constraint::lt(&k(), &n())]).unwrap();
        let b = IntSet::from_constraints(Some("S"), &["k"], vec![Constraint::ge(&k(), &c(2))]).unwrap();
        let r = a.intersect(&b).unwrap();
        assert_eq!(r.params(), &["n".to_string()]);
        let p = BTreeMap::from([("n".to_string(), 5)]);
        let got: Vec<i64> = (-3..10).filter(|v| r.contains(&[*v], &p).unwrap()).collect();
        assert_eq!(got, vec![2, 3, 4]);
    }

    #[test]
    fn contradictory_bounds_intersect_to_empty() {
        let a = s_range(0, 5);
        let b = IntSet::from_constraints(Some("S"), &["k"], vec![Constraint::ge(&k(), &c(5))]).unwrap();
        let r = a.intersect(&b).unwrap();
        assert!(r.is_empty(&SolveOptions::default()).is_empty());
    }

    #[test]
    fn intersect_rejects_space_mismatch() {
        let a = s_range(0, 5);
        let b = IntSet::universe(Some("T"), &["k"]);
        assert!(matches!(a.intersect(&b), Err(IsetError::SpaceMismatch { .. })));
        let b = IntSet::universe(Some("S"), &["i", "j"]);
        assert!(matches!(a.intersect(&b), Err(IsetError::ArityMismatch { .. })));
    }

    #[test]
    fn intersect_renames_positionally() {
        let a = s_range(0, 5);
        let b = IntSet::from_constraints(Some("S"), &["z"], vec![Constraint::ge(&AffineExpr::dim("z"), &c(3))]).unwrap();
        assert_eq!(members(&a.intersect(&b).unwrap(), -2, 8), vec![3, 4]);
    }

    #[test]
    fn union_overlapping_ranges() {
        let u = s_range(0, 2).union_same(&s_range(1, 4)).unwrap();
        assert_eq!(members(&u, -3, 8), vec![0, 1, 2, 3]);
    }

    #[test]
    fn keyed_union_keeps_both_spaces() {
        let t = IntSet::universe(Some("T"), &["i", "j"]);
        let u = union(&s_range(0, 2), &t).unwrap();
        assert_eq!(u.spaces(), vec!["S", "T"]);
        let e = UnionSet::new().union(&UnionSet::from_set(t.clone())).unwrap();
        assert_eq!(e, UnionSet::from_set(t));
    }

    #[test]
    fn subtract_point_from_range() {
        let a = s_range(0, 4);
        let b = IntSet::from_constraints(Some("S"), &["k"], vec![Constraint::eq(&k(), &c(2))]).unwrap();
        assert_eq!(members(&a.subtract(&b).unwrap(), -3, 8), vec![0, 1, 3]);
        assert_eq!(a.subtract(&IntSet::empty(Some("S"), &["k"])).unwrap(), a);
        assert!(a.subtract(&a).unwrap().is_empty(&SolveOptions::default()).is_empty());
    }

    #[test]
    fn parametric_contradiction_is_empty() {
        let s = IntSet::from_constraints(
            Some("S"),
            &["k"],
            vec![Constraint::ge(&k(), &c(0)), Constraint::lt(&k(), &n()), Constraint::ge(&k(), &n())],
        )
        .unwrap();
        assert_eq!(s.is_empty(&SolveOptions::default()), EmptinessVerdict::Empty);
    }

    #[test]
    fn parity_is_empty() {
        let s = IntSet::from_constraints(
            Some("S"),
            &["k"],
            vec![
                Constraint::eq(&k().scale(2), &c(1)),
                Constraint::ge(&k(), &c(0)),
                Constraint::le(&k(), &c(10)),
            ],
        );
        // simplification already discards the disjunct
        assert_eq!(s.unwrap().is_empty(&SolveOptions::default()), EmptinessVerdict::Empty);
    }

    #[test]
    fn project_unit_equality() {
        let i = AffineExpr::dim("i");
        let j = AffineExpr::dim("j");
        let s = IntSet::from_constraints(
            None,
            &["i", "j"],
            vec![Constraint::eq(&i, &j), Constraint::ge(&i, &c(0)), Constraint::lt(&i, &c(4))],
        )
        .unwrap();
        let p = s.project_out(&["i"]).unwrap();
        assert_eq!(p.dims(), &["j".to_string()]);
        assert!(p.disjuncts()[0].exists.is_empty());
        assert_eq!(members(&p, -5, 9), vec![0, 1, 2, 3]);
        let all = s.project_out(&["i", "j"]).unwrap();
        assert_eq!(all.arity(), 0);
        assert!(all.contains(&[], &BTreeMap::new()).unwrap());
    }

    #[test]
    fn project_keeps_existential_for_strides() {
        // { [x] : exists y : x = 2y, 0 <= y <= 3 }
        let x = AffineExpr::dim("x");
        let y = AffineExpr::dim("y");
        let s = IntSet::from_constraints(
            None,
            &["x", "y"],
            vec![Constraint::eq(&x, &y.scale(2)), Constraint::ge(&y, &c(0)), Constraint::le(&y, &c(3))],
        )
        .unwrap();
        let p = s.project_out(&["y"]).unwrap();
        assert_eq!(members(&p, -4, 10), vec![0, 2, 4, 6]);
    }

    #[test]
    fn witness_is_valid() {
        let s = IntSet::from_constraints(
            Some("S"),
            &["k"],
            vec![Constraint::ge(&k(), &c(3)), Constraint::lt(&k(), &n())],
        )
        .unwrap();
        match s.is_empty(&SolveOptions::default()) {
            EmptinessVerdict::NonEmpty(w) => {
                assert!(s.contains(&[w.dim("k").unwrap()], &w.param_map()).unwrap());
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn param_bounds_restrict_the_decision() {
        let s = IntSet::from_constraints(
            Some("S"),
            &["k"],
            vec![Constraint::ge(&k(), &c(3)), Constraint::lt(&k(), &n())],
        )
        .unwrap();
        let opts = SolveOptions::default().with_param("n", 2);
        assert_eq!(s.is_empty(&opts), EmptinessVerdict::Empty);
    }

    #[test]
    fn one_sided_sets_never_claim_empty() {
        // one-sided bounds far from the origin
        let x = AffineExpr::dim("x");
        let y = AffineExpr::dim("y");
        let s = IntSet::from_constraints(
            None,
            &["x", "y"],
            vec![Constraint::eq(&x.scale(3), &y.scale(5).plus_const(1)), Constraint::ge(&y, &c(1000))],
        )
        .unwrap();
        let v = s.is_empty(&SolveOptions::default());
        assert!(
            matches!(v, EmptinessVerdict::Inconclusive { .. } | EmptinessVerdict::NonEmpty(_)),
            "{v:?}"
        );
    }
}

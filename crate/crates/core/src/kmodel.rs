//! Kernel memory model: statements with iteration domains and accesses, the
//! launch grid, and a barrier-phased schedule.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::iset::rel::lex_lt_conjs;
use crate::iset::{AffineExpr, Conj, Constraint, IntRel, IntSet, IsetError, UnionRel, UnionSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("undeclared parameter '{0}'")]
    UndeclaredParameter(String),
    #[error("arity mismatch in {what}: expected {expected}, found {found}")]
    ArityMismatch { what: String, expected: usize, found: usize },
    #[error("unknown array '{0}'")]
    UnknownArray(String),
    #[error("duplicate name '{0}'")]
    Duplicate(String),
    #[error("statement '{0}' has no schedule entry")]
    MissingSchedule(String),
    #[error("schedule entry for unknown statement '{0}'")]
    UnknownStatement(String),
    #[error("phase of '{0}' depends on thread coordinates or thread-private values")]
    ThreadDependentPhase(String),
    #[error("statement '{label}' must start with the grid dimensions {expected:?}")]
    MissingGridDims { label: String, expected: Vec<String> },
    #[error("shared array '{0}' needs constant extents")]
    SharedExtent(String),
    #[error("data source array '{0}' is written by the kernel")]
    WrittenDataSource(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Set(#[from] IsetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MemSpace {
    Global,
    Shared,
    Local,
}

impl MemSpace {
    pub fn keyword(self) -> &'static str {
        match self {
            MemSpace::Global => "global",
            MemSpace::Shared => "shared",
            MemSpace::Local => "local",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "global" => MemSpace::Global,
            "shared" => MemSpace::Shared,
            "local" => MemSpace::Local,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ElemKind {
    I1,
    I8,
    I16,
    I32,
    I64,
    F16,
    F32,
    F64,
}

impl ElemKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ElemKind::I1 => "i1",
            ElemKind::I8 => "i8",
            ElemKind::I16 => "i16",
            ElemKind::I32 => "i32",
            ElemKind::I64 => "i64",
            ElemKind::F16 => "f16",
            ElemKind::F32 => "f32",
            ElemKind::F64 => "f64",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "i1" => ElemKind::I1,
            "i8" => ElemKind::I8,
            "i16" => ElemKind::I16,
            "i32" => ElemKind::I32,
            "i64" => ElemKind::I64,
            "f16" => ElemKind::F16,
            "f32" => ElemKind::F32,
            "f64" => ElemKind::F64,
            _ => return None,
        })
    }

    pub fn is_float(self) -> bool {
        matches!(self, ElemKind::F16 | ElemKind::F32 | ElemKind::F64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayRef {
    pub name: String,
    pub space: MemSpace,
    pub elem: ElemKind,
    /// Extent per dimension, `None` where unknown (plain pointers).
    pub extents: Vec<Option<AffineExpr>>,
    /// Inclusive range of stored values, when declared.
    pub values: Option<(AffineExpr, AffineExpr)>,
}

impl ArrayRef {
    pub fn arity(&self) -> usize {
        self.extents.len()
    }
}

/// One coordinate of an access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexExpr {
    Affine(AffineExpr),
    /// A value loaded from a read-only input array at an affine index.
    Data { array: String, index: Vec<AffineExpr> },
    /// Anything else: the coordinate may be any in-bounds value.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub array: String,
    pub index: Vec<IndexExpr>,
}

impl Access {
    pub fn affine(array: &str, index: Vec<AffineExpr>) -> Self {
        Access {
            array: array.to_string(),
            index: index.into_iter().map(IndexExpr::Affine).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum AccessKind {
    Read,
    Write,
}

/// A code section executed once per point of its domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub label: String,
    pub dims: Vec<String>,
    pub domain: IntSet,
    pub reads: Vec<Access>,
    pub writes: Vec<Access>,
}

impl Statement {
    /// Reads first, then writes, each in declaration order.
    pub fn accesses(&self) -> impl Iterator<Item = (AccessKind, &Access)> {
        self.reads
            .iter()
            .map(|a| (AccessKind::Read, a))
            .chain(self.writes.iter().map(|a| (AccessKind::Write, a)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn suffix(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridBinding {
    pub dim: String,
    pub axis: Axis,
    pub extent: AffineExpr,
}

/// Block coordinates (`bid_*`) and thread coordinates within a block (`tid_*`).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GridConfig {
    pub blocks: Vec<GridBinding>,
    pub threads: Vec<GridBinding>,
}

impl GridConfig {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty() && self.threads.is_empty()
    }

    /// Block dims, then thread dims.
    pub fn dims(&self) -> Vec<String> {
        self.blocks
            .iter()
            .chain(self.threads.iter())
            .map(|b| b.dim.clone())
            .collect()
    }

    pub fn block_dims(&self) -> Vec<String> {
        self.blocks.iter().map(|b| b.dim.clone()).collect()
    }

    pub fn thread_dims(&self) -> Vec<String> {
        self.threads.iter().map(|b| b.dim.clone()).collect()
    }

    /// `0 <= d < extent` for every grid dim.
    pub fn bounds(&self) -> Vec<Constraint> {
        self.blocks
            .iter()
            .chain(self.threads.iter())
            .flat_map(|b| {
                let d = AffineExpr::dim(&b.dim);
                [Constraint::ge(&d, &AffineExpr::zero()), Constraint::lt(&d, &b.extent)]
            })
            .collect()
    }
}

/// How widely a data-dependent parameter is shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ParamScope {
    /// Same value everywhere.
    Kernel,
    /// Same value for every thread of a block.
    Block,
    /// Private to a thread.
    Thread,
}

/// Where a data-dependent parameter comes from: `array[index]`, with the
/// index over grid dims and parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSource {
    pub array: String,
    pub index: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub lower: Option<i64>,
    pub upper: Option<i64>,
    pub source: Option<DataSource>,
    pub scope: ParamScope,
}

impl ParamDecl {
    pub fn plain(name: &str) -> Self {
        ParamDecl {
            name: name.to_string(),
            lower: None,
            upper: None,
            source: None,
            scope: ParamScope::Kernel,
        }
    }
}

/// Per statement, a time vector over its dims; component 0 is the phase.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhasedSchedule {
    pub times: BTreeMap<String, Vec<AffineExpr>>,
}

impl PhasedSchedule {
    pub fn arity(&self) -> usize {
        self.times.values().map(Vec::len).max().unwrap_or(0)
    }

    pub fn phase(&self, label: &str) -> Option<&AffineExpr> {
        self.times.get(label).and_then(|t| t.first())
    }

    /// Pad every time vector with zeros to the common arity (at least 1).
    pub fn pad(&mut self) {
        let n = self.arity().max(1);
        for t in self.times.values_mut() {
            while t.len() < n {
                t.push(AffineExpr::zero());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct KernelModel {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub context: Vec<Constraint>,
    pub arrays: Vec<ArrayRef>,
    pub statements: Vec<Statement>,
    pub grid: GridConfig,
    pub schedule: PhasedSchedule,
    /// Over-approximations made while building the model.
    pub notes: Vec<String>,
}

/// A fresh name based on `base` that is not in `taken`.
pub(crate) fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    let mut i = 0;
    loop {
        let n = format!("{base}{i}");
        if !taken.contains(&n) {
            return n;
        }
        i += 1;
    }
}

/// Name of the second instance's copy of `n` in pair relations.
pub fn primed(n: &str) -> String {
    format!("{n}'")
}

impl KernelModel {
    pub fn array(&self, name: &str) -> Option<&ArrayRef> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn statement(&self, label: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.label == label)
    }

    pub fn param(&self, name: &str) -> Option<&ParamDecl> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn scope_of(&self, param: &str) -> ParamScope {
        self.param(param).map(|p| p.scope).unwrap_or(ParamScope::Kernel)
    }

    /// Arrays written by some statement.
    pub fn written_arrays(&self) -> BTreeSet<String> {
        self.statements
            .iter()
            .flat_map(|s| s.writes.iter().map(|a| a.array.clone()))
            .collect()
    }

    /// Check the invariants, derive parameter scopes and pad the schedule.
    pub fn validated(mut self) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !seen.insert(p.name.clone()) {
                return Err(ModelError::Duplicate(p.name.clone()));
            }
        }
        let declared: BTreeSet<String> = self.param_names().into_iter().collect();
        let check_params = |e: &AffineExpr| -> Result<(), ModelError> {
            for p in e.param_coeffs().keys() {
                if !declared.contains(p) {
                    return Err(ModelError::UndeclaredParameter(p.clone()));
                }
            }
            Ok(())
        };
        let mut names = BTreeSet::new();
        for a in &self.arrays {
            if !names.insert(a.name.clone()) {
                return Err(ModelError::Duplicate(a.name.clone()));
            }
            if a.extents.is_empty() {
                return Err(ModelError::ArityMismatch {
                    what: format!("array {}", a.name),
                    expected: 1,
                    found: 0,
                });
            }
            for e in a.extents.iter().flatten() {
                check_params(e)?;
                if !e.coeffs().is_empty() {
                    return Err(ModelError::Invalid(format!("extent of {} uses a dimension", a.name)));
                }
            }
            if a.space == MemSpace::Shared && a.extents.iter().any(|e| !matches!(e, Some(e) if e.is_constant())) {
                return Err(ModelError::SharedExtent(a.name.clone()));
            }
            if let Some((lo, hi)) = &a.values {
                check_params(lo)?;
                check_params(hi)?;
            }
        }
        for c in &self.context {
            check_params(&c.expr)?;
            if !c.expr.coeffs().is_empty() {
                return Err(ModelError::Invalid("context constraints may only use parameters".into()));
            }
        }
        let grid_dims = self.grid.dims();
        let block_dims = self.grid.block_dims();
        let thread_dims = self.grid.thread_dims();
        for b in self.grid.blocks.iter().chain(self.grid.threads.iter()) {
            check_params(&b.extent)?;
            if !b.extent.coeffs().is_empty() {
                return Err(ModelError::Invalid(format!("extent of {} uses a dimension", b.dim)));
            }
            if b.extent.is_constant() && b.extent.constant_term() < 1 {
                return Err(ModelError::Invalid(format!("extent of {} must be at least 1", b.dim)));
            }
        }
        let written = self.written_arrays();
        // data-dependent parameters: scope follows the source index
        for p in self.params.iter_mut() {
            let Some(src) = &p.source else { continue };
            let arr = self
                .arrays
                .iter()
                .find(|a| a.name == src.array)
                .ok_or_else(|| ModelError::UnknownArray(src.array.clone()))?;
            if arr.arity() != src.index.len() {
                return Err(ModelError::ArityMismatch {
                    what: format!("source of {}", p.name),
                    expected: arr.arity(),
                    found: src.index.len(),
                });
            }
            if written.contains(&src.array) {
                return Err(ModelError::WrittenDataSource(src.array.clone()));
            }
            let mut scope = ParamScope::Kernel;
            for e in &src.index {
                check_params(e)?;
                for d in e.coeffs().keys() {
                    if thread_dims.contains(d) {
                        scope = scope.max(ParamScope::Thread);
                    } else if block_dims.contains(d) {
                        scope = scope.max(ParamScope::Block);
                    } else {
                        return Err(ModelError::Invalid(format!(
                            "source index of {} may only use grid dimensions, found '{d}'",
                            p.name
                        )));
                    }
                }
            }
            p.scope = scope;
        }
        let mut labels = BTreeSet::new();
        for s in &self.statements {
            if !labels.insert(s.label.clone()) {
                return Err(ModelError::Duplicate(s.label.clone()));
            }
            if s.dims.len() < grid_dims.len() || s.dims[..grid_dims.len()] != grid_dims[..] {
                return Err(ModelError::MissingGridDims {
                    label: s.label.clone(),
                    expected: grid_dims.clone(),
                });
            }
            if s.domain.dims() != &s.dims[..] || s.domain.space() != Some(s.label.as_str()) {
                return Err(ModelError::Invalid(format!("domain of {} does not match its tuple", s.label)));
            }
            for p in s.domain.params() {
                if !declared.contains(p) {
                    return Err(ModelError::UndeclaredParameter(p.clone()));
                }
            }
            for (_, acc) in s.accesses() {
                let arr = self
                    .array(&acc.array)
                    .ok_or_else(|| ModelError::UnknownArray(acc.array.clone()))?;
                if arr.arity() != acc.index.len() {
                    return Err(ModelError::ArityMismatch {
                        what: format!("{} access in {}", acc.array, s.label),
                        expected: arr.arity(),
                        found: acc.index.len(),
                    });
                }
                for ix in &acc.index {
                    let exprs: Vec<&AffineExpr> = match ix {
                        IndexExpr::Affine(e) => vec![e],
                        IndexExpr::Data { array, index } => {
                            let src = self.array(array).ok_or_else(|| ModelError::UnknownArray(array.clone()))?;
                            if src.arity() != index.len() {
                                return Err(ModelError::ArityMismatch {
                                    what: format!("lookup into {array}"),
                                    expected: src.arity(),
                                    found: index.len(),
                                });
                            }
                            if written.contains(array) {
                                return Err(ModelError::WrittenDataSource(array.clone()));
                            }
                            index.iter().collect()
                        }
                        IndexExpr::Unknown => vec![],
                    };
                    for e in exprs {
                        check_params(e)?;
                        for d in e.coeffs().keys() {
                            if !s.dims.contains(d) {
                                return Err(ModelError::Set(IsetError::UnknownName(d.clone())));
                            }
                        }
                    }
                }
            }
        }
        for l in self.schedule.times.keys() {
            if !labels.contains(l) {
                return Err(ModelError::UnknownStatement(l.clone()));
            }
        }
        for s in &self.statements {
            let t = self
                .schedule
                .times
                .get(&s.label)
                .ok_or_else(|| ModelError::MissingSchedule(s.label.clone()))?;
            for e in t {
                check_params(e)?;
                for d in e.coeffs().keys() {
                    if !s.dims.contains(d) {
                        return Err(ModelError::Set(IsetError::UnknownName(d.clone())));
                    }
                }
            }
            if let Some(ph) = t.first() {
                let thread_dep = ph.coeffs().keys().any(|d| thread_dims.contains(d))
                    || ph
                        .param_coeffs()
                        .keys()
                        .any(|p| self.params.iter().any(|q| &q.name == p && q.scope == ParamScope::Thread));
                if thread_dep {
                    return Err(ModelError::ThreadDependentPhase(s.label.clone()));
                }
            }
        }
        self.schedule.pad();
        Ok(self)
    }

    /// Parameter constraints: context, declared bounds and value ranges of
    /// data-dependent parameters.
    pub fn param_constraints(&self) -> Vec<Constraint> {
        let mut out = self.context.clone();
        for p in &self.params {
            let v = AffineExpr::param(&p.name);
            if let Some(lo) = p.lower {
                out.push(Constraint::ge(&v, &AffineExpr::constant(lo)));
            }
            if let Some(hi) = p.upper {
                out.push(Constraint::le(&v, &AffineExpr::constant(hi)));
            }
            if let Some(src) = &p.source {
                if let Some((lo, hi)) = self.array(&src.array).and_then(|a| a.values.clone()) {
                    out.push(Constraint::ge(&v, &lo));
                    out.push(Constraint::le(&v, &hi));
                }
            }
        }
        out
    }

    /// Statement domain with grid bounds and parameter constraints.
    pub fn full_domain(&self, s: &Statement) -> Result<IntSet, ModelError> {
        let mut extra = self.grid.bounds();
        extra.extend(self.param_constraints());
        Ok(s.domain.constrain(&extra)?.with_params(&self.param_names()))
    }

    /// `Label[dims] -> array[cells]`. Coordinates with known extents are
    /// assumed in bounds.
    pub fn access_relation(&self, s: &Statement, acc: &Access) -> Result<IntRel, ModelError> {
        let arr = self
            .array(&acc.array)
            .ok_or_else(|| ModelError::UnknownArray(acc.array.clone()))?;
        let mut taken: BTreeSet<String> = s.dims.iter().cloned().collect();
        taken.extend(self.param_names());
        let mut outs = Vec::new();
        let mut cs = Vec::new();
        for (k, ix) in acc.index.iter().enumerate() {
            let o = fresh_name("o", &taken);
            taken.insert(o.clone());
            let ov = AffineExpr::dim(&o);
            match ix {
                IndexExpr::Affine(e) => cs.push(Constraint::eq(&ov, e)),
                IndexExpr::Data { array, .. } => {
                    if let Some((lo, hi)) = self.array(array).and_then(|a| a.values.clone()) {
                        cs.push(Constraint::ge(&ov, &lo));
                        cs.push(Constraint::le(&ov, &hi));
                    }
                }
                IndexExpr::Unknown => {}
            }
            if let Some(Some(ext)) = arr.extents.get(k) {
                cs.push(Constraint::ge(&ov, &AffineExpr::zero()));
                cs.push(Constraint::lt(&ov, ext));
            }
            outs.push(o);
        }
        let ins: Vec<&str> = s.dims.iter().map(String::as_str).collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        Ok(IntRel::from_constraints(Some(&s.label), &ins, Some(&arr.name), &outs_ref, cs)?)
    }

    /// Union of all statement domains, keyed by label.
    pub fn build_domain(&self) -> Result<UnionSet, ModelError> {
        let mut out = UnionSet::new();
        for s in &self.statements {
            out.insert(self.full_domain(s)?)?;
        }
        Ok(out)
    }

    /// Access relations of one kind, restricted to the domain.
    pub fn build_access(&self, kind: AccessKind) -> Result<UnionRel, ModelError> {
        let mut out = UnionRel::new();
        for s in &self.statements {
            let dom = self.full_domain(s)?;
            for (k, acc) in s.accesses() {
                if k == kind {
                    let r = self.access_relation(s, acc)?.intersect_domain(&dom)?;
                    out.insert(r)?;
                }
            }
        }
        Ok(out)
    }

    /// Instance pairs `(a, b)` where `a` happens before `b`: same thread and
    /// earlier in the schedule, or same block and an earlier phase.
    pub fn happens_before(&self) -> Result<UnionRel, ModelError> {
        let mut out = UnionRel::new();
        let block = self.grid.block_dims();
        let all = self.grid.dims();
        for a in &self.statements {
            for b in &self.statements {
                out.insert(self.happens_before_pair(a, b, &block, &all)?)?;
            }
        }
        Ok(out)
    }

    fn happens_before_pair(
        &self,
        a: &Statement,
        b: &Statement,
        block: &[String],
        all: &[String],
    ) -> Result<IntRel, ModelError> {
        let pmap: BTreeMap<String, String> = b.dims.iter().map(|d| (d.clone(), primed(d))).collect();
        let ta = &self.schedule.times[&a.label];
        let tb: Vec<AffineExpr> = self.schedule.times[&b.label]
            .iter()
            .map(|e| e.rename_dims(&pmap))
            .collect();
        let eq_dims = |names: &[String]| -> Vec<Constraint> {
            names
                .iter()
                .map(|d| Constraint::eq(&AffineExpr::dim(d), &AffineExpr::dim(&primed(d))))
                .collect()
        };
        let mut disjuncts = Vec::new();
        for mut c in lex_lt_conjs(ta, &tb)? {
            c.constraints.extend(eq_dims(all));
            disjuncts.push(c);
        }
        if !self.grid.threads.is_empty() {
            let mut c = Conj::new(eq_dims(block));
            c.constraints.push(Constraint::lt(&ta[0], &tb[0]));
            disjuncts.push(c);
        }
        let dom_a = self.full_domain(a)?;
        let ins: Vec<&str> = a.dims.iter().map(String::as_str).collect();
        let outs: Vec<String> = b.dims.iter().map(|d| primed(d)).collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        let dom_b = self.full_domain(b)?.rename(&outs_ref)?;
        let rel = IntRel::from_disjuncts(Some(&a.label), &ins, Some(&b.label), &outs_ref, disjuncts)?;
        let rel = rel.intersect_domain(&dom_a)?;
        let inv = rel.inverse().intersect_domain(&dom_b)?;
        Ok(inv.inverse())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iset::SolveOptions;

    fn e(s: &str) -> AffineExpr {
        crate::iset::text::parse_affine(s, &["i".into(), "j".into(), "k".into()], None).unwrap()
    }

    fn small_model() -> KernelModel {
        let dom = |l: &str, dims: &[&str], f: &str| {
            let dims_s: Vec<String> = dims.iter().map(|s| s.to_string()).collect();
            let (conjs, _) = crate::iset::text::parse_formula(f, &dims_s, None).unwrap();
            IntSet::from_disjuncts(Some(l), dims, conjs).unwrap()
        };
        KernelModel {
            name: "t".into(),
            params: vec![ParamDecl::plain("n")],
            arrays: vec![ArrayRef {
                name: "C".into(),
                space: MemSpace::Global,
                elem: ElemKind::F32,
                extents: vec![Some(AffineExpr::param("n"))],
                values: None,
            }],
            statements: vec![
                Statement {
                    label: "S".into(),
                    dims: vec!["k".into()],
                    domain: dom("S", &["k"], "0 <= k < n"),
                    reads: vec![],
                    writes: vec![Access::affine("C", vec![e("k")])],
                },
                Statement {
                    label: "T".into(),
                    dims: vec!["i".into()],
                    domain: dom("T", &["i"], "0 <= i < n"),
                    reads: vec![Access::affine("C", vec![e("i")])],
                    writes: vec![],
                },
            ],
            schedule: PhasedSchedule {
                times: BTreeMap::from([
                    ("S".to_string(), vec![AffineExpr::zero(), e("k")]),
                    ("T".to_string(), vec![AffineExpr::constant(1), e("i")]),
                ]),
            },
            ..Default::default()
        }
        .validated()
        .unwrap()
    }

    #[test]
    fn undeclared_parameters_are_rejected() {
        let mut m = small_model();
        m.params.clear();
        assert!(matches!(m.validated(), Err(ModelError::UndeclaredParameter(_))));
    }

    #[test]
    fn build_access_restricts_to_domain() {
        let m = small_model();
        let w = m.build_access(AccessKind::Write).unwrap();
        let r = w.get("S", "C").unwrap();
        let p = BTreeMap::from([("n".to_string(), 3)]);
        assert!(r.contains(&[2], &[2], &p).unwrap());
        assert!(!r.contains(&[3], &[3], &p).unwrap());
        assert!(m.build_access(AccessKind::Read).unwrap().get("S", "C").is_none());
    }

    #[test]
    fn schedule_orders_sequential_statements() {
        let m = small_model();
        let hb = m.happens_before().unwrap();
        let st = hb.get("S", "T").unwrap();
        let p = BTreeMap::from([("n".to_string(), 3)]);
        assert!(st.contains(&[2], &[0], &p).unwrap());
        assert!(hb.get("T", "S").unwrap().is_empty(&SolveOptions::default()).is_empty());
        let ss = hb.get("S", "S").unwrap();
        assert!(ss.contains(&[0], &[1], &p).unwrap());
        assert!(!ss.contains(&[1], &[1], &p).unwrap());
    }

    #[test]
    fn empty_model_builds_empty_collections() {
        let m = KernelModel::default().validated().unwrap();
        assert!(m.build_domain().unwrap().is_empty());
        assert!(m.build_access(AccessKind::Read).unwrap().is_empty());
    }
}

//! Recover a [`KernelModel`] from a verified function.

use std::collections::{BTreeMap, BTreeSet};

use super::analysis::{loop_infos, negate, reg_atom, substitute, used_axes, AtomKind, Dnf, LoopInfo, Poly, Propagation, Val};
use super::ast::*;
use super::cfg::{Dominators, LoopForest};
use super::MiniIrError;
use crate::iset::{AffineExpr, Conj, Constraint, IntSet};
use crate::kmodel::{
    Access, AccessKind, ArrayRef, Axis, DataSource, GridBinding, GridConfig, IndexExpr, KernelModel, MemSpace,
    ParamDecl, ParamScope, PhasedSchedule, Statement,
};

/// Grid shape `(blocks per axis, threads per axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub blocks: [i64; 3],
    pub threads: [i64; 3],
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    /// Rename sections: block-derived label → statement label.
    pub section_hints: BTreeMap<String, String>,
    /// Fix the grid instead of using `griddim_*` / `blockdim_*` parameters.
    pub grid: Option<GridShape>,
}

/// How a loop shows up in statement dims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopDim {
    pub header: String,
    pub dim: String,
    pub phi: String,
    /// The dim is the value of `phi` (unit steps); otherwise it counts iterations.
    pub by_value: bool,
}

/// Where an access instruction landed in the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub statement: String,
    pub kind: AccessKind,
    /// Position in the statement's reads or writes.
    pub slot: usize,
    /// Enclosing loops, outermost first (indices into [`Layout::loops`]).
    pub loops: Vec<usize>,
}

/// Correspondence between instructions and model statements.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layout {
    /// Keyed by `(block label, instruction position)`.
    pub sites: BTreeMap<(String, usize), Site>,
    pub loops: Vec<LoopDim>,
}

impl Layout {
    /// Model point of an access executed by a thread, from its grid ids
    /// (`bid_x`, `tid_x`, ...) and register file.
    pub fn point(
        &self,
        model: &KernelModel,
        site: &Site,
        grid: &BTreeMap<String, i64>,
        iters: &[i64],
        regs: &BTreeMap<String, i64>,
    ) -> Option<Vec<i64>> {
        let mut out: Vec<i64> = model.grid.dims().iter().map(|d| grid.get(d).copied()).collect::<Option<_>>()?;
        for (k, &l) in site.loops.iter().enumerate() {
            let ld = &self.loops[l];
            out.push(if ld.by_value { *regs.get(&ld.phi)? } else { *iters.get(k)? });
        }
        Some(out)
    }
}

#[derive(Debug, Clone)]
pub struct Extraction {
    pub model: KernelModel,
    pub layout: Layout,
}

pub(crate) fn sanitize(s: &str) -> String {
    let mut out: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, 'r');
    }
    out
}

fn unique(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut n = base.to_string();
    while taken.contains(&n) {
        n.push('_');
    }
    taken.insert(n.clone());
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Block(usize),
    Loop(usize),
}

/// Phase bookkeeping for one region (top level or a loop body).
#[derive(Debug, Clone, Default)]
struct RegionInfo {
    /// Topological position of each node.
    pos: BTreeMap<Node, usize>,
    /// Phase offset at node entry, relative to the region entry.
    entry: BTreeMap<Node, AffineExpr>,
}

struct Ctx<'a> {
    f: &'a Function,
    forest: &'a LoopForest,
    prop: &'a Propagation,
    infos: Vec<LoopInfo>,
    loop_dims: Vec<LoopDim>,
    /// Model expression of each loop's iteration count.
    iter_expr: Vec<AffineExpr>,
    written: BTreeSet<String>,
    names: BTreeSet<String>,
    params: Vec<ParamDecl>,
    context: Vec<Constraint>,
    /// Load register → model parameter.
    load_params: BTreeMap<String, String>,
    arrays: BTreeMap<String, ArrayRef>,
    notes: Vec<String>,
}

enum Untranslatable {
    Reason(String),
}

impl Ctx<'_> {
    fn block_label(&self, b: usize) -> &str {
        &self.f.blocks[b].label
    }

    /// Model form of an atom expression, for code inside `scope` loops.
    fn translate(&mut self, e: &AffineExpr, scope: &[usize], over: &BTreeMap<String, AffineExpr>) -> Result<AffineExpr, Untranslatable> {
        let mut err = None;
        let atoms: Vec<String> = e.param_coeffs().keys().cloned().collect();
        let mut map: BTreeMap<String, AffineExpr> = BTreeMap::new();
        for a in atoms {
            if let Some(x) = over.get(&a) {
                map.insert(a, x.clone());
                continue;
            }
            match self.atom(&a, scope) {
                Ok(x) => {
                    map.insert(a, x);
                }
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = err {
            return Err(e);
        }
        Ok(substitute(e, &mut |p| map.get(p).cloned()))
    }

    fn translate_val(&mut self, v: &Val, scope: &[usize]) -> Result<AffineExpr, Untranslatable> {
        match &v.poly {
            Ok(p) if p.quad.is_empty() => self.translate(&p.lin, scope, &BTreeMap::new()),
            Ok(p) => {
                let (x, y) = p.quad.keys().next().unwrap();
                Err(Untranslatable::Reason(format!("product of {x} and {y}")))
            }
            Err(e) => Err(Untranslatable::Reason(e.clone())),
        }
    }

    fn atom(&mut self, a: &str, scope: &[usize]) -> Result<AffineExpr, Untranslatable> {
        let kind = self
            .prop
            .atoms
            .get(a)
            .cloned()
            .ok_or_else(|| Untranslatable::Reason(format!("unknown value {a}")))?;
        match kind {
            AtomKind::Param => Ok(AffineExpr::param(&sanitize(&a[1..]))),
            AtomKind::Intrinsic(i) => Ok(match i {
                Intrinsic::Tid(_) | Intrinsic::Bid(_) => AffineExpr::dim(&super::analysis::model_name(i)),
                _ => AffineExpr::param(&super::analysis::model_name(i)),
            }),
            AtomKind::Induction { lp, step } => {
                if !scope.contains(&lp) {
                    return Err(Untranslatable::Reason(format!(
                        "{a} is used outside its loop at '{}'",
                        self.block_label(self.forest.loops[lp].header)
                    )));
                }
                let ld = self.loop_dims[lp].clone();
                if ld.phi == a[1..] {
                    return Ok(if ld.by_value {
                        AffineExpr::dim(&ld.dim)
                    } else {
                        let init = self.init_expr(lp)?;
                        init.add(&AffineExpr::dim(&ld.dim).scale(self.infos[lp].induction.step))
                    });
                }
                // a secondary induction: init + step * iterations
                let step = step.ok_or_else(|| Untranslatable::Reason(format!("{a} does not advance by a constant")))?;
                let init_op = self.phi_init(lp, &a[1..]);
                let outer: Vec<usize> = scope.iter().copied().take_while(|&l| l != lp).collect();
                let init = match init_op {
                    Some(v) => self.translate_val(&v, &outer)?,
                    None => return Err(Untranslatable::Reason(format!("{a} has no initial value"))),
                };
                Ok(init.add(&self.iter_expr[lp].scale(step)))
            }
            AtomKind::Carried { .. } => Err(Untranslatable::Reason(format!("loop-carried value {a}"))),
            AtomKind::Load { array, index, .. } => self.load_param(a, &array, &index),
        }
    }

    fn phi_init(&self, lp: usize, phi: &str) -> Option<Val> {
        let l = &self.forest.loops[lp];
        self.f.blocks[l.header].insts.iter().find_map(|i| match (&i.result, &i.kind) {
            (Some(r), InstKind::Phi { incoming }) if r == phi => incoming
                .iter()
                .find(|(_, lab)| !l.latches.contains(&self.f.index[lab]))
                .map(|(o, _)| match o {
                    Operand::Int(v) => Val {
                        poly: Ok(Poly {
                            lin: AffineExpr::constant(*v),
                            quad: BTreeMap::new(),
                        }),
                        ids: BTreeSet::new(),
                    },
                    Operand::Reg(r) => self.prop.vals.get(r).cloned().unwrap_or(Val {
                        poly: Err("undefined".into()),
                        ids: BTreeSet::new(),
                    }),
                }),
            _ => None,
        })
    }

    fn init_expr(&mut self, lp: usize) -> Result<AffineExpr, Untranslatable> {
        let phi = self.infos[lp].induction.phi.clone();
        let outer: Vec<usize> = self.forest.enclosing(self.forest.loops[lp].header).into_iter().filter(|&l| l != lp).collect();
        let v = self
            .phi_init(lp, &phi)
            .ok_or_else(|| Untranslatable::Reason(format!("%{phi} has no initial value")))?;
        self.translate_val(&v, &outer)
    }

    /// A loaded value that is the same every time the thread reaches the
    /// load becomes a parameter.
    fn load_param(&mut self, a: &str, array: &str, index: &[Val]) -> Result<AffineExpr, Untranslatable> {
        let reg = &a[1..];
        if let Some(p) = self.load_params.get(reg) {
            return Ok(AffineExpr::param(p));
        }
        if self.written.contains(array) {
            return Err(Untranslatable::Reason(format!("{a} is loaded from {array}, which the kernel writes")));
        }
        let loop_dependent = |v: &Val| -> bool {
            match &v.poly {
                Ok(p) => self.depends_on_loops(p),
                Err(_) => true,
            }
        };
        if index.iter().any(loop_dependent) {
            return Err(Untranslatable::Reason(format!("{a} is loaded at an address that changes inside a loop")));
        }
        let mut idx = Vec::new();
        let mut affine = true;
        for v in index {
            match self.translate_val(v, &[]) {
                Ok(e) => idx.push(e),
                Err(_) => {
                    affine = false;
                    break;
                }
            }
        }
        let name = unique(&sanitize(reg), &mut self.names);
        let arr = self.arrays.get(array).cloned();
        if affine {
            self.params.push(ParamDecl {
                source: Some(DataSource {
                    array: self.arrays.get(array).map_or_else(|| array.to_string(), |a| a.name.clone()),
                    index: idx,
                }),
                ..ParamDecl::plain(&name)
            });
        } else {
            let scope = if self.prop.varying.contains(reg) {
                ParamScope::Thread
            } else {
                ParamScope::Block
            };
            self.params.push(ParamDecl {
                scope,
                ..ParamDecl::plain(&name)
            });
            if let Some((lo, hi)) = arr.and_then(|a| a.values) {
                let v = AffineExpr::param(&name);
                self.context.push(Constraint::ge(&v, &lo));
                self.context.push(Constraint::le(&v, &hi));
            }
            self.notes.push(format!(
                "{name} stands for a value loaded from {array} at a non-affine address"
            ));
        }
        self.load_params.insert(reg.to_string(), name.clone());
        Ok(AffineExpr::param(&name))
    }

    fn depends_on_loops(&self, p: &Poly) -> bool {
        let mut atoms: Vec<String> = p.lin.param_coeffs().keys().cloned().collect();
        for (x, y) in p.quad.keys() {
            atoms.push(x.clone());
            atoms.push(y.clone());
        }
        atoms.iter().any(|a| match self.prop.atoms.get(a) {
            Some(AtomKind::Induction { .. }) | Some(AtomKind::Carried { .. }) => true,
            Some(AtomKind::Load { index, array, .. }) => {
                self.written.contains(array)
                    || index.iter().any(|v| match &v.poly {
                        Ok(q) => self.depends_on_loops(q),
                        Err(_) => true,
                    })
            }
            _ => false,
        })
    }

    /// Translate a DNF; `None` if some constraint has no model form.
    fn translate_dnf(&mut self, d: &Dnf, scope: &[usize], over: &BTreeMap<String, AffineExpr>) -> Result<Dnf, Untranslatable> {
        let mut out = Vec::new();
        for conj in d {
            let mut c2 = Vec::new();
            for c in conj {
                let e = self.translate(&c.expr, scope, over)?;
                c2.push(Constraint { expr: e, kind: c.kind });
            }
            out.push(c2);
        }
        Ok(out)
    }

    fn coordinate(&mut self, v: &Val, scope: &[usize], site: &str) -> Result<IndexExpr, MiniIrError> {
        if let Ok(e) = self.translate_val(v, scope) {
            return Ok(IndexExpr::Affine(e));
        }
        if let Ok(p) = &v.poly {
            if let Some((x, y)) = p.quad.keys().find(|(x, y)| is_id(x) || is_id(y)) {
                return Err(MiniIrError::UnsupportedIdPattern(format!(
                    "{site}: index uses the product of {x} and {y}; fix the block size with a grid option"
                )));
            }
            // a plain lookup into a read-only array
            let atoms: Vec<(&String, &i64)> = p.lin.param_coeffs().iter().collect();
            if p.quad.is_empty() && atoms.len() == 1 && *atoms[0].1 == 1 && p.lin.constant_term() == 0 {
                if let Some(AtomKind::Load { array, index, .. }) = self.prop.atoms.get(atoms[0].0).cloned() {
                    if !self.written.contains(&array) {
                        let mut idx = Vec::new();
                        for iv in &index {
                            match self.translate_val(iv, scope) {
                                Ok(e) => idx.push(e),
                                Err(_) => break,
                            }
                        }
                        if idx.len() == index.len() {
                            return Ok(IndexExpr::Data { array, index: idx });
                        }
                    }
                }
            }
        }
        self.notes.push(format!("{site}: index is not affine; any in-bounds cell is assumed"));
        Ok(IndexExpr::Unknown)
    }
}

fn is_id(a: &str) -> bool {
    a.starts_with("tid.") || a.starts_with("bid.")
}

fn ur(e: Untranslatable) -> String {
    match e {
        Untranslatable::Reason(r) => r,
    }
}

pub fn extract(f: &Function, opts: &ExtractOptions) -> Result<Extraction, MiniIrError> {
    let dom = Dominators::compute(f);
    let pdom = Dominators::post(f);
    let forest = LoopForest::compute(f, &dom)?;
    for (_, _, inst) in f.instructions() {
        match &inst.kind {
            InstKind::Atomic { op, .. } => {
                return Err(MiniIrError::UnsupportedConstruct(format!("line {}: atomic.{op}", inst.line)))
            }
            InstKind::Call { callee, .. } => {
                return Err(MiniIrError::UnsupportedConstruct(format!("line {}: call to @{callee}", inst.line)))
            }
            _ => {}
        }
    }
    let (baxes, taxes) = used_axes(f);
    let mut consts = BTreeMap::new();
    let (mut baxes, mut taxes) = (baxes, taxes);
    if let Some(g) = &opts.grid {
        for a in Axis::ALL {
            consts.insert(format!("griddim.{}", a.suffix()), g.blocks[a.index()]);
            consts.insert(format!("blockdim.{}", a.suffix()), g.threads[a.index()]);
            if g.blocks[a.index()] > 1 {
                baxes.insert(a);
            }
            if g.threads[a.index()] > 1 {
                taxes.insert(a);
            }
        }
    }
    let prop = Propagation::compute(f, &forest, &dom, &consts);
    if let Some((line, msg)) = prop.id_misuse.first() {
        return Err(MiniIrError::UnsupportedIdPattern(format!("line {line}: {msg}")));
    }
    let infos = loop_infos(f, &forest, &prop)?;

    // names
    let mut names: BTreeSet<String> = BTreeSet::new();
    let mut params: Vec<ParamDecl> = Vec::new();
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for p in f.scalar_params() {
        let n = unique(&sanitize(&p), &mut names);
        rename.insert(p.clone(), n.clone());
        params.push(ParamDecl::plain(&n));
    }
    let mut grid = GridConfig::default();
    for (axes, is_block) in [(&baxes, true), (&taxes, false)] {
        for &a in axes.iter() {
            let (dim, extent_name) = if is_block {
                (format!("bid_{}", a.suffix()), format!("griddim_{}", a.suffix()))
            } else {
                (format!("tid_{}", a.suffix()), format!("blockdim_{}", a.suffix()))
            };
            names.insert(dim.clone());
            let extent = match &opts.grid {
                Some(g) => AffineExpr::constant(if is_block { g.blocks[a.index()] } else { g.threads[a.index()] }),
                None => {
                    names.insert(extent_name.clone());
                    params.push(ParamDecl {
                        lower: Some(1),
                        ..ParamDecl::plain(&extent_name)
                    });
                    AffineExpr::param(&extent_name)
                }
            };
            let b = GridBinding { dim, axis: a, extent };
            if is_block {
                grid.blocks.push(b);
            } else {
                grid.threads.push(b);
            }
        }
    }
    // unused grid-size intrinsics still need a parameter
    for (_, _, inst) in f.instructions() {
        if let InstKind::Intrinsic(i @ (Intrinsic::BlockDim(_) | Intrinsic::GridDim(_))) = inst.kind {
            let n = super::analysis::model_name(i);
            if !consts.contains_key(&i.name()) && !names.contains(&n) {
                names.insert(n.clone());
                params.push(ParamDecl {
                    lower: Some(1),
                    ..ParamDecl::plain(&n)
                });
            }
        }
    }
    let ren = |e: &AffineExpr| e.rename_params(&rename);
    let mut arrays: BTreeMap<String, ArrayRef> = BTreeMap::new();
    let mut array_order = Vec::new();
    for p in &f.params {
        if let ParamType::Array {
            space,
            elem,
            extents,
            values,
        } = &p.ty
        {
            let n = unique(&sanitize(&p.name), &mut names);
            array_order.push(p.name.clone());
            arrays.insert(
                p.name.clone(),
                ArrayRef {
                    name: n,
                    space: *space,
                    elem: *elem,
                    extents: extents.iter().map(|e| e.as_ref().map(ren)).collect(),
                    values: values.as_ref().map(|(lo, hi)| (ren(lo), ren(hi))),
                },
            );
        }
    }
    for s in &f.shared {
        let n = unique(&sanitize(&s.name), &mut names);
        array_order.push(s.name.clone());
        arrays.insert(
            s.name.clone(),
            ArrayRef {
                name: n,
                space: MemSpace::Shared,
                elem: s.elem,
                extents: s.extents.iter().map(|e| Some(AffineExpr::constant(*e))).collect(),
                values: None,
            },
        );
    }

    // loop dims
    let mut loop_dims = Vec::new();
    for info in &infos {
        let by_value = info.induction.step.abs() == 1;
        let base = if by_value {
            sanitize(&info.induction.phi)
        } else {
            format!("{}_it", sanitize(&info.induction.phi))
        };
        loop_dims.push(LoopDim {
            header: info.header.clone(),
            dim: unique(&base, &mut names),
            phi: info.induction.phi.clone(),
            by_value,
        });
    }
    let written: BTreeSet<String> = f.written_arrays().into_iter().collect();
    let mut cx = Ctx {
        f,
        forest: &forest,
        prop: &prop,
        infos,
        loop_dims,
        iter_expr: Vec::new(),
        written,
        names,
        params,
        context: Vec::new(),
        load_params: BTreeMap::new(),
        arrays,
        notes: Vec::new(),
    };
    // model names of scalar parameters must be the atom translation
    for (reg, n) in &rename {
        if sanitize(reg) != *n {
            return Err(MiniIrError::UnsupportedConstruct(format!("parameter %{reg} clashes with another name")));
        }
    }
    for lp in 0..cx.infos.len() {
        let ld = cx.loop_dims[lp].clone();
        let e = if ld.by_value {
            let init = cx.init_expr(lp).map_err(|e| MiniIrError::NonAffineBound {
                header: ld.header.clone(),
                reason: ur(e),
            })?;
            AffineExpr::dim(&ld.dim).sub(&init).scale(cx.infos[lp].induction.step)
        } else {
            AffineExpr::dim(&ld.dim)
        };
        cx.iter_expr.push(e);
    }

    // effective barriers
    let threads_per_block: Option<i64> = opts.grid.map(|g| g.threads.iter().product());
    let mut barriers: Vec<Vec<usize>> = vec![Vec::new(); f.blocks.len()];
    for (b, i, inst) in f.instructions() {
        match inst.kind {
            InstKind::Barrier(BarrierScope::Block) => barriers[b].push(i),
            InstKind::Barrier(BarrierScope::Warp(w)) => match threads_per_block {
                Some(t) if i64::from(w) >= t => barriers[b].push(i),
                _ => cx.notes.push(format!(
                    "line {}: warp barrier does not span the block and is ignored; races it would prevent may be reported",
                    inst.line
                )),
            },
            _ => {}
        }
    }
    // barriers under thread-dependent branches
    for (x, blk) in f.blocks.iter().enumerate() {
        if let Some(InstKind::CondBr { cond, .. }) = blk.insts.last().map(|i| &i.kind) {
            if !prop.is_varying(cond) {
                continue;
            }
            for (b, bs) in barriers.iter().enumerate() {
                if !bs.is_empty() && dom.dominates(x, b) && !pdom.dominates(b, x) {
                    return Err(MiniIrError::UnsupportedConstruct(format!(
                        "barrier in '{}' depends on a thread-dependent branch in '{}'",
                        f.blocks[b].label, blk.label
                    )));
                }
            }
        }
    }
    for (lp, l) in forest.loops.iter().enumerate() {
        if !barriers[l.header].is_empty() {
            return Err(MiniIrError::UnsupportedConstruct(format!(
                "barrier in the loop header '{}'",
                f.blocks[l.header].label
            )));
        }
        let has = l.body.iter().any(|&b| !barriers[b].is_empty());
        if has && l.parent.is_some() {
            return Err(MiniIrError::UnsupportedConstruct(format!(
                "barrier inside the nested loop at '{}'",
                f.blocks[l.header].label
            )));
        }
        if has {
            if let Some(InstKind::CondBr { cond, .. }) = f.blocks[l.header].insts.last().map(|i| &i.kind) {
                if prop.is_varying(cond) {
                    return Err(MiniIrError::UnsupportedConstruct(format!(
                        "loop at '{}' contains a barrier but its trip count differs between threads",
                        f.blocks[l.header].label
                    )));
                }
            }
        }
        let _ = lp;
    }

    // accesses per block
    let has_access = |b: usize| {
        f.blocks[b]
            .insts
            .iter()
            .any(|i| matches!(i.kind, InstKind::Load { .. } | InstKind::Store { .. }))
    };

    // regions
    let node_of = |b: usize, region: Option<usize>| -> Option<Node> {
        let chain = forest.enclosing(b);
        match region {
            None => Some(match chain.first() {
                None => Node::Block(b),
                Some(&l) => Node::Loop(l),
            }),
            Some(r) => {
                let i = chain.iter().position(|&l| l == r)?;
                Some(match chain.get(i + 1) {
                    None => Node::Block(b),
                    Some(&l) => Node::Loop(l),
                })
            }
        }
    };
    let node_key = |n: Node| match n {
        Node::Block(b) => b,
        Node::Loop(l) => forest.loops[l].header,
    };
    let mut regions: BTreeMap<Option<usize>, RegionInfo> = BTreeMap::new();
    let mut per_iter: BTreeMap<usize, i64> = BTreeMap::new();
    let mut trip_params: BTreeMap<usize, String> = BTreeMap::new();
    // inner loops first: reverse of the outer-first order
    let mut order: Vec<Option<usize>> = (0..forest.loops.len()).rev().map(Some).collect();
    order.push(None);
    for region in order {
        let members: Vec<usize> = (0..f.blocks.len()).filter(|&b| node_of(b, region).is_some()).collect();
        let mut nodes: Vec<Node> = members.iter().filter_map(|&b| node_of(b, region)).collect();
        nodes.sort_by_key(|&n| node_key(n));
        nodes.dedup();
        let mut edges: BTreeSet<(Node, Node)> = BTreeSet::new();
        for &b in &members {
            let n = node_of(b, region).unwrap();
            for &s in &f.succs[b] {
                let Some(m) = node_of(s, region) else { continue };
                if let Some(r) = region {
                    if s == forest.loops[r].header && forest.loops[r].latches.contains(&b) {
                        continue;
                    }
                }
                if n != m {
                    edges.insert((n, m));
                }
            }
        }
        // Kahn, smallest block index first
        let mut indeg: BTreeMap<Node, usize> = nodes.iter().map(|&n| (n, 0)).collect();
        for (_, m) in &edges {
            *indeg.get_mut(m).unwrap() += 1;
        }
        let mut ready: BTreeSet<(usize, Node)> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| (node_key(n), n)).collect();
        let mut topo = Vec::new();
        while let Some(&first) = ready.iter().next() {
            ready.remove(&first);
            let n = first.1;
            topo.push(n);
            for (a, m) in &edges {
                if *a == n {
                    let d = indeg.get_mut(m).unwrap();
                    *d -= 1;
                    if *d == 0 {
                        ready.insert((node_key(*m), *m));
                    }
                }
            }
        }
        let weight = |n: Node, trip: &BTreeMap<usize, String>| -> AffineExpr {
            match n {
                Node::Block(b) => AffineExpr::constant(barriers[b].len() as i64),
                Node::Loop(l) => match (per_iter.get(&l), trip.get(&l)) {
                    (Some(&k), Some(t)) if k != 0 => AffineExpr::param(t).scale(k),
                    _ => AffineExpr::zero(),
                },
            }
        };
        if region.is_none() {
            for l in forest.children(None) {
                if per_iter.get(&l).copied().unwrap_or(0) != 0 {
                    let base = format!("T_{}", sanitize(&cx.infos[l].induction.phi));
                    let n = unique(&base, &mut cx.names);
                    trip_params.insert(l, n);
                }
            }
        }
        let contains_work = |n: Node| -> bool {
            match n {
                Node::Block(b) => has_access(b) || !barriers[b].is_empty(),
                Node::Loop(l) => forest.loops[l].body.iter().any(|&b| has_access(b) || !barriers[b].is_empty()),
            }
        };
        let mut entry_sets: BTreeMap<Node, BTreeSet<AffineExpr>> = BTreeMap::new();
        let start = match region {
            None => node_of(0, None).unwrap(),
            Some(r) => Node::Block(forest.loops[r].header),
        };
        entry_sets.insert(start, BTreeSet::from([AffineExpr::zero()]));
        let mut info = RegionInfo::default();
        for (i, &n) in topo.iter().enumerate() {
            info.pos.insert(n, i);
            let set = entry_sets.get(&n).cloned().unwrap_or_default();
            if set.len() > 1 && contains_work(n) {
                return Err(MiniIrError::UnsupportedConstruct(format!(
                    "'{}' is reached after different numbers of barriers",
                    f.blocks[node_key(n)].label
                )));
            }
            let w = weight(n, &trip_params);
            for (a, m) in &edges {
                if *a == n {
                    let out = entry_sets.entry(*m).or_default();
                    for v in &set {
                        out.insert(v.add(&w));
                    }
                }
            }
            if let Some(v) = set.into_iter().next() {
                info.entry.insert(n, v);
            }
        }
        if let Some(r) = region {
            let l = &forest.loops[r];
            let latch = node_of(l.latches[0], region).unwrap();
            let end = info.entry.get(&latch).cloned().unwrap_or_default().add(&weight(latch, &trip_params));
            if !end.is_constant() {
                return Err(MiniIrError::UnsupportedConstruct(format!(
                    "barrier count of the loop at '{}' is not fixed",
                    f.blocks[l.header].label
                )));
            }
            // every path through the body must meet the same number of barriers
            let body_barriers = l.body.iter().any(|&b| !barriers[b].is_empty());
            if body_barriers {
                let latch_set = entry_sets.get(&latch).cloned().unwrap_or_default();
                if latch_set.len() > 1 {
                    return Err(MiniIrError::UnsupportedConstruct(format!(
                        "iterations of the loop at '{}' meet different numbers of barriers",
                        f.blocks[l.header].label
                    )));
                }
            }
            per_iter.insert(r, end.constant_term());
        }
        regions.insert(region, info);
    }

    // sections
    let mut statements: Vec<Statement> = Vec::new();
    let mut schedule = PhasedSchedule::default();
    let mut layout = Layout {
        sites: BTreeMap::new(),
        loops: cx.loop_dims.clone(),
    };
    let mut labels: BTreeSet<String> = BTreeSet::new();
    let grid_dims = grid.dims();
    for b in dom.reverse_postorder().iter().copied().collect::<BTreeSet<_>>() {
        let blk = &f.blocks[b];
        let chain = forest.enclosing(b);
        let mut segments: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, inst) in blk.insts.iter().enumerate() {
            if matches!(inst.kind, InstKind::Load { .. } | InstKind::Store { .. }) {
                let seg = barriers[b].iter().filter(|&&p| p < i).count();
                segments.entry(seg).or_default().push(i);
            }
        }
        if segments.is_empty() {
            continue;
        }
        let mut dims = grid_dims.clone();
        dims.extend(chain.iter().map(|&l| cx.loop_dims[l].dim.clone()));
        // domain: loop bounds, then branch conditions
        let mut dnf: Dnf = vec![vec![]];
        let and = |a: &Dnf, b: &Dnf| -> Dnf {
            let mut out = Vec::new();
            for x in a {
                for y in b {
                    out.push(x.iter().chain(y.iter()).cloned().collect());
                }
            }
            out
        };
        for (k, &l) in chain.iter().enumerate() {
            let scope = &chain[..=k];
            let info = cx.infos[l].clone();
            let bound = cx
                .translate_dnf(&vec![info.bound.clone()], scope, &BTreeMap::new())
                .map_err(|e| MiniIrError::UnsupportedConstruct(format!("bound of the loop at '{}': {}", info.header, ur(e))))?;
            let it = cx.iter_expr[l].clone();
            let mut base = vec![Constraint::ge(&it, &AffineExpr::zero())];
            base.extend(bound.into_iter().next().unwrap());
            dnf = and(&dnf, &vec![base]);
        }
        let mut cur = b;
        let mut conds: Vec<(usize, usize)> = Vec::new();
        loop {
            if f.preds[cur].len() == 1 {
                conds.push((f.preds[cur][0], cur));
            }
            match dom.idom(cur) {
                Some(d) => cur = d,
                None => break,
            }
        }
        for (x, s) in conds.into_iter().rev() {
            let Some(InstKind::CondBr { cond, then_, else_ }) = f.blocks[x].insts.last().map(|i| &i.kind) else {
                continue;
            };
            if then_ == else_ || forest.loops.iter().any(|l| l.header == x) {
                continue;
            }
            let scope = forest.enclosing(x);
            let d = match prop.condition(f, cond) {
                Ok(d) => d,
                Err(r) => {
                    cx.notes.push(format!(
                        "condition at '{}' is not affine ({r}); '{}' is over-approximated",
                        f.blocks[x].label, blk.label
                    ));
                    continue;
                }
            };
            let d = if f.blocks[s].label == *then_ { d } else { negate(&d) };
            match cx.translate_dnf(&d, &scope, &BTreeMap::new()) {
                Ok(t) => dnf = and(&dnf, &t),
                Err(e) => cx.notes.push(format!(
                    "condition at '{}' dropped ({}); '{}' is over-approximated",
                    f.blocks[x].label,
                    ur(e),
                    blk.label
                )),
            }
        }
        // phase prefix and schedule positions
        let top = regions[&None].clone();
        let top_node = node_of(b, None).unwrap();
        let mut phase = top.entry.get(&top_node).cloned().unwrap_or_default();
        let mut time_tail: Vec<AffineExpr> = vec![AffineExpr::constant(top.pos[&top_node] as i64)];
        let mut uses_trip: Vec<usize> = Vec::new();
        for (k, &l) in chain.iter().enumerate() {
            let ld = &cx.loop_dims[l];
            let c = if ld.by_value {
                AffineExpr::dim(&ld.dim).scale(cx.infos[l].induction.step)
            } else {
                AffineExpr::dim(&ld.dim)
            };
            time_tail.push(c);
            let reg = &regions[&Some(l)];
            let n = node_of(b, Some(l)).unwrap();
            time_tail.push(AffineExpr::constant(reg.pos[&n] as i64));
            if k == 0 {
                let pi = per_iter.get(&l).copied().unwrap_or(0);
                phase = phase.add(&cx.iter_expr[l].scale(pi));
            }
            phase = phase.add(reg.entry.get(&n).unwrap_or(&AffineExpr::zero()));
        }
        for p in phase.param_coeffs().keys() {
            if let Some((&l, _)) = trip_params.iter().find(|(_, t)| *t == p) {
                uses_trip.push(l);
            }
        }
        for &l in &uses_trip {
            let t = AffineExpr::param(&trip_params[&l]);
            let info = cx.infos[l].clone();
            let atom = reg_atom(&info.induction.phi);
            let init = cx.init_expr(l).map_err(|e| MiniIrError::NonAffineBound {
                header: info.header.clone(),
                reason: ur(e),
            })?;
            let at = |k: AffineExpr| BTreeMap::from([(atom.clone(), init.add(&k.scale(info.induction.step)))]);
            let cond = vec![info.bound.clone()];
            let err = |e: Untranslatable| MiniIrError::NonAffineBound {
                header: info.header.clone(),
                reason: ur(e),
            };
            let c0 = cx.translate_dnf(&cond, &[], &at(AffineExpr::zero())).map_err(err)?;
            let c_last = cx.translate_dnf(&cond, &[], &at(t.clone().plus_const(-1))).map_err(err)?;
            let c_t = cx.translate_dnf(&cond, &[], &at(t.clone())).map_err(err)?;
            let zero: Dnf = and(&vec![vec![Constraint::eq(&t, &AffineExpr::zero())]], &negate(&c0));
            let some: Dnf = and(
                &and(&vec![vec![Constraint::ge(&t, &AffineExpr::constant(1))]], &c_last),
                &negate(&c_t),
            );
            let mut tdef = zero;
            tdef.extend(some);
            dnf = and(&dnf, &tdef);
        }
        let scope = chain.clone();
        for (seg, positions) in segments {
            let base = sanitize(&blk.label);
            let base = if seg == 0 { base } else { format!("{base}_{seg}") };
            let label = cx.section_label(&base, &opts.section_hints);
            if !labels.insert(label.clone()) {
                return Err(MiniIrError::Model(crate::kmodel::ModelError::Duplicate(label)));
            }
            let mut reads = Vec::new();
            let mut writes = Vec::new();
            for &i in &positions {
                let inst = &blk.insts[i];
                let (kind, addr) = match &inst.kind {
                    InstKind::Load { addr } => (AccessKind::Read, addr),
                    InstKind::Store { addr, .. } => (AccessKind::Write, addr),
                    _ => unreachable!(),
                };
                let (array, index) = prop.resolve_address(f, addr);
                let aref = cx
                    .arrays
                    .get(&array)
                    .cloned()
                    .ok_or_else(|| MiniIrError::SsaViolation(format!("line {}: %{array} is not an array", inst.line)))?;
                let site = format!("line {}", inst.line);
                let mut coords = Vec::new();
                for v in &index {
                    coords.push(cx.coordinate(v, &scope, &site)?);
                }
                // data lookups name the model array
                let coords = coords
                    .into_iter()
                    .map(|c| match c {
                        IndexExpr::Data { array, index } => IndexExpr::Data {
                            array: cx.arrays[&array].name.clone(),
                            index,
                        },
                        c => c,
                    })
                    .collect();
                let acc = Access {
                    array: aref.name.clone(),
                    index: coords,
                };
                let list = if kind == AccessKind::Read { &mut reads } else { &mut writes };
                layout.sites.insert(
                    (blk.label.clone(), i),
                    Site {
                        statement: label.clone(),
                        kind,
                        slot: list.len(),
                        loops: chain.clone(),
                    },
                );
                list.push(acc);
            }
            let dims_ref: Vec<&str> = dims.iter().map(String::as_str).collect();
            let conjs: Vec<Conj> = dnf.iter().map(|c| Conj::new(c.clone())).collect();
            let domain = IntSet::from_disjuncts(Some(&label), &dims_ref, conjs).map_err(crate::kmodel::ModelError::from)?;
            let mut time = vec![phase.clone().plus_const(seg as i64)];
            time.extend(time_tail.iter().cloned());
            time.push(AffineExpr::constant(seg as i64));
            schedule.times.insert(label.clone(), time);
            statements.push(Statement {
                label,
                dims: dims.clone(),
                domain,
                reads,
                writes,
            });
        }
    }
    let mut params = cx.params;
    for (_, t) in trip_params {
        if statements.iter().any(|s| s.domain.params().contains(&t)) {
            params.push(ParamDecl {
                lower: Some(0),
                scope: ParamScope::Block,
                ..ParamDecl::plain(&t)
            });
        }
    }
    let model = KernelModel {
        name: sanitize(&f.name),
        params,
        context: cx.context,
        arrays: array_order.iter().map(|n| cx.arrays[n].clone()).collect(),
        statements,
        grid,
        schedule,
        notes: dedup(cx.notes),
    }
    .validated()?;
    Ok(Extraction { model, layout })
}

fn dedup(v: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    v.into_iter().filter(|s| seen.insert(s.clone())).collect()
}

impl Ctx<'_> {
    fn section_label(&self, base: &str, hints: &BTreeMap<String, String>) -> String {
        hints.get(base).cloned().unwrap_or_else(|| base.to_string())
    }
}

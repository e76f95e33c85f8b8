//! A serial interpreter for mini-IR kernels with cooperative barriers.

use std::collections::{BTreeMap, BTreeSet};

use crate::kmodel::{AccessKind, Axis, MemSpace};
use crate::miniir::cfg::{Dominators, LoopForest};
use crate::miniir::{model_name, Address, BarrierScope, Extraction, Function, InstKind, Intrinsic, Operand, ParamType};

use super::{AccessLog, AccessLogEntry, ConcreteInstance, OracleError, STEP_LIMIT};

#[derive(Debug, Clone)]
struct Buffer {
    extents: Vec<i64>,
    data: Vec<i64>,
    space: MemSpace,
}

impl Buffer {
    fn offset(&self, cell: &[i64]) -> Option<usize> {
        if cell.len() != self.extents.len() {
            return None;
        }
        let mut off = 0i64;
        for (c, e) in cell.iter().zip(self.extents.iter()) {
            if *c < 0 || c >= e {
                return None;
            }
            off = off * e + c;
        }
        usize::try_from(off).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Run,
    Wait(BarrierScope),
    Done,
}

#[derive(Debug, Clone)]
struct Thread {
    coords: [i64; 3],
    lane: i64,
    regs: BTreeMap<String, i64>,
    ptrs: BTreeMap<String, (String, Vec<i64>)>,
    block: usize,
    pos: usize,
    iters: Vec<i64>,
    phase: i64,
    warp_phases: BTreeMap<u32, i64>,
    serial: usize,
    steps: u64,
    state: State,
}

struct Machine<'a> {
    f: &'a Function,
    forest: LoopForest,
    headers: BTreeMap<usize, usize>,
    extraction: Option<&'a Extraction>,
    grid: crate::miniir::GridShape,
    tpb: i64,
    global: BTreeMap<String, Buffer>,
    shared: BTreeMap<String, Buffer>,
    log: AccessLog,
}

fn trap(line: usize, msg: impl Into<String>) -> OracleError {
    OracleError::Trap { line, msg: msg.into() }
}

/// Access log of `f` on `instance`. Threads of a block run in lexicographic
/// order up to their next barrier; blocks run one after another.
///
/// With an extraction, log entries carry the statement instance each access
/// belongs to.
pub fn run_ir(instance: &ConcreteInstance, f: &Function, extraction: Option<&Extraction>) -> Result<AccessLog, OracleError> {
    let grid = instance
        .grid
        .ok_or_else(|| OracleError::MissingValue("grid (add a `grid` line to the instance)".into()))?;
    let dom = Dominators::compute(f);
    let forest =
        LoopForest::compute(f, &dom).map_err(|e| OracleError::InvalidInstance(format!("cannot interpret kernel: {e}")))?;
    let headers = forest.loops.iter().enumerate().map(|(i, l)| (l.header, i)).collect();

    let mut scalars = BTreeMap::new();
    for name in f.scalar_params() {
        let v = instance
            .params
            .get(&name)
            .ok_or_else(|| OracleError::MissingValue(format!("parameter {name}")))?;
        scalars.insert(name, *v);
    }
    let mut global = BTreeMap::new();
    for p in &f.params {
        let ParamType::Array { space, extents, .. } = &p.ty else { continue };
        let given = instance.arrays.get(&p.name);
        let ext: Option<Vec<i64>> = extents
            .iter()
            .map(|e| e.as_ref().and_then(|e| e.eval(&BTreeMap::new(), &scalars)))
            .collect();
        let ext = match (ext, given) {
            (Some(e), _) => e,
            (None, Some(d)) => vec![d.len() as i64],
            (None, None) => return Err(OracleError::MissingValue(format!("contents or extent of {}", p.name))),
        };
        let size: i64 = ext.iter().product();
        if ext.iter().any(|e| *e < 0) {
            return Err(OracleError::InvalidInstance(format!("{} has a negative extent", p.name)));
        }
        let data = match given {
            Some(d) if d.len() as i64 == size => d.clone(),
            Some(d) => {
                return Err(OracleError::InvalidInstance(format!(
                    "{} has {} values but its extent is {:?}",
                    p.name,
                    d.len(),
                    ext
                )))
            }
            None => vec![0; size as usize],
        };
        global.insert(
            p.name.clone(),
            Buffer {
                extents: ext,
                data,
                space: *space,
            },
        );
    }

    let mut m = Machine {
        f,
        forest,
        headers,
        extraction,
        grid,
        tpb: grid.threads.iter().product(),
        global,
        shared: BTreeMap::new(),
        log: AccessLog::default(),
    };
    for bz in 0..grid.blocks[2] {
        for by in 0..grid.blocks[1] {
            for bx in 0..grid.blocks[0] {
                m.run_block([bx, by, bz], &scalars)?;
            }
        }
    }
    Ok(m.log)
}

impl<'a> Machine<'a> {
    fn run_block(&mut self, block: [i64; 3], scalars: &BTreeMap<String, i64>) -> Result<(), OracleError> {
        self.shared = self
            .f
            .shared
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    Buffer {
                        extents: s.extents.clone(),
                        data: vec![0; s.extents.iter().product::<i64>().max(0) as usize],
                        space: MemSpace::Shared,
                    },
                )
            })
            .collect();
        let g = self.grid;
        let mut threads = Vec::new();
        for tz in 0..g.threads[2] {
            for ty in 0..g.threads[1] {
                for tx in 0..g.threads[0] {
                    let coords = [tx, ty, tz];
                    let mut regs = scalars.clone();
                    for a in Axis::ALL {
                        let i = a.index();
                        regs.insert(Intrinsic::Tid(a).name(), coords[i]);
                        regs.insert(Intrinsic::Bid(a).name(), block[i]);
                        regs.insert(Intrinsic::BlockDim(a).name(), g.threads[i]);
                        regs.insert(Intrinsic::GridDim(a).name(), g.blocks[i]);
                    }
                    threads.push(Thread {
                        coords,
                        lane: tx + g.threads[0] * (ty + g.threads[1] * tz),
                        regs,
                        ptrs: BTreeMap::new(),
                        block: 0,
                        pos: 0,
                        iters: vec![0; self.forest.loops.len()],
                        phase: 0,
                        warp_phases: BTreeMap::new(),
                        serial: 0,
                        steps: 0,
                        state: State::Run,
                    });
                }
            }
        }
        loop {
            for t in threads.iter_mut() {
                if t.state == State::Run {
                    self.execute(block, t)?;
                }
            }
            if threads.iter().all(|t| t.state == State::Done) {
                return Ok(());
            }
            // warps whose live threads all wait at the same warp barrier
            let mut progress = false;
            let widths: BTreeSet<u32> = threads
                .iter()
                .filter_map(|t| match t.state {
                    State::Wait(BarrierScope::Warp(w)) => Some(w),
                    _ => None,
                })
                .collect();
            for w in widths {
                let mut groups: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
                for (i, t) in threads.iter().enumerate() {
                    groups.entry(t.lane / w as i64).or_default().push(i);
                }
                for members in groups.values() {
                    let waiting = members
                        .iter()
                        .filter(|&&i| threads[i].state == State::Wait(BarrierScope::Warp(w)))
                        .count();
                    if waiting == 0 {
                        continue;
                    }
                    if members.iter().any(|&i| threads[i].state == State::Done) {
                        return Err(OracleError::BarrierDivergence {
                            block,
                            reason: format!("a thread of a {w}-wide warp exited before its warp barrier"),
                        });
                    }
                    if waiting == members.len() {
                        for &i in members {
                            threads[i].state = State::Run;
                            *threads[i].warp_phases.entry(w).or_insert(0) += 1;
                        }
                        progress = true;
                    }
                }
            }
            if progress {
                continue;
            }
            let live: Vec<usize> = (0..threads.len()).filter(|&i| threads[i].state != State::Done).collect();
            if live.iter().all(|&i| threads[i].state == State::Wait(BarrierScope::Block)) {
                if live.len() < threads.len() {
                    return Err(OracleError::BarrierDivergence {
                        block,
                        reason: "some threads exited while others wait at a barrier".into(),
                    });
                }
                for &i in &live {
                    threads[i].state = State::Run;
                    threads[i].phase += 1;
                }
            } else {
                return Err(OracleError::BarrierDivergence {
                    block,
                    reason: "threads wait at different barriers".into(),
                });
            }
        }
    }

    fn value(&self, t: &Thread, o: &Operand, line: usize) -> Result<i64, OracleError> {
        match o {
            Operand::Int(v) => Ok(*v),
            Operand::Reg(r) => t.regs.get(r).copied().ok_or_else(|| trap(line, format!("%{r} has no value"))),
        }
    }

    fn address(&self, t: &Thread, addr: &Address, line: usize) -> Result<(String, Vec<i64>), OracleError> {
        if let Some((base, cell)) = t.ptrs.get(&addr.base) {
            if !addr.index.is_empty() {
                return Err(trap(line, "indexing through a pointer register"));
            }
            return Ok((base.clone(), cell.clone()));
        }
        if addr.index.is_empty() {
            return Ok((addr.base.clone(), vec![0]));
        }
        let cell = addr.index.iter().map(|o| self.value(t, o, line)).collect::<Result<_, _>>()?;
        Ok((addr.base.clone(), cell))
    }

    fn buffer(&mut self, array: &str) -> Option<&mut Buffer> {
        match self.shared.get_mut(array) {
            Some(b) => Some(b),
            None => self.global.get_mut(array),
        }
    }

    fn enter(&self, t: &mut Thread, to: usize, from: usize, line: usize) -> Result<(), OracleError> {
        let from_label = &self.f.blocks[from].label;
        let blk = &self.f.blocks[to];
        let mut assigned = Vec::new();
        let mut n = 0;
        for inst in &blk.insts {
            let InstKind::Phi { incoming } = &inst.kind else { break };
            let (op, _) = incoming
                .iter()
                .find(|(_, l)| l == from_label)
                .ok_or_else(|| trap(inst.line, format!("phi has no value for '{from_label}'")))?;
            assigned.push((inst.result.clone().unwrap_or_default(), self.value(t, op, line)?));
            n += 1;
        }
        for (r, v) in assigned {
            t.regs.insert(r, v);
        }
        if let Some(&l) = self.headers.get(&to) {
            if self.forest.loops[l].body.contains(&from) {
                t.iters[l] += 1;
            } else {
                t.iters[l] = 0;
            }
        }
        t.block = to;
        t.pos = n;
        Ok(())
    }

    fn record(
        &mut self,
        block: [i64; 3],
        t: &mut Thread,
        array: &str,
        cell: Vec<i64>,
        kind: AccessKind,
        line: usize,
    ) -> Result<(), OracleError> {
        let space = self
            .buffer(array)
            .map(|b| b.space)
            .ok_or_else(|| trap(line, format!("%{array} is not an array")))?;
        let (mut site, mut point) = (None, None);
        if let Some(x) = self.extraction {
            if let Some(s) = x.layout.sites.get(&(self.f.blocks[t.block].label.clone(), t.pos)) {
                let mut grid = BTreeMap::new();
                for a in Axis::ALL {
                    grid.insert(model_name(Intrinsic::Bid(a)), block[a.index()]);
                    grid.insert(model_name(Intrinsic::Tid(a)), t.coords[a.index()]);
                }
                let iters: Vec<i64> = s.loops.iter().map(|&l| t.iters[l]).collect();
                site = Some(s.statement.clone());
                point = x.layout.point(&x.model, s, &grid, &iters, &t.regs);
            }
        }
        self.log.entries.push(AccessLogEntry {
            block,
            thread: t.coords,
            lane: t.lane,
            phase: t.phase,
            warp_phases: t.warp_phases.clone(),
            serial: t.serial,
            array: array.to_string(),
            space,
            cell,
            kind,
            site,
            point,
            line: Some(line),
            regs: t.regs.clone(),
        });
        t.serial += 1;
        Ok(())
    }

    /// Run `t` until it finishes or reaches a barrier.
    fn execute(&mut self, block: [i64; 3], t: &mut Thread) -> Result<(), OracleError> {
        let f = self.f;
        loop {
            t.steps += 1;
            if t.steps > STEP_LIMIT {
                return Err(OracleError::StepLimitExceeded { block, thread: t.coords });
            }
            let inst = &f.blocks[t.block].insts[t.pos];
            let line = inst.line;
            let next = t.pos + 1;
            match &inst.kind {
                InstKind::Bin { op, lhs, rhs } => {
                    let (a, b) = (self.value(t, lhs, line)?, self.value(t, rhs, line)?);
                    let v = op.apply(a, b).ok_or_else(|| trap(line, "arithmetic fault"))?;
                    t.regs.insert(inst.result.clone().unwrap_or_default(), v);
                }
                InstKind::Cmp { pred, lhs, rhs } => {
                    let (a, b) = (self.value(t, lhs, line)?, self.value(t, rhs, line)?);
                    t.regs.insert(inst.result.clone().unwrap_or_default(), i64::from(pred.eval(a, b)));
                }
                InstKind::Select { cond, a, b } => {
                    let v = if self.value(t, cond, line)? != 0 {
                        self.value(t, a, line)?
                    } else {
                        self.value(t, b, line)?
                    };
                    t.regs.insert(inst.result.clone().unwrap_or_default(), v);
                }
                InstKind::Intrinsic(i) => {
                    let v = t.regs[&i.name()];
                    t.regs.insert(inst.result.clone().unwrap_or_default(), v);
                }
                InstKind::GetElem { addr } => {
                    let (base, cell) = self.address(t, addr, line)?;
                    t.ptrs.insert(inst.result.clone().unwrap_or_default(), (base, cell));
                }
                InstKind::Load { addr } => {
                    let (array, cell) = self.address(t, addr, line)?;
                    let v = {
                        let buf = self.buffer(&array).ok_or_else(|| trap(line, format!("%{array} is not an array")))?;
                        let off = buf.offset(&cell).ok_or_else(|| OracleError::OutOfBounds {
                            array: array.clone(),
                            cell: cell.clone(),
                        })?;
                        buf.data[off]
                    };
                    self.record(block, t, &array, cell, AccessKind::Read, line)?;
                    t.regs.insert(inst.result.clone().unwrap_or_default(), v);
                }
                InstKind::Store { value, addr } => {
                    let v = self.value(t, value, line)?;
                    let (array, cell) = self.address(t, addr, line)?;
                    {
                        let buf = self.buffer(&array).ok_or_else(|| trap(line, format!("%{array} is not an array")))?;
                        let off = buf.offset(&cell).ok_or_else(|| OracleError::OutOfBounds {
                            array: array.clone(),
                            cell: cell.clone(),
                        })?;
                        buf.data[off] = v;
                    }
                    self.record(block, t, &array, cell, AccessKind::Write, line)?;
                }
                InstKind::Phi { .. } => return Err(trap(line, "phi after the start of a block")),
                InstKind::Barrier(scope) => {
                    t.pos = next;
                    // a warp spanning the whole block is a block barrier
                    t.state = match scope {
                        BarrierScope::Warp(w) if (*w as i64) < self.tpb => State::Wait(*scope),
                        _ => State::Wait(BarrierScope::Block),
                    };
                    return Ok(());
                }
                InstKind::Atomic { op, .. } => return Err(trap(line, format!("atomic {op} is not supported"))),
                InstKind::Call { callee, .. } => return Err(trap(line, format!("call to @{callee}"))),
                InstKind::Br(l) => {
                    let to = f.block_index(l).expect("verified branch target");
                    let from = t.block;
                    self.enter(t, to, from, line)?;
                    continue;
                }
                InstKind::CondBr { cond, then_, else_ } => {
                    let l = if self.value(t, cond, line)? != 0 { then_ } else { else_ };
                    let to = f.block_index(l).expect("verified branch target");
                    let from = t.block;
                    self.enter(t, to, from, line)?;
                    continue;
                }
                InstKind::Ret => {
                    t.state = State::Done;
                    return Ok(());
                }
            }
            if next >= f.blocks[t.block].insts.len() {
                return Err(trap(line, "fell off the end of a block"));
            }
            t.pos = next;
        }
    }
}

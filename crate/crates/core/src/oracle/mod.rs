//! Concrete brute-force ground truth.
//!
//! A kernel (model or mini-IR) is run over a small concrete instance; every
//! memory access is logged with its barrier phase, and races are decided by
//! enumerating the log.

mod instance;
mod ir;
mod model;

use std::collections::BTreeMap;

use serde::Serialize;

pub use instance::{parse_grid, ConcreteInstance, CsrDecl};
pub use ir::run_ir;
pub use model::run_model;

use crate::depcheck::DependenceKind;
use crate::iset::{IntSet, IsetError};
use crate::kmodel::{AccessKind, KernelModel, MemSpace, ModelError};
use crate::miniir::{Extraction, Function};

/// Per-thread instruction budget.
pub const STEP_LIMIT: u64 = 1_000_000;
/// Largest box [`enumerate_set`] will walk.
pub const MAX_BOX_POINTS: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance line {line}: {msg}")]
    Instance { line: usize, msg: String },
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("thread {thread:?} of block {block:?} exceeded the step limit")]
    StepLimitExceeded { block: [i64; 3], thread: [i64; 3] },
    #[error("out-of-bounds access {array}{cell:?}")]
    OutOfBounds { array: String, cell: Vec<i64> },
    #[error("no value for {0}")]
    MissingValue(String),
    #[error("statement {statement}: index into {array} is unknown")]
    UnknownIndex { statement: String, array: String },
    #[error("barrier divergence in block {block:?}: {reason}")]
    BarrierDivergence { block: [i64; 3], reason: String },
    #[error("box of {0} points is too large to enumerate")]
    BoxTooLarge(u128),
    #[error("trap at line {line}: {msg}")]
    Trap { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Set(#[from] IsetError),
}

/// One memory access of one thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AccessLogEntry {
    pub block: [i64; 3],
    pub thread: [i64; 3],
    /// Linear thread id within the block.
    pub lane: i64,
    /// Block-wide barriers passed before the access.
    pub phase: i64,
    /// Warp barriers passed, per warp width narrower than the block.
    pub warp_phases: BTreeMap<u32, i64>,
    /// Position among the thread's accesses.
    pub serial: usize,
    pub array: String,
    pub space: MemSpace,
    pub cell: Vec<i64>,
    pub kind: AccessKind,
    /// Statement label, when known.
    pub site: Option<String>,
    /// Statement instance (values of the statement dims), when known.
    pub point: Option<Vec<i64>>,
    /// Source line (mini-IR runs).
    pub line: Option<usize>,
    /// Register values at the access (mini-IR runs), intrinsics by dotted name.
    #[serde(skip)]
    pub regs: BTreeMap<String, i64>,
}

impl AccessLogEntry {
    fn same_thread(&self, o: &AccessLogEntry) -> bool {
        self.block == o.block && self.thread == o.thread
    }

    /// Barrier epoch as seen by a pair with `o`: block barriers plus the warp
    /// barriers both threads take part in.
    fn epoch_with(&self, o: &AccessLogEntry) -> i64 {
        self.phase
            + self
                .warp_phases
                .iter()
                .filter(|(w, _)| self.lane / **w as i64 == o.lane / **w as i64)
                .map(|(_, n)| n)
                .sum::<i64>()
    }

    /// `self` is guaranteed to complete before `o`.
    pub fn happens_before(&self, o: &AccessLogEntry) -> bool {
        if self.block != o.block {
            return false;
        }
        if self.thread == o.thread {
            return self.serial < o.serial;
        }
        self.epoch_with(o) < o.epoch_with(self)
    }

    fn order_key(&self) -> ([i64; 3], [i64; 3], usize) {
        (self.block, self.thread, self.serial)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AccessLog {
    pub entries: Vec<AccessLogEntry>,
}

impl AccessLog {
    /// Entries sorted by block, thread and serial: independent of the order
    /// threads ran in.
    pub fn normalized(&self) -> AccessLog {
        let mut entries = self.entries.clone();
        entries.sort_by_key(AccessLogEntry::order_key);
        AccessLog { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn by_cell(&self) -> BTreeMap<(&str, &[i64]), Vec<&AccessLogEntry>> {
        let mut m: BTreeMap<(&str, &[i64]), Vec<&AccessLogEntry>> = BTreeMap::new();
        for e in &self.entries {
            if e.space != MemSpace::Local {
                m.entry((e.array.as_str(), e.cell.as_slice())).or_default().push(e);
            }
        }
        m
    }
}

/// Two accesses of different threads to one cell, at least one a write,
/// ordered neither way.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RacePair {
    pub first: AccessLogEntry,
    pub second: AccessLogEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleVerdict {
    pub pairs: Vec<RacePair>,
}

impl OracleVerdict {
    pub fn is_race_free(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn token(&self) -> &'static str {
        if self.is_race_free() {
            "RaceFree"
        } else {
            "RaceFound"
        }
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(!self.is_race_free())
    }
}

/// Every conflicting unordered pair of the log.
pub fn detect_races(log: &AccessLog) -> OracleVerdict {
    let log = log.normalized();
    let mut pairs = Vec::new();
    for (_, list) in log.by_cell() {
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if a.kind == AccessKind::Read && b.kind == AccessKind::Read {
                    continue;
                }
                if a.same_thread(b) {
                    continue;
                }
                let racy = if a.block != b.block {
                    a.space == MemSpace::Global
                } else {
                    a.epoch_with(b) == b.epoch_with(a)
                };
                if racy {
                    pairs.push(RacePair {
                        first: (*a).clone(),
                        second: (*b).clone(),
                    });
                }
            }
        }
    }
    OracleVerdict { pairs }
}

/// Ordered conflicting pairs `(a, b)` of one dependence kind: same cell and
/// `a` happens before `b`.
pub fn ordered_pairs(log: &AccessLog, kind: DependenceKind) -> Vec<(AccessLogEntry, AccessLogEntry)> {
    let log = log.normalized();
    let mut out = Vec::new();
    for (_, list) in log.by_cell() {
        for a in &list {
            for b in &list {
                if DependenceKind::of(a.kind, b.kind) == Some(kind) && a.happens_before(b) {
                    out.push(((*a).clone(), (*b).clone()));
                }
            }
        }
    }
    out
}

/// Inclusive bounds applied to every dim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBox {
    pub lo: i64,
    pub hi: i64,
}

impl EnumBox {
    pub fn new(lo: i64, hi: i64) -> Self {
        EnumBox { lo, hi }
    }

    /// `[-r, r]`.
    pub fn radius(r: i64) -> Self {
        EnumBox { lo: -r, hi: r }
    }

    fn width(&self) -> u128 {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo) as u128 + 1
        }
    }
}

/// Lattice points of `s` inside the box, in lexicographic order.
pub fn enumerate_set(s: &IntSet, params: &BTreeMap<String, i64>, bx: EnumBox) -> Result<Vec<Vec<i64>>, OracleError> {
    let n = s.arity();
    let total = bx.width().checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_BOX_POINTS {
        return Err(OracleError::BoxTooLarge(total));
    }
    let mut out = Vec::new();
    if bx.width() == 0 {
        return Ok(out);
    }
    let mut p = vec![bx.lo; n];
    loop {
        if s.contains(&p, params)? {
            out.push(p.clone());
        }
        let mut k = n;
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            if p[k] < bx.hi {
                p[k] += 1;
                break;
            }
            p[k] = bx.lo;
        }
    }
}

/// What to run.
#[derive(Debug, Clone, Copy)]
pub enum Program<'a> {
    Model(&'a KernelModel),
    /// A function, optionally with its extracted layout so log entries carry
    /// statement instances.
    Ir(&'a Function, Option<&'a Extraction>),
}

/// Options for model runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Non-grid dims and unbound parameters range over `[-r, r]` unless
    /// bounded otherwise.
    pub radius: i64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { radius: 16 }
    }
}

pub fn run(instance: &ConcreteInstance, program: Program<'_>) -> Result<AccessLog, OracleError> {
    match program {
        Program::Model(m) => run_model(instance, m, &RunOptions::default()),
        Program::Ir(f, x) => run_ir(instance, f, x),
    }
}

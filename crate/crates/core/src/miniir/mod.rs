//! Reduced SSA kernel representation: parsing, analysis and model recovery.
//!
//! ```text
//! kernel @scale(%n: i32, %A: ptr global f32 [%n]) {
//! entry:
//!   %t = call tid.x
//!   %ok = icmp slt i32 %t, %n
//!   br %ok, body, done
//! body:
//!   %v = load f32 %A[%t]
//!   %w = fmul f32 %v, 2
//!   store f32 %w, %A[%t]
//!   br done
//! done:
//!   ret
//! }
//! ```

pub mod analysis;
pub mod ast;
pub mod cfg;
pub mod extract;
mod parse;

use std::collections::BTreeMap;

pub use analysis::{model_name, IdBinding, Induction, LoopInfo, Opaque, PropagatedExpr};
pub use ast::*;
pub use extract::{ExtractOptions, Extraction, GridShape, Layout, LoopDim, Site};
pub use parse::parse;

use crate::kmodel::{KernelModel, ModelError};
use analysis::{loop_infos, Propagation};
use cfg::{Dominators, LoopForest};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MiniIrError {
    #[error("line {line}, column {col}: expected {expected}")]
    SyntaxError { line: usize, col: usize, expected: String },
    #[error("line {line}: unknown opcode '{op}'")]
    UnknownOpcode { line: usize, op: String },
    #[error("SSA violation: {0}")]
    SsaViolation(String),
    #[error("malformed control flow: {0}")]
    MalformedCfg(String),
    #[error("irreducible control flow at '{0}'")]
    IrreducibleCfg(String),
    #[error("loop at '{header}': {reason}")]
    NonAffineBound { header: String, reason: String },
    #[error("loop at '{0}' has more than one induction variable feeding addresses")]
    MultipleInductions(String),
    #[error("unsupported use of thread or block ids: {0}")]
    UnsupportedIdPattern(String),
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn analyses(f: &Function) -> Result<(Dominators, LoopForest), MiniIrError> {
    let dom = Dominators::compute(f);
    let forest = LoopForest::compute(f, &dom)?;
    Ok((dom, forest))
}

/// Propagated value of every register that has one.
pub fn propagate(f: &Function) -> Result<BTreeMap<String, PropagatedExpr>, MiniIrError> {
    propagate_with(f, &BTreeMap::new())
}

/// Like [`propagate`], with some intrinsics (e.g. `blockdim.x`) fixed.
pub fn propagate_with(f: &Function, consts: &BTreeMap<String, i64>) -> Result<BTreeMap<String, PropagatedExpr>, MiniIrError> {
    let (dom, forest) = analyses(f)?;
    let p = Propagation::compute(f, &forest, &dom, consts);
    Ok(f
        .instructions()
        .filter(|(_, _, i)| {
            !matches!(
                i.kind,
                InstKind::GetElem { .. } | InstKind::Cmp { .. } | InstKind::Call { .. } | InstKind::Atomic { .. }
            )
        })
        .filter_map(|(_, _, i)| i.result.as_ref())
        .chain(f.scalar_params().iter())
        .map(|r| (r.clone(), p.public(&p.vals[r])))
        .collect())
}

pub fn find_loops(f: &Function) -> Result<Vec<LoopInfo>, MiniIrError> {
    let (dom, forest) = analyses(f)?;
    let p = Propagation::compute(f, &forest, &dom, &BTreeMap::new());
    loop_infos(f, &forest, &p)
}

/// Every grid intrinsic use and the model name it maps to.
pub fn find_grid_iterators(f: &Function) -> Result<Vec<IdBinding>, MiniIrError> {
    let (dom, forest) = analyses(f)?;
    let p = Propagation::compute(f, &forest, &dom, &BTreeMap::new());
    if let Some((line, msg)) = p.id_misuse.first() {
        return Err(MiniIrError::UnsupportedIdPattern(format!("line {line}: {msg}")));
    }
    Ok(f
        .instructions()
        .filter_map(|(_, _, i)| match (&i.result, &i.kind) {
            (Some(r), InstKind::Intrinsic(x)) => Some(IdBinding {
                register: r.clone(),
                intrinsic: *x,
                model_name: model_name(*x),
            }),
            _ => None,
        })
        .collect())
}

pub fn extract_model(f: &Function, opts: &ExtractOptions) -> Result<KernelModel, MiniIrError> {
    Ok(extract::extract(f, opts)?.model)
}

/// Model plus the instruction-to-statement layout.
pub fn extract_with_layout(f: &Function, opts: &ExtractOptions) -> Result<Extraction, MiniIrError> {
    extract::extract(f, opts)
}

/// Number of barrier instructions.
pub fn barrier_count(f: &Function) -> usize {
    f.instructions()
        .filter(|(_, _, i)| matches!(i.kind, InstKind::Barrier(_)))
        .count()
}

use std::collections::BTreeMap;
use std::fmt;

use crate::iset::AffineExpr;
use crate::kmodel::{Axis, ElemKind, MemSpace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    /// Register name without the `%`.
    Reg(String),
    Int(i64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Reg(r) => write!(f, "%{r}"),
            Operand::Int(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Intrinsic {
    Tid(Axis),
    Bid(Axis),
    BlockDim(Axis),
    GridDim(Axis),
}

impl Intrinsic {
    pub fn parse(s: &str) -> Option<Intrinsic> {
        let (base, axis) = s.split_once('.')?;
        let axis = match axis {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            _ => return None,
        };
        Some(match base {
            "tid" => Intrinsic::Tid(axis),
            "bid" => Intrinsic::Bid(axis),
            "blockdim" => Intrinsic::BlockDim(axis),
            "griddim" => Intrinsic::GridDim(axis),
            _ => return None,
        })
    }

    /// The name used for this value in propagated expressions, e.g. `tid.x`.
    pub fn name(self) -> String {
        let (base, axis) = match self {
            Intrinsic::Tid(a) => ("tid", a),
            Intrinsic::Bid(a) => ("bid", a),
            Intrinsic::BlockDim(a) => ("blockdim", a),
            Intrinsic::GridDim(a) => ("griddim", a),
        };
        format!("{base}.{}", axis.suffix())
    }

    pub fn axis(self) -> Axis {
        match self {
            Intrinsic::Tid(a) | Intrinsic::Bid(a) | Intrinsic::BlockDim(a) | Intrinsic::GridDim(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Shl,
    And,
    Or,
    Xor,
    SDiv,
    SRem,
    FAdd,
    FSub,
    FMul,
    FDiv,
}

impl BinOp {
    pub fn parse(s: &str) -> Option<BinOp> {
        Some(match s {
            "add" => BinOp::Add,
            "sub" => BinOp::Sub,
            "mul" => BinOp::Mul,
            "shl" => BinOp::Shl,
            "and" => BinOp::And,
            "or" => BinOp::Or,
            "xor" => BinOp::Xor,
            "sdiv" => BinOp::SDiv,
            "srem" => BinOp::SRem,
            "fadd" => BinOp::FAdd,
            "fsub" => BinOp::FSub,
            "fmul" => BinOp::FMul,
            "fdiv" => BinOp::FDiv,
            _ => return None,
        })
    }

    /// Integer semantics; float opcodes operate on the same integer values.
    pub fn apply(self, a: i64, b: i64) -> Option<i64> {
        Some(match self {
            BinOp::Add | BinOp::FAdd => a.wrapping_add(b),
            BinOp::Sub | BinOp::FSub => a.wrapping_sub(b),
            BinOp::Mul | BinOp::FMul => a.wrapping_mul(b),
            BinOp::Shl => a.wrapping_shl(u32::try_from(b).ok()?),
            BinOp::And => a & b,
            BinOp::Or => a | b,
            BinOp::Xor => a ^ b,
            BinOp::SDiv | BinOp::FDiv => a.checked_div(b)?,
            BinOp::SRem => a.checked_rem(b)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpPred {
    Eq,
    Ne,
    Slt,
    Sle,
    Sgt,
    Sge,
}

impl CmpPred {
    pub fn parse(s: &str) -> Option<CmpPred> {
        Some(match s {
            "eq" => CmpPred::Eq,
            "ne" => CmpPred::Ne,
            "slt" | "ult" => CmpPred::Slt,
            "sle" | "ule" => CmpPred::Sle,
            "sgt" | "ugt" => CmpPred::Sgt,
            "sge" | "uge" => CmpPred::Sge,
            _ => return None,
        })
    }

    pub fn eval(self, a: i64, b: i64) -> bool {
        match self {
            CmpPred::Eq => a == b,
            CmpPred::Ne => a != b,
            CmpPred::Slt => a < b,
            CmpPred::Sle => a <= b,
            CmpPred::Sgt => a > b,
            CmpPred::Sge => a >= b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierScope {
    Block,
    /// Threads `W*k .. W*k+W-1` of a block (by linear thread id).
    Warp(u32),
}

/// `array[i, j]`, or a pointer register produced by `getelem`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Address {
    pub base: String,
    pub index: Vec<Operand>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InstKind {
    Bin { op: BinOp, lhs: Operand, rhs: Operand },
    Cmp { pred: CmpPred, lhs: Operand, rhs: Operand },
    Select { cond: Operand, a: Operand, b: Operand },
    Load { addr: Address },
    Store { value: Operand, addr: Address },
    GetElem { addr: Address },
    Phi { incoming: Vec<(Operand, String)> },
    Intrinsic(Intrinsic),
    Barrier(BarrierScope),
    /// Parsed so it can be rejected with a useful message.
    Atomic { op: String, addr: Address, value: Operand },
    Call { callee: String, args: Vec<Operand> },
    Br(String),
    CondBr { cond: Operand, then_: String, else_: String },
    Ret,
}

impl InstKind {
    pub fn is_terminator(&self) -> bool {
        matches!(self, InstKind::Br(_) | InstKind::CondBr { .. } | InstKind::Ret)
    }

    /// Register operands, in order (address bases excluded).
    pub fn uses(&self) -> Vec<&Operand> {
        match self {
            InstKind::Bin { lhs, rhs, .. } | InstKind::Cmp { lhs, rhs, .. } => vec![lhs, rhs],
            InstKind::Select { cond, a, b } => vec![cond, a, b],
            InstKind::Load { addr } | InstKind::GetElem { addr } => addr.index.iter().collect(),
            InstKind::Store { value, addr } | InstKind::Atomic { addr, value, .. } => {
                let mut v = vec![value];
                v.extend(addr.index.iter());
                v
            }
            InstKind::Phi { incoming } => incoming.iter().map(|(o, _)| o).collect(),
            InstKind::Call { args, .. } => args.iter().collect(),
            InstKind::CondBr { cond, .. } => vec![cond],
            InstKind::Intrinsic(_) | InstKind::Barrier(_) | InstKind::Br(_) | InstKind::Ret => vec![],
        }
    }

    pub fn address(&self) -> Option<&Address> {
        match self {
            InstKind::Load { addr } | InstKind::Store { addr, .. } | InstKind::GetElem { addr } | InstKind::Atomic { addr, .. } => {
                Some(addr)
            }
            _ => None,
        }
    }

    pub fn successors(&self) -> Vec<&str> {
        match self {
            InstKind::Br(l) => vec![l.as_str()],
            InstKind::CondBr { then_, else_, .. } => vec![then_.as_str(), else_.as_str()],
            _ => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub result: Option<String>,
    pub kind: InstKind,
    /// Optional type token written after the opcode.
    pub ty: Option<String>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Instruction>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamType {
    Scalar(ElemKind),
    Array {
        space: MemSpace,
        elem: ElemKind,
        /// Over the scalar parameters; `None` where unknown.
        extents: Vec<Option<AffineExpr>>,
        values: Option<(AffineExpr, AffineExpr)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: ParamType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedDecl {
    pub name: String,
    pub extents: Vec<i64>,
    pub elem: ElemKind,
}

/// A parsed and verified kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub shared: Vec<SharedDecl>,
    pub blocks: Vec<Block>,
    pub(crate) index: BTreeMap<String, usize>,
    pub(crate) succs: Vec<Vec<usize>>,
    pub(crate) preds: Vec<Vec<usize>>,
}

impl Function {
    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.block_index(label).map(|i| &self.blocks[i])
    }

    pub fn successors(&self, b: usize) -> &[usize] {
        &self.succs[b]
    }

    pub fn predecessors(&self, b: usize) -> &[usize] {
        &self.preds[b]
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn scalar_params(&self) -> Vec<String> {
        self.params
            .iter()
            .filter(|p| matches!(p.ty, ParamType::Scalar(_)))
            .map(|p| p.name.clone())
            .collect()
    }

    pub fn is_array(&self, name: &str) -> bool {
        self.shared.iter().any(|s| s.name == name)
            || matches!(self.param(name), Some(Param { ty: ParamType::Array { .. }, .. }))
    }

    /// Every instruction with its block index and position.
    pub fn instructions(&self) -> impl Iterator<Item = (usize, usize, &Instruction)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(b, blk)| blk.insts.iter().enumerate().map(move |(i, inst)| (b, i, inst)))
    }

    /// Where each register is defined: `(block, position)`; parameters are
    /// defined before the entry block and map to `None`.
    pub fn definitions(&self) -> BTreeMap<String, Option<(usize, usize)>> {
        let mut out = BTreeMap::new();
        for p in &self.params {
            out.insert(p.name.clone(), None);
        }
        for (b, i, inst) in self.instructions() {
            if let Some(r) = &inst.result {
                out.insert(r.clone(), Some((b, i)));
            }
        }
        out
    }

    /// Arrays written by a store or atomic anywhere in the kernel.
    pub fn written_arrays(&self) -> Vec<String> {
        let pointers: BTreeMap<&str, &str> = self
            .instructions()
            .filter_map(|(_, _, inst)| match (&inst.result, &inst.kind) {
                (Some(r), InstKind::GetElem { addr }) => Some((r.as_str(), addr.base.as_str())),
                _ => None,
            })
            .collect();
        let mut out: Vec<String> = Vec::new();
        for (_, _, inst) in self.instructions() {
            if let InstKind::Store { addr, .. } | InstKind::Atomic { addr, .. } = &inst.kind {
                let base = pointers.get(addr.base.as_str()).copied().unwrap_or(addr.base.as_str());
                if !out.iter().any(|a| a == base) {
                    out.push(base.to_string());
                }
            }
        }
        out
    }
}

//! Parameterized integer sets and relations.
//!
//! Sets are unions of conjunctions of affine constraints over named
//! dimensions and symbolic parameters, optionally with existential
//! variables. Emptiness is decided by gcd normalization, Fourier–Motzkin
//! elimination and a bounded integer search; when the search cannot cover
//! the whole space the answer is [`EmptinessVerdict::Inconclusive`].

pub mod expr;
pub mod rel;
pub mod set;
pub(crate) mod solver;
pub mod text;

pub use expr::{gcd, AffineExpr, Constraint, ConstraintKind};
pub use rel::{lex_lt, lex_lt_between, IntRel, UnionRel};
pub use set::{union, Conj, EmptinessVerdict, IntSet, SearchBox, SolveOptions, UnionSet, WitnessPoint};
pub use solver::SearchLimits;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IsetError {
    #[error("space mismatch: {left} vs {right}")]
    SpaceMismatch { left: String, right: String },
    #[error("arity mismatch: expected {expected}, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("too many disjuncts ({0})")]
    TooManyDisjuncts(usize),
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("name '{0}' used both as dimension and parameter")]
    NameClash(String),
    #[error("cannot subtract a set with existential variables")]
    QuantifiedSubtrahend,
    #[error("no value for parameter '{0}'")]
    UnboundParameter(String),
    #[error("undecided: {0}")]
    Undecided(String),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

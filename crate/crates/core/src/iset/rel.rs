//! Integer relations between two labeled tuples.

use std::collections::{BTreeMap, BTreeSet};

use super::expr::{AffineExpr, Constraint};
use super::set::{Conj, EmptinessVerdict, IntSet, SolveOptions};
use super::IsetError;

/// `[params] -> { in_space[in_dims] -> out_space[out_dims] : ... }`, stored as a
/// set over the concatenated tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntRel {
    pub(crate) in_space: Option<String>,
    pub(crate) out_space: Option<String>,
    pub(crate) n_in: usize,
    pub(crate) set: IntSet,
}

/// Rename `out` so it shares no name with `taken`.
fn disjoint_names(taken: &[String], out: &[String]) -> Vec<String> {
    let mut used: BTreeSet<String> = taken.iter().cloned().collect();
    out.iter()
        .map(|n| {
            let mut cand = n.clone();
            let mut i = 1;
            while used.contains(&cand) {
                cand = format!("{n}_{i}");
                i += 1;
            }
            used.insert(cand.clone());
            cand
        })
        .collect()
}

impl IntRel {
    /// Build from constraints over `in_dims ++ out_dims`. The two name lists
    /// must be disjoint.
    pub fn from_constraints(
        in_space: Option<&str>,
        in_dims: &[&str],
        out_space: Option<&str>,
        out_dims: &[&str],
        constraints: Vec<Constraint>,
    ) -> Result<Self, IsetError> {
        Self::from_disjuncts(in_space, in_dims, out_space, out_dims, vec![Conj::new(constraints)])
    }

    pub fn from_disjuncts(
        in_space: Option<&str>,
        in_dims: &[&str],
        out_space: Option<&str>,
        out_dims: &[&str],
        disjuncts: Vec<Conj>,
    ) -> Result<Self, IsetError> {
        for o in out_dims {
            if in_dims.contains(o) {
                return Err(IsetError::NameClash(o.to_string()));
            }
        }
        let all: Vec<&str> = in_dims.iter().chain(out_dims.iter()).copied().collect();
        Ok(IntRel {
            in_space: in_space.map(str::to_string),
            out_space: out_space.map(str::to_string),
            n_in: in_dims.len(),
            set: IntSet::from_disjuncts(None, &all, disjuncts)?,
        })
    }

    pub fn empty(in_space: Option<&str>, in_dims: &[&str], out_space: Option<&str>, out_dims: &[&str]) -> Result<Self, IsetError> {
        Self::from_disjuncts(in_space, in_dims, out_space, out_dims, Vec::new())
    }

    /// `{ space[dims] -> space[dims'] : dims == dims' }`
    pub fn identity(space: Option<&str>, dims: &[&str]) -> Result<Self, IsetError> {
        let ins: Vec<String> = dims.iter().map(|s| s.to_string()).collect();
        let outs = disjoint_names(&ins, &ins);
        let cs = ins
            .iter()
            .zip(outs.iter())
            .map(|(a, b)| Constraint::eq(&AffineExpr::dim(a), &AffineExpr::dim(b)))
            .collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        Self::from_constraints(space, dims, space, &outs_ref, cs)
    }

    pub fn in_space(&self) -> Option<&str> {
        self.in_space.as_deref()
    }

    pub fn out_space(&self) -> Option<&str> {
        self.out_space.as_deref()
    }

    pub fn in_dims(&self) -> &[String] {
        &self.set.dims[..self.n_in]
    }

    pub fn out_dims(&self) -> &[String] {
        &self.set.dims[self.n_in..]
    }

    pub fn params(&self) -> &[String] {
        self.set.params()
    }

    pub fn disjuncts(&self) -> &[Conj] {
        self.set.disjuncts()
    }

    /// The relation as a set over the concatenated tuple.
    pub fn wrapped(&self) -> &IntSet {
        &self.set
    }

    pub fn with_params(mut self, extra: &[String]) -> Self {
        self.set = self.set.with_params(extra);
        self
    }

    fn same_shape(&self, other: &IntRel) -> Result<(), IsetError> {
        if self.in_space != other.in_space || self.out_space != other.out_space {
            return Err(IsetError::SpaceMismatch {
                left: format!("{:?}->{:?}", self.in_space, self.out_space),
                right: format!("{:?}->{:?}", other.in_space, other.out_space),
            });
        }
        if self.n_in != other.n_in || self.set.arity() != other.set.arity() {
            return Err(IsetError::ArityMismatch {
                expected: self.set.arity(),
                found: other.set.arity(),
            });
        }
        Ok(())
    }

    fn lift(&self, set: IntSet) -> IntRel {
        IntRel {
            in_space: self.in_space.clone(),
            out_space: self.out_space.clone(),
            n_in: self.n_in,
            set,
        }
    }

    pub fn intersect(&self, other: &IntRel) -> Result<IntRel, IsetError> {
        self.same_shape(other)?;
        Ok(self.lift(self.set.intersect(&other.set)?))
    }

    pub fn union_same(&self, other: &IntRel) -> Result<IntRel, IsetError> {
        self.same_shape(other)?;
        Ok(self.lift(self.set.union_same(&other.set)?))
    }

    pub fn subtract(&self, other: &IntRel) -> Result<IntRel, IsetError> {
        self.subtract_with(other, &SolveOptions::default())
    }

    pub fn subtract_with(&self, other: &IntRel, opts: &SolveOptions) -> Result<IntRel, IsetError> {
        self.same_shape(other)?;
        Ok(self.lift(self.set.subtract_with(&other.set, opts)?))
    }

    pub fn inverse(&self) -> IntRel {
        let ins = self.in_dims().to_vec();
        let outs = self.out_dims().to_vec();
        let order: Vec<String> = outs.iter().chain(ins.iter()).cloned().collect();
        // reorder the tuple; names stay attached to their constraints
        let set = IntSet {
            space: None,
            dims: order,
            params: self.set.params.clone(),
            disjuncts: self.set.disjuncts.clone(),
        };
        IntRel {
            in_space: self.out_space.clone(),
            out_space: self.in_space.clone(),
            n_in: outs.len(),
            set,
        }
    }

    /// `self` followed by `next`: `{ a -> c : exists b : a self b and b next c }`.
    pub fn apply_range(&self, next: &IntRel) -> Result<IntRel, IsetError> {
        if self.out_space != next.in_space {
            return Err(IsetError::SpaceMismatch {
                left: self.out_space.clone().unwrap_or_default(),
                right: next.in_space.clone().unwrap_or_default(),
            });
        }
        if self.out_dims().len() != next.in_dims().len() {
            return Err(IsetError::ArityMismatch {
                expected: self.out_dims().len(),
                found: next.in_dims().len(),
            });
        }
        let ins = self.in_dims().to_vec();
        let outs = disjoint_names(&ins, next.out_dims());
        let mids: Vec<String> = (0..self.out_dims().len()).map(|i| format!("\u{2}m{i}")).collect();
        let left_names: Vec<String> = ins.iter().chain(mids.iter()).cloned().collect();
        let right_names: Vec<String> = mids.iter().chain(outs.iter()).cloned().collect();
        let left = self.set.renamed_disjuncts(&left_names);
        let right = next.set.renamed_disjuncts(&right_names);
        let mut disjuncts = Vec::new();
        for a in &left {
            for b in &right {
                let mut taken: BTreeSet<String> = a.exists.iter().cloned().collect();
                let mut map = BTreeMap::new();
                for e in &b.exists {
                    let mut i = 0;
                    let f = loop {
                        let f = format!("_e{i}");
                        if !taken.contains(&f) {
                            break f;
                        }
                        i += 1;
                    };
                    taken.insert(f.clone());
                    map.insert(e.clone(), f);
                }
                for m in &mids {
                    let mut i = 0;
                    let f = loop {
                        let f = format!("_e{i}");
                        if !taken.contains(&f) {
                            break f;
                        }
                        i += 1;
                    };
                    taken.insert(f.clone());
                    map.insert(m.clone(), f);
                }
                let b2 = b.rename_dims(&map);
                let mid_map: BTreeMap<String, String> =
                    mids.iter().map(|m| (m.clone(), map[m].clone())).collect();
                let a2 = a.rename_dims(&mid_map);
                let mut c = a2;
                c.constraints.extend(b2.constraints);
                c.exists.extend(b2.exists);
                c.exists.extend(mids.iter().map(|m| map[m].clone()));
                disjuncts.push(c);
            }
        }
        let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
        let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
        let r = IntRel::from_disjuncts(
            self.in_space.as_deref(),
            &ins_ref,
            next.out_space.as_deref(),
            &outs_ref,
            disjuncts,
        )?;
        let params: Vec<String> = self.params().iter().chain(next.params()).cloned().collect();
        Ok(r.with_params(&params))
    }

    /// Relational composition `second . first` in ISCC notation equals
    /// `first.apply_range(second)`.
    pub fn compose(first: &IntRel, second: &IntRel) -> Result<IntRel, IsetError> {
        first.apply_range(second)
    }

    /// Restrict the input tuple to `dom`.
    pub fn intersect_domain(&self, dom: &IntSet) -> Result<IntRel, IsetError> {
        if dom.space() != self.in_space() || dom.arity() != self.n_in {
            return Err(IsetError::SpaceMismatch {
                left: self.in_space.clone().unwrap_or_default(),
                right: dom.space().unwrap_or_default().to_string(),
            });
        }
        let dims: Vec<&str> = self.in_dims().iter().map(String::as_str).collect();
        let renamed = dom.rename(&dims)?;
        let all: Vec<&str> = self.set.dims.iter().map(String::as_str).collect();
        let widened = IntSet::from_disjuncts(None, &all, renamed.disjuncts().to_vec())?;
        Ok(self.lift(self.set.intersect(&widened)?))
    }

    pub fn domain(&self) -> Result<IntSet, IsetError> {
        let outs: Vec<&str> = self.out_dims().iter().map(String::as_str).collect();
        Ok(self.set.project_out(&outs)?.with_space(self.in_space.as_deref()))
    }

    pub fn range(&self) -> Result<IntSet, IsetError> {
        let ins: Vec<&str> = self.in_dims().iter().map(String::as_str).collect();
        Ok(self.set.project_out(&ins)?.with_space(self.out_space.as_deref()))
    }

    pub fn is_empty(&self, opts: &SolveOptions) -> EmptinessVerdict {
        self.set.is_empty(opts)
    }

    pub fn contains(&self, input: &[i64], output: &[i64], params: &BTreeMap<String, i64>) -> Result<bool, IsetError> {
        let p: Vec<i64> = input.iter().chain(output.iter()).copied().collect();
        self.set.contains(&p, params)
    }
}

/// Strict lexicographic order between two equal-length expression vectors,
/// one conjunction per leading position.
pub fn lex_lt_conjs(a: &[AffineExpr], b: &[AffineExpr]) -> Result<Vec<Conj>, IsetError> {
    if a.len() != b.len() {
        return Err(IsetError::ArityMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut out = Vec::new();
    for i in 0..a.len() {
        let mut cs: Vec<Constraint> = (0..i).map(|k| Constraint::eq(&a[k], &b[k])).collect();
        cs.push(Constraint::lt(&a[i], &b[i]));
        out.push(Conj::new(cs));
    }
    Ok(out)
}

/// `{ [t] -> [u] : t <lex u }` over anonymous time vectors of arity `d`.
pub fn lex_lt(d: usize) -> IntRel {
    let ins: Vec<String> = (0..d).map(|i| format!("t{i}")).collect();
    let outs: Vec<String> = (0..d).map(|i| format!("u{i}")).collect();
    lex_lt_between(&ins, &outs).expect("generated names are disjoint")
}

/// Lexicographic before-relation between two named time tuples.
pub fn lex_lt_between(ins: &[String], outs: &[String]) -> Result<IntRel, IsetError> {
    let a: Vec<AffineExpr> = ins.iter().map(|n| AffineExpr::dim(n)).collect();
    let b: Vec<AffineExpr> = outs.iter().map(|n| AffineExpr::dim(n)).collect();
    let conjs = lex_lt_conjs(&a, &b)?;
    let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
    let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
    IntRel::from_disjuncts(None, &ins_ref, None, &outs_ref, conjs)
}

impl IntRel {
    /// Positionally rename both tuples to the names used by `other`.
    pub fn rename_like(&self, other: &IntRel) -> IntRel {
        let names = other.set.dims.clone();
        IntRel {
            in_space: self.in_space.clone(),
            out_space: self.out_space.clone(),
            n_in: self.n_in,
            set: IntSet {
                disjuncts: self.set.renamed_disjuncts(&names),
                dims: names,
                ..self.set.clone()
            },
        }
    }
}

/// Relations keyed by `(in_space, out_space)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UnionRel {
    rels: BTreeMap<(String, String), IntRel>,
}

impl UnionRel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, r: IntRel) -> Result<(), IsetError> {
        let key = (
            r.in_space.clone().unwrap_or_default(),
            r.out_space.clone().unwrap_or_default(),
        );
        let merged = match self.rels.remove(&key) {
            Some(prev) => prev.union_same(&r.rename_like(&prev))?,
            None => r,
        };
        self.rels.insert(key, merged);
        Ok(())
    }

    pub fn get(&self, in_space: &str, out_space: &str) -> Option<&IntRel> {
        self.rels.get(&(in_space.to_string(), out_space.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &IntRel> {
        self.rels.values()
    }

    pub fn len(&self) -> usize {
        self.rels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rels.is_empty()
    }

    pub fn params(&self) -> Vec<String> {
        let s: BTreeSet<String> = self.rels.values().flat_map(|r| r.params().iter().cloned()).collect();
        s.into_iter().collect()
    }
}

//! Affine expressions and constraints over named dimensions and parameters.

use std::collections::BTreeMap;
use std::fmt;

/// `sum(coeffs[d] * d) + sum(param_coeffs[p] * p) + constant`.
///
/// Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct AffineExpr {
    coeffs: BTreeMap<String, i64>,
    param_coeffs: BTreeMap<String, i64>,
    constant: i64,
}

fn bump(map: &mut BTreeMap<String, i64>, name: &str, by: i64) {
    if by == 0 {
        return;
    }
    let entry = map.entry(name.to_string()).or_insert(0);
    *entry += by;
    if *entry == 0 {
        map.remove(name);
    }
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: i64) -> Self {
        AffineExpr {
            constant: c,
            ..Self::default()
        }
    }

    pub fn dim(name: &str) -> Self {
        let mut e = Self::default();
        bump(&mut e.coeffs, name, 1);
        e
    }

    pub fn param(name: &str) -> Self {
        let mut e = Self::default();
        bump(&mut e.param_coeffs, name, 1);
        e
    }

    pub fn coeffs(&self) -> &BTreeMap<String, i64> {
        &self.coeffs
    }

    pub fn param_coeffs(&self) -> &BTreeMap<String, i64> {
        &self.param_coeffs
    }

    pub fn constant_term(&self) -> i64 {
        self.constant
    }

    pub fn coeff(&self, dim: &str) -> i64 {
        self.coeffs.get(dim).copied().unwrap_or(0)
    }

    pub fn param_coeff(&self, param: &str) -> i64 {
        self.param_coeffs.get(param).copied().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty() && self.param_coeffs.is_empty()
    }

    pub fn with_dim(mut self, name: &str, c: i64) -> Self {
        bump(&mut self.coeffs, name, c);
        self
    }

    pub fn with_param(mut self, name: &str, c: i64) -> Self {
        bump(&mut self.param_coeffs, name, c);
        self
    }

    pub fn plus_const(mut self, c: i64) -> Self {
        self.constant += c;
        self
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            bump(&mut out.coeffs, k, *v);
        }
        for (k, v) in &other.param_coeffs {
            bump(&mut out.param_coeffs, k, *v);
        }
        out.constant += other.constant;
        out
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1))
    }

    pub fn neg(&self) -> AffineExpr {
        self.scale(-1)
    }

    pub fn scale(&self, k: i64) -> AffineExpr {
        if k == 0 {
            return AffineExpr::zero();
        }
        AffineExpr {
            coeffs: self.coeffs.iter().map(|(n, c)| (n.clone(), c * k)).collect(),
            param_coeffs: self
                .param_coeffs
                .iter()
                .map(|(n, c)| (n.clone(), c * k))
                .collect(),
            constant: self.constant * k,
        }
    }

    /// Replace dimension `dim` by `with`.
    pub fn substitute_dim(&self, dim: &str, with: &AffineExpr) -> AffineExpr {
        let c = self.coeff(dim);
        if c == 0 {
            return self.clone();
        }
        let mut out = self.clone();
        out.coeffs.remove(dim);
        out.add(&with.scale(c))
    }

    /// Rename dimensions; names missing from `map` are kept.
    pub fn rename_dims(&self, map: &BTreeMap<String, String>) -> AffineExpr {
        let mut out = AffineExpr {
            coeffs: BTreeMap::new(),
            param_coeffs: self.param_coeffs.clone(),
            constant: self.constant,
        };
        for (n, c) in &self.coeffs {
            let to = map.get(n).unwrap_or(n);
            bump(&mut out.coeffs, to, *c);
        }
        out
    }

    /// Rename parameters; names missing from `map` are kept.
    pub fn rename_params(&self, map: &BTreeMap<String, String>) -> AffineExpr {
        let mut out = AffineExpr {
            coeffs: self.coeffs.clone(),
            param_coeffs: BTreeMap::new(),
            constant: self.constant,
        };
        for (n, c) in &self.param_coeffs {
            let to = map.get(n).unwrap_or(n);
            bump(&mut out.param_coeffs, to, *c);
        }
        out
    }

    /// Substitute the given values; names without a value stay symbolic.
    pub fn partial_eval(&self, dims: &BTreeMap<String, i64>, params: &BTreeMap<String, i64>) -> AffineExpr {
        let mut out = AffineExpr::constant(self.constant);
        for (n, c) in &self.coeffs {
            match dims.get(n) {
                Some(v) => out.constant += c * v,
                None => bump(&mut out.coeffs, n, *c),
            }
        }
        for (n, c) in &self.param_coeffs {
            match params.get(n) {
                Some(v) => out.constant += c * v,
                None => bump(&mut out.param_coeffs, n, *c),
            }
        }
        out
    }

    /// Turn the named parameters into dimensions of the same name.
    pub fn params_to_dims(&self, names: &[String]) -> AffineExpr {
        let mut out = self.clone();
        for n in names {
            let c = out.param_coeff(n);
            if c != 0 {
                out.param_coeffs.remove(n);
                bump(&mut out.coeffs, n, c);
            }
        }
        out
    }

    /// Evaluate with every dimension and parameter bound; `None` if a name is unbound.
    pub fn eval(
        &self,
        dims: &BTreeMap<String, i64>,
        params: &BTreeMap<String, i64>,
    ) -> Option<i64> {
        let mut acc = self.constant as i128;
        for (n, c) in &self.coeffs {
            acc += *c as i128 * *dims.get(n)? as i128;
        }
        for (n, c) in &self.param_coeffs {
            acc += *c as i128 * *params.get(n)? as i128;
        }
        i64::try_from(acc).ok()
    }

    /// Content gcd of the variable coefficients (0 for constants).
    pub fn var_gcd(&self) -> i64 {
        self.coeffs
            .values()
            .chain(self.param_coeffs.values())
            .fold(0, |g, c| gcd(g, c.abs()))
    }

    pub(crate) fn div_exact(&self, g: i64) -> AffineExpr {
        AffineExpr {
            coeffs: self.coeffs.iter().map(|(n, c)| (n.clone(), c / g)).collect(),
            param_coeffs: self
                .param_coeffs
                .iter()
                .map(|(n, c)| (n.clone(), c / g))
                .collect(),
            constant: self.constant / g,
        }
    }

    pub(crate) fn set_constant(&mut self, c: i64) {
        self.constant = c;
    }
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl fmt::Display for AffineExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<(&String, i64)> = self
            .coeffs
            .iter()
            .chain(self.param_coeffs.iter())
            .map(|(n, c)| (n, *c))
            .collect();
        let mut first = true;
        for (name, c) in terms {
            let mag = c.abs();
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else if c < 0 {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            if mag != 1 {
                write!(f, "{mag}{name}")?;
            } else {
                write!(f, "{name}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)?;
        } else if self.constant > 0 {
            write!(f, " + {}", self.constant)?;
        } else if self.constant < 0 {
            write!(f, " - {}", -self.constant)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintKind {
    /// `expr >= 0`
    NonNegative,
    /// `expr == 0`
    EqualsZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub expr: AffineExpr,
    pub kind: ConstraintKind,
}

/// Outcome of [`gcd_normalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normalized {
    Kept(Constraint),
    /// No variables and the constant satisfies the constraint.
    Tautology,
    ProvenInfeasible,
}

impl Constraint {
    pub fn non_negative(expr: AffineExpr) -> Self {
        Constraint {
            expr,
            kind: ConstraintKind::NonNegative,
        }
    }

    pub fn equals_zero(expr: AffineExpr) -> Self {
        Constraint {
            expr,
            kind: ConstraintKind::EqualsZero,
        }
    }

    /// `lhs >= rhs`
    pub fn ge(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::non_negative(lhs.sub(rhs))
    }

    /// `lhs <= rhs`
    pub fn le(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::non_negative(rhs.sub(lhs))
    }

    /// `lhs < rhs`
    pub fn lt(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::non_negative(rhs.sub(lhs).plus_const(-1))
    }

    /// `lhs > rhs`
    pub fn gt(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::lt(rhs, lhs)
    }

    pub fn eq(lhs: &AffineExpr, rhs: &AffineExpr) -> Self {
        Self::equals_zero(lhs.sub(rhs))
    }

    pub fn is_equality(&self) -> bool {
        self.kind == ConstraintKind::EqualsZero
    }

    pub fn holds(&self, dims: &BTreeMap<String, i64>, params: &BTreeMap<String, i64>) -> Option<bool> {
        let v = self.expr.eval(dims, params)?;
        Some(match self.kind {
            ConstraintKind::NonNegative => v >= 0,
            ConstraintKind::EqualsZero => v == 0,
        })
    }

    pub fn map_expr(&self, f: impl FnOnce(&AffineExpr) -> AffineExpr) -> Constraint {
        Constraint {
            expr: f(&self.expr),
            kind: self.kind,
        }
    }

    /// Integer complement of an inequality: `!(e >= 0)` is `-e - 1 >= 0`.
    /// Equalities complement to two strict sides.
    pub fn complement(&self) -> Vec<Constraint> {
        match self.kind {
            ConstraintKind::NonNegative => {
                vec![Constraint::non_negative(self.expr.neg().plus_const(-1))]
            }
            ConstraintKind::EqualsZero => vec![
                Constraint::non_negative(self.expr.clone().plus_const(-1)),
                Constraint::non_negative(self.expr.neg().plus_const(-1)),
            ],
        }
    }
}

/// Divide through by the gcd of the variable coefficients.
///
/// Equalities whose constant is not divisible are infeasible; inequalities are
/// tightened by flooring the constant.
pub fn gcd_normalize(c: &Constraint) -> Normalized {
    let g = c.expr.var_gcd();
    let k = c.expr.constant_term();
    if g == 0 {
        let ok = match c.kind {
            ConstraintKind::NonNegative => k >= 0,
            ConstraintKind::EqualsZero => k == 0,
        };
        return if ok {
            Normalized::Tautology
        } else {
            Normalized::ProvenInfeasible
        };
    }
    match c.kind {
        ConstraintKind::EqualsZero => {
            if k % g != 0 {
                return Normalized::ProvenInfeasible;
            }
            let mut expr = c.expr.div_exact(g);
            // sign canonical: first stored coefficient positive
            let lead = expr
                .coeffs()
                .values()
                .chain(expr.param_coeffs().values())
                .next()
                .copied()
                .unwrap_or(1);
            if lead < 0 {
                expr = expr.neg();
            }
            Normalized::Kept(Constraint::equals_zero(expr))
        }
        ConstraintKind::NonNegative => {
            let mut expr = c.expr.div_exact(g);
            expr.set_constant(k.div_euclid(g));
            Normalized::Kept(Constraint::non_negative(expr))
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ConstraintKind::NonNegative => write!(f, "{} >= 0", self.expr),
            ConstraintKind::EqualsZero => write!(f, "{} = 0", self.expr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i() -> AffineExpr {
        AffineExpr::dim("i")
    }

    #[test]
    fn zero_coefficients_are_dropped() {
        let e = i().add(&i().neg());
        assert!(e.coeffs().is_empty());
        assert_eq!(e, AffineExpr::zero());
    }

    #[test]
    fn parity_equality_is_infeasible() {
        let c = Constraint::equals_zero(i().scale(2).plus_const(-1));
        assert_eq!(gcd_normalize(&c), Normalized::ProvenInfeasible);
    }

    #[test]
    fn divisible_equality_is_reduced() {
        let c = Constraint::equals_zero(i().scale(2).plus_const(-4));
        assert_eq!(
            gcd_normalize(&c),
            Normalized::Kept(Constraint::equals_zero(i().plus_const(-2)))
        );
    }

    #[test]
    fn inequality_constant_is_floored() {
        // 3i - 4 >= 0  =>  i - 2 >= 0
        let c = Constraint::non_negative(i().scale(3).plus_const(-4));
        assert_eq!(
            gcd_normalize(&c),
            Normalized::Kept(Constraint::non_negative(i().plus_const(-2)))
        );
    }

    #[test]
    fn constant_constraints_decide_immediately() {
        assert_eq!(
            gcd_normalize(&Constraint::non_negative(AffineExpr::constant(3))),
            Normalized::Tautology
        );
        assert_eq!(
            gcd_normalize(&Constraint::non_negative(AffineExpr::constant(-1))),
            Normalized::ProvenInfeasible
        );
    }

    #[test]
    fn gcd_normalize_preserves_integer_solutions() {
        for a in -4i64..=4 {
            for b in -4i64..=4 {
                for k in -6i64..=6 {
                    for kind in [ConstraintKind::NonNegative, ConstraintKind::EqualsZero] {
                        let c = Constraint {
                            expr: AffineExpr::dim("x").scale(a).add(&AffineExpr::param("p").scale(b)).plus_const(k),
                            kind,
                        };
                        let n = gcd_normalize(&c);
                        for x in -8..=8 {
                            for p in -8..=8 {
                                let dims = BTreeMap::from([("x".to_string(), x)]);
                                let params = BTreeMap::from([("p".to_string(), p)]);
                                let before = c.holds(&dims, &params).unwrap();
                                let after = match &n {
                                    Normalized::Kept(c2) => c2.holds(&dims, &params).unwrap(),
                                    Normalized::Tautology => true,
                                    Normalized::ProvenInfeasible => false,
                                };
                                assert_eq!(before, after, "{c} at x={x} p={p}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn display_is_readable() {
        let e = i().scale(2).with_param("n", -1).plus_const(3);
        assert_eq!(e.to_string(), "2i - n + 3");
        assert_eq!(AffineExpr::constant(-2).to_string(), "-2");
    }
}

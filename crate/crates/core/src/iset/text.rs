//! ISCC-style text for sets and relations: rendering and parsing.
//!
//! Supported notation: `[n] -> { S[k] : 0 <= k < n; T[i, j] -> A[i] : ... }`,
//! formulas built from comparison chains, `and`, `or`, parentheses and
//! `exists (x, y : ...)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::expr::{AffineExpr, Constraint, ConstraintKind};
use super::rel::IntRel;
use super::set::{Conj, IntSet};
use super::IsetError;

// ---------------------------------------------------------------- rendering

fn render_tuple(space: Option<&str>, entries: &[String]) -> String {
    format!("{}[{}]", space.unwrap_or(""), entries.join(", "))
}

/// Pick the dimension a constraint is "about": the last name in `order` with a
/// unit coefficient.
fn subject<'a>(e: &AffineExpr, order: &'a [String]) -> Option<&'a String> {
    order.iter().rev().find(|d| e.coeff(d).abs() == 1)
}

fn split_sides(e: &AffineExpr) -> (AffineExpr, AffineExpr) {
    let mut pos = AffineExpr::zero();
    let mut neg = AffineExpr::zero();
    for (n, c) in e.coeffs() {
        if *c > 0 {
            pos = pos.with_dim(n, *c);
        } else {
            neg = neg.with_dim(n, -c);
        }
    }
    for (n, c) in e.param_coeffs() {
        if *c > 0 {
            pos = pos.with_param(n, *c);
        } else {
            neg = neg.with_param(n, -c);
        }
    }
    let k = e.constant_term();
    if k > 0 {
        pos = pos.plus_const(k);
    } else {
        neg = neg.plus_const(-k);
    }
    (pos, neg)
}

/// `e >= 0` as a comparison with both sides free of negative terms.
fn ineq_text(e: &AffineExpr) -> String {
    let (p, n) = split_sides(e);
    if !n.is_constant() && n.constant_term() >= 1 {
        format!("{} < {p}", n.plus_const(-1))
    } else if p.is_constant() && !n.is_constant() {
        format!("{n} <= {p}")
    } else {
        format!("{p} >= {n}")
    }
}

/// Render a conjunction. `order` lists the tuple dims then existentials.
pub fn render_conj(c: &Conj, order: &[String]) -> String {
    let mut order: Vec<String> = order.to_vec();
    order.extend(c.exists.iter().cloned());
    let mut parts: Vec<String> = Vec::new();
    let mut lowers: BTreeMap<String, Vec<AffineExpr>> = BTreeMap::new();
    let mut uppers: BTreeMap<String, Vec<AffineExpr>> = BTreeMap::new();
    let mut subjects: Vec<String> = Vec::new();
    for k in &c.constraints {
        match k.kind {
            ConstraintKind::EqualsZero => {
                if let Some(s) = subject(&k.expr, &order) {
                    let coef = k.expr.coeff(s);
                    let rest = k.expr.substitute_dim(s, &AffineExpr::zero()).scale(-coef);
                    parts.push(format!("{s} = {rest}"));
                } else {
                    let (p, n) = split_sides(&k.expr);
                    parts.push(format!("{p} = {n}"));
                }
            }
            ConstraintKind::NonNegative => {
                let picked = subject(&k.expr, &order).filter(|s| {
                    // bounds with subtracted terms read better as a plain comparison
                    let coef = k.expr.coeff(s);
                    let rest = k.expr.substitute_dim(s, &AffineExpr::zero());
                    let bound = if coef > 0 { rest.neg() } else { rest };
                    bound.coeffs().values().chain(bound.param_coeffs().values()).all(|c| *c > 0)
                });
                if let Some(s) = picked {
                    let coef = k.expr.coeff(s);
                    let rest = k.expr.substitute_dim(s, &AffineExpr::zero());
                    if !subjects.contains(s) {
                        subjects.push(s.clone());
                    }
                    if coef > 0 {
                        lowers.entry(s.clone()).or_default().push(rest.neg());
                    } else {
                        uppers.entry(s.clone()).or_default().push(rest);
                    }
                } else {
                    parts.push(ineq_text(&k.expr));
                }
            }
        }
    }
    let upper_text = |u: &AffineExpr| -> String {
        if !u.is_constant() && u.constant_term() < 0 {
            format!("< {}", u.clone().plus_const(1))
        } else {
            format!("<= {u}")
        }
    };
    for s in subjects {
        let ls = lowers.remove(&s).unwrap_or_default();
        let us = uppers.remove(&s).unwrap_or_default();
        let n = ls.len().max(us.len());
        for i in 0..n {
            match (ls.get(i), us.get(i)) {
                (Some(l), Some(u)) => parts.push(format!("{l} <= {s} {}", upper_text(u))),
                (Some(l), None) => parts.push(format!("{s} >= {l}")),
                (None, Some(u)) => parts.push(format!("{s} {}", upper_text(u))),
                (None, None) => {}
            }
        }
    }
    // substituted tuple dims can make bounds repeat
    let mut seen = std::collections::BTreeSet::new();
    parts.retain(|p| seen.insert(p.clone()));
    let body = if parts.is_empty() {
        "true".to_string()
    } else {
        parts.join(" and ")
    };
    if c.exists.is_empty() {
        body
    } else {
        format!("exists ({} : {body})", c.exists.join(", "))
    }
}

fn render_params(params: &[String]) -> String {
    if params.is_empty() {
        String::new()
    } else {
        format!("[{}] -> ", params.join(", "))
    }
}

/// `Label[dims] : formula` pieces of a set, without braces. Empty sets
/// produce no pieces.
pub fn set_pieces(s: &IntSet) -> Vec<String> {
    let head = render_tuple(s.space(), s.dims());
    s.disjuncts()
        .iter()
        .map(|d| {
            if d.constraints.is_empty() && d.exists.is_empty() {
                head.clone()
            } else {
                format!("{head} : {}", render_conj(d, s.dims()))
            }
        })
        .collect()
}

/// Same as [`set_pieces`] for relations; output coordinates fixed by an
/// equality over input dims and parameters are printed inline.
pub fn rel_pieces(r: &IntRel) -> Vec<String> {
    let ins = r.in_dims();
    let outs = r.out_dims();
    let all: Vec<String> = r.wrapped().dims().to_vec();
    r.disjuncts()
        .iter()
        .map(|d| {
            let mut d = d.clone();
            let mut entries = Vec::new();
            for o in outs {
                let pick = d.constraints.iter().position(|c| {
                    c.is_equality()
                        && c.expr.coeff(o).abs() == 1
                        && c.expr
                            .coeffs()
                            .keys()
                            .all(|n| n == o || ins.contains(n))
                });
                match pick {
                    Some(i) => {
                        let c = d.constraints.remove(i);
                        let k = c.expr.coeff(o);
                        let rest = c.expr.substitute_dim(o, &AffineExpr::zero()).scale(-k);
                        for other in d.constraints.iter_mut() {
                            *other = other.map_expr(|e| e.substitute_dim(o, &rest));
                        }
                        entries.push(rest.to_string());
                    }
                    None => entries.push(o.clone()),
                }
            }
            let head = format!(
                "{} -> {}",
                render_tuple(r.in_space(), ins),
                render_tuple(r.out_space(), &entries)
            );
            if d.constraints.is_empty() && d.exists.is_empty() {
                head
            } else {
                format!("{head} : {}", render_conj(&d, &all))
            }
        })
        .collect()
}

pub fn render_set(s: &IntSet) -> String {
    format!("{}{{ {} }}", render_params(s.params()), set_pieces(s).join("; "))
}

pub fn render_rel(r: &IntRel) -> String {
    format!("{}{{ {} }}", render_params(r.params()), rel_pieces(r).join("; "))
}

impl std::fmt::Display for IntSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&render_set(self))
    }
}

impl std::fmt::Display for IntRel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&render_rel(self))
    }
}

// ------------------------------------------------------------------ lexing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(&'static str),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, IsetError> {
    let mut out = Vec::new();
    let b = src.as_bytes();
    let mut i = 0;
    const SYMS: [&str; 17] = [
        "->", "<=", ">=", "==", "<", ">", "=", "+", "-", "*", "(", ")", "[", "]", "{", "}", ",",
    ];
    while i < b.len() {
        let ch = b[i] as char;
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch == '#' {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if ch.is_ascii_digit() {
            let start = i;
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let v: i64 = src[start..i].parse().map_err(|_| IsetError::Parse {
                pos: start,
                msg: "integer literal out of range".into(),
            })?;
            out.push((Tok::Int(v), start));
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'\'') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), start));
            continue;
        }
        if ch == ':' || ch == ';' {
            out.push((Tok::Sym(if ch == ':' { ":" } else { ";" }), i));
            i += 1;
            continue;
        }
        let rest = &src[i..];
        match SYMS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                out.push((Tok::Sym(s), i));
                i += s.len();
            }
            None => {
                return Err(IsetError::Parse {
                    pos: i,
                    msg: format!("unexpected character {ch:?}"),
                })
            }
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------ parsing

#[derive(Debug, Clone)]
enum Formula {
    Atom(Vec<Constraint>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<String>, Box<Formula>),
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    src_len: usize,
    /// Names that denote dimensions (tuple dims and bound existentials).
    dims: Vec<String>,
    params: BTreeSet<String>,
    /// Accept undeclared names as parameters.
    open_params: bool,
    _src: &'a str,
}

impl Parser<'_> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.1).unwrap_or(self.src_len)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, IsetError> {
        Err(IsetError::Parse {
            pos: self.pos(),
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn peek_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn peek_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), IsetError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<String, IsetError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.at += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn name_expr(&mut self, name: &str) -> Result<AffineExpr, IsetError> {
        if self.dims.iter().any(|d| d == name) {
            Ok(AffineExpr::dim(name))
        } else if self.params.contains(name) {
            Ok(AffineExpr::param(name))
        } else if self.open_params {
            self.params.insert(name.to_string());
            Ok(AffineExpr::param(name))
        } else {
            self.err(format!("unknown name '{name}'"))
        }
    }

    fn expr(&mut self) -> Result<AffineExpr, IsetError> {
        let mut acc = if self.eat_sym("-") {
            self.term()?.neg()
        } else {
            self.eat_sym("+");
            self.term()?
        };
        loop {
            if self.eat_sym("+") {
                acc = acc.add(&self.term()?);
            } else if self.eat_sym("-") {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<AffineExpr, IsetError> {
        let mut acc = self.factor()?;
        while self.eat_sym("*") {
            let rhs = self.factor()?;
            if acc.is_constant() {
                acc = rhs.scale(acc.constant_term());
            } else if rhs.is_constant() {
                acc = acc.scale(rhs.constant_term());
            } else {
                return self.err("non-affine product");
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<AffineExpr, IsetError> {
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.at += 1;
                // implicit product: 2i, 2(i + 1)
                match self.peek().cloned() {
                    Some(Tok::Ident(n)) if !is_keyword(&n) => {
                        self.at += 1;
                        Ok(self.name_expr(&n)?.scale(v))
                    }
                    Some(Tok::Sym("(")) => {
                        self.at += 1;
                        let e = self.expr()?;
                        self.expect_sym(")")?;
                        Ok(e.scale(v))
                    }
                    _ => Ok(AffineExpr::constant(v)),
                }
            }
            Some(Tok::Ident(n)) if !is_keyword(&n) => {
                self.at += 1;
                self.name_expr(&n)
            }
            Some(Tok::Sym("(")) => {
                self.at += 1;
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Sym("-")) => {
                self.at += 1;
                Ok(self.factor()?.neg())
            }
            _ => self.err("expected expression"),
        }
    }

    fn cmp(&mut self) -> Option<&'static str> {
        for s in ["<=", ">=", "==", "<", ">", "="] {
            if self.eat_sym(s) {
                return Some(s);
            }
        }
        None
    }

    fn chain(&mut self) -> Result<Vec<Constraint>, IsetError> {
        let mut lhs = self.expr()?;
        let mut out = Vec::new();
        let Some(mut op) = self.cmp() else {
            return self.err("expected comparison");
        };
        loop {
            let rhs = self.expr()?;
            out.push(match op {
                "<=" => Constraint::le(&lhs, &rhs),
                ">=" => Constraint::ge(&lhs, &rhs),
                "<" => Constraint::lt(&lhs, &rhs),
                ">" => Constraint::gt(&lhs, &rhs),
                _ => Constraint::eq(&lhs, &rhs),
            });
            lhs = rhs;
            match self.cmp() {
                Some(o) => op = o,
                None => return Ok(out),
            }
        }
    }

    /// Parenthesized formula or a parenthesized leading expression of a chain.
    fn paren_atom(&mut self) -> Result<Formula, IsetError> {
        let save = self.at;
        self.at += 1; // '('
        if let Ok(f) = self.formula() {
            if self.eat_sym(")") && !self.at_cmp_or_arith() {
                return Ok(f);
            }
        }
        self.at = save;
        Ok(Formula::Atom(self.chain()?))
    }

    fn at_cmp_or_arith(&self) -> bool {
        ["<=", ">=", "==", "<", ">", "=", "+", "-", "*"]
            .iter()
            .any(|s| self.peek_sym(s))
    }

    fn atom(&mut self) -> Result<Formula, IsetError> {
        if self.peek_kw("true") {
            self.at += 1;
            return Ok(Formula::Atom(Vec::new()));
        }
        if self.peek_kw("false") {
            self.at += 1;
            return Ok(Formula::Or(Vec::new()));
        }
        if self.peek_kw("exists") {
            self.at += 1;
            let paren = self.eat_sym("(");
            let mut names = vec![self.ident()?];
            while self.eat_sym(",") {
                names.push(self.ident()?);
            }
            self.expect_sym(":")?;
            let before = self.dims.len();
            self.dims.extend(names.iter().cloned());
            let body = if paren {
                let b = self.formula()?;
                self.expect_sym(")")?;
                b
            } else {
                self.conjunction()?
            };
            self.dims.truncate(before);
            return Ok(Formula::Exists(names, Box::new(body)));
        }
        if self.peek_sym("(") {
            return self.paren_atom();
        }
        Ok(Formula::Atom(self.chain()?))
    }

    fn conjunction(&mut self) -> Result<Formula, IsetError> {
        let mut parts = vec![self.atom()?];
        while self.peek_kw("and") {
            self.at += 1;
            parts.push(self.atom()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
    }

    fn formula(&mut self) -> Result<Formula, IsetError> {
        let mut parts = vec![self.conjunction()?];
        while self.peek_kw("or") {
            self.at += 1;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
    }

    fn tuple(&mut self) -> Result<(Option<String>, Vec<AffineExpr>, Vec<Option<String>>), IsetError> {
        let label = match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.at += 1;
                Some(s)
            }
            _ => None,
        };
        self.expect_sym("[")?;
        let mut exprs = Vec::new();
        let mut names = Vec::new();
        if !self.peek_sym("]") {
            loop {
                // a bare fresh identifier declares a dimension
                let fresh = match (self.toks.get(self.at), self.toks.get(self.at + 1)) {
                    (Some((Tok::Ident(n), _)), Some((Tok::Sym(s), _)))
                        if (*s == "," || *s == "]")
                            && !self.dims.contains(n)
                            && !self.params.contains(n) =>
                    {
                        Some(n.clone())
                    }
                    _ => None,
                };
                match fresh {
                    Some(n) => {
                        self.at += 1;
                        self.dims.push(n.clone());
                        exprs.push(AffineExpr::dim(&n));
                        names.push(Some(n));
                    }
                    None => {
                        exprs.push(self.expr()?);
                        names.push(None);
                    }
                }
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("]")?;
        Ok((label, exprs, names))
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "and" | "or" | "exists" | "true" | "false")
}

/// Distribute to disjunctive normal form, renaming bound names to `_e*`.
fn to_dnf(f: &Formula, counter: &mut usize) -> Vec<Conj> {
    match f {
        Formula::Atom(cs) => vec![Conj::new(cs.clone())],
        Formula::Or(parts) => parts.iter().flat_map(|p| to_dnf(p, counter)).collect(),
        Formula::And(parts) => {
            let mut acc = vec![Conj::default()];
            for p in parts {
                let rhs = to_dnf(p, counter);
                let mut next = Vec::new();
                for a in &acc {
                    for b in &rhs {
                        let mut c = a.clone();
                        c.constraints.extend(b.constraints.iter().cloned());
                        c.exists.extend(b.exists.iter().cloned());
                        next.push(c);
                    }
                }
                acc = next;
            }
            acc
        }
        Formula::Exists(names, body) => {
            let mut map = BTreeMap::new();
            for n in names {
                map.insert(n.clone(), format!("_e{}", *counter));
                *counter += 1;
            }
            to_dnf(body, counter)
                .into_iter()
                .map(|c| {
                    let mut c = c.rename_dims(&map);
                    c.exists.extend(map.values().cloned());
                    c
                })
                .collect()
        }
    }
}

/// One parsed `tuple [-> tuple] [: formula]` piece.
#[derive(Debug, Clone)]
pub enum Piece {
    Set(IntSet),
    Rel(IntRel),
}

/// Parse `[params] -> { piece; piece }`.
pub fn parse_union(src: &str) -> Result<Vec<Piece>, IsetError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        src_len: src.len(),
        dims: Vec::new(),
        params: BTreeSet::new(),
        open_params: false,
        _src: src,
    };
    if p.eat_sym("[") {
        if !p.peek_sym("]") {
            loop {
                let n = p.ident()?;
                p.params.insert(n);
                if !p.eat_sym(",") {
                    break;
                }
            }
        }
        p.expect_sym("]")?;
        p.expect_sym("->")?;
    }
    p.expect_sym("{")?;
    let mut pieces = Vec::new();
    let mut counter = 0usize;
    while !p.peek_sym("}") {
        p.dims.clear();
        let (label, in_exprs, in_names) = p.tuple()?;
        let mut constraints = Vec::new();
        let mut in_dims = Vec::new();
        let mut gen = 0;
        let mut fresh = |p: &Parser, base: &str| loop {
            let n = format!("{base}{gen}");
            gen += 1;
            if !p.dims.contains(&n) && !p.params.contains(&n) {
                break n;
            }
        };
        for (e, n) in in_exprs.iter().zip(in_names.iter()) {
            match n {
                Some(n) => in_dims.push(n.clone()),
                None => {
                    let d = fresh(&p, "i");
                    constraints.push(Constraint::eq(&AffineExpr::dim(&d), e));
                    p.dims.push(d.clone());
                    in_dims.push(d);
                }
            }
        }
        let out = if p.eat_sym("->") {
            let (olabel, out_exprs, out_names) = p.tuple()?;
            let mut out_dims = Vec::new();
            for (e, n) in out_exprs.iter().zip(out_names.iter()) {
                match n {
                    Some(n) => out_dims.push(n.clone()),
                    None => {
                        let d = fresh(&p, "o");
                        constraints.push(Constraint::eq(&AffineExpr::dim(&d), e));
                        p.dims.push(d.clone());
                        out_dims.push(d);
                    }
                }
            }
            Some((olabel, out_dims))
        } else {
            None
        };
        let mut disjuncts = if p.eat_sym(":") {
            to_dnf(&p.formula()?, &mut counter)
        } else {
            vec![Conj::default()]
        };
        for d in disjuncts.iter_mut() {
            d.constraints.extend(constraints.iter().cloned());
        }
        let params: Vec<String> = p.params.iter().cloned().collect();
        let ins: Vec<&str> = in_dims.iter().map(String::as_str).collect();
        match out {
            None => pieces.push(Piece::Set(
                IntSet::from_disjuncts(label.as_deref(), &ins, disjuncts)?.with_params(&params),
            )),
            Some((olabel, out_dims)) => {
                let outs: Vec<&str> = out_dims.iter().map(String::as_str).collect();
                pieces.push(Piece::Rel(
                    IntRel::from_disjuncts(label.as_deref(), &ins, olabel.as_deref(), &outs, disjuncts)?
                        .with_params(&params),
                ))
            }
        }
        if !p.eat_sym(";") {
            break;
        }
    }
    p.expect_sym("}")?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(pieces)
}

/// Parse text whose pieces all describe one set; pieces are united.
pub fn parse_set(src: &str) -> Result<IntSet, IsetError> {
    let mut acc: Option<IntSet> = None;
    for piece in parse_union(src)? {
        let Piece::Set(s) = piece else {
            return Err(IsetError::Parse { pos: 0, msg: "expected a set, found a relation".into() });
        };
        acc = Some(match acc {
            None => s,
            Some(a) => a.union_same(&s)?,
        });
    }
    acc.ok_or_else(|| IsetError::Parse { pos: 0, msg: "empty set literal has no space".into() })
}

/// Relation counterpart of [`parse_set`].
pub fn parse_rel(src: &str) -> Result<IntRel, IsetError> {
    let mut acc: Option<IntRel> = None;
    for piece in parse_union(src)? {
        let Piece::Rel(r) = piece else {
            return Err(IsetError::Parse { pos: 0, msg: "expected a relation, found a set".into() });
        };
        acc = Some(match acc {
            None => r,
            Some(a) => a.union_same(&r)?,
        });
    }
    acc.ok_or_else(|| IsetError::Parse { pos: 0, msg: "empty relation literal has no space".into() })
}

/// Parse a formula over known dims; names not in `dims` must be in `params`
/// unless `params` is `None`, in which case they become parameters.
pub fn parse_formula(src: &str, dims: &[String], params: Option<&[String]>) -> Result<(Vec<Conj>, Vec<String>), IsetError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
        src_len: src.len(),
        dims: dims.to_vec(),
        params: params.map(|ps| ps.iter().cloned().collect()).unwrap_or_default(),
        open_params: params.is_none(),
        _src: src,
    };
    let f = p.formula()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    let mut counter = 0;
    Ok((to_dnf(&f, &mut counter), p.params.into_iter().collect()))
}

/// Parse one affine expression.
pub fn parse_affine(src: &str, dims: &[String], params: Option<&[String]>) -> Result<AffineExpr, IsetError> {
    let mut p = Parser {
        toks: lex(src)?,
        at: 0,
        src_len: src.len(),
        dims: dims.to_vec(),
        params: params.map(|ps| ps.iter().cloned().collect()).unwrap_or_default(),
        open_params: params.is_none(),
        _src: src,
    };
    let e = p.expr()?;
    if p.at != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

/// Render a brace block with one piece per line, as used by script emission.
pub fn block(params: &[String], pieces: &[String], indent: &str) -> String {
    let mut out = String::new();
    out.push_str(&render_params(params));
    if pieces.is_empty() {
        out.push_str("{ }");
        return out;
    }
    out.push_str("{\n");
    for (i, p) in pieces.iter().enumerate() {
        let sep = if i + 1 < pieces.len() { ";" } else { "" };
        let _ = writeln!(out, "{indent}{p}{sep}");
    }
    out.push('}');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn only_set(src: &str) -> IntSet {
        parse_set(src).unwrap()
    }

    fn only_rel(src: &str) -> IntRel {
        parse_rel(src).unwrap()
    }

    #[test]
    fn renders_paired_bounds() {
        let s = only_set("[n] -> { S[k] : 0 <= k < n }");
        assert_eq!(s.to_string(), "[n] -> { S[k] : 0 <= k < n }");
    }

    #[test]
    fn renders_relation_outputs_inline() {
        let r = only_rel("[n] -> { T[i, j] -> A[i] : 0 <= i < n and 0 <= j < n }");
        assert_eq!(r.to_string(), "[n] -> { T[i, j] -> A[i] : 0 <= i < n and 0 <= j < n }");
        let r = only_rel("{ T[i, j] -> C[i + j] }");
        assert_eq!(r.to_string(), "{ T[i, j] -> C[i + j] }");
    }

    #[test]
    fn parses_disjunctions_and_exists() {
        let s = only_set("{ [x] : (0 <= x <= 2 or x = 7) and exists (y : x = 2y) }");
        let got: Vec<i64> = (-3..10)
            .filter(|v| s.contains(&[*v], &BTreeMap::new()).unwrap())
            .collect();
        assert_eq!(got, vec![0, 2]);
    }

    #[test]
    fn parses_implicit_products_and_parenthesized_expressions() {
        let s = only_set("[n] -> { [x] : 2x >= 3 and (x + 1) < n }");
        let params = BTreeMap::from([("n".to_string(), 5)]);
        let got: Vec<i64> = (-3..10).filter(|v| s.contains(&[*v], &params).unwrap()).collect();
        assert_eq!(got, vec![2, 3]);
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(parse_union("{ S[k] : k < m }"), Err(IsetError::Parse { .. })));
    }

    #[test]
    fn render_then_parse_round_trips() {
        let s = only_set("[n, m] -> { S[i, j] : 0 <= i < n and i <= j <= m + 3 and 2i + j >= 1; S[i, j] : i = j and 0 <= i <= 2 }");
        let text = s.to_string();
        let back = only_set(&text);
        let params = BTreeMap::from([("n".to_string(), 4), ("m".to_string(), 2)]);
        for i in -2..7 {
            for j in -2..7 {
                assert_eq!(
                    s.contains(&[i, j], &params).unwrap(),
                    back.contains(&[i, j], &params).unwrap(),
                    "{text} at ({i}, {j})"
                );
            }
        }
    }

    #[test]
    fn formula_collects_open_params() {
        let dims = vec!["k".to_string()];
        let (conjs, params) = parse_formula("0 <= k < n and k <= m", &dims, None).unwrap();
        assert_eq!(conjs.len(), 1);
        assert_eq!(params, vec!["m".to_string(), "n".to_string()]);
    }
}

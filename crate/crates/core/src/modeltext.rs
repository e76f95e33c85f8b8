//! Line-oriented text format for hand-written kernel models.
//!
//! ```text
//! kernel polyp
//! param n in [1, 64]
//! array C global f32 [n, n]
//! statement S [k]
//!   domain 0 <= k < n
//!   write C[k, k]
//! schedule
//!   S[k] -> [0, 0, k, 0]
//! ```
//!
//! Other top-level lines: `params a, b`, `param T per block` (a value that is
//! uniform within a block but not across blocks), `data rs = rowPtr[bid_x]`,
//! `context <formula>`, `note <text>`, and a `grid` section holding
//! `block <dim> : <extent>` / `thread <dim> : <extent>` lines. Index
//! coordinates are affine expressions, lookups `colInd[ptr]` into read-only
//! arrays, or `*` for an unknown in-bounds value.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::iset::text::{parse_affine, parse_formula, render_conj};
use crate::iset::{AffineExpr, Conj, Constraint, IntSet, IsetError};
use crate::kmodel::{
    Access, ArrayRef, Axis, DataSource, ElemKind, GridBinding, IndexExpr, KernelModel, MemSpace,
    ModelError, ParamDecl, ParamScope, PhasedSchedule, Statement,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelTextError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn syntax<T>(line: usize, msg: impl Into<String>) -> Result<T, ModelTextError> {
    Err(ModelTextError::Syntax { line, msg: msg.into() })
}

fn set_err(line: usize) -> impl Fn(IsetError) -> ModelTextError {
    move |e| ModelTextError::Syntax {
        line,
        msg: e.to_string(),
    }
}

/// Split on commas that are not nested in brackets or parentheses.
fn split_top(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            _ => {}
        }
        if ch == ',' && depth == 0 {
            out.push(cur.trim().to_string());
            cur.clear();
        } else {
            cur.push(ch);
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

/// `name[inner]` -> (name, inner); the brackets must close at the end.
fn split_subscript(s: &str) -> Option<(&str, &str)> {
    let s = s.trim();
    let open = s.find('[')?;
    if !s.ends_with(']') {
        return None;
    }
    let name = s[..open].trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((name, &s[open + 1..s.len() - 1]))
}

fn ident_ok(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// `[lo, hi]` after an `in` keyword.
fn parse_range(s: &str, line: usize, params: &[String]) -> Result<(AffineExpr, AffineExpr), ModelTextError> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or(())
        .or_else(|_| syntax(line, "expected [lo, hi]"))?;
    let parts = split_top(inner);
    if parts.len() != 2 {
        return syntax(line, "expected [lo, hi]");
    }
    let lo = parse_affine(&parts[0], &[], Some(params)).map_err(set_err(line))?;
    let hi = parse_affine(&parts[1], &[], Some(params)).map_err(set_err(line))?;
    Ok((lo, hi))
}

enum Section {
    Top,
    Grid,
    Statement,
    Schedule,
}

struct StmtDraft {
    label: String,
    dims: Vec<String>,
    domain: Vec<Conj>,
    reads: Vec<Access>,
    writes: Vec<Access>,
}

pub fn parse_model(src: &str) -> Result<KernelModel, ModelTextError> {
    let mut m = KernelModel::default();
    let mut section = Section::Top;
    let mut stmts: Vec<StmtDraft> = Vec::new();
    let mut times: BTreeMap<String, Vec<AffineExpr>> = BTreeMap::new();
    let mut saw_kernel = false;
    for (ln0, raw) in src.lines().enumerate() {
        let line = ln0 + 1;
        let text = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if text.is_empty() {
            continue;
        }
        let (kw, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], text[i..].trim()),
            None => (text, ""),
        };
        let params = m.param_names();
        match kw {
            "kernel" => {
                if saw_kernel {
                    return syntax(line, "duplicate kernel line");
                }
                if !ident_ok(rest) {
                    return syntax(line, "expected kernel name");
                }
                m.name = rest.to_string();
                saw_kernel = true;
                section = Section::Top;
                continue;
            }
            "params" => {
                for p in split_top(rest) {
                    if !ident_ok(&p) {
                        return syntax(line, format!("bad parameter name '{p}'"));
                    }
                    m.params.push(ParamDecl::plain(&p));
                }
                section = Section::Top;
                continue;
            }
            "param" | "data" => {
                let (rest, scope) = match rest.rsplit_once(" per ") {
                    Some((r, "block")) => (r.trim(), Some(ParamScope::Block)),
                    Some((r, "thread")) => (r.trim(), Some(ParamScope::Thread)),
                    Some(_) => return syntax(line, "expected 'per block' or 'per thread'"),
                    None => (rest, None),
                };
                if scope.is_some() && kw == "data" {
                    return syntax(line, "the scope of a data parameter follows from its source");
                }
                let (head, range) = match rest.find(" in ") {
                    Some(i) => (&rest[..i], Some(&rest[i + 4..])),
                    None => (rest, None),
                };
                let mut decl;
                if kw == "param" {
                    if !ident_ok(head.trim()) {
                        return syntax(line, "expected parameter name");
                    }
                    decl = ParamDecl::plain(head.trim());
                } else {
                    let Some((name, source)) = head.split_once('=') else {
                        return syntax(line, "expected data <name> = <array>[<index>]");
                    };
                    let name = name.trim();
                    let Some((arr, inner)) = split_subscript(source) else {
                        return syntax(line, "expected <array>[<index>]");
                    };
                    if !ident_ok(name) {
                        return syntax(line, "expected parameter name");
                    }
                    let grid_dims = m.grid.dims();
                    let index = split_top(inner)
                        .iter()
                        .map(|e| parse_affine(e, &grid_dims, Some(&params)).map_err(set_err(line)))
                        .collect::<Result<Vec<_>, _>>()?;
                    decl = ParamDecl::plain(name);
                    decl.source = Some(DataSource {
                        array: arr.to_string(),
                        index,
                    });
                    decl.scope = ParamScope::Kernel;
                }
                if let Some(r) = range {
                    let (lo, hi) = parse_range(r, line, &params)?;
                    if !lo.is_constant() || !hi.is_constant() {
                        return syntax(line, "parameter bounds must be integers");
                    }
                    decl.lower = Some(lo.constant_term());
                    decl.upper = Some(hi.constant_term());
                }
                if let Some(sc) = scope {
                    decl.scope = sc;
                }
                m.params.push(decl);
                section = Section::Top;
                continue;
            }
            "context" => {
                let (conjs, _) = parse_formula(rest, &[], Some(&params)).map_err(set_err(line))?;
                if conjs.len() != 1 || !conjs[0].exists.is_empty() {
                    return syntax(line, "context must be a conjunction");
                }
                m.context.extend(conjs[0].constraints.iter().cloned());
                section = Section::Top;
                continue;
            }
            "note" => {
                m.notes.push(rest.to_string());
                continue;
            }
            "array" => {
                m.arrays.push(parse_array(rest, line, &params)?);
                section = Section::Top;
                continue;
            }
            "grid" => {
                section = Section::Grid;
                continue;
            }
            "schedule" => {
                section = Section::Schedule;
                continue;
            }
            "statement" => {
                let Some((label, inner)) = split_subscript(rest) else {
                    return syntax(line, "expected statement <Label> [dims]");
                };
                let label = label.trim_end();
                let dims: Vec<String> = split_top(inner);
                for d in &dims {
                    if !ident_ok(d) || params.contains(d) {
                        return syntax(line, format!("bad dimension name '{d}'"));
                    }
                }
                stmts.push(StmtDraft {
                    label: label.to_string(),
                    dims,
                    domain: vec![Conj::default()],
                    reads: vec![],
                    writes: vec![],
                });
                section = Section::Statement;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Grid => {
                let is_block = match kw {
                    "block" => true,
                    "thread" => false,
                    _ => return syntax(line, format!("unexpected '{kw}' in grid section")),
                };
                let Some((dim, ext)) = rest.split_once(':') else {
                    return syntax(line, "expected <dim> : <extent>");
                };
                let dim = dim.trim();
                if !ident_ok(dim) {
                    return syntax(line, "bad grid dimension name");
                }
                let extent = parse_affine(ext, &[], Some(&params)).map_err(set_err(line))?;
                let list = if is_block { &mut m.grid.blocks } else { &mut m.grid.threads };
                if list.len() == 3 {
                    return syntax(line, "at most three grid dimensions per level");
                }
                let axis = Axis::ALL[list.len()];
                list.push(GridBinding {
                    dim: dim.to_string(),
                    axis,
                    extent,
                });
            }
            Section::Statement => {
                let st = stmts.last_mut().expect("statement section");
                match kw {
                    "domain" => {
                        let (conjs, _) = parse_formula(rest, &st.dims, Some(&params)).map_err(set_err(line))?;
                        let mut next = Vec::new();
                        for a in &st.domain {
                            for b in &conjs {
                                let mut c = a.clone();
                                let offset = c.exists.len();
                                let map: BTreeMap<String, String> = b
                                    .exists
                                    .iter()
                                    .enumerate()
                                    .map(|(i, e)| (e.clone(), format!("_e{}", offset + i)))
                                    .collect();
                                let b = b.rename_dims(&map);
                                c.constraints.extend(b.constraints);
                                c.exists.extend(b.exists);
                                next.push(c);
                            }
                        }
                        st.domain = next;
                    }
                    "read" | "write" => {
                        let acc = parse_access(rest, line, &st.dims, &params)?;
                        if kw == "read" {
                            st.reads.push(acc);
                        } else {
                            st.writes.push(acc);
                        }
                    }
                    _ => return syntax(line, format!("unexpected '{kw}' in statement section")),
                }
            }
            Section::Schedule => {
                let Some((lhs, rhs)) = text.split_once("->") else {
                    return syntax(line, "expected <Label>[dims] -> [time]");
                };
                let Some((label, inner)) = split_subscript(lhs) else {
                    return syntax(line, "expected <Label>[dims]");
                };
                let Some(st) = stmts.iter().find(|s| s.label == label) else {
                    return syntax(line, format!("unknown statement '{label}'"));
                };
                let named = split_top(inner);
                if named != st.dims {
                    return syntax(line, format!("schedule tuple must repeat the dims of {label}"));
                }
                let rhs = rhs.trim();
                let body = rhs
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or(())
                    .or_else(|_| syntax(line, "expected [time]"))?;
                let t = split_top(body)
                    .iter()
                    .map(|e| parse_affine(e, &st.dims, Some(&params)).map_err(set_err(line)))
                    .collect::<Result<Vec<_>, _>>()?;
                if times.insert(label.to_string(), t).is_some() {
                    return syntax(line, format!("duplicate schedule for {label}"));
                }
            }
            Section::Top => return syntax(line, format!("unexpected '{kw}'")),
        }
    }
    if !saw_kernel {
        return syntax(1, "missing kernel line");
    }
    for st in stmts {
        let dims: Vec<&str> = st.dims.iter().map(String::as_str).collect();
        let domain = IntSet::from_disjuncts(Some(&st.label), &dims, st.domain)
            .map_err(ModelError::from)?
            .with_params(&m.param_names());
        m.statements.push(Statement {
            label: st.label,
            dims: st.dims,
            domain,
            reads: st.reads,
            writes: st.writes,
        });
    }
    m.schedule = PhasedSchedule { times };
    Ok(m.validated()?)
}

fn parse_array(rest: &str, line: usize, params: &[String]) -> Result<ArrayRef, ModelTextError> {
    let (head, range) = match rest.find(" in ") {
        Some(i) => (&rest[..i], Some(&rest[i + 4..])),
        None => (rest, None),
    };
    let open = head.find('[').ok_or(()).or_else(|_| syntax(line, "expected extents"))?;
    let words: Vec<&str> = head[..open].split_whitespace().collect();
    if words.len() != 3 {
        return syntax(line, "expected array <name> <space> <type> [extents]");
    }
    let space = MemSpace::from_keyword(words[1])
        .ok_or(())
        .or_else(|_| syntax(line, format!("unknown memory space '{}'", words[1])))?;
    let elem = ElemKind::from_keyword(words[2])
        .ok_or(())
        .or_else(|_| syntax(line, format!("unknown element type '{}'", words[2])))?;
    let inner = head[open..]
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or(())
        .or_else(|_| syntax(line, "expected extents"))?;
    let extents = split_top(inner)
        .iter()
        .map(|e| {
            if e == "?" {
                Ok(None)
            } else {
                parse_affine(e, &[], Some(params)).map(Some).map_err(set_err(line))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let values = match range {
        Some(r) => Some(parse_range(r, line, params)?),
        None => None,
    };
    if !ident_ok(words[0]) {
        return syntax(line, "bad array name");
    }
    Ok(ArrayRef {
        name: words[0].to_string(),
        space,
        elem,
        extents,
        values,
    })
}

fn parse_access(rest: &str, line: usize, dims: &[String], params: &[String]) -> Result<Access, ModelTextError> {
    let Some((arr, inner)) = split_subscript(rest) else {
        return syntax(line, "expected <array>[<index>, ...]");
    };
    let mut index = Vec::new();
    for part in split_top(inner) {
        if part == "*" {
            index.push(IndexExpr::Unknown);
        } else if let Some((src, sub)) = split_subscript(&part) {
            let idx = split_top(sub)
                .iter()
                .map(|e| parse_affine(e, dims, Some(params)).map_err(set_err(line)))
                .collect::<Result<Vec<_>, _>>()?;
            index.push(IndexExpr::Data {
                array: src.to_string(),
                index: idx,
            });
        } else {
            index.push(IndexExpr::Affine(parse_affine(&part, dims, Some(params)).map_err(set_err(line))?));
        }
    }
    Ok(Access {
        array: arr.to_string(),
        index,
    })
}

fn join_exprs(es: &[AffineExpr]) -> String {
    es.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(", ")
}

fn render_access(a: &Access) -> String {
    let parts: Vec<String> = a
        .index
        .iter()
        .map(|ix| match ix {
            IndexExpr::Affine(e) => e.to_string(),
            IndexExpr::Data { array, index } => format!("{array}[{}]", join_exprs(index)),
            IndexExpr::Unknown => "*".to_string(),
        })
        .collect();
    format!("{}[{}]", a.array, parts.join(", "))
}

/// A domain as a formula over the statement dims.
pub fn render_formula(set: &IntSet) -> String {
    let ds = set.disjuncts();
    match ds.len() {
        0 => "false".to_string(),
        1 => render_conj(&ds[0], set.dims()),
        _ => ds
            .iter()
            .map(|d| format!("({})", render_conj(d, set.dims())))
            .collect::<Vec<_>>()
            .join(" or "),
    }
}

fn render_constraint(c: &Constraint) -> String {
    render_conj(&Conj::new(vec![c.clone()]), &[])
}

pub fn render_model(m: &KernelModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kernel {}", m.name);
    let bounds = |p: &ParamDecl| match (p.lower, p.upper) {
        (Some(lo), Some(hi)) => format!(" in [{lo}, {hi}]"),
        _ => String::new(),
    };
    for p in m.params.iter().filter(|p| p.source.is_none()) {
        let scope = match p.scope {
            ParamScope::Kernel => "",
            ParamScope::Block => " per block",
            ParamScope::Thread => " per thread",
        };
        let _ = writeln!(out, "param {}{}{scope}", p.name, bounds(p));
    }
    // grid dims must be known before data parameters index by them
    if !m.grid.is_empty() {
        out.push_str("grid\n");
        for b in &m.grid.blocks {
            let _ = writeln!(out, "  block {} : {}", b.dim, b.extent);
        }
        for b in &m.grid.threads {
            let _ = writeln!(out, "  thread {} : {}", b.dim, b.extent);
        }
    }
    for p in &m.params {
        if let Some(src) = &p.source {
            let _ = writeln!(out, "data {} = {}[{}]{}", p.name, src.array, join_exprs(&src.index), bounds(p));
        }
    }
    for p in &m.params {
        // half-open bounds go to the context
        match (p.lower, p.upper) {
            (Some(lo), None) => {
                let _ = writeln!(out, "context {} >= {lo}", p.name);
            }
            (None, Some(hi)) => {
                let _ = writeln!(out, "context {} <= {hi}", p.name);
            }
            _ => {}
        }
    }
    for c in &m.context {
        let _ = writeln!(out, "context {}", render_constraint(c));
    }
    for a in &m.arrays {
        let ext: Vec<String> = a
            .extents
            .iter()
            .map(|e| e.as_ref().map(|e| e.to_string()).unwrap_or_else(|| "?".into()))
            .collect();
        let range = match &a.values {
            Some((lo, hi)) => format!(" in [{lo}, {hi}]"),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "array {} {} {} [{}]{range}",
            a.name,
            a.space.keyword(),
            a.elem.keyword(),
            ext.join(", ")
        );
    }
    for n in &m.notes {
        let _ = writeln!(out, "note {n}");
    }
    for s in &m.statements {
        let _ = writeln!(out, "statement {} [{}]", s.label, s.dims.join(", "));
        let only_true = s.domain.disjuncts().len() == 1 && s.domain.disjuncts()[0].constraints.is_empty();
        if !only_true {
            let _ = writeln!(out, "  domain {}", render_formula(&s.domain));
        }
        for r in &s.reads {
            let _ = writeln!(out, "  read {}", render_access(r));
        }
        for w in &s.writes {
            let _ = writeln!(out, "  write {}", render_access(w));
        }
    }
    if !m.statements.is_empty() {
        out.push_str("schedule\n");
        for s in &m.statements {
            if let Some(t) = m.schedule.times.get(&s.label) {
                let _ = writeln!(out, "  {}[{}] -> [{}]", s.label, s.dims.join(", "), join_exprs(t));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const POLYP: &str = "\
kernel polyp
param n in [1, 16]
array A global f32 [n]
array B global f32 [n]
array C global f32 [n, n]
statement S [k]
  domain 0 <= k < n
  write C[k, k]
statement T [i, j]
  domain 0 <= i < n and 0 <= j < n
  read A[i]
  read B[j]
  write C[i, j]
schedule
  S[k] -> [0, 0, k, 0]
  T[i, j] -> [0, 1, i, j]
";

    #[test]
    fn parses_sections() {
        let m = parse_model(POLYP).unwrap();
        assert_eq!(m.statements.len(), 2);
        assert_eq!(m.statements[1].reads.len(), 2);
        assert_eq!(m.param("n").unwrap().upper, Some(16));
        assert_eq!(m.schedule.arity(), 4);
    }

    #[test]
    fn render_round_trips() {
        let m = parse_model(POLYP).unwrap();
        let text = render_model(&m);
        let back = parse_model(&text).unwrap();
        assert_eq!(render_model(&back), text);
        assert_eq!(back.statements.len(), m.statements.len());
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_model("kernel k\nstatement S [i]\n  domain i < m\n").unwrap_err();
        assert!(matches!(err, ModelTextError::Syntax { line: 3, .. }), "{err}");
    }

    #[test]
    fn data_lookups_and_wildcards() {
        let src = "\
kernel t
params K
array colInd global i32 [4] in [0, K - 1]
array B global f32 [K]
statement R [p]
  domain 0 <= p < 4
  read B[colInd[p]]
  read B[*]
schedule
  R[p] -> [0, p]
";
        let m = parse_model(src).unwrap();
        assert!(matches!(m.statements[0].reads[0].index[0], IndexExpr::Data { .. }));
        assert!(matches!(m.statements[0].reads[1].index[0], IndexExpr::Unknown));
        assert_eq!(parse_model(&render_model(&m)).unwrap().statements, m.statements);
    }
}

//! Concrete instances: parameter values, array contents and the grid.
//!
//! ```text
//! # Ge-SpMM on a 4x4 matrix with 6 nonzeros
//! grid 2 / 4
//! param M = 4
//! array rowPtr = [0, 5, 6, 6, 6]
//! csr rowPtr colInd K
//! ```

use std::collections::BTreeMap;

use crate::depcheck::{Specialization, Table};
use crate::kmodel::{Axis, KernelModel};
use crate::miniir::GridShape;

use super::OracleError;

/// `rowPtr`/`colInd` pair that must form a valid CSR structure with
/// `cols` columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrDecl {
    pub row_ptr: String,
    pub col_ind: String,
    /// A parameter name or an integer literal.
    pub cols: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConcreteInstance {
    pub params: BTreeMap<String, i64>,
    /// Row-major contents.
    pub arrays: BTreeMap<String, Vec<i64>>,
    pub grid: Option<GridShape>,
    pub csr: Vec<CsrDecl>,
}

fn parse_int(s: &str) -> Option<i64> {
    s.trim().parse().ok()
}

fn parse_triple(s: &str) -> Option<[i64; 3]> {
    let parts: Vec<i64> = s.split(',').map(parse_int).collect::<Option<_>>()?;
    if parts.is_empty() || parts.len() > 3 || parts.iter().any(|v| *v < 1) {
        return None;
    }
    let mut out = [1; 3];
    out[..parts.len()].copy_from_slice(&parts);
    Some(out)
}

/// `bx[,by,bz] / tx[,ty,tz]`.
pub fn parse_grid(s: &str) -> Option<GridShape> {
    let (b, t) = s.split_once('/')?;
    Some(GridShape {
        blocks: parse_triple(b)?,
        threads: parse_triple(t)?,
    })
}

impl ConcreteInstance {
    pub fn parse(src: &str) -> Result<Self, OracleError> {
        let mut inst = ConcreteInstance::default();
        for (n, raw) in src.lines().enumerate() {
            let line = n + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |msg: &str| OracleError::Instance {
                line,
                msg: msg.to_string(),
            };
            let (kw, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
            let rest = rest.trim();
            match kw {
                "grid" => {
                    let g = parse_grid(rest).ok_or_else(|| err("expected `grid bx[,by,bz] / tx[,ty,tz]`"))?;
                    inst.grid = Some(g);
                }
                "param" => {
                    let (name, value) = rest.split_once('=').ok_or_else(|| err("expected `param NAME = VALUE`"))?;
                    let name = name.trim();
                    if !is_ident(name) {
                        return Err(err("bad parameter name"));
                    }
                    let v = parse_int(value).ok_or_else(|| err("expected an integer value"))?;
                    inst.params.insert(name.to_string(), v);
                }
                "array" => {
                    let (name, value) = rest.split_once('=').ok_or_else(|| err("expected `array NAME = [v, ...]`"))?;
                    let name = name.trim();
                    if !is_ident(name) {
                        return Err(err("bad array name"));
                    }
                    let body = value
                        .trim()
                        .strip_prefix('[')
                        .and_then(|v| v.strip_suffix(']'))
                        .ok_or_else(|| err("array contents must be bracketed"))?;
                    let data: Vec<i64> = if body.trim().is_empty() {
                        Vec::new()
                    } else {
                        body.split(',').map(parse_int).collect::<Option<_>>().ok_or_else(|| err("expected integers"))?
                    };
                    inst.arrays.insert(name.to_string(), data);
                }
                "csr" => {
                    let parts: Vec<&str> = rest.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(err("expected `csr ROWPTR COLIND COLS`"));
                    }
                    inst.csr.push(CsrDecl {
                        row_ptr: parts[0].to_string(),
                        col_ind: parts[1].to_string(),
                        cols: parts[2].to_string(),
                    });
                }
                other => return Err(err(&format!("unknown directive '{other}'"))),
            }
        }
        if let Some(g) = inst.grid {
            for a in Axis::ALL {
                inst.params.entry(format!("griddim_{}", a.suffix())).or_insert(g.blocks[a.index()]);
                inst.params.entry(format!("blockdim_{}", a.suffix())).or_insert(g.threads[a.index()]);
            }
        }
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_grid(mut self, g: GridShape) -> Self {
        self.grid = Some(g);
        for a in Axis::ALL {
            self.params.insert(format!("griddim_{}", a.suffix()), g.blocks[a.index()]);
            self.params.insert(format!("blockdim_{}", a.suffix()), g.threads[a.index()]);
        }
        self
    }

    /// CSR invariants of every `csr` declaration.
    pub fn validate(&self) -> Result<(), OracleError> {
        for c in &self.csr {
            let bad = |m: String| OracleError::InvalidInstance(format!("{}/{}: {m}", c.row_ptr, c.col_ind));
            let rp = self
                .arrays
                .get(&c.row_ptr)
                .ok_or_else(|| bad(format!("no array {}", c.row_ptr)))?;
            let ci = self
                .arrays
                .get(&c.col_ind)
                .ok_or_else(|| bad(format!("no array {}", c.col_ind)))?;
            let cols = match c.cols.parse::<i64>() {
                Ok(v) => v,
                Err(_) => *self
                    .params
                    .get(&c.cols)
                    .ok_or_else(|| bad(format!("no value for {}", c.cols)))?,
            };
            if rp.first() != Some(&0) {
                return Err(bad("row pointers must start at 0".into()));
            }
            if rp.windows(2).any(|w| w[0] > w[1]) {
                return Err(bad("row pointers must be nondecreasing".into()));
            }
            if *rp.last().unwrap() != ci.len() as i64 {
                return Err(bad(format!(
                    "last row pointer is {} but there are {} column indices",
                    rp.last().unwrap(),
                    ci.len()
                )));
            }
            if let Some(v) = ci.iter().find(|v| **v < 0 || **v >= cols) {
                return Err(bad(format!("column index {v} outside [0, {cols})")));
            }
        }
        Ok(())
    }

    /// Concrete values for narrowing a symbolic check of `model` to this
    /// instance. Array shapes come from the model's extents.
    pub fn specialization(&self, model: &KernelModel) -> Specialization {
        let mut tables = BTreeMap::new();
        for (name, data) in &self.arrays {
            let extents = model
                .array(name)
                .and_then(|a| {
                    a.extents
                        .iter()
                        .map(|e| e.as_ref().and_then(|e| e.eval(&BTreeMap::new(), &self.params)))
                        .collect::<Option<Vec<i64>>>()
                })
                .filter(|ex| ex.iter().product::<i64>() == data.len() as i64)
                .unwrap_or_else(|| vec![data.len() as i64]);
            tables.insert(
                name.clone(),
                Table {
                    extents,
                    data: data.clone(),
                },
            );
        }
        Specialization {
            params: self.params.clone(),
            tables,
        }
    }
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

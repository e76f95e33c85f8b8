//! Line-oriented parser and verifier.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::cfg::Dominators;
use super::MiniIrError;
use crate::iset::AffineExpr;
use crate::kmodel::{ElemKind, MemSpace};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Reg(String),
    Ident(String),
    Int(i64),
    Sym(char),
    Newline,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

fn lex(src: &str) -> Result<Vec<Spanned>, MiniIrError> {
    let mut out = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line = ln + 1;
        let text = match raw.find(';') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            if c.is_whitespace() {
                i += 1;
            } else if c == '%' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                if i == start {
                    return Err(MiniIrError::SyntaxError {
                        line,
                        col,
                        expected: "register name after '%'".into(),
                    });
                }
                out.push(Spanned {
                    tok: Tok::Reg(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<i64>().map_err(|_| MiniIrError::SyntaxError {
                    line,
                    col,
                    expected: "integer literal in range".into(),
                })?;
                out.push(Spanned {
                    tok: Tok::Int(v),
                    line,
                    col,
                });
            } else if is_ident_start(c) {
                let start = i;
                while i < chars.len() && is_ident_char(chars[i]) {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line,
                    col,
                });
            } else if ",[](){}=:@*+-?".contains(c) {
                out.push(Spanned {
                    tok: Tok::Sym(c),
                    line,
                    col,
                });
                i += 1;
            } else {
                return Err(MiniIrError::SyntaxError {
                    line,
                    col,
                    expected: format!("a token, found '{c}'"),
                });
            }
        }
        out.push(Spanned {
            tok: Tok::Newline,
            line,
            col: chars.len() + 1,
        });
    }
    Ok(out)
}

const TYPES: [&str; 9] = ["i1", "i8", "i16", "i32", "i64", "f16", "f32", "f64", "ptr"];

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
    eof_line: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|s| &s.tok)
    }

    fn pos(&self) -> (usize, usize) {
        match self.toks.get(self.at) {
            Some(s) => (s.line, s.col),
            None => (self.eof_line, 1),
        }
    }

    fn err<T>(&self, expected: impl Into<String>) -> Result<T, MiniIrError> {
        let (line, col) = self.pos();
        Err(MiniIrError::SyntaxError {
            line,
            col,
            expected: expected.into(),
        })
    }

    fn skip_newlines(&mut self) {
        while self.peek() == Some(&Tok::Newline) {
            self.at += 1;
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), MiniIrError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("'{c}'"))
        }
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(x)) if x == s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, MiniIrError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err(what.to_string()),
        }
    }

    fn reg(&mut self, what: &str) -> Result<String, MiniIrError> {
        match self.peek() {
            Some(Tok::Reg(s)) => {
                let s = s.clone();
                self.at += 1;
                Ok(s)
            }
            _ => self.err(what.to_string()),
        }
    }

    fn int(&mut self) -> Result<i64, MiniIrError> {
        let neg = self.eat_sym('-');
        match self.peek() {
            Some(Tok::Int(v)) => {
                let v = *v;
                self.at += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.err("integer"),
        }
    }

    fn end_of_line(&mut self) -> Result<(), MiniIrError> {
        match self.peek() {
            Some(Tok::Newline) | None => {
                self.skip_newlines();
                Ok(())
            }
            _ => self.err("end of line"),
        }
    }

    fn elem(&mut self) -> Result<ElemKind, MiniIrError> {
        let (line, col) = self.pos();
        let s = self.ident("element type")?;
        ElemKind::from_keyword(&s).ok_or(MiniIrError::SyntaxError {
            line,
            col,
            expected: "element type (i1..i64, f16..f64)".into(),
        })
    }

    /// `3`, `%n`, `2 * %n`, joined by `+` / `-`.
    fn lin(&mut self, scalars: &BTreeSet<String>) -> Result<AffineExpr, MiniIrError> {
        let mut acc = AffineExpr::zero();
        let mut sign = if self.eat_sym('-') { -1 } else { 1 };
        loop {
            let term = match self.peek() {
                Some(Tok::Int(v)) => {
                    let v = *v;
                    self.at += 1;
                    if self.eat_sym('*') {
                        let (line, col) = self.pos();
                        let r = self.reg("parameter")?;
                        if !scalars.contains(&r) {
                            return Err(MiniIrError::SyntaxError {
                                line,
                                col,
                                expected: format!("scalar parameter, found %{r}"),
                            });
                        }
                        AffineExpr::param(&r).scale(v)
                    } else {
                        AffineExpr::constant(v)
                    }
                }
                Some(Tok::Reg(r)) => {
                    if !scalars.contains(r) {
                        return self.err(format!("scalar parameter, found %{r}"));
                    }
                    let e = AffineExpr::param(r);
                    self.at += 1;
                    e
                }
                _ => return self.err("integer or scalar parameter"),
            };
            acc = acc.add(&term.scale(sign));
            if self.eat_sym('+') {
                sign = 1;
            } else if self.eat_sym('-') {
                sign = -1;
            } else {
                return Ok(acc);
            }
        }
    }

    fn operand(&mut self) -> Result<Operand, MiniIrError> {
        match self.peek() {
            Some(Tok::Reg(r)) => {
                let r = r.clone();
                self.at += 1;
                Ok(Operand::Reg(r))
            }
            Some(Tok::Int(_)) | Some(Tok::Sym('-')) => Ok(Operand::Int(self.int()?)),
            _ => self.err("operand (%register or integer)"),
        }
    }

    fn skip_type(&mut self) -> Option<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if TYPES.contains(&s.as_str()) => {
                let s = s.clone();
                self.at += 1;
                Some(s)
            }
            _ => None,
        }
    }

    fn address(&mut self) -> Result<Address, MiniIrError> {
        let base = self.reg("array or pointer register")?;
        let mut index = Vec::new();
        if self.eat_sym('[') {
            loop {
                index.push(self.operand()?);
                if self.eat_sym(']') {
                    break;
                }
                self.expect_sym(',')?;
            }
        }
        Ok(Address { base, index })
    }
}

fn parse_param(p: &mut Parser, scalars: &BTreeSet<String>) -> Result<Param, MiniIrError> {
    let name = p.reg("parameter name")?;
    p.expect_sym(':')?;
    if p.eat_ident("ptr") {
        let space = match p.peek() {
            Some(Tok::Ident(s)) if MemSpace::from_keyword(s).is_some() => {
                let sp = MemSpace::from_keyword(s).unwrap();
                p.at += 1;
                sp
            }
            _ => MemSpace::Global,
        };
        let elem = p.elem()?;
        let mut extents = vec![None];
        if p.eat_sym('[') {
            extents.clear();
            loop {
                if p.eat_sym('?') {
                    extents.push(None);
                } else {
                    extents.push(Some(p.lin(scalars)?));
                }
                if p.eat_sym(']') {
                    break;
                }
                p.expect_sym(',')?;
            }
        }
        let mut values = None;
        if p.eat_ident("in") {
            p.expect_sym('[')?;
            let lo = p.lin(scalars)?;
            p.expect_sym(',')?;
            let hi = p.lin(scalars)?;
            p.expect_sym(']')?;
            values = Some((lo, hi));
        }
        Ok(Param {
            name,
            ty: ParamType::Array {
                space,
                elem,
                extents,
                values,
            },
        })
    } else {
        Ok(Param {
            name,
            ty: ParamType::Scalar(p.elem()?),
        })
    }
}

/// `[4 x i32]` or `[4 x [8 x f32]]`.
fn parse_shared_type(p: &mut Parser) -> Result<(Vec<i64>, ElemKind), MiniIrError> {
    p.expect_sym('[')?;
    let n = p.int()?;
    if n < 1 {
        return p.err("positive extent");
    }
    if !p.eat_ident("x") {
        return p.err("'x'");
    }
    let (mut rest, elem) = if p.peek() == Some(&Tok::Sym('[')) {
        parse_shared_type(p)?
    } else {
        (vec![], p.elem()?)
    };
    p.expect_sym(']')?;
    rest.insert(0, n);
    Ok((rest, elem))
}

fn parse_inst(p: &mut Parser, line: usize) -> Result<Instruction, MiniIrError> {
    let mut result = None;
    if let Some(Tok::Reg(r)) = p.peek() {
        let r = r.clone();
        p.at += 1;
        p.expect_sym('=')?;
        result = Some(r);
    }
    let (oline, ocol) = p.pos();
    let op = p.ident("opcode")?;
    let needs_result = |has: bool, want: bool| -> Result<(), MiniIrError> {
        if has != want {
            Err(MiniIrError::SyntaxError {
                line: oline,
                col: ocol,
                expected: if want {
                    format!("a result register for '{op}'")
                } else {
                    format!("no result register for '{op}'")
                },
            })
        } else {
            Ok(())
        }
    };
    let has = result.is_some();
    let mut ty = None;
    let kind = if let Some(bop) = BinOp::parse(&op) {
        needs_result(has, true)?;
        ty = p.skip_type();
        let lhs = p.operand()?;
        p.expect_sym(',')?;
        let rhs = p.operand()?;
        InstKind::Bin { op: bop, lhs, rhs }
    } else {
        match op.as_str() {
            "icmp" => {
                needs_result(has, true)?;
                let (l, c) = p.pos();
                let ps = p.ident("comparison predicate")?;
                let pred = CmpPred::parse(&ps).ok_or(MiniIrError::SyntaxError {
                    line: l,
                    col: c,
                    expected: "comparison predicate (eq, ne, slt, sle, sgt, sge)".into(),
                })?;
                ty = p.skip_type();
                let lhs = p.operand()?;
                p.expect_sym(',')?;
                let rhs = p.operand()?;
                InstKind::Cmp { pred, lhs, rhs }
            }
            "select" => {
                needs_result(has, true)?;
                ty = p.skip_type();
                let cond = p.operand()?;
                p.expect_sym(',')?;
                let a = p.operand()?;
                p.expect_sym(',')?;
                let b = p.operand()?;
                InstKind::Select { cond, a, b }
            }
            "load" => {
                needs_result(has, true)?;
                ty = p.skip_type();
                InstKind::Load { addr: p.address()? }
            }
            "store" => {
                needs_result(has, false)?;
                ty = p.skip_type();
                let value = p.operand()?;
                p.expect_sym(',')?;
                InstKind::Store {
                    value,
                    addr: p.address()?,
                }
            }
            "getelem" => {
                needs_result(has, true)?;
                InstKind::GetElem { addr: p.address()? }
            }
            "phi" => {
                needs_result(has, true)?;
                ty = p.skip_type();
                let mut incoming = Vec::new();
                loop {
                    p.expect_sym('[')?;
                    let v = p.operand()?;
                    p.expect_sym(',')?;
                    let l = p.ident("block label")?;
                    p.expect_sym(']')?;
                    incoming.push((v, l));
                    if !p.eat_sym(',') {
                        break;
                    }
                }
                InstKind::Phi { incoming }
            }
            "call" => {
                if p.eat_sym('@') {
                    let callee = p.ident("function name")?;
                    p.expect_sym('(')?;
                    let mut args = Vec::new();
                    if !p.eat_sym(')') {
                        loop {
                            args.push(p.operand()?);
                            if p.eat_sym(')') {
                                break;
                            }
                            p.expect_sym(',')?;
                        }
                    }
                    InstKind::Call { callee, args }
                } else {
                    needs_result(has, true)?;
                    let (l, c) = p.pos();
                    let name = p.ident("intrinsic (tid.x, bid.x, blockdim.x, griddim.x, ...)")?;
                    let i = Intrinsic::parse(&name).ok_or(MiniIrError::SyntaxError {
                        line: l,
                        col: c,
                        expected: "intrinsic (tid.x, bid.x, blockdim.x, griddim.x, ...)".into(),
                    })?;
                    InstKind::Intrinsic(i)
                }
            }
            "barrier" | "barrier.block" => {
                needs_result(has, false)?;
                InstKind::Barrier(BarrierScope::Block)
            }
            "br" => {
                needs_result(has, false)?;
                if let Some(Tok::Ident(_)) = p.peek() {
                    InstKind::Br(p.ident("block label")?)
                } else {
                    let cond = p.operand()?;
                    p.expect_sym(',')?;
                    let then_ = p.ident("block label")?;
                    p.expect_sym(',')?;
                    let else_ = p.ident("block label")?;
                    InstKind::CondBr { cond, then_, else_ }
                }
            }
            "ret" => {
                needs_result(has, false)?;
                InstKind::Ret
            }
            _ => {
                if let Some(w) = op.strip_prefix("barrier.warp") {
                    needs_result(has, false)?;
                    let width: u32 = w.parse().ok().filter(|w| *w >= 1).ok_or(MiniIrError::SyntaxError {
                        line: oline,
                        col: ocol,
                        expected: "warp width, e.g. barrier.warp32".into(),
                    })?;
                    InstKind::Barrier(BarrierScope::Warp(width))
                } else if let Some(aop) = op.strip_prefix("atomic.") {
                    ty = p.skip_type();
                    let addr = p.address()?;
                    p.expect_sym(',')?;
                    let value = p.operand()?;
                    InstKind::Atomic {
                        op: aop.to_string(),
                        addr,
                        value,
                    }
                } else {
                    return Err(MiniIrError::UnknownOpcode { line: oline, op });
                }
            }
        }
    };
    p.end_of_line()?;
    Ok(Instruction { result, kind, ty, line })
}

pub fn parse(src: &str) -> Result<Function, MiniIrError> {
    let toks = lex(src)?;
    let eof_line = src.lines().count().max(1);
    let mut p = Parser { toks, at: 0, eof_line };
    p.skip_newlines();
    if !p.eat_ident("kernel") {
        return p.err("'kernel'");
    }
    p.expect_sym('@')?;
    let name = p.ident("kernel name")?;
    p.expect_sym('(')?;
    // scalar names first, so extents can refer to later parameters
    let scalars: BTreeSet<String> = {
        let mut s = BTreeSet::new();
        let mut i = p.at;
        while i + 2 < p.toks.len() && p.toks[i].tok != Tok::Sym(')') {
            if let (Tok::Reg(r), Tok::Sym(':'), Tok::Ident(t)) = (&p.toks[i].tok, &p.toks[i + 1].tok, &p.toks[i + 2].tok) {
                if t != "ptr" {
                    s.insert(r.clone());
                }
            }
            i += 1;
        }
        s
    };
    let mut params = Vec::new();
    p.skip_newlines();
    if !p.eat_sym(')') {
        loop {
            p.skip_newlines();
            params.push(parse_param(&mut p, &scalars)?);
            p.skip_newlines();
            if p.eat_sym(')') {
                break;
            }
            p.expect_sym(',')?;
        }
    }
    p.skip_newlines();
    let mut shared = Vec::new();
    if p.eat_ident("shared") {
        loop {
            p.skip_newlines();
            let n = p.reg("shared array name")?;
            p.expect_sym(':')?;
            let (extents, elem) = parse_shared_type(&mut p)?;
            shared.push(SharedDecl { name: n, extents, elem });
            p.skip_newlines();
            if !p.eat_sym(',') {
                break;
            }
        }
    }
    p.skip_newlines();
    p.expect_sym('{')?;
    p.skip_newlines();
    let mut blocks: Vec<Block> = Vec::new();
    loop {
        match p.peek() {
            Some(Tok::Sym('}')) => {
                p.at += 1;
                break;
            }
            None => return p.err("'}'"),
            Some(Tok::Ident(s)) if matches!(p.toks.get(p.at + 1).map(|t| &t.tok), Some(Tok::Sym(':'))) => {
                let label = s.clone();
                p.at += 2;
                p.end_of_line()?;
                blocks.push(Block { label, insts: vec![] });
            }
            _ => {
                let line = p.pos().0;
                let inst = parse_inst(&mut p, line)?;
                match blocks.last_mut() {
                    Some(b) => b.insts.push(inst),
                    None => {
                        return Err(MiniIrError::SyntaxError {
                            line,
                            col: 1,
                            expected: "a block label before the first instruction".into(),
                        })
                    }
                }
            }
        }
    }
    p.skip_newlines();
    if p.peek().is_some() {
        return p.err("end of input after '}'");
    }
    if blocks.is_empty() {
        blocks.push(Block {
            label: "entry".into(),
            insts: vec![Instruction {
                result: None,
                kind: InstKind::Ret,
                ty: None,
                line: eof_line,
            }],
        });
    }
    verify(Function {
        name,
        params,
        shared,
        blocks,
        index: BTreeMap::new(),
        succs: vec![],
        preds: vec![],
    })
}

fn verify(mut f: Function) -> Result<Function, MiniIrError> {
    let cfg = |m: String| MiniIrError::MalformedCfg(m);
    let ssa = |m: String| MiniIrError::SsaViolation(m);
    for (i, b) in f.blocks.iter().enumerate() {
        if f.index.insert(b.label.clone(), i).is_some() {
            return Err(cfg(format!("duplicate block label '{}'", b.label)));
        }
    }
    let mut names: BTreeSet<String> = BTreeSet::new();
    for prm in &f.params {
        if !names.insert(prm.name.clone()) {
            return Err(ssa(format!("parameter %{} declared twice", prm.name)));
        }
    }
    for s in &f.shared {
        if !names.insert(s.name.clone()) {
            return Err(ssa(format!("%{} declared twice", s.name)));
        }
    }
    let mut succs = Vec::new();
    for b in &f.blocks {
        let Some(last) = b.insts.last() else {
            return Err(cfg(format!("block '{}' is empty", b.label)));
        };
        if !last.kind.is_terminator() {
            return Err(cfg(format!("block '{}' does not end with a terminator", b.label)));
        }
        let mut seen_other = false;
        for (i, inst) in b.insts.iter().enumerate() {
            if inst.kind.is_terminator() && i + 1 != b.insts.len() {
                return Err(cfg(format!("line {}: terminator in the middle of block '{}'", inst.line, b.label)));
            }
            if matches!(inst.kind, InstKind::Phi { .. }) {
                if seen_other {
                    return Err(cfg(format!("line {}: phi after other instructions", inst.line)));
                }
            } else {
                seen_other = true;
            }
            if let Some(r) = &inst.result {
                if !names.insert(r.clone()) {
                    return Err(ssa(format!("line {}: %{r} defined more than once", inst.line)));
                }
            }
        }
        let mut out = Vec::new();
        for l in last.kind.successors() {
            let t = *f
                .index
                .get(l)
                .ok_or_else(|| cfg(format!("line {}: branch to unknown block '{l}'", last.line)))?;
            if !out.contains(&t) {
                out.push(t);
            }
        }
        succs.push(out);
    }
    let mut preds = vec![Vec::new(); f.blocks.len()];
    for (b, ss) in succs.iter().enumerate() {
        for &s in ss {
            preds[s].push(b);
        }
    }
    if !preds[0].is_empty() {
        return Err(cfg(format!("entry block '{}' has predecessors", f.blocks[0].label)));
    }
    f.succs = succs;
    f.preds = preds;
    let dom = Dominators::compute(&f);
    for (b, blk) in f.blocks.iter().enumerate() {
        if !dom.reachable(b) {
            return Err(cfg(format!("block '{}' is unreachable", blk.label)));
        }
    }
    // definitions dominate uses
    let defs = f.definitions();
    let arrays: BTreeSet<String> = f
        .params
        .iter()
        .filter(|p| matches!(p.ty, ParamType::Array { .. }))
        .map(|p| p.name.clone())
        .chain(f.shared.iter().map(|s| s.name.clone()))
        .collect();
    let pointers: BTreeSet<String> = f
        .instructions()
        .filter(|(_, _, i)| matches!(i.kind, InstKind::GetElem { .. }))
        .filter_map(|(_, _, i)| i.result.clone())
        .collect();
    let dominated = |r: &str, b: usize, pos: usize| -> bool {
        match defs.get(r) {
            Some(None) => true,
            Some(Some((db, dp))) => (*db == b && *dp < pos) || (*db != b && dom.dominates(*db, b)),
            None => false,
        }
    };
    for (b, i, inst) in f.instructions() {
        let check_value = |o: &Operand, at_block: usize, at_pos: usize| -> Result<(), MiniIrError> {
            if let Operand::Reg(r) = o {
                if !defs.contains_key(r) {
                    return Err(ssa(format!("line {}: %{r} is used but never defined", inst.line)));
                }
                if arrays.contains(r) || pointers.contains(r) {
                    return Err(ssa(format!("line {}: %{r} is not a value", inst.line)));
                }
                if !dominated(r, at_block, at_pos) {
                    return Err(ssa(format!("line {}: use of %{r} is not dominated by its definition", inst.line)));
                }
            }
            Ok(())
        };
        if let InstKind::Phi { incoming } = &inst.kind {
            let mut labels: Vec<usize> = Vec::new();
            for (v, l) in incoming {
                let pb = *f
                    .index
                    .get(l)
                    .ok_or_else(|| cfg(format!("line {}: phi names unknown block '{l}'", inst.line)))?;
                if labels.contains(&pb) {
                    return Err(cfg(format!("line {}: phi lists '{l}' twice", inst.line)));
                }
                labels.push(pb);
                check_value(v, pb, usize::MAX)?;
            }
            let mut want = f.preds[b].clone();
            want.sort_unstable();
            labels.sort_unstable();
            if want != labels {
                return Err(cfg(format!(
                    "line {}: phi incoming blocks do not match the predecessors of '{}'",
                    inst.line, f.blocks[b].label
                )));
            }
            continue;
        }
        for o in inst.kind.uses() {
            check_value(o, b, i)?;
        }
        if let Some(addr) = inst.kind.address() {
            let ok_base = if matches!(inst.kind, InstKind::GetElem { .. }) {
                arrays.contains(&addr.base)
            } else {
                arrays.contains(&addr.base) || (pointers.contains(&addr.base) && addr.index.is_empty())
            };
            if !ok_base {
                return Err(ssa(format!("line {}: %{} is not an array here", inst.line, addr.base)));
            }
            if pointers.contains(&addr.base) && !dominated(&addr.base, b, i) {
                return Err(ssa(format!(
                    "line {}: use of %{} is not dominated by its definition",
                    inst.line, addr.base
                )));
            }
        }
    }
    Ok(f)
}

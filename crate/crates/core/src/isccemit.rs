//! ISCC script emission and report rendering.

use std::fmt::Write as _;

use serde_json::{json, Value};

use crate::depcheck::{ConflictWitness, Dependence, DependenceReport, InstanceRef, PairVerdict, Verdict};
use crate::iset::text::{block, rel_pieces, set_pieces};
use crate::iset::{AffineExpr, Constraint, IntRel};
use crate::kmodel::{AccessKind, IndexExpr, KernelModel, ModelError, Statement, Access};

const INDENT: &str = "    ";

/// The dependence test appended to every script.
const TAIL: &str = "\
# Dependence test: join writes and reads through the common cells and keep
# the pairs the schedule orders.
Before := Schedule << Schedule;
RaW := (Write . (Read^-1)) * Before;
WaW := (Write . (Write^-1)) * Before;
WaR := (Read . (Write^-1)) * Before;
print \"RaW\";
print RaW;
print \"WaW\";
print WaW;
print \"WaR\";
print WaR;
";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsccScript {
    pub prologue: String,
    pub domain: String,
    pub read: String,
    pub write: String,
    pub schedule: String,
    pub tail: String,
}

impl IsccScript {
    pub fn text(&self) -> String {
        [
            self.prologue.as_str(),
            self.domain.as_str(),
            self.read.as_str(),
            self.write.as_str(),
            self.schedule.as_str(),
            self.tail.as_str(),
        ]
        .join("\n")
    }
}

impl std::fmt::Display for IsccScript {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text())
    }
}

/// Access map as printed in the script: affine coordinates inline, lookups
/// and unknown coordinates ranging over what the array can hold.
fn script_access(model: &KernelModel, s: &Statement, acc: &Access) -> Result<IntRel, ModelError> {
    let arr = model
        .array(&acc.array)
        .ok_or_else(|| ModelError::UnknownArray(acc.array.clone()))?;
    let outs: Vec<String> = (0..acc.index.len()).map(|k| format!("o{k}")).collect();
    let mut cs = Vec::new();
    for (k, ix) in acc.index.iter().enumerate() {
        let ov = AffineExpr::dim(&outs[k]);
        let range = match ix {
            IndexExpr::Affine(e) => {
                cs.push(Constraint::eq(&ov, e));
                None
            }
            IndexExpr::Data { array, .. } => model.array(array).and_then(|a| a.values.clone()),
            IndexExpr::Unknown => None,
        };
        if let Some((lo, hi)) = range {
            cs.push(Constraint::ge(&ov, &lo));
            cs.push(Constraint::le(&ov, &hi));
        } else if !matches!(ix, IndexExpr::Affine(_)) {
            if let Some(Some(ext)) = arr.extents.get(k) {
                cs.push(Constraint::ge(&ov, &AffineExpr::zero()));
                cs.push(Constraint::lt(&ov, ext));
            }
        }
    }
    // fresh output names must not collide with statement dims
    let outs: Vec<String> = outs
        .into_iter()
        .map(|o| if s.dims.contains(&o) { format!("{o}_") } else { o })
        .collect();
    let fixed: Vec<Constraint> = cs
        .into_iter()
        .map(|c| {
            c.map_expr(|e| {
                let map = (0..acc.index.len())
                    .map(|k| (format!("o{k}"), outs[k].clone()))
                    .collect();
                e.rename_dims(&map)
            })
        })
        .collect();
    let ins: Vec<&str> = s.dims.iter().map(String::as_str).collect();
    let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
    Ok(IntRel::from_constraints(Some(&s.label), &ins, Some(&arr.name), &outs_ref, fixed)?
        .with_params(&model.param_names()))
}

fn access_block(model: &KernelModel, params: &[String], kind: AccessKind) -> Result<String, ModelError> {
    let mut pieces = Vec::new();
    for s in &model.statements {
        for (k, acc) in s.accesses() {
            if k != kind {
                continue;
            }
            for p in rel_pieces(&script_access(model, s, acc)?) {
                if !pieces.contains(&p) {
                    pieces.push(p);
                }
            }
        }
    }
    Ok(block(params, &pieces, INDENT))
}

pub fn emit(model: &KernelModel) -> Result<IsccScript, ModelError> {
    let params = model.param_names();
    let mut prologue = String::new();
    let _ = writeln!(prologue, "# Kernel {}", model.name);
    for p in &model.params {
        if let Some(src) = &p.source {
            let idx: Vec<String> = src.index.iter().map(|e| e.to_string()).collect();
            let _ = writeln!(prologue, "# {} stands for {}[{}]", p.name, src.array, idx.join(", "));
        }
    }
    for a in &model.arrays {
        let _ = writeln!(prologue, "# {} {} {}", a.name, a.space.keyword(), a.elem.keyword());
    }
    for n in &model.notes {
        let _ = writeln!(prologue, "# note: {n}");
    }

    let mut dom_pieces = Vec::new();
    for s in &model.statements {
        dom_pieces.extend(set_pieces(&model.full_domain(s)?));
    }
    let domain = format!("Domain := {};\n", block(&params, &dom_pieces, INDENT));
    let read = format!(
        "Read := {} * Domain;\n",
        access_block(model, &params, AccessKind::Read)?
    );
    let write = format!(
        "Write := {} * Domain;\n",
        access_block(model, &params, AccessKind::Write)?
    );
    let mut sched_pieces = Vec::new();
    for s in &model.statements {
        if let Some(t) = model.schedule.times.get(&s.label) {
            let ts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
            sched_pieces.push(format!("{}[{}] -> [{}]", s.label, s.dims.join(", "), ts.join(", ")));
        }
    }
    let schedule = format!("Schedule := {};\n", block(&params, &sched_pieces, INDENT));
    Ok(IsccScript {
        prologue,
        domain,
        read,
        write,
        schedule,
        tail: TAIL.to_string(),
    })
}

fn instance_text(i: &InstanceRef) -> String {
    let vals: Vec<String> = i.values.iter().map(|(d, v)| format!("{d}={v}")).collect();
    format!("{}[{}] (phase {})", i.statement, vals.join(", "), i.phase)
}

fn witness_text(w: &ConflictWitness) -> String {
    let cell: Vec<String> = w.cell.iter().map(|c| c.to_string()).collect();
    let mut line = format!(
        "{} on {}[{}]: {} and {}",
        w.kind.name(),
        w.array,
        cell.join(", "),
        instance_text(&w.source),
        instance_text(&w.target)
    );
    if !w.params.is_empty() {
        let ps: Vec<String> = w.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = write!(line, " with {}", ps.join(", "));
    }
    line
}

fn dependence_text(d: &Dependence) -> String {
    let state = match &d.verdict {
        PairVerdict::Empty => "empty".to_string(),
        PairVerdict::Found(w) => format!("non-empty, e.g. {}", witness_text(w)),
        PairVerdict::Inconclusive(r) => format!("undecided: {r}"),
    };
    format!("{} {} -> {} on {}: {state}\n    {}", d.kind.name(), d.source, d.target, d.array, d.relation)
}

pub fn emit_report_text(report: &DependenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "kernel {}", report.kernel);
    let _ = writeln!(out, "verdict: {}", report.verdict.token());
    match &report.verdict {
        Verdict::RaceFree => {}
        Verdict::RaceFound(ws) => {
            for w in ws {
                let _ = writeln!(out, "race: {}", witness_text(w));
            }
        }
        Verdict::Inconclusive(rs) => {
            for r in rs {
                let _ = writeln!(out, "reason: {r}");
            }
        }
    }
    if !report.dependences.is_empty() {
        out.push_str("dependences:\n");
        for d in &report.dependences {
            let _ = writeln!(out, "  {}", dependence_text(d));
        }
    }
    for n in &report.notes {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

fn instance_json(i: &InstanceRef) -> Value {
    json!({
        "statement": i.statement,
        "values": i.values.iter().map(|(d, v)| json!({"dim": d, "value": v})).collect::<Vec<_>>(),
        "phase": i.phase,
    })
}

fn witness_json(w: &ConflictWitness) -> Value {
    json!({
        "kind": w.kind.name(),
        "array": w.array,
        "source": instance_json(&w.source),
        "target": instance_json(&w.target),
        "cell": w.cell,
        "params": w.params,
    })
}

fn pair_json(kind: &str, array: &str, source: &str, target: &str, v: &PairVerdict) -> Value {
    let (verdict, witness, reason) = match v {
        PairVerdict::Empty => ("empty", Value::Null, Value::Null),
        PairVerdict::Found(w) => ("found", witness_json(w), Value::Null),
        PairVerdict::Inconclusive(r) => ("inconclusive", Value::Null, Value::String(r.clone())),
    };
    json!({
        "kind": kind,
        "array": array,
        "source": source,
        "target": target,
        "cell": witness.get("cell").cloned().unwrap_or(Value::Null),
        "verdict": verdict,
        "witness": witness,
        "reason": reason,
    })
}

/// Machine-readable report. Field names are stable.
pub fn emit_report_structured(report: &DependenceReport) -> Value {
    let (witnesses, reasons) = match &report.verdict {
        Verdict::RaceFree => (vec![], vec![]),
        Verdict::RaceFound(ws) => (ws.iter().map(witness_json).collect(), vec![]),
        Verdict::Inconclusive(rs) => (vec![], rs.clone()),
    };
    json!({
        "kernel": report.kernel,
        "verdict": report.verdict.token(),
        "witnesses": witnesses,
        "reasons": reasons,
        "races": report
            .races
            .iter()
            .map(|c| pair_json(c.kind.name(), &c.array, &c.source, &c.target, &c.verdict))
            .collect::<Vec<_>>(),
        "dependences": report
            .dependences
            .iter()
            .map(|d| {
                let mut v = pair_json(d.kind.name(), &d.array, &d.source, &d.target, &d.verdict);
                v["relation"] = Value::String(d.relation.to_string());
                v
            })
            .collect::<Vec<_>>(),
        "notes": report.notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modeltext::parse_model;

    #[test]
    fn empty_model_has_empty_blocks() {
        let m = parse_model("kernel nothing\n").unwrap();
        let s = emit(&m).unwrap();
        assert_eq!(s.domain, "Domain := { };\n");
        assert_eq!(s.read, "Read := { } * Domain;\n");
        assert!(s.text().contains("RaW := (Write . (Read^-1)) * Before;"));
    }

    #[test]
    fn accesses_are_inlined() {
        let m = parse_model(
            "kernel k\nparam n\narray A global f32 [n]\nstatement S [i]\n  domain 0 <= i < n\n  write A[i + 1]\nschedule\n  S[i] -> [0, i]\n",
        )
        .unwrap();
        let s = emit(&m).unwrap();
        assert_eq!(s.write, "Write := [n] -> {\n    S[i] -> A[i + 1]\n} * Domain;\n");
        assert_eq!(s.schedule, "Schedule := [n] -> {\n    S[i] -> [0, i]\n};\n");
    }

    #[test]
    fn report_token_once() {
        let r = DependenceReport {
            kernel: "k".into(),
            dependences: vec![],
            races: vec![],
            verdict: Verdict::Inconclusive(vec!["odd reason: x".into()]),
            notes: vec![],
        };
        let t = emit_report_text(&r);
        assert_eq!(t.matches("Inconclusive").count(), 1);
        assert!(t.contains("reason: odd reason: x"));
    }
}

//! Enumerating a kernel model over a concrete instance.

use std::collections::{BTreeMap, BTreeSet};

use crate::iset::AffineExpr;
use crate::kmodel::{IndexExpr, KernelModel, ParamScope};

use super::{AccessLog, AccessLogEntry, ConcreteInstance, OracleError, RunOptions, MAX_BOX_POINTS};

/// One executed statement instance of one thread.
struct Exec {
    time: Vec<i64>,
    stmt: usize,
    point: Vec<i64>,
    params: BTreeMap<String, i64>,
}

fn odometer(ranges: &[(i64, i64)]) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    if ranges.iter().any(|(lo, hi)| hi < lo) {
        return out;
    }
    let mut p: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(p.clone());
        let mut k = ranges.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if p[k] < ranges[k].1 {
                p[k] += 1;
                break;
            }
            p[k] = ranges[k].0;
        }
    }
}

fn box_size(ranges: &[(i64, i64)]) -> u128 {
    ranges
        .iter()
        .map(|(lo, hi)| if hi < lo { 0 } else { (hi - lo) as u128 + 1 })
        .fold(1u128, |a, b| a.saturating_mul(b))
}

/// Access log of `model` on `instance`: every statement instance in the
/// domain, per thread in schedule order, reads before writes.
///
/// Block- and thread-scoped parameters without a data source and without
/// a value in the instance range over their bounds (or the run radius); the
/// log holds the union over their values.
pub fn run_model(instance: &ConcreteInstance, model: &KernelModel, opts: &RunOptions) -> Result<AccessLog, OracleError> {
    let model = model.clone().validated()?;
    let spec = instance.specialization(&model);
    let r = opts.radius;
    let base = &instance.params;
    let mut free = Vec::new();
    for p in &model.params {
        if p.source.is_some() || base.contains_key(&p.name) {
            continue;
        }
        if p.scope == ParamScope::Kernel {
            return Err(OracleError::MissingValue(format!("parameter {}", p.name)));
        }
        free.push((p.name.clone(), (p.lower.unwrap_or(-r), p.upper.unwrap_or(r))));
    }
    let grid_bindings: Vec<_> = model.grid.blocks.iter().chain(model.grid.threads.iter()).collect();
    let mut grid_ranges = Vec::new();
    for b in &grid_bindings {
        let e = b
            .extent
            .eval(&BTreeMap::new(), base)
            .ok_or_else(|| OracleError::MissingValue(format!("extent of {}", b.dim)))?;
        grid_ranges.push((0, e - 1));
    }
    let free_ranges: Vec<(i64, i64)> = free.iter().map(|(_, r)| *r).collect();
    let free_points = odometer(&free_ranges);
    let domains: Vec<_> = model.statements.iter().map(|s| model.full_domain(s)).collect::<Result<_, _>>()?;
    let written = model.written_arrays();
    let tpb: Vec<i64> = model
        .grid
        .threads
        .iter()
        .map(|b| b.extent.eval(&BTreeMap::new(), base).unwrap_or(1))
        .collect();

    let mut log = AccessLog::default();
    for g in odometer(&grid_ranges) {
        let gmap: BTreeMap<String, i64> = grid_bindings.iter().map(|b| b.dim.clone()).zip(g.iter().copied()).collect();
        let mut params = base.clone();
        for p in &model.params {
            let Some(src) = &p.source else { continue };
            let Some(table) = spec.tables.get(&src.array) else {
                return Err(OracleError::MissingValue(format!("array {}", src.array)));
            };
            let idx: Vec<i64> = src
                .index
                .iter()
                .map(|e| e.eval(&gmap, &params))
                .collect::<Option<_>>()
                .ok_or_else(|| OracleError::MissingValue(format!("index of {}", p.name)))?;
            let v = table.get(&idx).ok_or_else(|| OracleError::OutOfBounds {
                array: src.array.clone(),
                cell: idx.clone(),
            })?;
            params.insert(p.name.clone(), v);
        }
        let mut execs: Vec<Exec> = Vec::new();
        let mut seen: BTreeSet<(Vec<i64>, usize, Vec<i64>)> = BTreeSet::new();
        for fp in &free_points {
            let mut params = params.clone();
            for ((n, _), v) in free.iter().zip(fp.iter()) {
                params.insert(n.clone(), *v);
            }
            for (si, s) in model.statements.iter().enumerate() {
                let mut ranges = Vec::new();
                for d in &s.dims {
                    match gmap.get(d) {
                        Some(v) => ranges.push((*v, *v)),
                        None => ranges.push((-r, r)),
                    }
                }
                let size = box_size(&ranges);
                if size > MAX_BOX_POINTS {
                    return Err(OracleError::BoxTooLarge(size));
                }
                for p in odometer(&ranges) {
                    if !domains[si].contains(&p, &params)? {
                        continue;
                    }
                    let dims: BTreeMap<String, i64> = s.dims.iter().cloned().zip(p.iter().copied()).collect();
                    let time: Vec<i64> = model.schedule.times[&s.label]
                        .iter()
                        .map(|e| e.eval(&dims, &params))
                        .collect::<Option<_>>()
                        .ok_or_else(|| OracleError::MissingValue(format!("schedule of {}", s.label)))?;
                    if seen.insert((time.clone(), si, p.clone())) {
                        execs.push(Exec {
                            time,
                            stmt: si,
                            point: p,
                            params: params.clone(),
                        });
                    }
                }
            }
        }
        execs.sort_by(|a, b| (&a.time, a.stmt, &a.point).cmp(&(&b.time, b.stmt, &b.point)));

        let mut block = [0i64; 3];
        let mut thread = [0i64; 3];
        for (b, v) in model.grid.blocks.iter().zip(g.iter()) {
            block[b.axis.index()] = *v;
        }
        for (b, v) in model.grid.threads.iter().zip(g[model.grid.blocks.len()..].iter()) {
            thread[b.axis.index()] = *v;
        }
        let mut lane = 0;
        for (k, b) in model.grid.threads.iter().enumerate().rev() {
            lane = lane * tpb[k] + thread[b.axis.index()];
        }
        let mut serial = 0;
        for ex in execs {
            let s = &model.statements[ex.stmt];
            let dims: BTreeMap<String, i64> = s.dims.iter().cloned().zip(ex.point.iter().copied()).collect();
            for (kind, acc) in s.accesses() {
                let arr = model.array(&acc.array).expect("validated model");
                let mut cell = Vec::new();
                let mut unknown = false;
                for ix in &acc.index {
                    let v = match ix {
                        IndexExpr::Affine(e) => e.eval(&dims, &ex.params),
                        IndexExpr::Data { array, index } => {
                            let table = spec
                                .tables
                                .get(array)
                                .ok_or_else(|| OracleError::MissingValue(format!("array {array}")))?;
                            let idx: Option<Vec<i64>> = index.iter().map(|e| e.eval(&dims, &ex.params)).collect();
                            let idx = idx.ok_or_else(|| OracleError::MissingValue(format!("index into {array}")))?;
                            Some(table.get(&idx).ok_or_else(|| OracleError::OutOfBounds {
                                array: array.clone(),
                                cell: idx.clone(),
                            })?)
                        }
                        IndexExpr::Unknown => {
                            unknown = true;
                            None
                        }
                    };
                    cell.push(v.unwrap_or(0));
                }
                if unknown {
                    // an unknown read of an input array cannot conflict
                    if !written.contains(&acc.array) {
                        continue;
                    }
                    return Err(OracleError::UnknownIndex {
                        statement: s.label.clone(),
                        array: acc.array.clone(),
                    });
                }
                for (c, ext) in cell.iter().zip(arr.extents.iter()) {
                    let ext: Option<i64> = ext.as_ref().and_then(|e: &AffineExpr| e.eval(&BTreeMap::new(), &ex.params));
                    if let Some(ext) = ext {
                        if *c < 0 || *c >= ext {
                            return Err(OracleError::OutOfBounds {
                                array: acc.array.clone(),
                                cell: cell.clone(),
                            });
                        }
                    }
                }
                log.entries.push(AccessLogEntry {
                    block,
                    thread,
                    lane,
                    phase: ex.time.first().copied().unwrap_or(0),
                    warp_phases: BTreeMap::new(),
                    serial,
                    array: acc.array.clone(),
                    space: arr.space,
                    cell,
                    kind,
                    site: Some(s.label.clone()),
                    point: Some(ex.point.clone()),
                    line: None,
                    regs: BTreeMap::new(),
                });
                serial += 1;
            }
        }
    }
    Ok(log)
}

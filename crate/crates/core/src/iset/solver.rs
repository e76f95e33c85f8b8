//! Integer feasibility for a single conjunction of affine constraints.
//!
//! Three tiers: gcd tightening, Fourier-Motzkin elimination (with tightening
//! of every derived row), then a depth-first integer search whose per-variable
//! ranges come from the elimination chain. Parameters are searched first and
//! drawn from sample values unless their range is finite and small.

use std::collections::HashMap;

pub(crate) type Row = Vec<i128>;

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    /// Variable names; the first `nparams` are parameters.
    pub vars: Vec<String>,
    pub nparams: usize,
    /// Rows of length `vars.len() + 1`, constant last. `row . x + c == 0`.
    pub eqs: Vec<Row>,
    /// `row . x + c >= 0`.
    pub ineqs: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct SearchLimits {
    /// Half-width of the box used for directions with no derived bound.
    pub box_radius: i64,
    /// Values tried for parameters whose range is not small and finite.
    pub param_samples: Vec<i64>,
    /// Finite ranges at most this wide are enumerated exhaustively.
    pub max_enum: i64,
    pub max_nodes: u64,
    pub max_rows: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            box_radius: 16,
            param_samples: vec![0, 1, 2, 4, 8],
            max_enum: 64,
            max_nodes: 2_000_000,
            max_rows: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Proof {
    Gcd,
    Rational,
    Exhausted,
}

#[derive(Debug, Clone)]
pub(crate) enum Outcome {
    Infeasible(#[allow(dead_code)] Proof),
    /// Values for every variable of the problem, in `vars` order.
    Point(Vec<i64>),
    Unknown(String),
}

fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

enum RowState {
    Keep(Row),
    Trivial,
    Infeasible,
}

fn normalize(mut row: Row, is_eq: bool) -> RowState {
    let n = row.len() - 1;
    let g = row[..n].iter().fold(0, |g, c| gcd128(g, *c));
    if g == 0 {
        let c = row[n];
        let ok = if is_eq { c == 0 } else { c >= 0 };
        return if ok { RowState::Trivial } else { RowState::Infeasible };
    }
    if is_eq {
        if row[n] % g != 0 {
            return RowState::Infeasible;
        }
        for v in row.iter_mut() {
            *v /= g;
        }
    } else {
        for v in row[..n].iter_mut() {
            *v /= g;
        }
        row[n] = row[n].div_euclid(g);
    }
    RowState::Keep(row)
}

/// Keep only the tightest constant for each coefficient vector.
fn dedupe(rows: Vec<Row>) -> Result<Vec<Row>, ()> {
    let mut best: HashMap<Vec<i128>, i128> = HashMap::new();
    let mut order = Vec::new();
    for row in rows {
        let n = row.len() - 1;
        let key = row[..n].to_vec();
        match best.get_mut(&key) {
            Some(c) => {
                if row[n] < *c {
                    *c = row[n];
                }
            }
            None => {
                best.insert(key.clone(), row[n]);
                order.push(key);
            }
        }
    }
    // opposite pairs: a.x + c1 >= 0 and -a.x + c2 >= 0 need c1 + c2 >= 0
    for key in &order {
        let neg: Vec<i128> = key.iter().map(|v| -v).collect();
        if let (Some(c1), Some(c2)) = (best.get(key), best.get(&neg)) {
            if c1 + c2 < 0 {
                return Err(());
            }
        }
    }
    Ok(order
        .into_iter()
        .map(|k| {
            let c = best[&k];
            let mut r = k;
            r.push(c);
            r
        })
        .collect())
}

fn eliminate(rows: &[Row], v: usize, max_rows: usize) -> Result<Vec<Row>, Outcome> {
    let mut out = Vec::new();
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for r in rows {
        match r[v].signum() {
            0 => out.push(r.clone()),
            1 => pos.push(r),
            _ => neg.push(r),
        }
    }
    if pos.len() * neg.len() + out.len() > max_rows {
        return Err(Outcome::Unknown(format!(
            "elimination produced more than {max_rows} constraints"
        )));
    }
    for p in &pos {
        for q in &neg {
            let a = p[v];
            let b = -q[v];
            let row: Row = p.iter().zip(q.iter()).map(|(x, y)| b * x + a * y).collect();
            match normalize(row, false) {
                RowState::Keep(r) => out.push(r),
                RowState::Trivial => {}
                RowState::Infeasible => return Err(Outcome::Infeasible(Proof::Rational)),
            }
        }
    }
    dedupe(out).map_err(|_| Outcome::Infeasible(Proof::Rational))
}

/// Compact row used during search: coefficient on the level variable, the
/// coefficients on earlier search positions, and the constant.
struct LevelRow {
    a: i128,
    earlier: Vec<(usize, i128)>,
    c: i128,
}

struct Searcher<'a> {
    order: Vec<usize>,
    is_param: Vec<bool>,
    levels: Vec<Vec<LevelRow>>,
    limits: &'a SearchLimits,
    values: Vec<i128>,
    nodes: u64,
    exact: bool,
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b) - if b < 0 && a.rem_euclid(b) != 0 { 1 } else { 0 }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

enum Step {
    Found,
    Exhausted,
    Abort(String),
}

impl Searcher<'_> {
    fn candidates(&mut self, k: usize) -> Option<Vec<i128>> {
        let mut lo: Option<i128> = None;
        let mut hi: Option<i128> = None;
        for r in &self.levels[k] {
            let rest = r.c
                + r.earlier
                    .iter()
                    .map(|(j, c)| c * self.values[*j])
                    .sum::<i128>();
            // a*x + rest >= 0
            if r.a > 0 {
                let b = ceil_div(-rest, r.a);
                lo = Some(lo.map_or(b, |l| l.max(b)));
            } else {
                let b = floor_div(rest, -r.a);
                hi = Some(hi.map_or(b, |h| h.min(b)));
            }
        }
        if let (Some(l), Some(h)) = (lo, hi) {
            if l > h {
                return None;
            }
        }
        let radius = self.limits.box_radius as i128;
        let max_enum = self.limits.max_enum as i128;
        if self.is_param[self.order[k]] {
            if let (Some(l), Some(h)) = (lo, hi) {
                if h - l < max_enum {
                    return Some((l..=h).collect());
                }
            }
            self.exact = false;
            let mut c: Vec<i128> = self
                .limits
                .param_samples
                .iter()
                .map(|v| *v as i128)
                .chain(lo)
                .chain(hi)
                .filter(|v| lo.is_none_or(|l| *v >= l) && hi.is_none_or(|h| *v <= h))
                .collect();
            c.sort_unstable();
            c.dedup();
            return Some(c);
        }
        let (l, h) = match (lo, hi) {
            (Some(l), Some(h)) if h - l < 2 * radius.max(max_enum) => (l, h),
            (Some(l), Some(h)) => {
                self.exact = false;
                (l, h.min(l + 2 * radius))
            }
            (Some(l), None) => {
                self.exact = false;
                (l, radius.max(l))
            }
            (None, Some(h)) => {
                self.exact = false;
                ((-radius).min(h), h)
            }
            (None, None) => {
                self.exact = false;
                (-radius, radius)
            }
        };
        if l > h {
            return Some(Vec::new());
        }
        // small magnitudes first
        let mut c: Vec<i128> = (l..=h).collect();
        c.sort_by_key(|v| (v.abs(), *v < 0));
        Some(c)
    }

    fn dfs(&mut self, k: usize) -> Step {
        if k == self.order.len() {
            return Step::Found;
        }
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return Step::Abort(format!(
                "integer search exceeded {} nodes",
                self.limits.max_nodes
            ));
        }
        let Some(cands) = self.candidates(k) else {
            return Step::Exhausted;
        };
        for v in cands {
            self.values[k] = v;
            match self.dfs(k + 1) {
                Step::Exhausted => continue,
                other => return other,
            }
        }
        Step::Exhausted
    }
}

impl Problem {
    pub fn solve(&self, limits: &SearchLimits) -> Outcome {
        let nv = self.vars.len();
        let mut eqs = Vec::new();
        let mut ineqs = Vec::new();
        for (rows, is_eq) in [(&self.eqs, true), (&self.ineqs, false)] {
            for r in rows {
                match normalize(r.clone(), is_eq) {
                    RowState::Keep(r) => {
                        if is_eq {
                            eqs.push(r)
                        } else {
                            ineqs.push(r)
                        }
                    }
                    RowState::Trivial => {}
                    RowState::Infeasible => return Outcome::Infeasible(Proof::Gcd),
                }
            }
        }

        // exact elimination of unit-coefficient equalities
        let mut substs: Vec<(usize, Row)> = Vec::new();
        loop {
            let pick = eqs.iter().enumerate().find_map(|(ri, r)| {
                let unit = |v: usize| r[v].abs() == 1;
                (self.nparams..nv)
                    .find(|&v| unit(v))
                    .or_else(|| (0..self.nparams).find(|&v| unit(v)))
                    .map(|v| (ri, v))
            });
            let Some((ri, v)) = pick else { break };
            let r = eqs.swap_remove(ri);
            // x_v = -sign * (rest)
            let sign = r[v];
            let mut def: Row = r.iter().map(|c| -sign * c).collect();
            def[v] = 0;
            let apply = |row: &mut Row| {
                let c = row[v];
                if c != 0 {
                    row[v] = 0;
                    for (x, d) in row.iter_mut().zip(def.iter()) {
                        *x += c * d;
                    }
                }
            };
            let mut next_eqs = Vec::new();
            for mut e in eqs.drain(..) {
                apply(&mut e);
                match normalize(e, true) {
                    RowState::Keep(e) => next_eqs.push(e),
                    RowState::Trivial => {}
                    RowState::Infeasible => return Outcome::Infeasible(Proof::Gcd),
                }
            }
            eqs = next_eqs;
            let mut next_ineqs = Vec::new();
            for mut e in ineqs.drain(..) {
                apply(&mut e);
                match normalize(e, false) {
                    RowState::Keep(e) => next_ineqs.push(e),
                    RowState::Trivial => {}
                    RowState::Infeasible => return Outcome::Infeasible(Proof::Gcd),
                }
            }
            ineqs = next_ineqs;
            for (_, d) in substs.iter_mut() {
                apply(d);
            }
            substs.push((v, def));
        }
        for e in eqs {
            ineqs.push(e.iter().map(|c| -c).collect());
            ineqs.push(e);
        }
        let mut rows = match dedupe(ineqs) {
            Ok(r) => r,
            Err(()) => return Outcome::Infeasible(Proof::Rational),
        };

        let active: Vec<bool> = (0..nv).map(|v| rows.iter().any(|r| r[v] != 0)).collect();
        let substituted: Vec<bool> = {
            let mut s = vec![false; nv];
            for (v, _) in &substs {
                s[*v] = true;
            }
            s
        };

        // Elimination order: non-parameters greedily, then parameters last-first.
        let mut remaining: Vec<usize> = (self.nparams..nv).filter(|&v| active[v]).collect();
        let mut elim_order = Vec::new();
        let mut levels_rev: Vec<Vec<Row>> = Vec::new();
        while !remaining.is_empty() {
            let (idx, _) = remaining
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let p = rows.iter().filter(|r| r[v] > 0).count();
                    let n = rows.iter().filter(|r| r[v] < 0).count();
                    (i, p * n)
                })
                .min_by_key(|(_, cost)| *cost)
                .unwrap();
            let v = remaining.remove(idx);
            levels_rev.push(rows.iter().filter(|r| r[v] != 0).cloned().collect());
            rows = match eliminate(&rows, v, limits.max_rows) {
                Ok(r) => r,
                Err(o) => return o,
            };
            elim_order.push(v);
        }
        for v in (0..self.nparams).rev().filter(|&v| active[v]) {
            levels_rev.push(rows.iter().filter(|r| r[v] != 0).cloned().collect());
            rows = match eliminate(&rows, v, limits.max_rows) {
                Ok(r) => r,
                Err(o) => return o,
            };
            elim_order.push(v);
        }
        // all remaining rows are constant and were checked by normalize

        let order: Vec<usize> = elim_order.iter().rev().copied().collect();
        let mut position = vec![usize::MAX; nv];
        for (k, v) in order.iter().enumerate() {
            position[*v] = k;
        }
        let levels: Vec<Vec<LevelRow>> = levels_rev
            .into_iter()
            .rev()
            .zip(order.iter())
            .map(|(rows, &v)| {
                rows.into_iter()
                    .map(|r| LevelRow {
                        a: r[v],
                        earlier: (0..nv)
                            .filter(|&j| j != v && r[j] != 0)
                            .map(|j| (position[j], r[j]))
                            .collect(),
                        c: r[nv],
                    })
                    .collect()
            })
            .collect();

        let mut searcher = Searcher {
            is_param: (0..nv).map(|v| v < self.nparams).collect(),
            order: order.clone(),
            levels,
            limits,
            values: vec![0; order.len()],
            nodes: 0,
            exact: true,
        };
        match searcher.dfs(0) {
            Step::Found => {}
            Step::Exhausted => {
                return if searcher.exact {
                    Outcome::Infeasible(Proof::Exhausted)
                } else {
                    Outcome::Unknown(format!(
                        "no integer point within search box of radius {} at parameter samples {:?}",
                        limits.box_radius, limits.param_samples
                    ))
                };
            }
            Step::Abort(reason) => return Outcome::Unknown(reason),
        }

        let mut point = vec![0i128; nv];
        for (k, v) in order.iter().enumerate() {
            point[*v] = searcher.values[k];
        }
        for v in 0..nv {
            if !active[v] && !substituted[v] && v < self.nparams {
                point[v] = limits.param_samples.first().copied().unwrap_or(0) as i128;
            }
        }
        for (v, def) in substs.iter().rev() {
            let val = def[nv] + (0..nv).map(|j| def[j] * point[j]).sum::<i128>();
            point[*v] = val;
        }
        match point.iter().map(|v| i64::try_from(*v)).collect::<Result<Vec<_>, _>>() {
            Ok(p) => Outcome::Point(p),
            Err(_) => Outcome::Unknown("witness coordinate overflows i64".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(vars: &[&str], nparams: usize, eqs: Vec<Row>, ineqs: Vec<Row>) -> Problem {
        Problem {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            nparams,
            eqs,
            ineqs,
        }
    }

    fn check(p: &Problem, point: &[i64]) -> bool {
        let n = p.vars.len();
        let dot = |r: &Row| r[n] + (0..n).map(|j| r[j] * point[j] as i128).sum::<i128>();
        p.eqs.iter().all(|r| dot(r) == 0) && p.ineqs.iter().all(|r| dot(r) >= 0)
    }

    #[test]
    fn floor_and_ceil_division() {
        assert_eq!(floor_div(7, 2), 3);
        assert_eq!(floor_div(-7, 2), -4);
        assert_eq!(ceil_div(7, 2), 4);
        assert_eq!(ceil_div(-7, 2), -3);
        assert_eq!(floor_div(7, -2), -4);
    }

    #[test]
    fn parity_is_caught_by_gcd() {
        // 2x - 1 == 0
        let p = problem(&["x"], 0, vec![vec![2, -1]], vec![]);
        assert!(matches!(p.solve(&SearchLimits::default()), Outcome::Infeasible(Proof::Gcd)));
    }

    #[test]
    fn tightened_elimination_proves_strict_gap() {
        // 2a - 2b - 1 >= 0 and 2b - 2a + 1 >= 0 : rationally a - b = 1/2
        let p = problem(&["a", "b"], 0, vec![], vec![vec![2, -2, -1], vec![-2, 2, 1]]);
        assert!(matches!(p.solve(&SearchLimits::default()), Outcome::Infeasible(_)));
    }

    #[test]
    fn bounded_search_finds_witness() {
        // 0 <= x <= 10, 0 <= y <= 10, 3x + 5y == 17
        let p = problem(
            &["x", "y"],
            0,
            vec![vec![3, 5, -17]],
            vec![vec![1, 0, 0], vec![-1, 0, 10], vec![0, 1, 0], vec![0, -1, 10]],
        );
        match p.solve(&SearchLimits::default()) {
            Outcome::Point(pt) => assert!(check(&p, &pt), "{pt:?}"),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn bounded_integer_gap_is_exhausted() {
        // 1 <= 3x - 3y <= 2 inside a box
        let p = problem(
            &["x", "y"],
            0,
            vec![],
            vec![
                vec![3, -3, -1],
                vec![-3, 3, 2],
                vec![1, 0, 0],
                vec![-1, 0, 5],
                vec![0, 1, 0],
                vec![0, -1, 5],
            ],
        );
        assert!(matches!(p.solve(&SearchLimits::default()), Outcome::Infeasible(_)));
    }

    #[test]
    fn parameters_are_sampled() {
        // 0 <= k < n, k >= 3 ; n is a parameter
        let p = problem(&["n", "k"], 1, vec![], vec![vec![0, 1, 0], vec![1, -1, -1], vec![0, 1, -3]]);
        match p.solve(&SearchLimits::default()) {
            Outcome::Point(pt) => {
                assert!(check(&p, &pt));
                assert_eq!(pt, vec![4, 3]);
            }
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn one_sided_bound_starts_at_the_bound() {
        // x - y >= 100, 3x - 3y >= 301
        let p = problem(&["x", "y"], 0, vec![], vec![vec![1, -1, -100], vec![3, -3, -301]]);
        match p.solve(&SearchLimits::default()) {
            Outcome::Point(pt) => assert!(check(&p, &pt)),
            Outcome::Unknown(_) => {}
            o => panic!("{o:?}"),
        }
    }
}

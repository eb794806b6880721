//! Brute-force reference implementations.
//!
//! Nothing here calls into the simplex solver, the uncertainty-set builder
//! or the series/continued-fraction special functions: each routine takes
//! an independent route (quadrature, vertex enumeration, exhaustive
//! search) so it can check the production path.

use crate::lp::{Constraint, Relation};
use crate::model::{all_queries, AlternativeSet, Query, QueryHistory, Response};

const VERTEX_TOL: f64 = 1e-9;

/// `erf(x)` by composite Simpson quadrature of `2/sqrt(pi) exp(-t^2)`.
pub fn erf_quadrature(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let n = 20_000; // even
    let h = x / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(0.0) + f(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

/// `2 sigma sqrt(k) erfinv(2p - 1)` with the inverse found by bisection on
/// [`erf_quadrature`].
pub fn gamma_bisection(sigma: f64, p: f64, k: usize) -> f64 {
    let target = 2.0 * p - 1.0;
    let (mut lo, mut hi) = (0.0f64, 8.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if erf_quadrature(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    2.0 * sigma * (k as f64).sqrt() * 0.5 * (lo + hi)
}

/// Solve the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + m - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every vertex of the polyhedron `{x in R^n : rows}`: each basic solution
/// where `n` linearly independent rows are tight, kept if it satisfies all
/// rows. Equality rows are always tight.
pub fn vertices(n: usize, rows: &[Constraint]) -> Vec<Vec<f64>> {
    let (eq, ineq): (Vec<&Constraint>, Vec<&Constraint>) = rows.iter().partition(|r| r.relation == Relation::Eq);
    let mut out = Vec::new();
    if eq.len() > n {
        // Over-determined equalities: fall back to treating them as ordinary rows.
        let all: Vec<&Constraint> = rows.iter().collect();
        collect_vertices(n, &[], &all, rows, &mut out);
    } else {
        collect_vertices(n, &eq, &ineq, rows, &mut out);
    }
    out
}

fn collect_vertices(n: usize, fixed: &[&Constraint], pool: &[&Constraint], rows: &[Constraint], out: &mut Vec<Vec<f64>>) {
    let need = n - fixed.len();
    for_each_subset(pool.len(), need, |subset| {
        let tight: Vec<&Constraint> = fixed.iter().copied().chain(subset.iter().map(|&i| pool[i])).collect();
        let a: Vec<Vec<f64>> = tight.iter().map(|r| r.coefficients.clone()).collect();
        let b: Vec<f64> = tight.iter().map(|r| r.rhs).collect();
        if let Some(x) = solve_square(a, b) {
            if rows.iter().all(|r| r.violation(&x) <= VERTEX_TOL * (1.0 + r.rhs.abs())) {
                out.push(x);
            }
        }
    });
}

/// `min c'x` over a bounded polyhedron given by its rows; `None` if empty.
pub fn vertex_min(objective: &[f64], rows: &[Constraint]) -> Option<f64> {
    min_over(&vertices(objective.len(), rows), objective)
}

pub fn min_over(vertices: &[Vec<f64>], objective: &[f64]) -> Option<f64> {
    vertices
        .iter()
        .map(|v| v.iter().zip(objective).map(|(a, b)| a * b).sum::<f64>())
        .min_by(f64::total_cmp)
}

/// Rows over `[u, eps]` for the simplex updated by `history` with budget `gamma`.
pub fn uncertainty_rows(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> (usize, Vec<Constraint>) {
    let j = alternatives.dim();
    let k = history.len();
    let n = j + k;
    let row = |f: &dyn Fn(usize) -> f64, rel: Relation, rhs: f64| Constraint::new((0..n).map(f).collect(), rel, rhs);
    let mut rows = vec![row(&|i| if i < j { 1.0 } else { 0.0 }, Relation::Eq, 1.0)];
    for v in 0..n {
        rows.push(row(&|i| if i == v { 1.0 } else { 0.0 }, Relation::Ge, 0.0));
    }
    rows.push(row(&|i| if i >= j { 1.0 } else { 0.0 }, Relation::Le, gamma));
    for (idx, &(q, s)) in history.entries().iter().enumerate() {
        let a = &alternatives.features()[q.first];
        let b = &alternatives.features()[q.second];
        let delta = |i: usize| if i < j { a[i] - b[i] } else { 0.0 };
        let eps = j + idx;
        let plus = |i: usize| if i == eps { 1.0 } else { delta(i) };
        let minus = |i: usize| if i == eps { -1.0 } else { delta(i) };
        match s {
            Response::PrefersFirst => rows.push(row(&plus, Relation::Ge, 0.0)),
            Response::PrefersSecond => rows.push(row(&minus, Relation::Le, 0.0)),
            Response::Indifferent => {
                rows.push(row(&plus, Relation::Ge, 0.0));
                rows.push(row(&minus, Relation::Le, 0.0));
            }
        }
    }
    (n, rows)
}

/// Worst-case utility of every alternative, `None` if the set is empty.
pub fn worst_case_values(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> Option<Vec<f64>> {
    let (n, rows) = uncertainty_rows(alternatives, history, gamma);
    let verts = vertices(n, &rows);
    if verts.is_empty() {
        return None;
    }
    Some(
        alternatives
            .features()
            .iter()
            .map(|x| {
                let mut obj = x.clone();
                obj.resize(n, 0.0);
                min_over(&verts, &obj).expect("nonempty")
            })
            .collect(),
    )
}

/// Objective of every candidate query (lexicographic order) for the next
/// step after `history`, where `gamma` is the budget at that step.
pub fn robust_objectives(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> Vec<(Query, Option<f64>)> {
    all_queries(alternatives.len())
        .into_iter()
        .map(|q| {
            let mut worst: Option<f64> = None;
            for s in Response::ALL {
                let h = history.with(q, s);
                if let Some(values) = worst_case_values(alternatives, &h, gamma) {
                    let best = values.into_iter().fold(f64::NEG_INFINITY, f64::max);
                    worst = Some(worst.map_or(best, |w| w.min(best)));
                }
            }
            (q, worst)
        })
        .collect()
}

/// Best objective over all candidates.
pub fn robust_best_objective(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> Option<f64> {
    robust_objectives(alternatives, history, gamma)
        .into_iter()
        .filter_map(|(_, o)| o)
        .max_by(f64::total_cmp)
}

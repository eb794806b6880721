//! Dense linear programming.
//!
//! A two-phase primal simplex on a full tableau, using Bland's rule for
//! both the entering and the leaving variable so that degenerate problems
//! cannot cycle. The programs solved here have a few dozen variables at
//! most, so the dense representation is the simple and fast choice.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on simplex pivots across both phases.
pub const ITERATION_CAP: usize = 10_000;
/// Tolerance on reduced costs, pivot elements and phase-one infeasibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Tolerance used to certify a reported optimal point.
pub const REPORT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coefficients,
            relation,
            rhs,
        }
    }

    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coefficients.iter().zip(point).map(|(a, x)| a * x).sum()
    }

    /// Amount by which `point` violates the row (0 when satisfied).
    pub fn violation(&self, point: &[f64]) -> f64 {
        let lhs = self.activity(point);
        match self.relation {
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective · x` subject to the constraint rows and per-variable
/// lower bounds (`None` means the variable is free).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower_bounds: Vec<Option<f64>>,
}

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables with no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![Some(0.0); n],
        }
    }

    /// Same as [`LinearProgram::new`] but with every variable free.
    pub fn free(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            lower_bounds: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn constrain(mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints
            .push(Constraint::new(coefficients, relation, rhs));
        self
    }

    pub fn push(&mut self, constraint: Constraint) {
        self.constraints.push(constraint);
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::InvalidProgram("program has no variables".into()));
        }
        if self.lower_bounds.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.lower_bounds.len(),
            });
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidProgram("non-finite objective coefficient".into()));
        }
        if self.lower_bounds.iter().flatten().any(|l| !l.is_finite()) {
            return Err(Error::InvalidProgram("non-finite lower bound".into()));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coefficients.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.coefficients.len(),
                });
            }
            if !row.rhs.is_finite() || row.coefficients.iter().any(|a| !a.is_finite()) {
                return Err(Error::InvalidProgram(format!("row {i} has a non-finite entry")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpSolution {
    pub fn status(&self) -> LpStatus {
        match self {
            LpSolution::Optimal { .. } => LpStatus::Optimal,
            LpSolution::Infeasible => LpStatus::Infeasible,
            LpSolution::Unbounded => LpStatus::Unbounded,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            LpSolution::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpSolution::Optimal { point, .. } => Some(point),
            _ => None,
        }
    }
}

/// How an original variable maps onto nonnegative tableau columns.
#[derive(Clone, Copy)]
enum VarMap {
    Shifted { col: usize, lower: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols` coefficients.
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Reduced costs for the active phase.
    cost_row: Vec<f64>,
    iterations: usize,
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let p = self.at(pr, pc);
        let row_start = pr * cols;
        for v in &mut self.a[row_start..row_start + cols] {
            *v /= p;
        }
        self.rhs[pr] /= p;
        self.a[row_start + pc] = 1.0;

        let pivot_row: Vec<f64> = self.a[row_start..row_start + cols].to_vec();
        let pivot_rhs = self.rhs[pr];
        for i in 0..self.rows {
            if i == pr {
                continue;
            }
            let factor = self.a[i * cols + pc];
            if factor == 0.0 {
                continue;
            }
            let row = &mut self.a[i * cols..(i + 1) * cols];
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            row[pc] = 0.0;
            self.rhs[i] -= factor * pivot_rhs;
            if self.rhs[i].abs() < 1e-13 {
                self.rhs[i] = 0.0;
            }
        }
        let factor = self.cost_row[pc];
        if factor != 0.0 {
            for (v, pv) in self.cost_row.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.cost_row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn load_costs(&mut self, costs: &[f64]) {
        self.cost_row.copy_from_slice(costs);
        for i in 0..self.rows {
            let cb = costs[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for j in 0..self.cols {
                self.cost_row[j] -= cb * self.a[i * self.cols + j];
            }
        }
    }

    /// Bland's rule: lowest-index improving column enters; among tied
    /// minimum ratios the lowest-index basic variable leaves.
    fn run(&mut self, allowed: &[bool]) -> Result<PhaseOutcome> {
        loop {
            let entering = (0..self.cols).find(|&j| allowed[j] && self.cost_row[j] < -FEASIBILITY_TOL);
            let Some(e) = entering else {
                return Ok(PhaseOutcome::Optimal);
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let coef = self.at(i, e);
                if coef <= FEASIBILITY_TOL {
                    continue;
                }
                let ratio = self.rhs[i].max(0.0) / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((pr, _)) = leave else {
                return Ok(PhaseOutcome::Unbounded);
            };

            self.iterations += 1;
            if self.iterations > ITERATION_CAP {
                return Err(Error::NumericalFailure(format!(
                    "simplex exceeded {ITERATION_CAP} iterations"
                )));
            }
            self.pivot(pr, e);
        }
    }
}

/// Solve `lp` to optimality, or report it infeasible or unbounded.
///
/// Deterministic for identical input. An optimal point is checked against
/// every original row and bound before it is returned; a point that fails
/// that check is reported as [`Error::NumericalFailure`].
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();

    // Fold singleton lower-bound rows into the variable bounds.
    let mut lower = lp.lower_bounds.clone();
    let mut rows: Vec<&Constraint> = Vec::with_capacity(lp.constraints.len());
    for row in &lp.constraints {
        let mut nz = row.coefficients.iter().enumerate().filter(|(_, a)| **a != 0.0);
        match (nz.next(), nz.next()) {
            (None, _) => {
                if row.violation(&vec![0.0; n]) > FEASIBILITY_TOL {
                    return Ok(LpSolution::Infeasible);
                }
            }
            (Some((j, &a)), None)
                if (row.relation == Relation::Ge && a > 0.0)
                    || (row.relation == Relation::Le && a < 0.0) =>
            {
                let bound = row.rhs / a;
                lower[j] = Some(match lower[j] {
                    Some(l) => l.max(bound),
                    None => bound,
                });
            }
            _ => rows.push(row),
        }
    }

    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    for l in &lower {
        match l {
            Some(lower) => {
                maps.push(VarMap::Shifted { col: ny, lower: *lower });
                ny += 1;
            }
            None => {
                maps.push(VarMap::Split { pos: ny, neg: ny + 1 });
                ny += 2;
            }
        }
    }

    let m = rows.len();
    let mut n_slack = 0;
    let mut n_art = 0;
    let mut rels = Vec::with_capacity(m);
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for row in &rows {
        let mut coefs = vec![0.0; ny];
        let mut b = row.rhs;
        for (j, &a) in row.coefficients.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, lower } => {
                    coefs[col] = a;
                    b -= a * lower;
                }
                VarMap::Split { pos, neg } => {
                    coefs[pos] = a;
                    coefs[neg] = -a;
                }
            }
        }
        let mut rel = row.relation;
        if b < 0.0 {
            b = -b;
            coefs.iter_mut().for_each(|c| *c = -*c);
            rel = match rel {
                Relation::Ge => Relation::Le,
                Relation::Le => Relation::Ge,
                Relation::Eq => Relation::Eq,
            };
        }
        match rel {
            Relation::Le => n_slack += 1,
            Relation::Ge => {
                n_slack += 1;
                n_art += 1;
            }
            Relation::Eq => n_art += 1,
        }
        rels.push(rel);
        dense.push(coefs);
        rhs.push(b);
    }

    let cols = ny + n_slack + n_art;
    let art_start = ny + n_slack;
    let mut tab = Tableau {
        rows: m,
        cols,
        a: vec![0.0; m * cols],
        rhs,
        basis: vec![0; m],
        cost_row: vec![0.0; cols],
        iterations: 0,
    };
    let mut next_slack = ny;
    let mut next_art = art_start;
    for (i, (coefs, rel)) in dense.iter().zip(&rels).enumerate() {
        tab.a[i * cols..i * cols + ny].copy_from_slice(coefs);
        match rel {
            Relation::Le => {
                tab.a[i * cols + next_slack] = 1.0;
                tab.basis[i] = next_slack;
                next_slack += 1;
            }
            Relation::Ge => {
                tab.a[i * cols + next_slack] = -1.0;
                next_slack += 1;
                tab.a[i * cols + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
            Relation::Eq => {
                tab.a[i * cols + next_art] = 1.0;
                tab.basis[i] = next_art;
                next_art += 1;
            }
        }
    }

    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[art_start..].iter_mut().for_each(|c| *c = 1.0);
        tab.load_costs(&phase1);
        let all = vec![true; cols];
        // Phase one is bounded below by zero.
        tab.run(&all)?;
        let infeasibility: f64 = (0..m)
            .filter(|&i| tab.basis[i] >= art_start)
            .map(|i| tab.rhs[i])
            .sum();
        let scale = 1.0 + tab.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution::Infeasible);
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if tab.basis[i] < art_start {
                continue;
            }
            if let Some(j) = (0..art_start).find(|&j| tab.at(i, j).abs() > FEASIBILITY_TOL) {
                tab.pivot(i, j);
            }
        }
    }

    let mut costs = vec![0.0; cols];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shifted { col, .. } => costs[col] = lp.objective[j],
            VarMap::Split { pos, neg } => {
                costs[pos] = lp.objective[j];
                costs[neg] = -lp.objective[j];
            }
        }
    }
    tab.load_costs(&costs);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art_start).collect();
    if let PhaseOutcome::Unbounded = tab.run(&allowed)? {
        return Ok(LpSolution::Unbounded);
    }

    let mut y = vec![0.0; cols];
    for i in 0..m {
        y[tab.basis[i]] = tab.rhs[i];
    }
    let point: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, lower } => lower + y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();
    let value: f64 = lp.objective.iter().zip(&point).map(|(c, x)| c * x).sum();

    for (j, l) in lp.lower_bounds.iter().enumerate() {
        if let Some(l) = l {
            if point[j] < l - REPORT_TOL * (1.0 + l.abs()) {
                return Err(Error::NumericalFailure(format!(
                    "optimal point violates lower bound of variable {j}"
                )));
            }
        }
    }
    for (i, row) in lp.constraints.iter().enumerate() {
        if row.violation(&point) > REPORT_TOL * (1.0 + row.rhs.abs()) {
            return Err(Error::NumericalFailure(format!(
                "optimal point violates row {i} by {:e}",
                row.violation(&point)
            )));
        }
    }

    Ok(LpSolution::Optimal { value, point })
}

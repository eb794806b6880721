//! Polyhedral utility uncertainty sets and their noisy-response updates.
//!
//! Variables are laid out as `[u_1 .. u_J, eps_1 .. eps_kappa]`: the partworth
//! vector followed by one inconsistency slack per answered query. All
//! slacks share the single budget row `sum(eps) <= gamma`.

use crate::error::{Error, Result};
use crate::lp::{solve_lp, Constraint, LinearProgram, LpSolution, Relation};
use crate::model::{AlternativeSet, QueryHistory, Response};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProgram {
    utility_dim: usize,
    budget: f64,
    /// Rows over `u` alone describing the initial set `B u >= b`.
    base_rows: Vec<Constraint>,
    /// `x^first - x^second` and the response, one per answered query.
    responses: Vec<(Vec<f64>, Response)>,
}

/// The unit simplex `{u >= 0, sum(u) = 1}` with no responses and zero budget.
pub fn initial_uncertainty(dim: usize) -> Result<FeasibilityProgram> {
    if dim == 0 {
        return Err(Error::InvalidParameter("utility dimension must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(dim + 1);
    rows.push(Constraint::new(vec![1.0; dim], Relation::Eq, 1.0));
    for j in 0..dim {
        let mut unit = vec![0.0; dim];
        unit[j] = 1.0;
        rows.push(Constraint::new(unit, Relation::Ge, 0.0));
    }
    Ok(FeasibilityProgram {
        utility_dim: dim,
        budget: 0.0,
        base_rows: rows,
        responses: Vec::new(),
    })
}

/// Add the constraints implied by `history` (indices into `alternatives`)
/// under inconsistency budget `gamma`. `base` is left untouched.
pub fn apply_history(
    base: &FeasibilityProgram,
    alternatives: &AlternativeSet,
    history: &QueryHistory,
    gamma: f64,
) -> Result<FeasibilityProgram> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("budget must be finite and >= 0, got {gamma}")));
    }
    if alternatives.dim() != base.utility_dim {
        return Err(Error::DimensionMismatch {
            expected: base.utility_dim,
            found: alternatives.dim(),
        });
    }
    let mut next = base.clone();
    next.budget = gamma;
    for &(query, response) in history.entries() {
        query.check(alternatives.len())?;
        next.responses.push((alternatives.difference(query)?, response));
    }
    Ok(next)
}

impl FeasibilityProgram {
    /// An arbitrary initial polyhedron `{u : rows}` over `dim` utilities.
    pub fn from_polyhedron(dim: usize, rows: Vec<Constraint>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("utility dimension must be at least 1".into()));
        }
        for row in &rows {
            if row.coefficients.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.coefficients.len(),
                });
            }
        }
        Ok(FeasibilityProgram {
            utility_dim: dim,
            budget: 0.0,
            base_rows: rows,
            responses: Vec::new(),
        })
    }

    pub fn utility_dim(&self) -> usize {
        self.utility_dim
    }

    pub fn num_responses(&self) -> usize {
        self.responses.len()
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn num_vars(&self) -> usize {
        self.utility_dim + self.responses.len()
    }

    /// Every row of the program over `[u, eps]`.
    pub fn rows(&self) -> Vec<Constraint> {
        let j = self.utility_dim;
        let k = self.responses.len();
        let width = j + k;
        let pad = |coefs: &[f64]| {
            let mut row = coefs.to_vec();
            row.resize(width, 0.0);
            row
        };

        let mut rows = Vec::with_capacity(self.base_rows.len() + 1 + 3 * k);
        for row in &self.base_rows {
            rows.push(Constraint::new(pad(&row.coefficients), row.relation, row.rhs));
        }
        let mut budget = vec![0.0; width];
        budget[j..].iter_mut().for_each(|c| *c = 1.0);
        rows.push(Constraint::new(budget, Relation::Le, self.budget));

        for (idx, (delta, response)) in self.responses.iter().enumerate() {
            let eps = j + idx;
            let with_eps = |sign: f64| {
                let mut row = pad(delta);
                row[eps] = sign;
                row
            };
            match response {
                // u'd >= -eps
                Response::PrefersFirst => rows.push(Constraint::new(with_eps(1.0), Relation::Ge, 0.0)),
                // u'd <= eps
                Response::PrefersSecond => rows.push(Constraint::new(with_eps(-1.0), Relation::Le, 0.0)),
                // |u'd| <= eps
                Response::Indifferent => {
                    rows.push(Constraint::new(with_eps(-1.0), Relation::Le, 0.0));
                    rows.push(Constraint::new(with_eps(1.0), Relation::Ge, 0.0));
                }
            }
        }
        for idx in 0..k {
            let mut row = vec![0.0; width];
            row[j + idx] = 1.0;
            rows.push(Constraint::new(row, Relation::Ge, 0.0));
        }
        rows
    }

    /// The LP `min x'u` over this set; every variable is free and the sign
    /// constraints are carried by explicit rows.
    pub fn utility_lp(&self, x: &[f64]) -> Result<LinearProgram> {
        if x.len() != self.utility_dim {
            return Err(Error::DimensionMismatch {
                expected: self.utility_dim,
                found: x.len(),
            });
        }
        let mut objective = x.to_vec();
        objective.resize(self.num_vars(), 0.0);
        let mut lp = LinearProgram::free(objective);
        lp.constraints = self.rows();
        Ok(lp)
    }

    pub fn is_feasible(&self) -> Result<bool> {
        let lp = self.utility_lp(&vec![0.0; self.utility_dim])?;
        Ok(!matches!(solve_lp(&lp)?, LpSolution::Infeasible))
    }
}

/// `min u'x` over the feasible utilities, or `None` if the set is empty.
pub fn worst_case_utility(x: &[f64], program: &FeasibilityProgram) -> Result<Option<f64>> {
    let lp = program.utility_lp(x)?;
    match solve_lp(&lp)? {
        LpSolution::Optimal { value, .. } => Ok(Some(value)),
        LpSolution::Infeasible => Ok(None),
        LpSolution::Unbounded => Err(Error::Unbounded),
    }
}

/// Worst-case utility of every alternative; `None` if the set is empty.
///
/// The feasible set is shared, so infeasibility is detected once by the
/// first solve.
pub fn worst_case_utilities(alternatives: &AlternativeSet, program: &FeasibilityProgram) -> Result<Option<Vec<f64>>> {
    let mut lp = program.utility_lp(alternatives.get(0)?)?;
    let mut out = Vec::with_capacity(alternatives.len());
    for x in alternatives.features() {
        lp.objective[..x.len()].copy_from_slice(x);
        match solve_lp(&lp)? {
            LpSolution::Optimal { value, .. } => out.push(value),
            LpSolution::Infeasible => return Ok(None),
            LpSolution::Unbounded => return Err(Error::Unbounded),
        }
    }
    Ok(Some(out))
}

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlternativeSet, Query, Response};

pub const DEFAULT_INDIFFERENCE: f64 = 0.02;

const SIMPLEX_TOL: f64 = 1e-9;

/// A simulated participant with a known linear utility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticAgent {
    /// Part-worths on the unit simplex.
    pub utility: Vec<f64>,
    /// Standard deviation of the noise added to each comparison.
    pub response_sigma: f64,
    /// Noisy differences no larger than this are reported as indifference.
    pub indifference: f64,
}

impl SyntheticAgent {
    pub fn new(utility: Vec<f64>, response_sigma: f64, indifference: f64) -> Result<Self> {
        if utility.is_empty() || utility.iter().any(|u| u.is_nan() || *u < 0.0) {
            return Err(Error::InvalidParameter("utility must be nonnegative".into()));
        }
        let total: f64 = utility.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidParameter(format!("utility sums to {total}, not 1")));
        }
        if [response_sigma, indifference].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::InvalidParameter("noise and indifference must be nonnegative".into()));
        }
        Ok(SyntheticAgent {
            utility,
            response_sigma,
            indifference,
        })
    }

    /// Utility drawn uniformly from the simplex (Dirichlet with unit weights).
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize, response_sigma: f64, indifference: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("utility dimension must be positive".into()));
        }
        let draws: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = draws.iter().sum();
        Self::new(draws.iter().map(|d| d / total).collect(), response_sigma, indifference)
    }

    pub fn true_utility(&self, x: &[f64]) -> f64 {
        self.utility.iter().zip(x).map(|(u, v)| u * v).sum()
    }

    /// Compare `first` against `second`: `u'(first - second)` plus Gaussian
    /// noise, with a band of indifference around zero. One normal variate
    /// is drawn per call even when the noise is zero.
    pub fn compare<R: Rng + ?Sized>(&self, first: &[f64], second: &[f64], rng: &mut R) -> Response {
        let shock: f64 = rng.sample(StandardNormal);
        let v = self.true_utility(first) - self.true_utility(second) + self.response_sigma * shock;
        if v.abs() <= self.indifference {
            Response::Indifferent
        } else if v > 0.0 {
            Response::PrefersFirst
        } else {
            Response::PrefersSecond
        }
    }
}

pub fn agent_respond<R: Rng + ?Sized>(
    agent: &SyntheticAgent,
    alternatives: &AlternativeSet,
    query: Query,
    rng: &mut R,
) -> Result<Response> {
    if agent.utility.len() != alternatives.dim() {
        return Err(Error::DimensionMismatch {
            expected: alternatives.dim(),
            found: agent.utility.len(),
        });
    }
    let query = query.check(alternatives.len())?;
    Ok(agent.compare(
        &alternatives.features()[query.first],
        &alternatives.features()[query.second],
        rng,
    ))
}

//! Robust recommendation and online robust query selection.

mod lookup;
mod select;

pub use lookup::{build_lookup_table, table_entry, LazyLookup, LookupParams, LookupTable, ResponsePath, LOOKUP_TABLE_VERSION};
pub use select::{
    candidate_objectives, sample_queries, select_queries_random, select_query_robust, select_query_robust_with,
    QuerySelection,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AlternativeSet, QueryHistory};
use crate::special::erf_inv;
use crate::uncertainty::{apply_history, initial_uncertainty, worst_case_utilities};

/// Absolute tolerance for deciding that two objective values tie.
pub const TIE_TOL: f64 = 1e-7;

/// Response-noise model: noise standard deviation and confidence level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma: f64,
    pub p: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { sigma: 0.1, p: 0.9 }
    }
}

impl NoiseParams {
    pub fn new(sigma: f64, p: f64) -> Result<Self> {
        let params = NoiseParams { sigma, p };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(self.p > 0.5 && self.p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0.5, 1), got {}", self.p)));
        }
        Ok(())
    }

    /// Inconsistency budget after `k` responses: `2 sigma sqrt(k) erfinv(2p - 1)`.
    pub fn gamma(&self, k: usize) -> Result<f64> {
        gamma_schedule(*self, k)
    }
}

pub fn gamma_schedule(noise: NoiseParams, k: usize) -> Result<f64> {
    noise.validate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("budget schedule is defined for k >= 1".into()));
    }
    if noise.sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * noise.sigma * (k as f64).sqrt() * erf_inv(2.0 * noise.p - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub index: usize,
    /// Worst-case utility guaranteed by `index`; `-inf` when infeasible.
    pub value: f64,
    pub feasible: bool,
}

impl Recommendation {
    pub fn require_feasible(self) -> Result<Self> {
        if self.feasible {
            Ok(self)
        } else {
            Err(Error::Infeasible)
        }
    }
}

/// Alternative with the largest worst-case utility over the simplex
/// updated by `history` under budget `gamma`. Ties go to the smallest index.
///
/// An empty uncertainty set yields `feasible == false`; callers decide how
/// to proceed (see [`Recommendation::require_feasible`]).
pub fn recommend(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> Result<Recommendation> {
    let values = worst_case_values(alternatives, history, gamma)?;
    let Some(values) = values else {
        return Ok(Recommendation {
            index: 0,
            value: f64::NEG_INFINITY,
            feasible: false,
        });
    };
    let (index, value) = argmax_first(&values);
    Ok(Recommendation {
        index,
        value,
        feasible: true,
    })
}

/// Worst-case utility of every alternative under the updated set.
pub fn worst_case_values(alternatives: &AlternativeSet, history: &QueryHistory, gamma: f64) -> Result<Option<Vec<f64>>> {
    let base = initial_uncertainty(alternatives.dim())?;
    let program = apply_history(&base, alternatives, history, gamma)?;
    worst_case_utilities(alternatives, &program)
}

/// First index whose value is within [`TIE_TOL`] of the maximum.
pub(crate) fn argmax_first(values: &[f64]) -> (usize, f64) {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let index = values.iter().position(|v| *v >= best - TIE_TOL).unwrap_or(0);
    (index, values[index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Query, Response};
    use approx::assert_abs_diff_eq;

    #[test]
    fn gamma_zero_noise() {
        let noise = NoiseParams::new(0.0, 0.75).unwrap();
        assert_eq!(gamma_schedule(noise, 1).unwrap(), 0.0);
        assert_eq!(gamma_schedule(noise, 9).unwrap(), 0.0);
    }

    #[test]
    fn gamma_paper_parameters() {
        let noise = NoiseParams::default();
        assert_abs_diff_eq!(gamma_schedule(noise, 1).unwrap(), 0.181_239, epsilon = 1e-5);
        assert_abs_diff_eq!(gamma_schedule(noise, 10).unwrap(), 0.573_127, epsilon = 1e-5);
    }

    #[test]
    fn gamma_rejects_bad_parameters() {
        assert!(NoiseParams::new(0.1, 0.5).is_err());
        assert!(NoiseParams::new(0.1, 1.0).is_err());
        assert!(NoiseParams::new(-0.1, 0.9).is_err());
        assert!(gamma_schedule(NoiseParams { sigma: 0.1, p: 0.3 }, 1).is_err());
        assert!(gamma_schedule(NoiseParams::default(), 0).is_err());
    }

    #[test]
    fn recommend_without_queries() {
        let x = AlternativeSet::from_features(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]).unwrap();
        let rec = recommend(&x, &QueryHistory::new(), 0.0).unwrap();
        assert_eq!(rec.index, 2);
        assert_abs_diff_eq!(rec.value, 0.5, epsilon = 1e-12);

        let x = AlternativeSet::from_features(vec![vec![0.6, 0.2], vec![0.4, 0.5]]).unwrap();
        let rec = recommend(&x, &QueryHistory::new(), 0.0).unwrap();
        assert_eq!(rec.index, 1);
        assert_abs_diff_eq!(rec.value, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn recommend_after_preference() {
        let x = AlternativeSet::from_features(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let history = QueryHistory::from_entries(vec![(Query { first: 0, second: 1 }, Response::PrefersFirst)]);
        let rec = recommend(&x, &history, 0.0).unwrap();
        assert_eq!(rec.index, 0);
        assert_abs_diff_eq!(rec.value, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn recommend_ties_take_smallest_index() {
        let x = AlternativeSet::from_features(vec![vec![0.2, 0.2], vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(recommend(&x, &QueryHistory::new(), 0.0).unwrap().index, 1);
    }

    #[test]
    fn recommend_flags_infeasible_set() {
        // u1 >= u2 forces u1 >= 0.5, contradicting 0.2 >= u1.
        let x3 = AlternativeSet::from_features(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.2, 0.2]]).unwrap();
        let history = QueryHistory::from_entries(vec![
            (Query { first: 0, second: 1 }, Response::PrefersFirst),
            (Query { first: 0, second: 2 }, Response::PrefersSecond),
        ]);
        let rec = recommend(&x3, &history, 0.0).unwrap();
        assert!(!rec.feasible);
        assert!(matches!(rec.require_feasible(), Err(Error::Infeasible)));
    }
}

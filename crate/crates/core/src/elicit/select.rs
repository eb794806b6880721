use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gamma_schedule, NoiseParams, TIE_TOL};
use crate::error::{Error, Result};
use crate::model::{all_queries, num_queries, AlternativeSet, Query, QueryHistory, Response};
use crate::par::Execution;
use crate::uncertainty::{apply_history, initial_uncertainty, worst_case_utilities, FeasibilityProgram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuerySelection {
    pub query: Query,
    /// `min_s max_x min_u u'x` attained by `query`.
    pub objective: f64,
}

/// Next robust query after `history`, using the default execution mode.
pub fn select_query_robust(
    alternatives: &AlternativeSet,
    history: &QueryHistory,
    noise: NoiseParams,
    max_queries: usize,
) -> Result<QuerySelection> {
    select_query_robust_with(alternatives, history, noise, max_queries, Execution::default())
}

/// Solve the one-step robust query problem exactly by enumeration.
///
/// Every candidate query is scored by the worst response it can receive,
/// where a response is judged by the best worst-case utility any
/// alternative attains afterwards. Responses that empty the uncertainty
/// set are not available to the adversary. The candidate with the highest
/// score wins; among ties, queries not yet asked come first, then
/// lexicographic order.
pub fn select_query_robust_with(
    alternatives: &AlternativeSet,
    history: &QueryHistory,
    noise: NoiseParams,
    max_queries: usize,
    execution: Execution,
) -> Result<QuerySelection> {
    if alternatives.len() < 2 {
        return Err(Error::TooFewAlternatives {
            required: 2,
            found: alternatives.len(),
        });
    }
    if history.len() >= max_queries {
        return Err(Error::HistoryFull(max_queries));
    }
    let candidates = alternatives.queries();
    let objectives = candidate_objectives(alternatives, history, noise, &candidates, execution)?;

    let best = objectives
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if best == f64::NEG_INFINITY {
        return Err(Error::NoFeasibleQuery);
    }
    let tied = |i: &usize| objectives[*i].is_some_and(|v| v >= best - TIE_TOL);
    let pick = (0..candidates.len())
        .filter(tied)
        .find(|&i| !history.contains_query(candidates[i]))
        .or_else(|| (0..candidates.len()).find(tied))
        .expect("best objective is attained");
    Ok(QuerySelection {
        query: candidates[pick],
        objective: objectives[pick].expect("tied candidates are feasible"),
    })
}

/// Objective of each candidate query, `None` when every response to it
/// leaves an empty uncertainty set.
pub fn candidate_objectives(
    alternatives: &AlternativeSet,
    history: &QueryHistory,
    noise: NoiseParams,
    candidates: &[Query],
    execution: Execution,
) -> Result<Vec<Option<f64>>> {
    history.validate(alternatives.len())?;
    let gamma = gamma_schedule(noise, history.len() + 1)?;
    let base = initial_uncertainty(alternatives.dim())?;
    let current = apply_history(&base, alternatives, history, gamma)?;
    for c in candidates {
        c.check(alternatives.len())?;
    }
    execution
        .map(candidates, |&candidate| candidate_objective(alternatives, &current, candidate, gamma))
        .into_iter()
        .collect()
}

fn candidate_objective(
    alternatives: &AlternativeSet,
    current: &FeasibilityProgram,
    candidate: Query,
    gamma: f64,
) -> Result<Option<f64>> {
    let mut worst: Option<f64> = None;
    for response in Response::ALL {
        let step = QueryHistory::from_entries(vec![(candidate, response)]);
        let updated = apply_history(current, alternatives, &step, gamma)?;
        let Some(values) = worst_case_utilities(alternatives, &updated)? else {
            continue;
        };
        let best_alternative = values.into_iter().fold(f64::NEG_INFINITY, f64::max);
        worst = Some(match worst {
            Some(w) => w.min(best_alternative),
            None => best_alternative,
        });
    }
    Ok(worst)
}

/// `count` distinct queries drawn uniformly without replacement from a
/// ChaCha8 stream seeded with `seed`.
pub fn select_queries_random(seed: u64, count: usize, num_alternatives: usize) -> Result<Vec<Query>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_queries(&mut rng, count, num_alternatives)
}

pub fn sample_queries<R: Rng + ?Sized>(rng: &mut R, count: usize, num_alternatives: usize) -> Result<Vec<Query>> {
    let total = num_queries(num_alternatives);
    if count > total {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {count} distinct queries from {total}"
        )));
    }
    let universe = all_queries(num_alternatives);
    Ok(index::sample(rng, total, count)
        .into_iter()
        .map(|i| universe[i])
        .collect())
}

use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{agent_respond, SyntheticAgent, DEFAULT_INDIFFERENCE};
use super::stats::mean;
use super::summary::{difference_span, normalized_wc_difference, FinalPreference, PreferenceCounts};
use crate::elicit::{gamma_schedule, recommend, sample_queries, LazyLookup, NoiseParams, Recommendation, ResponsePath};
use crate::error::{Error, Result};
use crate::model::{AlternativeSet, QueryHistory};
use crate::par::Execution;

/// Tolerance for "robust is at least as good as random".
const COMPARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Robust,
    Random,
}

/// Ask `K = lookup.max_queries()` queries chosen by `strategy`, then
/// recommend with budget `Gamma(K)`. Robust queries come from `lookup`,
/// keyed by the agent's own responses; random queries are drawn without
/// replacement from `rng`.
pub fn run_session<R: Rng + ?Sized>(
    agent: &SyntheticAgent,
    lookup: &LazyLookup,
    strategy: Strategy,
    rng: &mut R,
) -> Result<(QueryHistory, Recommendation)> {
    let x = lookup.alternatives();
    let k = lookup.max_queries();
    if k == 0 {
        return Err(Error::InvalidParameter("a session needs at least one query".into()));
    }
    let mut history = QueryHistory::new();
    match strategy {
        Strategy::Robust => {
            let mut path = ResponsePath::root();
            for _ in 0..k {
                let q = lookup.query_for(&path)?;
                let s = agent_respond(agent, x, q, rng)?;
                history.push(q, s);
                path = path.child(s);
            }
        }
        Strategy::Random => {
            for q in sample_queries(rng, k, x.len())? {
                let s = agent_respond(agent, x, q, rng)?;
                history.push(q, s);
            }
        }
    }
    let rec = recommend(x, &history, gamma_schedule(lookup.noise(), k)?)?;
    Ok((history, rec))
}

/// Recommendation at the end of a `k`-query session with budget
/// `Gamma(k)`. The flag is set when the answers left an empty uncertainty
/// set and the no-query recommendation was used instead.
pub fn final_recommendation(
    x: &AlternativeSet,
    history: &QueryHistory,
    k: usize,
    noise: NoiseParams,
) -> Result<(Recommendation, bool)> {
    settle(x, recommend(x, history, gamma_schedule(noise, k)?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub agents: usize,
    /// Noise on each synthetic comparison.
    pub response_sigma: f64,
    pub indifference: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            agents: 100,
            response_sigma: 0.05,
            indifference: DEFAULT_INDIFFERENCE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent: usize,
    pub seed: u64,
    pub utility: Vec<f64>,
    pub robust_index: usize,
    pub random_index: usize,
    pub z_robust: f64,
    pub z_random: f64,
    pub true_utility_robust: f64,
    pub true_utility_random: f64,
    pub preference: FinalPreference,
    pub robust_fallback: bool,
    pub random_fallback: bool,
    pub normalized_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub n: usize,
    pub counts: PreferenceCounts,
    pub mean_z_robust: f64,
    pub mean_z_random: f64,
    pub mean_true_utility_robust: f64,
    pub mean_true_utility_random: f64,
    /// Agents with `z_robust >= z_random`.
    pub robust_at_least_random: usize,
    pub fallbacks: usize,
    pub agents: Vec<AgentOutcome>,
}

impl ComparisonSummary {
    pub fn normalized_differences(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.normalized_difference).collect()
    }
}

/// Run both strategies for `config.agents` agents with utilities drawn
/// uniformly from the simplex. Agent `i` uses the `i`-th seed drawn from
/// `config.seed`, so results do not depend on `execution`.
pub fn run_comparison_experiment(
    alternatives: &AlternativeSet,
    k: usize,
    noise: NoiseParams,
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<ComparisonSummary> {
    let lookup = LazyLookup::new(alternatives.clone(), k, noise)?.execution(Execution::Sequential);
    run_comparison_with_lookup(&lookup, config, execution)
}

/// Like [`run_comparison_experiment`], reusing the robust queries already
/// cached in `lookup`.
pub fn run_comparison_with_lookup(
    lookup: &LazyLookup,
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<ComparisonSummary> {
    if config.agents == 0 {
        return Err(Error::InvalidParameter("experiment needs at least one agent".into()));
    }
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<(usize, u64)> = (0..config.agents).map(|i| (i, master.next_u64())).collect();
    let agents = execution
        .map(&seeds, |&(i, seed)| run_agent(lookup, config, i, seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(agents))
}

fn run_agent(lookup: &LazyLookup, config: &ExperimentConfig, index: usize, seed: u64) -> Result<AgentOutcome> {
    let x = lookup.alternatives();
    let noise = lookup.noise();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let agent = SyntheticAgent::sample(&mut rng, x.dim(), config.response_sigma, config.indifference)?;
    let (robust_history, robust_raw) = run_session(&agent, lookup, Strategy::Robust, &mut rng)?;
    let (random_history, random_raw) = run_session(&agent, lookup, Strategy::Random, &mut rng)?;
    let (robust, robust_fallback) = settle(x, robust_raw)?;
    let (random, random_fallback) = settle(x, random_raw)?;

    let true_robust = agent.true_utility(&x.features()[robust.index]);
    let true_random = agent.true_utility(&x.features()[random.index]);
    let preference = if robust.index == random.index {
        FinalPreference::IndifferentSame
    } else if (true_robust - true_random).abs() <= config.indifference {
        FinalPreference::IndifferentDifferent
    } else if true_robust > true_random {
        FinalPreference::PrefersRobust
    } else {
        FinalPreference::PrefersRandom
    };
    let (best, base) = difference_span(x, &robust_history, &random_history, noise)?;
    Ok(AgentOutcome {
        agent: index,
        seed,
        utility: agent.utility,
        robust_index: robust.index,
        random_index: random.index,
        z_robust: robust.value,
        z_random: random.value,
        true_utility_robust: true_robust,
        true_utility_random: true_random,
        preference,
        robust_fallback,
        random_fallback,
        normalized_difference: normalized_wc_difference(robust.value, random.value, best, base),
    })
}

fn settle(x: &AlternativeSet, rec: Recommendation) -> Result<(Recommendation, bool)> {
    if rec.feasible {
        Ok((rec, false))
    } else {
        Ok((recommend(x, &QueryHistory::new(), 0.0)?, true))
    }
}

fn summarize(agents: Vec<AgentOutcome>) -> ComparisonSummary {
    let mut counts = PreferenceCounts::default();
    for a in &agents {
        counts.add(a.preference);
    }
    let avg = |f: fn(&AgentOutcome) -> f64| mean(&agents.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
    ComparisonSummary {
        n: agents.len(),
        counts,
        mean_z_robust: avg(|a| a.z_robust),
        mean_z_random: avg(|a| a.z_random),
        mean_true_utility_robust: avg(|a| a.true_utility_robust),
        mean_true_utility_random: avg(|a| a.true_utility_random),
        robust_at_least_random: agents
            .iter()
            .filter(|a| a.z_robust >= a.z_random - COMPARE_TOL)
            .count(),
        fallbacks: agents.iter().filter(|a| a.robust_fallback || a.random_fallback).count(),
        agents,
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    agent: usize,
    seed: u64,
    z_robust: f64,
    z_random: f64,
    true_utility_robust: f64,
    true_utility_random: f64,
    robust_index: usize,
    random_index: usize,
    final_preference: &'a str,
}

/// One row per agent.
pub fn write_agents_csv<W: Write>(summary: &ComparisonSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for a in &summary.agents {
        let pref = match a.preference {
            FinalPreference::PrefersRobust => "prefers-robust",
            FinalPreference::PrefersRandom => "prefers-random",
            FinalPreference::IndifferentDifferent => "indifferent-different",
            FinalPreference::IndifferentSame => "indifferent-same",
        };
        w.serialize(CsvRow {
            agent: a.agent,
            seed: a.seed,
            z_robust: a.z_robust,
            z_random: a.z_random,
            true_utility_robust: a.true_utility_robust,
            true_utility_random: a.true_utility_random,
            robust_index: a.robust_index,
            random_index: a.random_index,
            final_preference: pref,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

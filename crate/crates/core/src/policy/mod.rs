//! Critical-care bed allocation simulator.
//!
//! A policy is a depth-three scoring tree over a patient's age and days
//! waited. Simulating a policy against a [`Scenario`] yields sixteen
//! outcome measures, which are normalized into an [`AlternativeSet`].

mod features;
mod scenario;
mod sim;
mod tree;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use features::{
    coefficient_of_variation, extract_feature_matrix, normalize_features, outcome_columns, AlternativesFile,
    FeatureColumn, FeatureMatrix, Orientation, ALTERNATIVES_FILE_VERSION,
};
pub use scenario::{
    bundled_scenario, default_age_labels, load_scenario, parse_scenario, AgeGroup, Scenario, ScenarioConfig,
    NUM_AGE_BINS,
};
pub use sim::{
    run_simulation, simulate_policy, BinCounts, Patient, PatientState, PolicyOutcomes, SimulationRun, NUM_FEATURES,
};
pub use tree::{
    generate_policy, generate_policy_with, score_patient, PolicyTree, Split, SplitFeature, ThresholdRanges,
    NUM_LEAVES, NUM_SPLITS, TREE_DEPTH,
};

use crate::error::Result;
use crate::model::AlternativeSet;
use crate::par::Execution;

/// Generate `count` random policies, simulate each against `scenario` and
/// normalize their outcomes. Policy `i` uses the `i`-th pair of seeds drawn
/// from `seed`, so the result does not depend on `execution`.
pub fn generate_policies(
    count: usize,
    seed: u64,
    scenario: &Scenario,
    ranges: &ThresholdRanges,
    execution: Execution,
) -> Result<AlternativesFile> {
    scenario.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<(u64, u64)> = (0..count).map(|_| (master.next_u64(), master.next_u64())).collect();
    let trees: Vec<PolicyTree> = seeds
        .iter()
        .map(|&(tree_seed, _)| generate_policy_with(&mut ChaCha8Rng::seed_from_u64(tree_seed), ranges))
        .collect();
    let jobs: Vec<(&PolicyTree, u64)> = trees.iter().zip(seeds.iter().map(|s| s.1)).collect();
    let outcomes = execution
        .map(&jobs, |&(tree, sim_seed)| simulate_policy(tree, scenario, sim_seed))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut file = AlternativesFile::from_matrix(&extract_feature_matrix(&outcomes))?;
    file.raw_outcomes = Some(outcomes);
    file.policies = Some(trees);
    Ok(file)
}

/// Convenience wrapper returning just the alternative set.
pub fn generate_alternatives(count: usize, seed: u64, scenario: &Scenario) -> Result<AlternativeSet> {
    generate_policies(count, seed, scenario, &ThresholdRanges::default(), Execution::default())?.to_alternative_set()
}

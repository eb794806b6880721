use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::coefficient_of_variation;
use super::scenario::{Scenario, NUM_AGE_BINS};
use super::tree::PolicyTree;
use crate::error::{Error, Result};

pub const NUM_FEATURES: usize = 2 + 2 * NUM_AGE_BINS + 2;

/// Days the loop may run past the last arrival day before giving up.
const DRAIN_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatientState {
    Waiting,
    InCcu,
    Survived,
    DiedInCcu,
    DiedWaiting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    pub age_bin: usize,
    pub age_years: f64,
    pub days_waited: u32,
    pub state: PatientState,
}

/// Per-bin tallies over a finished run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BinCounts {
    pub arrived: [usize; NUM_AGE_BINS],
    pub admitted: [usize; NUM_AGE_BINS],
    pub survived: [usize; NUM_AGE_BINS],
    pub died_in_ccu: [usize; NUM_AGE_BINS],
    pub died_waiting: [usize; NUM_AGE_BINS],
}

impl BinCounts {
    pub fn total(field: &[usize; NUM_AGE_BINS]) -> usize {
        field.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyOutcomes {
    pub life_years: f64,
    pub overall_survival: f64,
    pub survival_by_age: [f64; NUM_AGE_BINS],
    pub access_by_age: [f64; NUM_AGE_BINS],
    pub survival_cv: f64,
    pub access_cv: f64,
}

impl PolicyOutcomes {
    /// The outcome vector in column order: life-years, overall survival,
    /// survival by age, access by age, survival CV, access CV.
    pub fn features(&self) -> [f64; NUM_FEATURES] {
        let mut f = [0.0; NUM_FEATURES];
        f[0] = self.life_years;
        f[1] = self.overall_survival;
        f[2..2 + NUM_AGE_BINS].copy_from_slice(&self.survival_by_age);
        f[2 + NUM_AGE_BINS..2 + 2 * NUM_AGE_BINS].copy_from_slice(&self.access_by_age);
        f[NUM_FEATURES - 2] = self.survival_cv;
        f[NUM_FEATURES - 1] = self.access_cv;
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRun {
    /// Every patient in arrival order, in their terminal state.
    pub patients: Vec<Patient>,
    pub counts: BinCounts,
    pub days_simulated: usize,
    pub peak_occupancy: usize,
    pub outcomes: PolicyOutcomes,
}

pub fn simulate_policy(tree: &PolicyTree, scenario: &Scenario, seed: u64) -> Result<PolicyOutcomes> {
    run_simulation(tree, scenario, seed).map(|r| r.outcomes)
}

/// Run the daily loop until nobody is waiting or in a bed and no arrival
/// days remain. Each day, in order: patients arrive; each occupied bed
/// resolves into recovery or death; each waiting patient dies with the
/// waiting-death probability; free beds go to waiting patients by
/// descending score, then longer wait, then earlier arrival; everyone
/// still waiting has waited one more day.
///
/// Arrivals are drawn from a stream seeded by `seed`, and each patient's
/// daily draws come from a stream of their own, so runs that differ only
/// in bed count see the same patients.
pub fn run_simulation(tree: &PolicyTree, scenario: &Scenario, seed: u64) -> Result<SimulationRun> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bins = WeightedIndex::new(scenario.age_groups.iter().map(|g| g.proportion))
        .map_err(|e| Error::InvalidScenario(format!("age proportions: {e}")))?;

    let mut patients: Vec<Patient> = Vec::new();
    let mut streams: Vec<ChaCha8Rng> = Vec::new();
    let mut waiting: Vec<usize> = Vec::new();
    let mut occupied: Vec<usize> = Vec::new();
    let mut peak_occupancy = 0;
    let mut day = 0;
    loop {
        if let Some(&expected) = scenario.days.get(day) {
            let base = expected.floor();
            let extra = rng.random::<f64>() < expected - base;
            for _ in 0..(base as usize + extra as usize) {
                let age_bin = bins.sample(&mut rng);
                streams.push(ChaCha8Rng::seed_from_u64(rng.next_u64()));
                waiting.push(patients.len());
                patients.push(Patient {
                    age_bin,
                    age_years: scenario.age_groups[age_bin].midpoint_age,
                    days_waited: 0,
                    state: PatientState::Waiting,
                });
            }
        }

        occupied.retain(|&i| {
            let group = &scenario.age_groups[patients[i].age_bin];
            let draw = streams[i].random::<f64>();
            if draw < group.recovery_prob {
                patients[i].state = PatientState::Survived;
                false
            } else if draw < group.recovery_prob + group.death_prob {
                patients[i].state = PatientState::DiedInCcu;
                false
            } else {
                true
            }
        });

        waiting.retain(|&i| {
            if streams[i].random::<f64>() < scenario.waiting_death_prob {
                patients[i].state = PatientState::DiedWaiting;
                false
            } else {
                true
            }
        });

        let free = scenario.beds - occupied.len();
        if free > 0 && !waiting.is_empty() {
            let mut ranked: Vec<(f64, usize)> = waiting
                .iter()
                .map(|&i| (tree.score(patients[i].age_years, patients[i].days_waited), i))
                .collect();
            ranked.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then(patients[b.1].days_waited.cmp(&patients[a.1].days_waited))
                    .then(a.1.cmp(&b.1))
            });
            for &(_, i) in ranked.iter().take(free) {
                patients[i].state = PatientState::InCcu;
                occupied.push(i);
            }
            waiting.retain(|&i| patients[i].state == PatientState::Waiting);
        }
        assert!(occupied.len() <= scenario.beds, "bed capacity exceeded on day {day}");
        peak_occupancy = peak_occupancy.max(occupied.len());

        for &i in &waiting {
            patients[i].days_waited += 1;
        }

        day += 1;
        if day >= scenario.days.len() && waiting.is_empty() && occupied.is_empty() {
            break;
        }
        if day > scenario.days.len() + DRAIN_LIMIT {
            return Err(Error::InvalidScenario(format!(
                "queue did not drain within {DRAIN_LIMIT} days after the last arrival"
            )));
        }
    }

    let counts = tally(&patients);
    let outcomes = outcomes_from(&patients, &counts, scenario);
    Ok(SimulationRun {
        patients,
        counts,
        days_simulated: day,
        peak_occupancy,
        outcomes,
    })
}

fn tally(patients: &[Patient]) -> BinCounts {
    let mut c = BinCounts::default();
    for p in patients {
        let b = p.age_bin;
        c.arrived[b] += 1;
        match p.state {
            PatientState::Survived => {
                c.admitted[b] += 1;
                c.survived[b] += 1;
            }
            PatientState::DiedInCcu => {
                c.admitted[b] += 1;
                c.died_in_ccu[b] += 1;
            }
            PatientState::DiedWaiting => c.died_waiting[b] += 1,
            PatientState::Waiting | PatientState::InCcu => unreachable!("simulation ended with an active patient"),
        }
    }
    c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// CV, with an all-zero vector treated as perfectly even.
fn spread(values: &[f64]) -> f64 {
    coefficient_of_variation(values).unwrap_or(0.0)
}

fn outcomes_from(patients: &[Patient], counts: &BinCounts, scenario: &Scenario) -> PolicyOutcomes {
    let life_years = patients
        .iter()
        .filter(|p| p.state == PatientState::Survived)
        .map(|p| {
            let g = &scenario.age_groups[p.age_bin];
            (g.life_expectancy - g.midpoint_age).max(0.0)
        })
        .sum();
    let survival_by_age: [f64; NUM_AGE_BINS] = std::array::from_fn(|b| ratio(counts.survived[b], counts.arrived[b]));
    let access_by_age: [f64; NUM_AGE_BINS] = std::array::from_fn(|b| ratio(counts.admitted[b], counts.arrived[b]));
    PolicyOutcomes {
        life_years,
        overall_survival: ratio(BinCounts::total(&counts.survived), BinCounts::total(&counts.arrived)),
        survival_cv: spread(&survival_by_age),
        access_cv: spread(&access_by_age),
        survival_by_age,
        access_by_age,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::scenario::AgeGroup;
    use crate::policy::tree::{generate_policy, Split, SplitFeature, NUM_LEAVES, NUM_SPLITS};

    fn groups(recovery: f64, death: f64) -> Vec<AgeGroup> {
        (0..NUM_AGE_BINS)
            .map(|i| AgeGroup {
                label: format!("bin {i}"),
                proportion: 1.0 / NUM_AGE_BINS as f64,
                recovery_prob: recovery,
                death_prob: death,
                life_expectancy: 85.0,
                midpoint_age: 25.0 + 10.0 * i as f64,
            })
            .collect()
    }

    fn scenario(days: Vec<f64>, beds: usize, waiting_death_prob: f64, recovery: f64, death: f64) -> Scenario {
        Scenario {
            days,
            age_groups: groups(recovery, death),
            waiting_death_prob,
            beds,
        }
    }

    fn one_bin(mut s: Scenario, bin: usize) -> Scenario {
        for (i, g) in s.age_groups.iter_mut().enumerate() {
            g.proportion = if i == bin { 1.0 } else { 0.0 };
        }
        s
    }

    /// Tree scoring purely by age: the root split on `age >= threshold`.
    fn age_tree(threshold: f64, old: f64, young: f64) -> PolicyTree {
        let always = Split {
            feature: SplitFeature::DaysWaited,
            threshold: 0.0,
        };
        let mut splits = [always; NUM_SPLITS];
        splits[0] = Split {
            feature: SplitFeature::Age,
            threshold,
        };
        let mut leaves = [0.0; NUM_LEAVES];
        leaves[..4].fill(old);
        leaves[4..].fill(young);
        PolicyTree::new(splits, leaves).unwrap()
    }

    #[test]
    fn ample_beds_give_full_access() {
        let s = scenario(vec![5.0, 7.0, 3.0], 100, 0.0, 0.2, 0.1);
        let run = run_simulation(&generate_policy(1), &s, 9).unwrap();
        assert_eq!(run.patients.len(), 15);
        for (b, &a) in run.outcomes.access_by_age.iter().enumerate() {
            if run.counts.arrived[b] > 0 {
                assert_eq!(a, 1.0);
            }
        }
        assert!(run.patients.iter().all(|p| p.days_waited == 0));
    }

    #[test]
    fn higher_score_admitted_first() {
        // One bed, two arrivals on day 0: ages 25 and 75 (bins 0 and 5).
        let mut s = scenario(vec![2.0], 1, 0.0, 1.0, 0.0);
        s.age_groups[1].proportion = 0.0;
        s.age_groups[2].proportion = 0.0;
        s.age_groups[3].proportion = 0.0;
        s.age_groups[4].proportion = 0.0;
        s.age_groups[0].proportion = 0.5;
        s.age_groups[5].proportion = 0.5;
        let mut mixed = 0;
        for seed in 0..20 {
            let run = run_simulation(&age_tree(50.0, 0.9, 0.1), &s, seed).unwrap();
            if run.patients.iter().filter(|p| p.age_bin == 5).count() != 1 {
                continue;
            }
            mixed += 1;
            for p in &run.patients {
                let expected = if p.age_bin == 5 { 0 } else { 1 };
                assert_eq!(p.days_waited, expected, "seed {seed}");
            }
        }
        assert!(mixed > 0);
    }

    #[test]
    fn hand_traced_three_days() {
        // Day 0: both arrive, one is admitted, the other waits a day. Day 1:
        // the first recovers and frees the bed for the second. Day 2: the
        // second recovers.
        let s = one_bin(scenario(vec![2.0, 0.0, 0.0], 1, 0.0, 1.0, 0.0), 2);
        let run = run_simulation(&age_tree(40.0, 0.5, 0.5), &s, 3).unwrap();
        assert_eq!(run.patients.len(), 2);
        assert!(run.patients.iter().all(|p| p.state == PatientState::Survived));
        assert_eq!(run.patients[0].days_waited, 0);
        assert_eq!(run.patients[1].days_waited, 1);
        assert_eq!(run.days_simulated, 3);
        assert_eq!(run.peak_occupancy, 1);
        assert_eq!(run.outcomes.access_by_age[2], 1.0);
    }

    #[test]
    fn equal_scores_prefer_longer_wait_then_arrival() {
        // Day 0: three arrive, one bed. Day 1: one more arrives; the bed
        // goes to patient 1 (waited 1 day), not the newcomer.
        let s = one_bin(scenario(vec![3.0, 1.0], 1, 0.0, 1.0, 0.0), 0);
        let run = run_simulation(&age_tree(40.0, 0.5, 0.5), &s, 0).unwrap();
        let waits: Vec<u32> = run.patients.iter().map(|p| p.days_waited).collect();
        assert_eq!(waits, vec![0, 1, 2, 2]);
    }

    #[test]
    fn zero_beds_is_an_error() {
        let s = scenario(vec![1.0], 0, 0.1, 0.5, 0.1);
        assert!(simulate_policy(&generate_policy(0), &s, 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let s = scenario(vec![4.3, 8.7, 6.1, 2.2], 3, 0.1, 0.2, 0.05);
        let t = generate_policy(5);
        assert_eq!(run_simulation(&t, &s, 77).unwrap(), run_simulation(&t, &s, 77).unwrap());
    }

    #[test]
    fn life_years_counts_survivors_only() {
        let s = one_bin(scenario(vec![3.0], 10, 0.0, 1.0, 0.0), 1);
        let out = simulate_policy(&generate_policy(2), &s, 1).unwrap();
        // Three survivors at age 35 with expectancy 85.
        assert!((out.life_years - 150.0).abs() < 1e-9);
        assert_eq!(out.overall_survival, 1.0);
    }
}

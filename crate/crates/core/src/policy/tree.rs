use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sim::Patient;
use crate::error::{Error, Result};

pub const TREE_DEPTH: usize = 3;
pub const NUM_SPLITS: usize = (1 << TREE_DEPTH) - 1;
pub const NUM_LEAVES: usize = 1 << TREE_DEPTH;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitFeature {
    Age,
    DaysWaited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: SplitFeature,
    pub threshold: f64,
}

impl Split {
    /// True when the patient goes to the left child.
    pub fn test(&self, age_years: f64, days_waited: u32) -> bool {
        let value = match self.feature {
            SplitFeature::Age => age_years,
            SplitFeature::DaysWaited => days_waited as f64,
        };
        value >= self.threshold
    }
}

/// Complete binary tree of depth three stored in heap order: split `n` has
/// children `2n + 1` (condition holds) and `2n + 2`; index `NUM_SPLITS + l`
/// is leaf `l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct PolicyTree {
    splits: [Split; NUM_SPLITS],
    leaves: [f64; NUM_LEAVES],
}

#[derive(Deserialize)]
struct RawTree {
    splits: [Split; NUM_SPLITS],
    leaves: [f64; NUM_LEAVES],
}

impl TryFrom<RawTree> for PolicyTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        PolicyTree::new(raw.splits, raw.leaves)
    }
}

impl PolicyTree {
    pub fn new(splits: [Split; NUM_SPLITS], leaves: [f64; NUM_LEAVES]) -> Result<Self> {
        if let Some(s) = splits.iter().find(|s| !s.threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite split threshold {}", s.threshold)));
        }
        if let Some(v) = leaves.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("leaf score {v} outside [0, 1]")));
        }
        Ok(PolicyTree { splits, leaves })
    }

    pub fn splits(&self) -> &[Split; NUM_SPLITS] {
        &self.splits
    }

    pub fn leaves(&self) -> &[f64; NUM_LEAVES] {
        &self.leaves
    }

    /// Index of the leaf reached from the root.
    pub fn leaf_index(&self, age_years: f64, days_waited: u32) -> usize {
        let mut node = 0;
        while node < NUM_SPLITS {
            node = if self.splits[node].test(age_years, days_waited) {
                2 * node + 1
            } else {
                2 * node + 2
            };
        }
        node - NUM_SPLITS
    }

    pub fn score(&self, age_years: f64, days_waited: u32) -> f64 {
        self.leaves[self.leaf_index(age_years, days_waited)]
    }
}

/// Ranges that split thresholds are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRanges {
    pub age: (f64, f64),
    pub days_waited: (f64, f64),
}

impl Default for ThresholdRanges {
    fn default() -> Self {
        ThresholdRanges {
            age: (18.0, 90.0),
            days_waited: (0.0, 14.0),
        }
    }
}

/// Random tree for `seed` with the default threshold ranges.
pub fn generate_policy(seed: u64) -> PolicyTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_policy_with(&mut rng, &ThresholdRanges::default())
}

/// Each split picks a feature uniformly and a threshold uniformly over that
/// feature's range; each leaf score is uniform on [0, 1].
pub fn generate_policy_with<R: Rng + ?Sized>(rng: &mut R, ranges: &ThresholdRanges) -> PolicyTree {
    let splits = std::array::from_fn(|_| {
        let feature = if rng.random_bool(0.5) {
            SplitFeature::Age
        } else {
            SplitFeature::DaysWaited
        };
        let (lo, hi) = match feature {
            SplitFeature::Age => ranges.age,
            SplitFeature::DaysWaited => ranges.days_waited,
        };
        Split {
            feature,
            threshold: lo + (hi - lo) * rng.random::<f64>(),
        }
    });
    let leaves = std::array::from_fn(|_| rng.random::<f64>());
    PolicyTree { splits, leaves }
}

pub fn score_patient(tree: &PolicyTree, patient: &Patient) -> f64 {
    tree.score(patient.age_years, patient.days_waited)
}

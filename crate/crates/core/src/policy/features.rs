use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scenario::NUM_AGE_BINS;
use super::sim::{PolicyOutcomes, NUM_FEATURES};
use super::tree::PolicyTree;
use crate::error::{Error, Result};
use crate::model::AlternativeSet;

pub const ALTERNATIVES_FILE_VERSION: u32 = 1;

const CV_MEAN_TOL: f64 = 1e-12;
const CONSTANT_COLUMN_TOL: f64 = 1e-12;

/// Population standard deviation over the mean.
pub fn coefficient_of_variation(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidParameter("coefficient of variation of no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if mean <= CV_MEAN_TOL {
        return Err(Error::InvalidParameter(format!(
            "coefficient of variation undefined for mean {mean}"
        )));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt() / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Larger raw values are better.
    Benefit,
    /// Smaller raw values are better; flipped during normalization.
    Cost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumn {
    /// Name of the raw column.
    pub name: String,
    /// Name of the column after normalization.
    pub normalized_name: String,
    pub orientation: Orientation,
    /// Whether the survey shows this column.
    pub display: bool,
}

impl FeatureColumn {
    fn benefit(name: String) -> Self {
        FeatureColumn {
            normalized_name: name.clone(),
            name,
            orientation: Orientation::Benefit,
            display: true,
        }
    }

    fn fairness(metric: &str) -> Self {
        FeatureColumn {
            name: format!("{metric}_cv"),
            normalized_name: format!("{metric}_fairness"),
            orientation: Orientation::Cost,
            display: false,
        }
    }
}

/// The sixteen outcome columns in [`PolicyOutcomes::features`] order.
pub fn outcome_columns() -> Vec<FeatureColumn> {
    let labels = super::scenario::default_age_labels();
    let mut cols = vec![
        FeatureColumn::benefit("life_years".into()),
        FeatureColumn::benefit("survival".into()),
    ];
    cols.extend(labels.iter().map(|l| FeatureColumn::benefit(format!("survival_{l}"))));
    cols.extend(labels.iter().map(|l| FeatureColumn::benefit(format!("access_{l}"))));
    cols.push(FeatureColumn::fairness("survival"));
    cols.push(FeatureColumn::fairness("access"));
    debug_assert_eq!(cols.len(), NUM_FEATURES);
    debug_assert_eq!(NUM_FEATURES, 4 + 2 * NUM_AGE_BINS);
    cols
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub labels: Vec<String>,
    pub columns: Vec<FeatureColumn>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    /// Treat an existing alternative set as a matrix of benefit columns.
    pub fn from_alternatives(set: &AlternativeSet) -> Self {
        FeatureMatrix {
            labels: set.labels().to_vec(),
            columns: (0..set.dim()).map(|j| FeatureColumn::benefit(format!("feature_{j}"))).collect(),
            rows: set.features().to_vec(),
        }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(move |r| r[j])
    }
}

/// One row per policy, labelled `policy 0`, `policy 1`, ...
pub fn extract_feature_matrix(outcomes: &[PolicyOutcomes]) -> FeatureMatrix {
    FeatureMatrix {
        labels: (0..outcomes.len()).map(|i| format!("policy {i}")).collect(),
        columns: outcome_columns(),
        rows: outcomes.iter().map(|o| o.features().to_vec()).collect(),
    }
}

/// Min-max scale every column to [0, 1], then flip cost columns so that
/// larger is better everywhere. A constant column becomes 0.5.
pub fn normalize_features(matrix: &FeatureMatrix) -> Result<AlternativeSet> {
    if matrix.rows.len() < 2 {
        return Err(Error::TooFewAlternatives {
            required: 2,
            found: matrix.rows.len(),
        });
    }
    let dim = matrix.columns.len();
    if let Some(r) = matrix.rows.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: r.len(),
        });
    }
    let mut rows = vec![vec![0.0; dim]; matrix.rows.len()];
    for (j, col) in matrix.columns.iter().enumerate() {
        let lo = matrix.column(j).fold(f64::INFINITY, f64::min);
        let hi = matrix.column(j).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!("column {} has non-finite values", col.name)));
        }
        let span = hi - lo;
        for (i, row) in rows.iter_mut().enumerate() {
            let scaled = if span <= CONSTANT_COLUMN_TOL {
                0.5
            } else {
                ((matrix.rows[i][j] - lo) / span).clamp(0.0, 1.0)
            };
            row[j] = match col.orientation {
                Orientation::Benefit => scaled,
                Orientation::Cost => 1.0 - scaled,
            };
        }
    }
    AlternativeSet::new(matrix.labels.clone(), rows)
}

/// On-disk alternative set shared by the CLI, the survey service and the UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativesFile {
    pub v: u32,
    pub labels: Vec<String>,
    pub feature_names: Vec<String>,
    /// Normalized features, one row per alternative.
    pub features: Vec<Vec<f64>>,
    pub display_mask: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_outcomes: Option<Vec<PolicyOutcomes>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<Vec<PolicyTree>>,
}

impl AlternativesFile {
    pub fn from_matrix(matrix: &FeatureMatrix) -> Result<Self> {
        let set = normalize_features(matrix)?;
        Ok(AlternativesFile {
            v: ALTERNATIVES_FILE_VERSION,
            labels: set.labels().to_vec(),
            feature_names: matrix.columns.iter().map(|c| c.normalized_name.clone()).collect(),
            features: set.features().to_vec(),
            display_mask: matrix.columns.iter().map(|c| c.display).collect(),
            raw_outcomes: None,
            policies: None,
        })
    }

    /// Every column named `feature_j` and displayed.
    pub fn from_alternatives(set: &AlternativeSet) -> Self {
        AlternativesFile {
            v: ALTERNATIVES_FILE_VERSION,
            labels: set.labels().to_vec(),
            feature_names: (0..set.dim()).map(|j| format!("feature_{j}")).collect(),
            features: set.features().to_vec(),
            display_mask: vec![true; set.dim()],
            raw_outcomes: None,
            policies: None,
        }
    }

    pub fn to_alternative_set(&self) -> Result<AlternativeSet> {
        self.validate()?;
        AlternativeSet::new(self.labels.clone(), self.features.clone())
    }

    pub fn validate(&self) -> Result<()> {
        if self.v != ALTERNATIVES_FILE_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported alternatives file version {}",
                self.v
            )));
        }
        let dim = self.feature_names.len();
        if self.display_mask.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: self.display_mask.len(),
            });
        }
        if self.labels.len() != self.features.len() {
            return Err(Error::DimensionMismatch {
                expected: self.features.len(),
                found: self.labels.len(),
            });
        }
        if let Some(r) = self.features.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        for (name, n) in [
            ("raw_outcomes", self.raw_outcomes.as_ref().map(Vec::len)),
            ("policies", self.policies.as_ref().map(Vec::len)),
        ] {
            if n.is_some_and(|n| n != self.labels.len()) {
                return Err(Error::InvalidParameter(format!("{name} does not match the alternatives")));
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: AlternativesFile = serde_json::from_str(&text)?;
        file.validate()?;
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(columns: Vec<FeatureColumn>, rows: Vec<Vec<f64>>) -> FeatureMatrix {
        FeatureMatrix {
            labels: (0..rows.len()).map(|i| format!("r{i}")).collect(),
            columns,
            rows,
        }
    }

    #[test]
    fn cv_examples() {
        assert_eq!(coefficient_of_variation(&[0.5; 6]).unwrap(), 0.0);
        assert!((coefficient_of_variation(&[1.0, 3.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!(coefficient_of_variation(&[0.0; 6]).is_err());
    }

    #[test]
    fn min_max_scaling() {
        let m = matrix(
            vec![FeatureColumn::benefit("a".into())],
            vec![vec![2.0], vec![4.0], vec![6.0]],
        );
        let set = normalize_features(&m).unwrap();
        let col: Vec<f64> = set.features().iter().map(|r| r[0]).collect();
        assert_eq!(col, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn cost_columns_flip() {
        let m = matrix(vec![FeatureColumn::fairness("survival")], vec![vec![0.1], vec![0.3]]);
        let set = normalize_features(&m).unwrap();
        assert_eq!(set.features(), &[vec![1.0], vec![0.0]]);
    }

    #[test]
    fn constant_column_is_half() {
        let m = matrix(
            vec![FeatureColumn::benefit("a".into()), FeatureColumn::fairness("access")],
            vec![vec![0.7, 0.2], vec![0.7, 0.2]],
        );
        let set = normalize_features(&m).unwrap();
        assert_eq!(set.features(), &[vec![0.5, 0.5], vec![0.5, 0.5]]);
    }

    #[test]
    fn single_row_rejected() {
        let m = matrix(vec![FeatureColumn::benefit("a".into())], vec![vec![1.0]]);
        assert!(normalize_features(&m).is_err());
    }

    #[test]
    fn normalization_is_idempotent() {
        let m = matrix(
            vec![
                FeatureColumn::benefit("a".into()),
                FeatureColumn::fairness("survival"),
                FeatureColumn::benefit("c".into()),
            ],
            vec![vec![3.0, 0.2, 1.0], vec![1.0, 0.5, 1.0], vec![2.0, 0.1, 1.0]],
        );
        let once = normalize_features(&m).unwrap();
        let twice = normalize_features(&FeatureMatrix::from_alternatives(&once)).unwrap();
        assert_eq!(once.features(), twice.features());
    }

    #[test]
    fn sixteen_columns_with_hidden_cvs() {
        let cols = outcome_columns();
        assert_eq!(cols.len(), 16);
        let hidden: Vec<&str> = cols.iter().filter(|c| !c.display).map(|c| c.name.as_str()).collect();
        assert_eq!(hidden, vec!["survival_cv", "access_cv"]);
        assert!(cols[..14].iter().all(|c| c.orientation == Orientation::Benefit));
    }

    #[test]
    fn file_round_trip() {
        let m = matrix(
            vec![FeatureColumn::benefit("a".into()), FeatureColumn::fairness("access")],
            vec![vec![1.0, 0.2], vec![3.0, 0.4]],
        );
        let file = AlternativesFile::from_matrix(&m).unwrap();
        assert_eq!(file.display_mask, vec![true, false]);
        assert_eq!(file.feature_names, vec!["a", "access_fairness"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("alts.json");
        file.save(&path).unwrap();
        let back = AlternativesFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_alternative_set().unwrap().features(), &[vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn mismatched_file_rejected() {
        let mut file = AlternativesFile::from_alternatives(
            &AlternativeSet::from_features(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap(),
        );
        file.display_mask.pop();
        assert!(file.to_alternative_set().is_err());
    }
}

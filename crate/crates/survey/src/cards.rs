use robust_elicit::policy::{default_age_labels, AlternativesFile, NUM_AGE_BINS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardFeature {
    pub name: String,
    pub value: f64,
}

/// Raw simulated outcomes for charts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardOutcomes {
    pub life_years: f64,
    pub overall_survival: f64,
    pub age_labels: Vec<String>,
    pub survival_by_age: [f64; NUM_AGE_BINS],
    pub access_by_age: [f64; NUM_AGE_BINS],
}

/// What the UI may show about one alternative. Hidden features never
/// appear here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCard {
    pub alternative: usize,
    pub label: String,
    pub features: Vec<CardFeature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<CardOutcomes>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    cards: Vec<PolicyCard>,
}

impl Catalog {
    pub fn new(file: &AlternativesFile) -> Self {
        let labels: Vec<String> = default_age_labels().map(String::from).to_vec();
        let cards = file
            .features
            .iter()
            .enumerate()
            .map(|(i, row)| PolicyCard {
                alternative: i,
                label: file.labels[i].clone(),
                features: row
                    .iter()
                    .zip(&file.feature_names)
                    .zip(&file.display_mask)
                    .filter(|(_, shown)| **shown)
                    .map(|((value, name), _)| CardFeature {
                        name: name.clone(),
                        value: *value,
                    })
                    .collect(),
                outcomes: file.raw_outcomes.as_ref().map(|raw| CardOutcomes {
                    life_years: raw[i].life_years,
                    overall_survival: raw[i].overall_survival,
                    age_labels: labels.clone(),
                    survival_by_age: raw[i].survival_by_age,
                    access_by_age: raw[i].access_by_age,
                }),
            })
            .collect();
        Catalog { cards }
    }

    pub fn card(&self, index: usize) -> PolicyCard {
        self.cards[index].clone()
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }
}

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Query, Response};

pub const SESSION_RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    RobustFirst,
    RandomFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    Active,
    Completed,
    Expired,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuerySource {
    Robust,
    Random,
}

/// Self-reported participant details; any value may be `"declined"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age_group: String,
    pub ethnicity: String,
    pub gender: String,
    pub healthcare_worker: String,
}

impl Demographics {
    pub fn declined() -> Self {
        let d = || "declined".to_string();
        Demographics {
            age_group: d(),
            ethnicity: d(),
            gender: d(),
            healthcare_worker: d(),
        }
    }
}

/// One answered pairwise query. `query` and `response` are canonical:
/// `response` is relative to `query.first` regardless of which side of the
/// screen it was shown on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAnswer {
    pub step: usize,
    pub source: QuerySource,
    pub query: Query,
    /// True when `query.first` was shown on the right.
    pub swapped: bool,
    pub response: Response,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrtAnswer {
    pub step: usize,
    pub question: usize,
    pub answer: String,
    pub elapsed_ms: u64,
}

/// The head-to-head between the two recommendations. `response` is
/// relative to the robust recommendation (1 = prefers it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub step: usize,
    pub robust: usize,
    pub random: usize,
    pub z_robust: f64,
    pub z_random: f64,
    /// True when a recommendation came from the no-query set because the
    /// session's answers left its uncertainty set empty.
    #[serde(default)]
    pub robust_fallback: bool,
    #[serde(default)]
    pub random_fallback: bool,
    /// True when the robust recommendation was shown on the right.
    pub swapped: bool,
    pub response: Response,
    pub elapsed_ms: u64,
}

impl FinalAnswer {
    pub fn same_policy(&self) -> bool {
        self.robust == self.random
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub v: u32,
    pub id: String,
    pub status: SessionStatus,
    pub group: Group,
    #[serde(default)]
    pub worker_id: Option<String>,
    pub demographics: Demographics,
    /// Queries per strategy.
    pub k: usize,
    pub created_at_ms: u64,
    #[serde(default)]
    pub completed_at_ms: Option<u64>,
    pub pairwise: Vec<PairwiseAnswer>,
    pub crt: Vec<CrtAnswer>,
    #[serde(default, rename = "final")]
    pub final_answer: Option<FinalAnswer>,
    /// Set by a reviewer who judged the free-text answers bot-like.
    #[serde(default)]
    pub bot_flag: bool,
}

impl SessionRecord {
    pub fn answers_from(&self, source: QuerySource) -> impl Iterator<Item = &PairwiseAnswer> {
        self.pairwise.iter().filter(move |a| a.source == source)
    }

    /// Canonical (query, response) pairs from one strategy, in step order.
    pub fn history(&self, source: QuerySource) -> crate::model::QueryHistory {
        crate::model::QueryHistory::from_entries(self.answers_from(source).map(|a| (a.query, a.response)).collect())
    }

    pub fn duration_ms(&self) -> Option<u64> {
        self.completed_at_ms.map(|c| c.saturating_sub(self.created_at_ms))
    }
}

/// A line or record that could not be used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    /// 1-based line in the input, when read from JSONL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub message: String,
}

/// Parse a JSONL export. Blank lines are skipped; lines that fail to parse
/// are reported, never dropped.
pub fn parse_jsonl(text: &str) -> (Vec<SessionRecord>, Vec<RecordError>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<SessionRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => errors.push(RecordError {
                line: Some(i + 1),
                id: None,
                message: e.to_string(),
            }),
        }
    }
    (records, errors)
}

pub fn to_jsonl(records: &[SessionRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

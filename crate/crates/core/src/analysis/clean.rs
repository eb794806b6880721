use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::records::{RecordError, SessionRecord, SessionStatus};
use crate::model::Response;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CleanRule {
    DuplicateAttempt,
    BotCrt,
    FirstQueryFast,
    AverageFast,
    DurationOutlier,
    SamePolicyNotIndifferent,
}

impl CleanRule {
    pub const ALL: [CleanRule; 6] = [
        CleanRule::DuplicateAttempt,
        CleanRule::BotCrt,
        CleanRule::FirstQueryFast,
        CleanRule::AverageFast,
        CleanRule::DurationOutlier,
        CleanRule::SamePolicyNotIndifferent,
    ];
}

/// Timing thresholds, all in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanConfig {
    /// Sessions answering the first query faster than this are removed.
    pub first_query_min_ms: u64,
    /// Sessions whose mean time on the remaining queries is below this are removed.
    pub average_min_ms: u64,
    /// Sessions taking longer than this end to end are removed.
    pub max_duration_ms: u64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            first_query_min_ms: 15_000,
            average_min_ms: 3_000,
            max_duration_ms: 60 * 60 * 1000,
        }
    }
}

impl CleanConfig {
    /// Stricter attention checks: 30 s first query, 5 s average.
    pub fn strict() -> Self {
        CleanConfig {
            first_query_min_ms: 30_000,
            average_min_ms: 5_000,
            ..CleanConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    pub rule: CleanRule,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CleanReport {
    pub kept: Vec<String>,
    pub removed: Vec<Removal>,
    pub errors: Vec<RecordError>,
}

impl CleanReport {
    pub fn removed_by(&self, rule: CleanRule) -> impl Iterator<Item = &str> {
        self.removed.iter().filter(move |r| r.rule == rule).map(|r| r.id.as_str())
    }

    pub fn rule_for(&self, id: &str) -> Option<CleanRule> {
        self.removed.iter().find(|r| r.id == id).map(|r| r.rule)
    }
}

/// Check that a record is a finished session with the expected shape.
pub fn check_record(record: &SessionRecord) -> Result<(), String> {
    if record.v != super::records::SESSION_RECORD_VERSION {
        return Err(format!("unsupported record version {}", record.v));
    }
    if record.status != SessionStatus::Completed {
        return Err(format!("session is {:?}, not completed", record.status));
    }
    if record.completed_at_ms.is_none() {
        return Err("missing completion time".into());
    }
    if record.final_answer.is_none() {
        return Err("missing final answer".into());
    }
    if record.k == 0 || record.pairwise.len() != 2 * record.k {
        return Err(format!(
            "expected {} pairwise answers, found {}",
            2 * record.k,
            record.pairwise.len()
        ));
    }
    if record.crt.len() != 3 {
        return Err(format!("expected 3 reflection answers, found {}", record.crt.len()));
    }
    if record.pairwise.windows(2).any(|w| w[0].step >= w[1].step) {
        return Err("pairwise answers are not in step order".into());
    }
    Ok(())
}

/// Free-text answers with no letters or digits look automated.
fn bot_like(record: &SessionRecord) -> bool {
    record.bot_flag
        || record
            .crt
            .iter()
            .any(|a| !a.answer.chars().any(char::is_alphanumeric))
}

/// Apply the removal rules in order; each session is removed by the first
/// rule it matches.
///
/// 1. A later attempt by a worker id seen before (earliest start is kept).
/// 2. A reviewer flag or an empty or symbol-only reflection answer.
/// 3. First pairwise answer faster than `first_query_min_ms`.
/// 4. Mean time over the other pairwise answers and the final answer
///    below `average_min_ms`.
/// 5. Start to finish longer than `max_duration_ms`.
/// 6. Both recommendations are the same policy and the participant did
///    not report indifference.
///
/// Records that are incomplete or malformed go to `errors` instead.
pub fn clean_responses(sessions: &[SessionRecord], config: &CleanConfig) -> CleanReport {
    let mut report = CleanReport::default();
    let mut valid = Vec::new();
    for s in sessions {
        match check_record(s) {
            Ok(()) => valid.push(s),
            Err(message) => report.errors.push(RecordError {
                line: None,
                id: Some(s.id.clone()),
                message,
            }),
        }
    }

    let mut first_attempt: HashMap<&str, (u64, usize)> = HashMap::new();
    for (i, s) in valid.iter().enumerate() {
        if let Some(w) = s.worker_id.as_deref().filter(|w| !w.is_empty()) {
            let e = first_attempt.entry(w).or_insert((s.created_at_ms, i));
            if s.created_at_ms < e.0 {
                *e = (s.created_at_ms, i);
            }
        }
    }

    for (i, s) in valid.iter().enumerate() {
        let rule = if s
            .worker_id
            .as_deref()
            .and_then(|w| first_attempt.get(w))
            .is_some_and(|&(_, keep)| keep != i)
        {
            Some(CleanRule::DuplicateAttempt)
        } else if bot_like(s) {
            Some(CleanRule::BotCrt)
        } else if s.pairwise[0].elapsed_ms < config.first_query_min_ms {
            Some(CleanRule::FirstQueryFast)
        } else if average_fast(s, config) {
            Some(CleanRule::AverageFast)
        } else if s.duration_ms().expect("checked") > config.max_duration_ms {
            Some(CleanRule::DurationOutlier)
        } else if s
            .final_answer
            .as_ref()
            .is_some_and(|f| f.same_policy() && f.response != Response::Indifferent)
        {
            Some(CleanRule::SamePolicyNotIndifferent)
        } else {
            None
        };
        match rule {
            Some(rule) => report.removed.push(Removal { id: s.id.clone(), rule }),
            None => report.kept.push(s.id.clone()),
        }
    }
    report
}

fn average_fast(s: &SessionRecord, config: &CleanConfig) -> bool {
    let final_ms = s.final_answer.as_ref().map(|f| f.elapsed_ms);
    let times: Vec<u64> = s.pairwise[1..].iter().map(|a| a.elapsed_ms).chain(final_ms).collect();
    // Integer comparison keeps the threshold exact.
    let total: u128 = times.iter().map(|&t| t as u128).sum();
    total < config.average_min_ms as u128 * times.len() as u128
}

/// The records kept by `report`, in input order.
pub fn kept_records<'a>(sessions: &'a [SessionRecord], report: &CleanReport) -> Vec<&'a SessionRecord> {
    let kept: std::collections::HashSet<&str> = report.kept.iter().map(String::as_str).collect();
    sessions.iter().filter(|s| kept.contains(s.id.as_str())).collect()
}

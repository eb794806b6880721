use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::clean::{clean_responses, kept_records, CleanConfig, CleanReport};
use super::records::{Group, QuerySource, SessionRecord};
use super::stats::{chi_square_uniform_two, mean, proportion_interval, two_sample_t, ChiSquare, Proportion, TTest};
use crate::elicit::{gamma_schedule, recommend, NoiseParams};
use crate::error::Result;
use crate::model::{AlternativeSet, QueryHistory, Response};

pub const REPORT_VERSION: u32 = 1;

const SPAN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalPreference {
    PrefersRobust,
    PrefersRandom,
    IndifferentDifferent,
    IndifferentSame,
}

impl FinalPreference {
    /// `response` is relative to the robust recommendation.
    pub fn classify(same_policy: bool, response: Response) -> Self {
        match response {
            Response::PrefersFirst => FinalPreference::PrefersRobust,
            Response::PrefersSecond => FinalPreference::PrefersRandom,
            Response::Indifferent if same_policy => FinalPreference::IndifferentSame,
            Response::Indifferent => FinalPreference::IndifferentDifferent,
        }
    }

    /// +1 for robust, -1 for random, 0 for indifference.
    pub fn score(self) -> f64 {
        match self {
            FinalPreference::PrefersRobust => 1.0,
            FinalPreference::PrefersRandom => -1.0,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceCounts {
    pub prefers_robust: u64,
    pub prefers_random: u64,
    pub indifferent_different: u64,
    pub indifferent_same: u64,
}

impl PreferenceCounts {
    pub fn add(&mut self, p: FinalPreference) {
        match p {
            FinalPreference::PrefersRobust => self.prefers_robust += 1,
            FinalPreference::PrefersRandom => self.prefers_random += 1,
            FinalPreference::IndifferentDifferent => self.indifferent_different += 1,
            FinalPreference::IndifferentSame => self.indifferent_same += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.prefers_robust + self.prefers_random + self.indifferent_different + self.indifferent_same
    }

    pub fn strict(&self) -> u64 {
        self.prefers_robust + self.prefers_random
    }

    /// Excess of robust over random preferences among strict preferences.
    pub fn margin(&self) -> Option<f64> {
        let n = self.strict();
        (n > 0).then(|| (self.prefers_robust as f64 - self.prefers_random as f64) / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalQuerySummary {
    pub n: u64,
    pub counts: PreferenceCounts,
    pub prefers_robust: Proportion,
    pub prefers_random: Proportion,
    pub indifferent_different: Proportion,
    pub indifferent_same: Proportion,
}

pub fn summarize_preferences(prefs: impl IntoIterator<Item = FinalPreference>) -> FinalQuerySummary {
    let mut counts = PreferenceCounts::default();
    for p in prefs {
        counts.add(p);
    }
    let n = counts.total();
    FinalQuerySummary {
        n,
        prefers_robust: proportion_interval(counts.prefers_robust, n),
        prefers_random: proportion_interval(counts.prefers_random, n),
        indifferent_different: proportion_interval(counts.indifferent_different, n),
        indifferent_same: proportion_interval(counts.indifferent_same, n),
        counts,
    }
}

pub fn session_preference(record: &SessionRecord) -> Option<FinalPreference> {
    record
        .final_answer
        .as_ref()
        .map(|f| FinalPreference::classify(f.same_policy(), f.response))
}

/// Four-way final-query counts with 95% intervals. Records without a final
/// answer are skipped; pass cleaned sessions.
pub fn summarize_final_query(sessions: &[&SessionRecord]) -> FinalQuerySummary {
    summarize_preferences(sessions.iter().filter_map(|s| session_preference(s)))
}

/// `(z_robust - z_random) / span`, where the span runs from the worst-case
/// utility of the no-query recommendation up to the best worst-case utility
/// available after both strategies' answers together. Clamped to [-1, 1];
/// zero when the span is degenerate or the combined set is empty.
pub fn normalized_wc_difference(z_robust: f64, z_random: f64, best: Option<f64>, baseline: f64) -> f64 {
    let Some(best) = best else {
        return 0.0;
    };
    let span = best - baseline;
    if span.is_nan() || span <= SPAN_TOL {
        return 0.0;
    }
    ((z_robust - z_random) / span).clamp(-1.0, 1.0)
}

/// The two span endpoints for [`normalized_wc_difference`]: the best value
/// under the combined `2K` answers with budget `Gamma(2K)`, and the
/// no-query value.
pub fn difference_span(
    alternatives: &AlternativeSet,
    robust: &QueryHistory,
    random: &QueryHistory,
    noise: NoiseParams,
) -> Result<(Option<f64>, f64)> {
    let combined = robust.concat(random);
    let baseline = recommend(alternatives, &QueryHistory::new(), 0.0)?.value;
    if combined.is_empty() {
        return Ok((Some(baseline), baseline));
    }
    let top = recommend(alternatives, &combined, gamma_schedule(noise, combined.len())?)?;
    Ok((top.feasible.then_some(top.value), baseline))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictPreference {
    pub n: u64,
    pub prefers_robust: u64,
    pub prefers_random: u64,
    pub margin: Option<f64>,
    /// Against an even split, with continuity correction.
    pub chi_square: Option<ChiSquare>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseComparison {
    pub n: usize,
    pub mean_z_robust: Option<f64>,
    pub mean_z_random: Option<f64>,
    pub t_test: Option<TTest>,
    /// Means over sessions with a strict final preference.
    pub strict_n: usize,
    pub strict_mean_z_robust: Option<f64>,
    pub strict_mean_z_random: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEffects {
    pub robust_first: usize,
    pub random_first: usize,
    /// Final-query score (+1 robust, -1 random, 0 indifferent) by group.
    pub group_t: Option<TTest>,
    pub robust_left: usize,
    pub robust_right: usize,
    /// Final-query score by the side the robust recommendation was shown on.
    pub side_t: Option<TTest>,
}

/// How many participants gave a robust answer sequence nobody else gave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSharing {
    pub unique: usize,
    pub shared: usize,
    /// Distinct sequences among the shared ones.
    pub shared_sequences: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub v: u32,
    pub clean: CleanReport,
    pub summary: FinalQuerySummary,
    pub strict: StrictPreference,
    pub worst_case: WorstCaseComparison,
    pub order_effects: OrderEffects,
    pub robust_paths: PathSharing,
    /// Present when the alternatives were supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_differences: Option<Vec<f64>>,
}

/// Clean `sessions` and run every comparison on the kept ones.
pub fn analyze_sessions(
    sessions: &[SessionRecord],
    config: &CleanConfig,
    alternatives: Option<(&AlternativeSet, NoiseParams)>,
) -> Result<AnalysisReport> {
    let clean = clean_responses(sessions, config);
    let kept = kept_records(sessions, &clean);
    let summary = summarize_final_query(&kept);

    let counts = summary.counts;
    let strict = StrictPreference {
        n: counts.strict(),
        prefers_robust: counts.prefers_robust,
        prefers_random: counts.prefers_random,
        margin: counts.margin(),
        chi_square: chi_square_uniform_two((counts.prefers_robust, counts.prefers_random), true).ok(),
    };

    let finals: Vec<_> = kept.iter().filter_map(|s| s.final_answer.as_ref()).collect();
    let zr: Vec<f64> = finals.iter().map(|f| f.z_robust).collect();
    let zd: Vec<f64> = finals.iter().map(|f| f.z_random).collect();
    let strict_finals: Vec<_> = finals.iter().filter(|f| f.response != Response::Indifferent).collect();
    let szr: Vec<f64> = strict_finals.iter().map(|f| f.z_robust).collect();
    let szd: Vec<f64> = strict_finals.iter().map(|f| f.z_random).collect();
    let worst_case = WorstCaseComparison {
        n: finals.len(),
        mean_z_robust: mean(&zr),
        mean_z_random: mean(&zd),
        t_test: two_sample_t(&zr, &zd).ok(),
        strict_n: strict_finals.len(),
        strict_mean_z_robust: mean(&szr),
        strict_mean_z_random: mean(&szd),
    };

    let scores = |pred: &dyn Fn(&SessionRecord) -> bool| -> Vec<f64> {
        kept.iter()
            .filter(|s| pred(s))
            .filter_map(|s| session_preference(s))
            .map(FinalPreference::score)
            .collect()
    };
    let by_group_a = scores(&|s| s.group == Group::RobustFirst);
    let by_group_b = scores(&|s| s.group == Group::RandomFirst);
    let left = scores(&|s| s.final_answer.as_ref().is_some_and(|f| !f.swapped));
    let right = scores(&|s| s.final_answer.as_ref().is_some_and(|f| f.swapped));
    let order_effects = OrderEffects {
        robust_first: by_group_a.len(),
        random_first: by_group_b.len(),
        group_t: two_sample_t(&by_group_a, &by_group_b).ok(),
        robust_left: left.len(),
        robust_right: right.len(),
        side_t: two_sample_t(&left, &right).ok(),
    };

    let mut paths: HashMap<Vec<Response>, usize> = HashMap::new();
    for s in &kept {
        *paths.entry(s.answers_from(QuerySource::Robust).map(|a| a.response).collect()).or_default() += 1;
    }
    let robust_paths = PathSharing {
        unique: paths.values().filter(|&&c| c == 1).count(),
        shared: paths.values().filter(|&&c| c > 1).sum(),
        shared_sequences: paths.values().filter(|&&c| c > 1).count(),
    };

    let normalized_differences = match alternatives {
        None => None,
        Some((x, noise)) => Some(
            kept.iter()
                .filter_map(|s| s.final_answer.as_ref().map(|f| (s, f)))
                .map(|(s, f)| {
                    let robust = s.history(QuerySource::Robust);
                    let random = s.history(QuerySource::Random);
                    robust.validate(x.len())?;
                    random.validate(x.len())?;
                    let (best, base) = difference_span(x, &robust, &random, noise)?;
                    Ok(normalized_wc_difference(f.z_robust, f.z_random, best, base))
                })
                .collect::<Result<Vec<_>>>()?,
        ),
    };

    Ok(AnalysisReport {
        v: REPORT_VERSION,
        clean,
        summary,
        strict,
        worst_case,
        order_effects,
        robust_paths,
        normalized_differences,
    })
}

//! Comparing robust and random elicitation: synthetic agents, session
//! records, response cleaning and the statistics reported on them.

mod agent;
mod clean;
mod experiment;
pub mod fixture;
mod records;
mod stats;
mod summary;

pub use agent::{agent_respond, SyntheticAgent, DEFAULT_INDIFFERENCE};
pub use clean::{check_record, clean_responses, kept_records, CleanConfig, CleanReport, CleanRule, Removal};
pub use experiment::{
    final_recommendation, run_comparison_experiment, run_comparison_with_lookup, run_session, write_agents_csv,
    AgentOutcome, ComparisonSummary, ExperimentConfig, Strategy,
};
pub use records::{
    parse_jsonl, to_jsonl, CrtAnswer, Demographics, FinalAnswer, Group, PairwiseAnswer, QuerySource, RecordError,
    SessionRecord, SessionStatus, SESSION_RECORD_VERSION,
};
pub use stats::{chi_square_uniform_two, mean, proportion_interval, two_sample_t, ChiSquare, Proportion, TTest, Z_95};
pub use summary::{
    analyze_sessions, difference_span, normalized_wc_difference, session_preference, summarize_final_query,
    summarize_preferences, AnalysisReport, FinalPreference, FinalQuerySummary, OrderEffects, PathSharing,
    PreferenceCounts, StrictPreference, WorstCaseComparison, REPORT_VERSION,
};

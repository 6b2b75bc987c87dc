//! Seeded episodes, benchmark scenarios, metrics and output tables.

mod episode;
mod report;
mod scenario;

pub use episode::{
    compare_policies, discounted_return, median, policy_rng, run_episode, run_seeds, seed_range, Comparison,
    EpisodeMetrics, EpisodeTrace, MetricStat, MetricsAccumulator, MetricsSummary,
};
pub use report::{
    beliefs_header, summary_header, summary_table, trace_header, write_beliefs_csv,
    write_summary_csv, write_trace_csv, write_trace_jsonl, TraceRecord,
};
pub use scenario::{Scenario, ScenarioLabel, ACCURATE_BOUND, INACCURATE_BOUND};

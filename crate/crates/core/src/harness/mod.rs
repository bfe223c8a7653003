//! Report assembly and agreement with human judgments.

mod judgments;
mod pipeline;
mod report;
mod stats;

pub use judgments::{
    correlate_with_humans, human_means, rank_correlation_by_votes, Criterion, HumanMeans,
    VoteCorrelation,
};
pub use pipeline::{score_dataset, score_story, ScoreOptions, ScoreRun, Scorers};
pub(crate) use report::write_report_file;
pub use report::{
    load_reports, rovist_total, write_report, Diagnostics, ReportSummary, ScoreReport, StoryError,
};
pub use stats::{correlate, kendall, midranks, pearson, spearman, CorrelationResult};

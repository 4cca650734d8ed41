//! Prequential evaluation, quality criteria and the statistical comparison
//! stack.

pub mod metrics;
pub mod prequential;
pub mod stats;

pub use metrics::{macro_fdr, macro_fnr, macro_mcc_loss, ConfusionAccumulator};
pub use prequential::{
    parse_summary_rows, prequential_run, ChunkMetrics, ChunkMetricsReport, Metrics, StreamEvent,
    DEFAULT_EVAL_CHUNK,
};
pub use stats::{
    average_ranks, friedman_test, holm_correction, wilcoxon_signed_rank, HolmResult, RankTable,
    TestResult, DEFAULT_ALPHA,
};

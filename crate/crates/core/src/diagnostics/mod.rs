//! Routing reports, comparison tables and the scenario suite.

mod compare;
mod report;
mod stats;
mod suite;

pub use compare::{compare_table, ComparisonRow, ComparisonTable, BLOCK_ORDER};
pub use report::{
    build_report, cluster_order, read_run_records, route_errors, route_report, RouteErrorSummary, RouteReport,
    RunRecords, Sankey, SankeyEdge, JOINT_PMF_FILE, MODALITY_ROUTING_FILE, ROUTE_ERRORS_FILE, SANKEY_FILE,
};
pub use stats::{quantile, spearman, weighted_quantile};
pub use suite::{
    alignment, majority, scenario_claim, scenario_suite, Alignment, ScenarioVerdict, SuiteOptions, SuiteReport,
    SuiteRun, MASS_THRESHOLD, MIN_ROUTE_SAMPLES,
};

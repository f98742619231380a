//! Empirical tabular synthesis: Gaussian, Gaussian-copula and KDE
//! generators, plus fidelity reports against the source table.

mod demo;
mod fidelity;
mod synth;
mod table;

pub use demo::{
    demo_correlation, demo_schema, demo_table, generate_demo_table, generated_demo_schema, write_demo, DEMO_ROWS,
    DEMO_SEED,
};
pub use fidelity::{fidelity_report, ks_statistic, smoothed_kl, upper_correlations, FidelityReport, MarginalDistance};
pub use synth::{
    allocate, average_ranks, copula_synthesize, empirical_quantile, gaussian_synthesize, kde_bandwidth, kde_synthesize,
    normal_scores, pearson, KdeOptions, SynthesisMethod, BINARY_THRESHOLD, COVARIANCE_JITTER,
};
pub use table::{ColumnKind, ColumnSpec, Table, TabularSchema};

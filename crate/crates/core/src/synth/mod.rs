//! Ground-truth 2-D mixtures, closed-form oracles, metrics and sweeps.

mod experiment;
mod metrics;
mod mixture;
mod oracle;

pub use experiment::{
    derive_seed, evaluate, generate, run_experiment, run_single, scale_counts, EvalConfig, ExperimentConfig,
    ObjectiveKind, ProcessConfig, ResultRow, ResultsTable, RunOutcome, SummaryRow, SweepAxis, SweepSpec,
};
pub use metrics::{
    drift_metric, field_relative_error, imba_probe, nearest_class, opposing_class, score_shift, success_rate,
    MetricsReport,
};
pub use mixture::{sample_mixture, LabeledDataset, MixtureSpec};
pub use oracle::{flow_velocity_oracle, mixture_score_oracle, MixtureOracle};

//! Experiment runners behind the CLI: bound-verification sweeps, the
//! score-versus-K study and strategy comparisons on synthetic tasks.

pub mod cli;
mod config;
pub mod instances;
mod runners;
pub mod stats;

pub use config::{
    ExperimentConfig, OracleConfig, OracleKind, PoolConfig, QueriesConfig, SubsampleSetting,
    SweepConfig, TaskConfig,
};
pub use runners::{
    build_oracle, run_bound_sweep, run_k_study, run_strategy_comparison, BoundSweep, Comparison,
    ComparisonRow, KStudy, TrialRecord, BOUND_SWEEP_CSV_VERSION, COMPARE_CSV_VERSION,
    K_STUDY_CSV_VERSION,
};

//! End-to-end training runs, evaluation, and comparison suites.
//!
//! A run alternates learned resets with forward episodes, updating the
//! agent once per environment step and the classifier once per completed
//! episode, and evaluates the frozen policy on a fixed interval. Suites
//! compose runs (donor tasks, scratch baselines, bootstrapped arms) into
//! the comparisons the system is built around and aggregate median curves
//! over seeds.

mod config;
mod runlog;
mod suite;
mod training;

pub use config::{
    BcSection, EnvSection, ExperimentConfig, Mode, PriorFileSpec, ViceSection,
};
pub use runlog::{emit_curves, median, EpisodeDiag, EvalRow, RunLog};
pub use suite::{
    run_suite, threshold_for_object, ArmSummary, RunStore, Suite, SuiteParams, SuiteReport,
};
pub use training::{prepare_reset_pair, run_eval, run_training, EvalStats};

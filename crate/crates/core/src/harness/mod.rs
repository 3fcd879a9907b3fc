//! Closed-loop experiments, logging, error metrics and convergence checks.

mod log;
mod metrics;
mod theory;
mod tracking;

pub use log::{LogRow, TrajectoryLog};
pub use metrics::{compute_error_metrics, ErrorMetrics};
pub use theory::{
    closed_form_residual, default_noise_cases, verify_theorems, CaseResult, NoiseCase, RootCase, TheoremReport,
    DEFAULT_GAINS,
};
pub use tracking::{
    oracle_deviation, run_tracking, InitialGuess, SchemeConfig, TrackingAbort, TrackingAbortReason, TrackingConfig,
};

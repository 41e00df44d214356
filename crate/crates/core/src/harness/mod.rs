//! Configuration, persistence, loss reports and experiment drivers shared by
//! the command-line tool and the acceptance tests.

pub mod config;
pub mod experiment;
pub mod io;
pub mod losses;

pub use config::{ExperimentConfig, HyperSettings};
pub use experiment::{
    fit, log_grid, median_table, motivating_curves, run_replicate, run_replicates, simulate,
    FitOutput, FitReport, MedianRow, MotivatingRow, RankChoice, ReplicateResult,
};
pub use losses::{loss_against_truth, loss_report, median_report, naive_losses, LossReport};

//! Experiment drivers: seeded random drops, the deterministic grid, and the
//! CSI-quality sweep, with CSV output and single-instance solves.

pub mod config;
pub mod csv;
pub mod instance;
pub mod run;
pub mod solve;

pub use self::config::{ExperimentConfig, ExperimentOverrides, Method, Scenario};
pub use self::csv::{fmt_sig, write_csv, ResultRow, HEADER};
pub use self::instance::{Instance, MethodResult, SolveOptions};
pub use self::run::{random_drop, run, run_csi_sweep, run_deterministic, run_random_drop, trial_rng};
pub use self::solve::{solve_document, SolveDocument, SolveOutput};

//! Constrained alternating minimization: ball projection, backtracking
//! projected gradient half-steps, spectral initialization and the fit loop.

mod config;
mod fit;
mod init;
mod steps;

pub use config::{FitConfig, FitDiagnostics, FitReport, InitStrategy, LineSearch};
pub use fit::{fit, fit_with_observer, IterationState};
pub use init::initialize;
pub use steps::{project_ball, update_items, update_persons, HalfStep, RowStep};

pub(crate) use fit::in_pool;

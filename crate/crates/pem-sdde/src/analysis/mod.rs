//! Strong-convergence studies and structural probes built on the integrator.

pub mod convergence;
pub mod probes;
pub mod slope;

pub use convergence::{strong_convergence, write_convergence_csv, ConvergenceReport, LevelStats};
pub use probes::{
    b_consistency_probe, c_stability_probe, history_holder_probe, monotonicity_probe, ProbeReport,
};
pub use slope::{fit_log2_line, LineFit};

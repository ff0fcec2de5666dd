//! Projected Euler-Maruyama integration for stochastic delay differential
//! equations (SDDEs) with a single constant delay:
//!
//! ```text
//! dX(t) = f(X(t), X(t - tau)) dt + g(X(t), X(t - tau)) dW(t),  t > 0,
//! X(t)  = xi(t),                                               t in [-tau, 0],
//! ```
//!
//! where the drift f and diffusion g may grow polynomially (superlinearly) as
//! long as they satisfy a global monotonicity condition. The classical
//! Euler-Maruyama scheme can diverge on such problems; the projected scheme
//! clamps every state that enters f and g onto the ball of radius `h^-alpha`
//! before taking the step, which restores strong convergence of order 1/2.
//!
//! The crate provides:
//!
//! * the time grid / problem / trajectory types ([`TimeGrid`], [`SddeProblem`],
//!   [`TrajectoryGrid`]),
//! * the projection map ([`ProjectionParams`], [`project`], [`default_alpha`]),
//! * reproducible Brownian paths with bit-exact coarse/fine coupling
//!   ([`BrownianGrid`], [`generate_path`], [`coarsen`]),
//! * the integrator ([`integrate`], [`pem_step`], [`Scheme`]),
//! * a small expression language for describing scalar problems in text files
//!   ([`parse_expr`], [`load_problem`], [`builtin`]),
//! * a coupled-path strong-convergence harness and Monte-Carlo probes of the
//!   structural assumptions ([`strong_convergence`], [`monotonicity_probe`],
//!   [`c_stability_probe`], [`b_consistency_probe`], [`history_holder_probe`]).

mod analysis;
mod brownian;
mod builtins;
mod dsl;
mod error;
pub(crate) mod fp;
mod grid;
mod integrator;
mod problem;
mod projection;

pub use analysis::{
    b_consistency_probe, c_stability_probe, fit_log2_line, history_holder_probe,
    monotonicity_probe, strong_convergence, write_convergence_csv, ConvergenceReport, LevelStats,
    LineFit, ProbeReport,
};
pub use brownian::{coarsen, generate_path, sum_blocks, BrownianGrid, CoarsenSpec, NORMAL_METHOD};
pub use builtins::{builtin, builtin_names};
pub use dsl::{
    load_problem, parse_expr, parse_history_expr, parse_problem_file, BinOp, Expr, Func,
    ProblemFile,
};
pub use error::{Result, SddeError};
pub use grid::{build_time_grid, history_sample, SeedInfo, TimeGrid, TrajectoryGrid};
pub use integrator::{integrate, pem_step, Scheme, SchemeConfig, DEFAULT_DIVERGENCE_GUARD};
pub use problem::{AssumptionParams, SddeProblem};
pub use projection::{default_alpha, project, ProjectionParams};

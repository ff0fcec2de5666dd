//! One-step maps and the grid integrator.
//!
//! The projected Euler-Maruyama step from state x at t_{i-1} with delayed
//! state y at t_{i-1-M} is
//!
//! ```text
//! X(t_i) = P(x) + h f(P(x), P(y)) + g(P(x), P(y)) dW_i,
//! ```
//!
//! where P clips onto the ball of radius h^-alpha (see
//! [`crate::ProjectionParams`]). Stored states are the raw scheme outputs;
//! the projection is applied to every argument as it is used, history values
//! included, and is recomputed rather than cached. The classical
//! Euler-Maruyama step is the same map without P, kept as a baseline: on
//! superlinear problems it can explode, which the integrator reports as a
//! flagged trajectory instead of an error.

use crate::brownian::{block_sum_into, BrownianGrid};
use crate::error::{Result, SddeError};
use crate::grid::{TimeGrid, TrajectoryGrid};
use crate::problem::SddeProblem;
use crate::projection::{project_into, ProjectionParams};

/// Absolute state bound above which a classical Euler-Maruyama trajectory is
/// flagged as diverged.
pub const DEFAULT_DIVERGENCE_GUARD: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ProjectedEm,
    ClassicalEm,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ProjectedEm => "projected-em",
            Scheme::ClassicalEm => "classical-em",
        }
    }
}

/// Scheme selection for [`integrate`]. Projection parameters are required
/// for [`Scheme::ProjectedEm`] and ignored otherwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub projection: Option<ProjectionParams>,
    pub divergence_guard: f64,
}

impl SchemeConfig {
    pub fn projected(params: ProjectionParams) -> Self {
        SchemeConfig {
            scheme: Scheme::ProjectedEm,
            projection: Some(params),
            divergence_guard: DEFAULT_DIVERGENCE_GUARD,
        }
    }

    pub fn classical() -> Self {
        SchemeConfig {
            scheme: Scheme::ClassicalEm,
            projection: None,
            divergence_guard: DEFAULT_DIVERGENCE_GUARD,
        }
    }

    pub fn with_divergence_guard(mut self, guard: f64) -> Self {
        self.divergence_guard = guard;
        self
    }
}

/// Scratch space for one step; reused across the integration loop so the hot
/// path does not allocate.
struct StepBuffers {
    prev: Vec<f64>,
    delayed: Vec<f64>,
    prev_proj: Vec<f64>,
    delayed_proj: Vec<f64>,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    dw: Vec<f64>,
    next: Vec<f64>,
}

impl StepBuffers {
    fn new(dim_state: usize, dim_noise: usize) -> Self {
        StepBuffers {
            prev: vec![0.0; dim_state],
            delayed: vec![0.0; dim_state],
            prev_proj: vec![0.0; dim_state],
            delayed_proj: vec![0.0; dim_state],
            drift: vec![0.0; dim_state],
            diffusion: vec![0.0; dim_state * dim_noise],
            dw: vec![0.0; dim_noise],
            next: vec![0.0; dim_state],
        }
    }
}

/// Writes x + h f(x, y) + g(x, y) dw into `next`, accumulating the noise
/// contributions in ascending column order after the drift term.
fn euler_map(
    problem: &SddeProblem,
    step: f64,
    x: &[f64],
    y: &[f64],
    dw: &[f64],
    drift: &mut [f64],
    diffusion: &mut [f64],
    next: &mut [f64],
) {
    let m = problem.dim_noise();
    problem.drift_into(x, y, drift);
    problem.diffusion_into(x, y, diffusion);
    for r in 0..next.len() {
        let mut acc = x[r] + step * drift[r];
        let row = &diffusion[r * m..(r + 1) * m];
        for c in 0..m {
            acc += row[c] * dw[c];
        }
        next[r] = acc;
    }
}

fn projected_step(
    problem: &SddeProblem,
    params: &ProjectionParams,
    buf: &mut StepBuffers,
) {
    project_into(params, &buf.prev, &mut buf.prev_proj);
    project_into(params, &buf.delayed, &mut buf.delayed_proj);
    let (x, y) = (&buf.prev_proj, &buf.delayed_proj);
    let m = problem.dim_noise();
    problem.drift_into(x, y, &mut buf.drift);
    problem.diffusion_into(x, y, &mut buf.diffusion);
    for r in 0..buf.next.len() {
        let mut acc = x[r] + params.step() * buf.drift[r];
        let row = &buf.diffusion[r * m..(r + 1) * m];
        for c in 0..m {
            acc += row[c] * buf.dw[c];
        }
        buf.next[r] = acc;
    }
}

/// One projected Euler-Maruyama step: both the previous and the delayed
/// state are clipped before entering the coefficients, and the step size is
/// `params.step()`. Returns the raw (unclipped) new state.
pub fn pem_step(
    problem: &SddeProblem,
    params: &ProjectionParams,
    x_prev: &[f64],
    x_delayed: &[f64],
    dw: &[f64],
) -> Result<Vec<f64>> {
    let d = problem.dim_state();
    let m = problem.dim_noise();
    if x_prev.len() != d || x_delayed.len() != d {
        return Err(SddeError::invalid(format!(
            "state slices must have length {d}, got {} and {}",
            x_prev.len(),
            x_delayed.len()
        )));
    }
    if dw.len() != m {
        return Err(SddeError::invalid(format!(
            "increment must have length {m}, got {}",
            dw.len()
        )));
    }
    let mut buf = StepBuffers::new(d, m);
    buf.prev.copy_from_slice(x_prev);
    buf.delayed.copy_from_slice(x_delayed);
    buf.dw.copy_from_slice(dw);
    projected_step(problem, params, &mut buf);
    if !buf.next.iter().all(|v| v.is_finite()) {
        return Err(SddeError::NonFiniteState { step: 0 });
    }
    Ok(buf.next)
}

/// Integrates the problem over `grid`, consuming the Brownian path at
/// `coarsen_factor` fine steps per grid step (the grid step must equal
/// `coarsen_factor * path.fine_step()` as a binary value, so coarse and fine
/// runs of the same path couple exactly).
///
/// Nodes n = -M..=0 are filled from the history; nodes 1..=N from the
/// selected scheme. Under [`Scheme::ProjectedEm`] a non-finite state is an
/// error carrying the offending step. Under [`Scheme::ClassicalEm`] a
/// non-finite state or one exceeding `divergence_guard` marks the trajectory
/// as diverged at that step: the offending state is kept, later nodes are
/// NaN, and no error is raised.
pub fn integrate(
    problem: &SddeProblem,
    grid: &TimeGrid,
    path: &BrownianGrid,
    coarsen_factor: usize,
    config: &SchemeConfig,
) -> Result<TrajectoryGrid> {
    if grid.delay().to_bits() != problem.delay().to_bits() {
        return Err(SddeError::invalid(format!(
            "grid delay {} does not match problem delay {}",
            grid.delay(),
            problem.delay()
        )));
    }
    if coarsen_factor == 0 {
        return Err(SddeError::invalid("coarsen_factor must be >= 1"));
    }
    if path.dim_noise() != problem.dim_noise() {
        return Err(SddeError::invalid(format!(
            "path has {} noise components, problem needs {}",
            path.dim_noise(),
            problem.dim_noise()
        )));
    }
    let expected = coarsen_factor as f64 * path.fine_step();
    if grid.step().to_bits() != expected.to_bits() {
        return Err(SddeError::invalid(format!(
            "grid step {} is not coarsen_factor * fine_step = {expected}",
            grid.step()
        )));
    }
    let n = grid.node_count();
    if n * coarsen_factor > path.fine_count() {
        return Err(SddeError::invalid(format!(
            "path supplies {} fine steps but the grid consumes {}",
            path.fine_count(),
            n * coarsen_factor
        )));
    }
    if !(config.divergence_guard.is_finite() && config.divergence_guard > 0.0) {
        return Err(SddeError::invalid("divergence guard must be finite and > 0"));
    }
    let params = match config.scheme {
        Scheme::ProjectedEm => {
            let p = config.projection.ok_or_else(|| {
                SddeError::invalid("projected scheme requires projection parameters")
            })?;
            if p.step().to_bits() != grid.step().to_bits() {
                return Err(SddeError::invalid(format!(
                    "projection step {} does not match grid step {}",
                    p.step(),
                    grid.step()
                )));
            }
            Some(p)
        }
        Scheme::ClassicalEm => None,
    };

    let d = problem.dim_state();
    let delay_steps = grid.delay_steps() as i64;
    let mut traj = TrajectoryGrid::new(grid.clone(), d, path.seed_info());
    for node in -delay_steps..=0 {
        let t = grid.node(node);
        problem.history_into(t, traj.node_mut(node));
    }

    let mut buf = StepBuffers::new(d, problem.dim_noise());
    for i in 1..=n as i64 {
        buf.prev.copy_from_slice(traj.node(i - 1));
        buf.delayed.copy_from_slice(traj.node(i - delay_steps));
        block_sum_into(path, (i - 1) as usize, coarsen_factor, &mut buf.dw);
        match params {
            Some(ref p) => {
                projected_step(problem, p, &mut buf);
                if !buf.next.iter().all(|v| v.is_finite()) {
                    return Err(SddeError::NonFiniteState { step: i as usize });
                }
            }
            None => {
                let (prev, delayed, dw) = (&buf.prev, &buf.delayed, &buf.dw);
                euler_map(
                    problem,
                    grid.step(),
                    prev,
                    delayed,
                    dw,
                    &mut buf.drift,
                    &mut buf.diffusion,
                    &mut buf.next,
                );
                let tripped = buf
                    .next
                    .iter()
                    .any(|v| !v.is_finite() || v.abs() > config.divergence_guard);
                if tripped {
                    traj.node_mut(i).copy_from_slice(&buf.next);
                    traj.set_diverged(i as usize);
                    for later in (i + 1)..=n as i64 {
                        traj.node_mut(later).fill(f64::NAN);
                    }
                    return Ok(traj);
                }
            }
        }
        traj.node_mut(i).copy_from_slice(&buf.next);
    }
    Ok(traj)
}

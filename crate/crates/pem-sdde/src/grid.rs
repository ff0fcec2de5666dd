use crate::error::{Result, SddeError};
use crate::fp::ulp;
use crate::problem::SddeProblem;

/// Uniform time grid tied to the delay: the step is h = delay / delay_steps,
/// nodes are t_n = n * h for n = -delay_steps ..= node_count, so the delayed
/// node t_{i - delay_steps} always lands exactly on the grid.
///
/// `node_count` is the largest N with t_N <= horizon < t_N + h.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    step: f64,
    delay_steps: usize,
    node_count: usize,
    delay: f64,
}

impl TimeGrid {
    /// Builds the grid for the given delay, horizon and number of steps per
    /// delay interval. Fails if the horizon is shorter than one step.
    pub fn new(delay: f64, horizon: f64, delay_steps: usize) -> Result<Self> {
        if !(delay.is_finite() && delay > 0.0) {
            return Err(SddeError::invalid(format!("delay must be finite and > 0, got {delay}")));
        }
        if !horizon.is_finite() {
            return Err(SddeError::invalid("horizon must be finite"));
        }
        if delay_steps == 0 {
            return Err(SddeError::invalid("delay_steps must be >= 1"));
        }
        let step = delay / delay_steps as f64;
        let err = (step * delay_steps as f64 - delay).abs();
        if err > 2.0 * ulp(delay) {
            return Err(SddeError::invalid(format!(
                "step * delay_steps deviates from the delay by {err:e}"
            )));
        }
        if horizon < step {
            return Err(SddeError::invalid(format!(
                "horizon {horizon} is shorter than one step {step}"
            )));
        }
        let mut n = (horizon / step).floor() as i64;
        while (n + 1) as f64 * step <= horizon {
            n += 1;
        }
        while n as f64 * step > horizon {
            n -= 1;
        }
        if n < 1 {
            return Err(SddeError::invalid("grid needs at least one node past zero"));
        }
        Ok(TimeGrid { step, delay_steps, node_count: n as usize, delay })
    }

    /// Grid with step `factor` times coarser than `fine`, covering the same
    /// horizon. The step is stored exactly as the binary product
    /// `factor * fine.step()` so that paths sampled on the fine grid couple
    /// bit-exactly to this one.
    pub fn coarsened(fine: &TimeGrid, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(SddeError::invalid("coarsening factor must be >= 1"));
        }
        if fine.delay_steps % factor != 0 {
            return Err(SddeError::invalid(format!(
                "factor {factor} does not divide delay_steps {}; the coarse step would not \
                 divide the delay",
                fine.delay_steps
            )));
        }
        let node_count = fine.node_count / factor;
        if node_count == 0 {
            return Err(SddeError::invalid("coarse grid needs at least one node past zero"));
        }
        Ok(TimeGrid {
            step: factor as f64 * fine.step,
            delay_steps: fine.delay_steps / factor,
            node_count,
            delay: fine.delay,
        })
    }

    /// Step size h.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Number of steps per delay interval (h * delay_steps = delay).
    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Index N of the last node: t_N <= horizon < t_N + h.
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Time of node n for n in -delay_steps ..= node_count.
    pub fn node(&self, n: i64) -> f64 {
        debug_assert!(n >= -(self.delay_steps as i64) && n <= self.node_count as i64);
        n as f64 * self.step
    }

    /// Time of the last node t_N.
    pub fn end_time(&self) -> f64 {
        self.node(self.node_count as i64)
    }
}

/// Builds the uniform delay-compatible grid; see [`TimeGrid::new`].
pub fn build_time_grid(delay: f64, horizon: f64, delay_steps: usize) -> Result<TimeGrid> {
    TimeGrid::new(delay, horizon, delay_steps)
}

/// Evaluates the problem's initial history on the grid nodes n = -M ..= 0,
/// returned as (M + 1) rows of `dim_state` values.
pub fn history_sample(problem: &SddeProblem, grid: &TimeGrid) -> Result<Vec<f64>> {
    if grid.delay().to_bits() != problem.delay().to_bits() {
        return Err(SddeError::invalid(format!(
            "grid delay {} does not match problem delay {}",
            grid.delay(),
            problem.delay()
        )));
    }
    let d = problem.dim_state();
    let m = grid.delay_steps();
    let mut values = vec![0.0; (m + 1) * d];
    for (row, chunk) in values.chunks_exact_mut(d).enumerate() {
        let n = row as i64 - m as i64;
        problem.history_into(grid.node(n), chunk);
    }
    Ok(values)
}

/// Identifies the deterministic noise stream a trajectory or Brownian path
/// was generated from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedInfo {
    pub master_seed: u64,
    pub path_index: u64,
}

/// A numerical trajectory: one state per grid node n = -M ..= N, the history
/// prefix included. Stored states are the raw (unprojected) scheme states.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryGrid {
    grid: TimeGrid,
    dim_state: usize,
    values: Vec<f64>,
    seed_info: SeedInfo,
    diverged_at: Option<usize>,
}

impl TrajectoryGrid {
    pub(crate) fn new(grid: TimeGrid, dim_state: usize, seed_info: SeedInfo) -> Self {
        let rows = grid.delay_steps() + grid.node_count() + 1;
        TrajectoryGrid {
            grid,
            dim_state,
            values: vec![0.0; rows * dim_state],
            seed_info,
            diverged_at: None,
        }
    }

    fn row(&self, n: i64) -> usize {
        let m = self.grid.delay_steps() as i64;
        debug_assert!(n >= -m && n <= self.grid.node_count() as i64);
        (n + m) as usize
    }

    /// State at node n, for n in -M ..= N.
    pub fn node(&self, n: i64) -> &[f64] {
        let r = self.row(n);
        &self.values[r * self.dim_state..(r + 1) * self.dim_state]
    }

    pub(crate) fn node_mut(&mut self, n: i64) -> &mut [f64] {
        let r = self.row(n);
        &mut self.values[r * self.dim_state..(r + 1) * self.dim_state]
    }

    pub(crate) fn set_diverged(&mut self, step: usize) {
        self.diverged_at = Some(step);
    }

    /// State at the final node t_N.
    pub fn endpoint(&self) -> &[f64] {
        self.node(self.grid.node_count() as i64)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn seed_info(&self) -> SeedInfo {
        self.seed_info
    }

    /// One-based index of the step at which the divergence guard tripped,
    /// if it did. States past that node are NaN.
    pub fn diverged_at(&self) -> Option<usize> {
        self.diverged_at
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::AssumptionParams;

    #[test]
    fn grid_examples() {
        let g = build_time_grid(1.0, 2.0, 2).unwrap();
        assert_eq!(g.step(), 0.5);
        assert_eq!(g.node_count(), 4);

        let g = build_time_grid(1.0, 2.0, 1 << 13).unwrap();
        assert_eq!(g.step(), 2f64.powi(-13));
        assert_eq!(g.node_count(), 1 << 14);

        let g = build_time_grid(1.0, 1.75, 2).unwrap();
        assert_eq!(g.node_count(), 3);
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(build_time_grid(0.0, 2.0, 2).is_err());
        assert!(build_time_grid(-1.0, 2.0, 2).is_err());
        assert!(build_time_grid(1.0, 0.4, 2).is_err());
        assert!(build_time_grid(1.0, 2.0, 0).is_err());
        assert!(build_time_grid(1.0, f64::INFINITY, 2).is_err());
    }

    #[test]
    fn endpoint_brackets_horizon() {
        for &(delay, horizon, m) in
            &[(1.0, 2.0, 7usize), (0.7, 3.1, 13), (2.5, 2.5, 4), (1.0, 1.9999, 8192)]
        {
            let g = build_time_grid(delay, horizon, m).unwrap();
            let n = g.node_count() as i64;
            assert!(g.node(n) <= horizon, "t_N > T for {delay} {horizon} {m}");
            assert!(g.node(n) + g.step() > horizon, "t_N + h <= T for {delay} {horizon} {m}");
        }
    }

    #[test]
    fn delayed_node_matches_shifted_time() {
        for &(delay, m) in &[(1.0, 64usize), (0.7, 13), (3.14159, 100)] {
            let g = build_time_grid(delay, 2.0 * delay, m).unwrap();
            let tol = 4.0 * ulp(delay);
            for i in 0..=(m as i64) {
                let lhs = g.node(i - m as i64);
                let rhs = g.node(i) - delay;
                assert!((lhs - rhs).abs() <= tol, "|{lhs} - {rhs}| > {tol}");
            }
        }
    }

    #[test]
    fn coarsened_grid_shares_the_horizon() {
        let fine = build_time_grid(1.0, 2.0, 1 << 13).unwrap();
        let coarse = TimeGrid::coarsened(&fine, 16).unwrap();
        assert_eq!(coarse.step().to_bits(), (16.0 * fine.step()).to_bits());
        assert_eq!(coarse.delay_steps(), 512);
        assert_eq!(coarse.node_count(), 1 << 10);
        assert!(TimeGrid::coarsened(&fine, 3).is_err());
    }

    fn history_problem<H>(h: H) -> SddeProblem
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SddeProblem::scalar("hist", 1.0, 2.0, |_, _| 0.0, |_, _| 0.0, h, AssumptionParams::new(2.0))
            .unwrap()
    }

    #[test]
    fn history_sample_evaluates_nodes_exactly() {
        let p = history_problem(|t| t.cos());
        let g = build_time_grid(1.0, 2.0, 2).unwrap();
        let s = history_sample(&p, &g).unwrap();
        assert_eq!(s, vec![(-1.0f64).cos(), (-0.5f64).cos(), 1.0]);

        let p = history_problem(|t| t);
        let g = build_time_grid(1.0, 2.0, 4).unwrap();
        let s = history_sample(&p, &g).unwrap();
        assert_eq!(s, vec![-1.0, -0.75, -0.5, -0.25, 0.0]);

        let p = history_problem(|_| 0.0);
        let s = history_sample(&p, &g).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn history_sample_checks_delay_consistency() {
        let p = history_problem(|t| t);
        let g = build_time_grid(0.5, 2.0, 2).unwrap();
        assert!(history_sample(&p, &g).is_err());
    }
}

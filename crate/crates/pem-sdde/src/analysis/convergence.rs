//! Coupled-path strong convergence measurement.
//!
//! A reference solution is computed with the projected scheme on the finest
//! grid (`delay / reference_delay_steps`). Each coarser level reuses the same
//! Brownian paths through exact block sums of the fine increments, so the
//! level error measures the scheme alone, not noise resampling. Errors are
//! taken at the latest time that is a node of every level, which is the
//! horizon itself whenever the level factors divide the fine node count.

use std::io::Write;

use rayon::prelude::*;

use crate::analysis::slope::{fit_log2_line, LineFit};
use crate::brownian::{generate_path, NORMAL_METHOD};
use crate::error::{Result, SddeError};
use crate::fp::euclidean_norm;
use crate::grid::{build_time_grid, TimeGrid};
use crate::integrator::{integrate, Scheme, SchemeConfig};
use crate::problem::SddeProblem;
use crate::projection::{default_alpha, ProjectionParams};

/// Error statistics of one coarsening level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    /// Coarsening factor relative to the reference step.
    pub factor: usize,
    /// Level step h = factor * reference_step.
    pub step: f64,
    /// Paths that produced a usable endpoint at this level.
    pub paths: usize,
    pub mean_abs_err: f64,
    pub rms_err: f64,
    /// Standard error of `mean_abs_err` across paths.
    pub stderr_mean: f64,
    /// Paths excluded at this level (diverged or non-finite).
    pub diverged: usize,
}

/// Full result of a convergence study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub problem_name: String,
    pub scheme: &'static str,
    pub master_seed: u64,
    /// Projection exponent used for the reference run (and the levels, under
    /// the projected scheme).
    pub alpha: f64,
    pub growth_exponent: f64,
    pub reference_delay_steps: usize,
    pub reference_step: f64,
    pub path_count: usize,
    /// Paths whose reference solution failed; they contribute to no level.
    pub reference_failures: usize,
    /// Time at which endpoints are compared.
    pub common_time: f64,
    pub levels: Vec<LevelStats>,
    /// Fit of log2(mean_abs_err) against log2(h), when at least two levels
    /// have nonzero error.
    pub fitted_slope: Option<LineFit>,
    pub fitted_slope_rms: Option<LineFit>,
    /// Factors whose level had no usable paths or exactly zero error; these
    /// are excluded from the fits.
    pub degenerate_levels: Vec<usize>,
}

struct PathOutcome {
    ref_failed: bool,
    errors: Vec<Option<f64>>,
}

/// Runs the coupled-path study. `config` selects the level scheme; its
/// projection parameters contribute only the exponent alpha, which is
/// re-anchored to each level's own step (the reference run is always the
/// projected scheme at the fine step). Paths are deterministic functions of
/// `(master_seed, path index)`, so reports are reproducible regardless of
/// thread count.
pub fn strong_convergence(
    problem: &SddeProblem,
    reference_delay_steps: usize,
    level_factors: &[usize],
    path_count: usize,
    master_seed: u64,
    config: &SchemeConfig,
) -> Result<ConvergenceReport> {
    if level_factors.is_empty() {
        return Err(SddeError::invalid("need at least one level factor"));
    }
    for (i, &f) in level_factors.iter().enumerate() {
        if f < 2 {
            return Err(SddeError::invalid(format!(
                "level factors must be >= 2 (factor {f} would not coarsen the reference)"
            )));
        }
        if level_factors[..i].contains(&f) {
            return Err(SddeError::invalid(format!("duplicate level factor {f}")));
        }
    }
    if path_count < 2 {
        return Err(SddeError::invalid("need at least 2 paths"));
    }
    let alpha = match config.projection {
        Some(p) => p.alpha(),
        None => {
            if config.scheme == Scheme::ProjectedEm {
                return Err(SddeError::invalid(
                    "projected scheme requires projection parameters",
                ));
            }
            default_alpha(problem.assumptions().growth_exponent)?
        }
    };

    let fine = build_time_grid(problem.delay(), problem.horizon(), reference_delay_steps)?;
    let n_f = fine.node_count();
    let ref_config =
        SchemeConfig::projected(ProjectionParams::new(alpha, fine.step())?)
            .with_divergence_guard(config.divergence_guard);

    let mut levels: Vec<(usize, TimeGrid, SchemeConfig)> = Vec::with_capacity(level_factors.len());
    for &factor in level_factors {
        let grid = TimeGrid::coarsened(&fine, factor)?;
        let level_config = match config.scheme {
            Scheme::ProjectedEm => {
                SchemeConfig::projected(ProjectionParams::new(alpha, grid.step())?)
                    .with_divergence_guard(config.divergence_guard)
            }
            Scheme::ClassicalEm => {
                SchemeConfig::classical().with_divergence_guard(config.divergence_guard)
            }
        };
        levels.push((factor, grid, level_config));
    }

    // Latest fine node that every level grid also hits.
    let common_fine = std::iter::once(1)
        .chain(level_factors.iter().copied())
        .map(|k| (n_f / k) * k)
        .min()
        .expect("nonempty by construction");
    if common_fine == 0 {
        return Err(SddeError::invalid("a level is too coarse to take a single step"));
    }
    for &k in level_factors {
        if common_fine % k != 0 {
            return Err(SddeError::invalid(format!(
                "level factors are incompatible: the common endpoint (fine node {common_fine}) \
                 is not a node of the factor-{k} grid; choose factors with a common multiple \
                 structure, e.g. powers of two"
            )));
        }
    }
    let common_time = fine.node(common_fine as i64);

    let dim_noise = problem.dim_noise();
    let outcomes: Vec<PathOutcome> = (0..path_count)
        .into_par_iter()
        .map(|p| {
            let path = generate_path(master_seed, p as u64, dim_noise, fine.step(), n_f)
                .expect("validated path arguments");
            let reference = match integrate(problem, &fine, &path, 1, &ref_config) {
                Ok(t) if !t.is_diverged() => t,
                _ => {
                    return PathOutcome {
                        ref_failed: true,
                        errors: vec![None; levels.len()],
                    }
                }
            };
            let ref_state = reference.node(common_fine as i64);
            let errors = levels
                .iter()
                .map(|(factor, grid, level_config)| {
                    let traj = match integrate(problem, grid, &path, *factor, level_config) {
                        Ok(t) => t,
                        Err(_) => return None,
                    };
                    let node = (common_fine / factor) as i64;
                    if let Some(stop) = traj.diverged_at() {
                        if (stop as i64) <= node {
                            return None;
                        }
                    }
                    let state = traj.node(node);
                    let diff: Vec<f64> =
                        state.iter().zip(ref_state).map(|(a, b)| a - b).collect();
                    Some(euclidean_norm(&diff))
                })
                .collect();
            PathOutcome { ref_failed: false, errors }
        })
        .collect();

    let mut reference_failures = 0;
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); levels.len()];
    let mut diverged = vec![0usize; levels.len()];
    for outcome in &outcomes {
        if outcome.ref_failed {
            reference_failures += 1;
            continue;
        }
        for (i, err) in outcome.errors.iter().enumerate() {
            match err {
                Some(e) => per_level[i].push(*e),
                None => diverged[i] += 1,
            }
        }
    }

    let mut stats = Vec::with_capacity(levels.len());
    let mut degenerate = Vec::new();
    for (i, (factor, grid, _)) in levels.iter().enumerate() {
        let errs = &per_level[i];
        let n = errs.len();
        let (mean, rms, stderr) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            let mean = errs.iter().sum::<f64>() / n as f64;
            let rms = (errs.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
            let stderr = if n >= 2 {
                let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                (var / n as f64).sqrt()
            } else {
                0.0
            };
            (mean, rms, stderr)
        };
        if n == 0 || mean == 0.0 {
            degenerate.push(*factor);
        }
        stats.push(LevelStats {
            factor: *factor,
            step: grid.step(),
            paths: n,
            mean_abs_err: mean,
            rms_err: rms,
            stderr_mean: stderr,
            diverged: diverged[i],
        });
    }

    let fit_points: Vec<(f64, f64)> = stats
        .iter()
        .filter(|l| l.paths > 0 && l.mean_abs_err > 0.0)
        .map(|l| (l.step, l.mean_abs_err))
        .collect();
    let fitted_slope = if fit_points.len() >= 2 { Some(fit_log2_line(&fit_points)?) } else { None };
    let rms_points: Vec<(f64, f64)> = stats
        .iter()
        .filter(|l| l.paths > 0 && l.rms_err > 0.0)
        .map(|l| (l.step, l.rms_err))
        .collect();
    let fitted_slope_rms =
        if rms_points.len() >= 2 { Some(fit_log2_line(&rms_points)?) } else { None };

    Ok(ConvergenceReport {
        problem_name: problem.name().to_string(),
        scheme: config.scheme.name(),
        master_seed,
        alpha,
        growth_exponent: problem.assumptions().growth_exponent,
        reference_delay_steps,
        reference_step: fine.step(),
        path_count,
        reference_failures,
        common_time,
        levels: stats,
        fitted_slope,
        fitted_slope_rms,
        degenerate_levels: degenerate,
    })
}

/// Writes the report as CSV: one row per level under a fixed header, then
/// the run parameters as `# key=value` comment lines. Output depends only on
/// the report contents, so identical runs serialize identically.
pub fn write_convergence_csv<W: Write>(report: &ConvergenceReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "level_factor,h,paths,mean_abs_err,rms_err,stderr_mean,diverged")?;
    for l in &report.levels {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            l.factor, l.step, l.paths, l.mean_abs_err, l.rms_err, l.stderr_mean, l.diverged
        )?;
    }
    writeln!(w, "# problem={}", report.problem_name)?;
    writeln!(w, "# scheme={}", report.scheme)?;
    writeln!(w, "# master_seed={}", report.master_seed)?;
    writeln!(w, "# normal_method={NORMAL_METHOD}")?;
    writeln!(w, "# alpha={}", report.alpha)?;
    writeln!(w, "# q={}", report.growth_exponent)?;
    writeln!(w, "# reference_delay_steps={}", report.reference_delay_steps)?;
    writeln!(w, "# reference_step={}", report.reference_step)?;
    writeln!(w, "# path_count={}", report.path_count)?;
    writeln!(w, "# reference_failures={}", report.reference_failures)?;
    writeln!(w, "# common_time={}", report.common_time)?;
    match &report.fitted_slope {
        Some(f) => {
            writeln!(w, "# fitted_slope={}", f.slope)?;
            writeln!(w, "# fitted_slope_stderr={}", f.slope_stderr)?;
        }
        None => writeln!(w, "# fitted_slope=none")?,
    }
    match &report.fitted_slope_rms {
        Some(f) => writeln!(w, "# fitted_slope_rms={}", f.slope)?,
        None => writeln!(w, "# fitted_slope_rms=none")?,
    }
    let degen: Vec<String> = report.degenerate_levels.iter().map(|f| f.to_string()).collect();
    writeln!(w, "# degenerate_levels={}", degen.join(" "))
}

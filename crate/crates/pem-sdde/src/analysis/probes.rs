//! Monte-Carlo probes of the structural inequalities behind the scheme's
//! convergence guarantees.
//!
//! Each probe samples the relevant inequality directly and reports fitted
//! constants, counted violations, and human-readable notes. A violation is
//! only counted when it exceeds the probe's sampling noise, so a clean run
//! is evidence (not proof) that the inequality holds with the declared or
//! fitted constants.

use rayon::prelude::*;

use crate::analysis::slope::fit_log2_line;
use crate::brownian::{generate_path, quantize, sum_blocks, NormalSource};
use crate::error::{Result, SddeError};
use crate::fp::euclidean_norm;
use crate::grid::{build_time_grid, TimeGrid};
use crate::integrator::{integrate, pem_step, SchemeConfig};
use crate::problem::SddeProblem;
use crate::projection::{default_alpha, ProjectionParams};

/// Outcome of one probe run.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub probe: &'static str,
    /// Monte-Carlo samples drawn (meaning depends on the probe).
    pub samples: usize,
    /// Checks that failed beyond the noise allowance.
    pub violations: usize,
    /// Checks that failed within the noise allowance.
    pub indeterminate: usize,
    /// Smallest observed margin of the checked inequality; negative means a
    /// failed check, NaN means nothing was checked.
    pub worst_margin: f64,
    /// Fitted constants, by name.
    pub fitted: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl ProbeReport {
    fn new(probe: &'static str) -> Self {
        ProbeReport {
            probe,
            samples: 0,
            violations: 0,
            indeterminate: 0,
            worst_margin: f64::NAN,
            fitted: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn shrink_margin(&mut self, margin: f64) {
        if self.worst_margin.is_nan() || margin < self.worst_margin {
            self.worst_margin = margin;
        }
    }
}

/// Draws a point uniformly from the ball of the given radius.
fn sample_ball(src: &mut NormalSource, radius: f64, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = src.next();
        }
        let norm = euclidean_norm(out);
        if norm > 0.0 {
            let scale = radius * src.uniform().powf(1.0 / out.len() as f64) / norm;
            for v in out.iter_mut() {
                *v *= scale;
            }
            return;
        }
    }
}

/// Checks the one-sided coupling bound
///
/// ```text
/// <x - x', f(x, y) - f(x', y')> + eta |g(x, y) - g(x', y')|^2
///     <= L (|x - x'|^2 + |y - y'|^2)
/// ```
///
/// on random argument quadruples from balls of radius R/4, R/2, and R
/// (fresh draws each). The fitted constant is the sampled supremum of
/// lhs/rhs per ball. When `declared_l` is given, violations are counted
/// against it on the full-radius ball; the evaluation is deterministic, so
/// no noise allowance applies. A fitted constant that keeps growing with the
/// radius (every consecutive ratio above 2) indicates the bound has no
/// global constant, and each such ratio counts as a violation.
pub fn monotonicity_probe(
    problem: &SddeProblem,
    eta: f64,
    declared_l: Option<f64>,
    radius: f64,
    samples_per_radius: usize,
    master_seed: u64,
) -> Result<ProbeReport> {
    if !(eta.is_finite() && eta > 0.5) {
        return Err(SddeError::invalid("eta must be finite and > 1/2"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(SddeError::invalid("radius must be finite and > 0"));
    }
    if samples_per_radius < 10 {
        return Err(SddeError::invalid("need at least 10 samples per radius"));
    }
    if let Some(l) = declared_l {
        if !(l.is_finite() && l >= 0.0) {
            return Err(SddeError::invalid("declared L must be finite and >= 0"));
        }
    }

    let d = problem.dim_state();
    let m = problem.dim_noise();
    let radii = [radius / 4.0, radius / 2.0, radius];
    let mut report = ProbeReport::new("monotonicity");
    report.samples = 3 * samples_per_radius;

    let mut x = vec![0.0; d];
    let mut xb = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut yb = vec![0.0; d];
    let mut fx = vec![0.0; d];
    let mut fxb = vec![0.0; d];
    let mut gx = vec![0.0; d * m];
    let mut gxb = vec![0.0; d * m];

    let mut fitted = [0.0f64; 3];
    for (ri, &r) in radii.iter().enumerate() {
        let mut src = NormalSource::new(master_seed, ri as u64);
        let mut sup_ratio = 0.0f64;
        for _ in 0..samples_per_radius {
            sample_ball(&mut src, r, &mut x);
            sample_ball(&mut src, r, &mut xb);
            sample_ball(&mut src, r, &mut y);
            sample_ball(&mut src, r, &mut yb);
            problem.drift_into(&x, &y, &mut fx);
            problem.drift_into(&xb, &yb, &mut fxb);
            problem.diffusion_into(&x, &y, &mut gx);
            problem.diffusion_into(&xb, &yb, &mut gxb);
            let mut inner = 0.0;
            let mut dx2 = 0.0;
            for i in 0..d {
                let dx = x[i] - xb[i];
                inner += dx * (fx[i] - fxb[i]);
                dx2 += dx * dx;
            }
            let mut dg2 = 0.0;
            for i in 0..d * m {
                let dg = gx[i] - gxb[i];
                dg2 += dg * dg;
            }
            let mut dy2 = 0.0;
            for i in 0..d {
                let dy = y[i] - yb[i];
                dy2 += dy * dy;
            }
            let lhs = inner + eta * dg2;
            let rhs = dx2 + dy2;
            if !(lhs.is_finite() && rhs.is_finite()) {
                return Err(SddeError::invalid(
                    "coefficients produced non-finite values inside the sampling ball",
                ));
            }
            if rhs < 1e-300 {
                continue;
            }
            let ratio = lhs / rhs;
            if ratio > sup_ratio {
                sup_ratio = ratio;
            }
            if ri == 2 {
                if let Some(l) = declared_l {
                    let margin = l - ratio;
                    report.shrink_margin(margin);
                    if margin < 0.0 {
                        report.violations += 1;
                    }
                }
            }
        }
        fitted[ri] = sup_ratio;
        report.fitted.push((format!("L(radius {r})"), sup_ratio));
    }

    let floor = 1e-9;
    let g1 = fitted[1] / fitted[0].max(floor);
    let g2 = fitted[2] / fitted[1].max(floor);
    report.fitted.push(("growth_ratio_mid".to_string(), g1));
    report.fitted.push(("growth_ratio_full".to_string(), g2));
    if g1 > 2.0 && g2 > 2.0 {
        report.violations += [g1, g2].iter().filter(|g| **g > 2.0).count();
        report.notes.push(format!(
            "fitted constant grows with the radius (ratios {g1:.2}, {g2:.2}); \
             no global constant fits this coefficient pair"
        ));
    }
    if declared_l.is_none() {
        report.notes.push("no declared constant; only growth was checked".to_string());
    }
    Ok(report)
}

/// Fitted seed is fixed: the probe is deterministic for a given problem.
const HISTORY_PROBE_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Estimates the Hoelder constant of the initial history on [-delay, 0]:
/// the supremum of |xi(s) - xi(t)| / |s - t|^beta over sampled pairs, half
/// of them nearly coincident to capture the local (derivative) supremum.
/// Violations are counted against the declared constant, when present, with
/// a 1e-6 relative allowance.
pub fn history_holder_probe(problem: &SddeProblem, pairs: usize) -> Result<ProbeReport> {
    if pairs < 10 {
        return Err(SddeError::invalid("need at least 10 pairs"));
    }
    let tau = problem.delay();
    let beta = problem.assumptions().history_holder_exponent.unwrap_or(1.0);
    let declared = problem.assumptions().history_holder_const;
    let d = problem.dim_state();
    let mut src = NormalSource::new(HISTORY_PROBE_SEED, 0);
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut report = ProbeReport::new("history-holder");
    report.samples = pairs;

    let mut sup = 0.0f64;
    for i in 0..pairs {
        let (s, t) = if i % 2 == 0 {
            (-tau * src.uniform(), -tau * src.uniform())
        } else {
            let t = -tau * src.uniform();
            let delta = tau * 1e-7 * (0.5 + src.uniform());
            ((t + delta).min(0.0), t)
        };
        if s == t {
            continue;
        }
        problem.history_into(s, &mut a);
        problem.history_into(t, &mut b);
        for k in 0..d {
            diff[k] = a[k] - b[k];
        }
        let dist = euclidean_norm(&diff);
        if !dist.is_finite() {
            return Err(SddeError::invalid(format!(
                "history produced a non-finite value between t = {t} and {s}"
            )));
        }
        let ratio = dist / (s - t).abs().powf(beta);
        if ratio > sup {
            sup = ratio;
        }
        if let Some(k1) = declared {
            let margin = k1 * (1.0 + 1e-6) - ratio;
            report.shrink_margin(margin);
            if margin < 0.0 {
                report.violations += 1;
            }
        }
    }
    report.fitted.push(("K_history".to_string(), sup));
    report.fitted.push(("beta".to_string(), beta));
    if declared.is_none() {
        report.notes.push("no declared constant; fitted value is informational".to_string());
    }
    Ok(report)
}

/// One pass of the stability check: fits the constant and, when `check`
/// is set, counts violations against it.
#[allow(clippy::too_many_arguments)]
fn c_stability_pass(
    problem: &SddeProblem,
    params: &ProjectionParams,
    eta: f64,
    check: Option<f64>,
    pair_count: usize,
    noise_samples: usize,
    master_seed: u64,
    pass: u64,
    report: &mut ProbeReport,
) -> Result<f64> {
    let d = problem.dim_state();
    let m = problem.dim_noise();
    let step = params.step();
    let radius = params.radius();
    let sqrt_h = step.sqrt();
    let batches = 10usize;

    let mut pair_src = NormalSource::new(master_seed, pass);
    let mut y = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut yb = vec![0.0; d];
    let mut zb = vec![0.0; d];
    let mut dw = vec![0.0; m];
    let mut fitted = 0.0f64;

    for k in 0..pair_count {
        sample_ball(&mut pair_src, radius, &mut y);
        sample_ball(&mut pair_src, radius, &mut z);
        sample_ball(&mut pair_src, radius, &mut yb);
        sample_ball(&mut pair_src, radius, &mut zb);

        let noise_stream = 2 + pass * pair_count as u64 + k as u64;
        let mut noise = NormalSource::new(master_seed, noise_stream);
        let mut batch_lhs = Vec::with_capacity(batches);
        let mut deltas: Vec<Vec<f64>> = Vec::with_capacity(noise_samples / batches + 1);
        let mut drained = 0;
        for b in 0..batches {
            let quota = (noise_samples * (b + 1)) / batches - drained;
            drained += quota;
            deltas.clear();
            for _ in 0..quota {
                for w in dw.iter_mut() {
                    *w = quantize(sqrt_h * noise.next());
                }
                let one = pem_step(problem, params, &y, &yb, &dw)?;
                let two = pem_step(problem, params, &z, &zb, &dw)?;
                deltas.push(one.iter().zip(&two).map(|(a, b)| a - b).collect());
            }
            let n = deltas.len() as f64;
            let mut mean = vec![0.0; d];
            for delta in &deltas {
                for i in 0..d {
                    mean[i] += delta[i];
                }
            }
            for v in mean.iter_mut() {
                *v /= n;
            }
            let mut var = 0.0;
            for delta in &deltas {
                for i in 0..d {
                    var += (delta[i] - mean[i]).powi(2);
                }
            }
            var /= n - 1.0;
            let mean2 = mean.iter().map(|v| v * v).sum::<f64>();
            batch_lhs.push(mean2 + eta * var);
        }
        let lhs = batch_lhs.iter().sum::<f64>() / batches as f64;
        let se = {
            let mean = lhs;
            let var = batch_lhs.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                / (batches as f64 - 1.0);
            (var / batches as f64).sqrt()
        };

        let dy2: f64 = y.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        let dyb2: f64 = yb.iter().zip(&zb).map(|(a, b)| (a - b) * (a - b)).sum();
        let denom = step * (dy2 + dyb2);
        if denom > 1e-300 {
            let c = (lhs - dy2) / denom;
            if c > fitted {
                fitted = c;
            }
        }
        if let Some(cc) = check {
            let rhs = (1.0 + cc * step) * dy2 + cc * step * dyb2;
            let margin = rhs - lhs;
            report.shrink_margin(margin);
            if margin < -3.0 * se {
                report.violations += 1;
            } else if margin < 0.0 {
                report.indeterminate += 1;
            }
        }
        report.samples += noise_samples;
    }
    Ok(fitted.max(0.0))
}

/// Checks the one-step mean-square stability bound of the projected scheme:
/// for argument pairs (Y, Ybar) and (Z, Zbar) in the scheme's own state ball
/// and shared increments,
///
/// ```text
/// |E D|^2 + eta E|D - E D|^2 <= (1 + C h) |Y - Z|^2 + C h |Ybar - Zbar|^2,
/// D = step(Y, Ybar, dW) - step(Z, Zbar, dW),
/// ```
///
/// with expectations over dW estimated from `noise_samples` draws (ten-batch
/// standard errors; a violation must clear three of them). With no
/// `candidate_c`, a first pass fits C and a second pass with fresh pairs
/// checks it.
pub fn c_stability_probe(
    problem: &SddeProblem,
    step: f64,
    eta: f64,
    candidate_c: Option<f64>,
    pair_count: usize,
    noise_samples: usize,
    master_seed: u64,
) -> Result<ProbeReport> {
    if !(eta.is_finite() && eta > 1.0) {
        return Err(SddeError::invalid("eta must be finite and > 1 for the stability bound"));
    }
    if pair_count < 4 {
        return Err(SddeError::invalid("need at least 4 argument pairs"));
    }
    if noise_samples < 20 {
        return Err(SddeError::invalid("need at least 20 noise samples (10 batches of 2)"));
    }
    if let Some(c) = candidate_c {
        if !(c.is_finite() && c >= 0.0) {
            return Err(SddeError::invalid("candidate C must be finite and >= 0"));
        }
    }
    let alpha = default_alpha(problem.assumptions().growth_exponent)?;
    let params = ProjectionParams::new(alpha, step)?;

    let mut report = ProbeReport::new("c-stability");
    report.fitted.push(("alpha".to_string(), alpha));
    report.fitted.push(("radius".to_string(), params.radius()));
    match candidate_c {
        Some(c) => {
            let fitted = c_stability_pass(
                problem,
                &params,
                eta,
                Some(c),
                pair_count,
                noise_samples,
                master_seed,
                0,
                &mut report,
            )?;
            report.fitted.push(("C_fitted".to_string(), fitted));
            report.fitted.push(("C_checked".to_string(), c));
        }
        None => {
            let fitted = c_stability_pass(
                problem,
                &params,
                eta,
                None,
                pair_count,
                noise_samples,
                master_seed,
                0,
                &mut report,
            )?;
            let refit = c_stability_pass(
                problem,
                &params,
                eta,
                Some(fitted),
                pair_count,
                noise_samples,
                master_seed,
                1,
                &mut report,
            )?;
            report.fitted.push(("C_fitted".to_string(), fitted));
            report.fitted.push(("C_refit".to_string(), refit));
            report
                .notes
                .push("no candidate C given; fitted on one pair set, checked on a fresh one".to_string());
        }
    }
    Ok(report)
}

const B_CONSISTENCY_CONTINUATIONS: usize = 64;
const EXPECTED_MEAN_ORDER: f64 = 1.5;
const EXPECTED_DEV_ORDER: f64 = 1.0;
const ORDER_TOLERANCE: f64 = 0.25;

struct BLevel {
    step: f64,
    mean_term: f64,
    dev_term: f64,
    paths: usize,
    excluded: usize,
    mean_nonpositive: bool,
}

/// Measures the local consistency orders of the scheme's single step against
/// a substepped run of the same scheme from a shared prepared state.
///
/// Each outer path is integrated to `anchor_time` at the fine step
/// h / substep_factor; from that state, paired continuations over one coarse
/// step compare the substepped endpoint with the single step driven by the
/// summed increments. Conditional means and deviations are estimated from 64
/// continuations per path without bias, levels are aggregated as root mean
/// squares, and the log2 fits are checked against orders 3/2 (mean) and 1
/// (deviation) with a 0.25 window.
pub fn b_consistency_probe(
    problem: &SddeProblem,
    anchor_time: f64,
    level_delay_steps: &[usize],
    substep_factor: usize,
    outer_paths: usize,
    master_seed: u64,
) -> Result<ProbeReport> {
    if !(anchor_time.is_finite() && anchor_time > 0.0) {
        return Err(SddeError::invalid("anchor time must be finite and > 0"));
    }
    if level_delay_steps.is_empty() {
        return Err(SddeError::invalid("need at least one level"));
    }
    if substep_factor < 2 {
        return Err(SddeError::invalid("substep factor must be >= 2"));
    }
    if outer_paths < 8 {
        return Err(SddeError::invalid("need at least 8 outer paths"));
    }
    let alpha = default_alpha(problem.assumptions().growth_exponent)?;
    let tau = problem.delay();
    let d = problem.dim_state();
    let m = problem.dim_noise();
    let k_cont = B_CONSISTENCY_CONTINUATIONS;

    let mut report = ProbeReport::new("b-consistency");
    let mut levels = Vec::with_capacity(level_delay_steps.len());
    for &delay_steps in level_delay_steps {
        if delay_steps == 0 {
            return Err(SddeError::invalid("level delay steps must be >= 1"));
        }
        let fine_m = delay_steps
            .checked_mul(substep_factor)
            .ok_or_else(|| SddeError::invalid("level is too fine"))?;
        let delta = tau / fine_m as f64;
        let anchor_f = (anchor_time / delta).round() as usize;
        if anchor_f == 0 || (anchor_f as f64 * delta - anchor_time).abs() > 4.0 * crate::fp::ulp(anchor_time)
        {
            return Err(SddeError::invalid(format!(
                "anchor {anchor_time} does not lie on the fine grid with step {delta}"
            )));
        }
        let horizon = (anchor_f + substep_factor) as f64 * delta;
        let fine = build_time_grid(tau, horizon, fine_m)?;
        if fine.node_count() != anchor_f + substep_factor {
            return Err(SddeError::invalid(
                "fine grid does not end one coarse step past the anchor",
            ));
        }
        let coarse = TimeGrid::coarsened(&fine, substep_factor)?;
        let delta_params = ProjectionParams::new(alpha, fine.step())?;
        let h_params = ProjectionParams::new(alpha, coarse.step())?;
        let delta_config = SchemeConfig::projected(delta_params);

        let outcomes: Vec<Option<(f64, f64)>> = (0..outer_paths)
            .into_par_iter()
            .map(|p| {
                let prep_stream = p as u64 * (k_cont as u64 + 1);
                let prep_path = generate_path(
                    master_seed,
                    prep_stream,
                    m,
                    fine.step(),
                    fine.node_count(),
                )
                .expect("validated path arguments");
                let prep = match integrate(problem, &fine, &prep_path, 1, &delta_config) {
                    Ok(t) => t,
                    Err(_) => return None,
                };
                let anchor_state = prep.node(anchor_f as i64).to_vec();
                let anchor_delayed = prep.node(anchor_f as i64 - fine_m as i64).to_vec();

                let mut gs: Vec<Vec<f64>> = Vec::with_capacity(k_cont);
                for j in 0..k_cont {
                    let cont_path = match generate_path(
                        master_seed,
                        prep_stream + 1 + j as u64,
                        m,
                        fine.step(),
                        substep_factor,
                    ) {
                        Ok(p) => p,
                        Err(_) => return None,
                    };
                    let mut state = anchor_state.clone();
                    for s in 1..=substep_factor {
                        let delayed =
                            prep.node(anchor_f as i64 + s as i64 - fine_m as i64);
                        state = match pem_step(
                            problem,
                            &delta_params,
                            &state,
                            delayed,
                            cont_path.increment(s - 1),
                        ) {
                            Ok(next) => next,
                            Err(_) => return None,
                        };
                    }
                    let dw = match sum_blocks(cont_path.increments(), m, substep_factor) {
                        Ok(s) => s,
                        Err(_) => return None,
                    };
                    let coarse_end = match pem_step(
                        problem,
                        &h_params,
                        &anchor_state,
                        &anchor_delayed,
                        &dw,
                    ) {
                        Ok(next) => next,
                        Err(_) => return None,
                    };
                    gs.push(state.iter().zip(&coarse_end).map(|(a, b)| a - b).collect());
                }

                let kf = k_cont as f64;
                let mut mean = vec![0.0; d];
                for g in &gs {
                    for i in 0..d {
                        mean[i] += g[i];
                    }
                }
                for v in mean.iter_mut() {
                    *v /= kf;
                }
                let mut s2 = 0.0;
                for g in &gs {
                    for i in 0..d {
                        s2 += (g[i] - mean[i]).powi(2);
                    }
                }
                s2 /= kf - 1.0;
                let mean2 = mean.iter().map(|v| v * v).sum::<f64>();
                Some((mean2 - s2 / kf, s2))
            })
            .collect();

        let mut sum_a = 0.0;
        let mut sum_b = 0.0;
        let mut included = 0usize;
        let mut excluded = 0usize;
        for outcome in &outcomes {
            match outcome {
                Some((a, b)) => {
                    sum_a += a;
                    sum_b += b;
                    included += 1;
                }
                None => excluded += 1,
            }
        }
        if included == 0 {
            return Err(SddeError::invalid(format!(
                "every path failed at level with {delay_steps} steps per delay"
            )));
        }
        let avg_a = sum_a / included as f64;
        let avg_b = sum_b / included as f64;
        levels.push(BLevel {
            step: coarse.step(),
            mean_term: avg_a.max(0.0).sqrt(),
            dev_term: avg_b.sqrt(),
            paths: included,
            excluded,
            mean_nonpositive: avg_a <= 0.0,
        });
        report.samples += included;
    }

    for level in &levels {
        report.notes.push(format!(
            "h={}: mean_term={:.3e}, dev_term={:.3e}, paths={}, excluded={}{}",
            level.step,
            level.mean_term,
            level.dev_term,
            level.paths,
            level.excluded,
            if level.mean_nonpositive { " (mean estimate at noise floor)" } else { "" }
        ));
    }

    let check_order = |points: &[(f64, f64)],
                           name: &str,
                           expected: f64,
                           report: &mut ProbeReport|
     -> Result<()> {
        if points.len() < 2 {
            report.notes.push(format!(
                "{name}: fewer than two usable levels, order not fitted"
            ));
            return Ok(());
        }
        let fit = fit_log2_line(points)?;
        report.fitted.push((name.to_string(), fit.slope));
        let margin = ORDER_TOLERANCE - (fit.slope - expected).abs();
        report.shrink_margin(margin);
        if margin < 0.0 {
            report.violations += 1;
            report.notes.push(format!(
                "{name} = {:.3} outside {expected} +- {ORDER_TOLERANCE}",
                fit.slope
            ));
        }
        Ok(())
    };

    let mean_points: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| !l.mean_nonpositive && l.mean_term > 0.0)
        .map(|l| (l.step, l.mean_term))
        .collect();
    check_order(&mean_points, "order_mean", EXPECTED_MEAN_ORDER, &mut report)?;
    let dev_points: Vec<(f64, f64)> = levels
        .iter()
        .filter(|l| l.dev_term > 0.0)
        .map(|l| (l.step, l.dev_term))
        .collect();
    check_order(&dev_points, "order_dev", EXPECTED_DEV_ORDER, &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::builtin;
    use crate::problem::AssumptionParams;

    #[test]
    fn monotonicity_holds_for_example1_with_declared_constants() {
        let problem = builtin("example1").unwrap();
        let report = monotonicity_probe(&problem, 1.0, Some(0.5), 5.0, 2000, 17).unwrap();
        assert_eq!(report.violations, 0);
        assert!(report.worst_margin > 0.0);
        let full = report
            .fitted
            .iter()
            .find(|(name, _)| name.starts_with("L(radius 5"))
            .unwrap()
            .1;
        assert!(full > 0.05 && full < 0.5, "fitted L {full}");
        assert!(report.notes.iter().all(|n| !n.contains("grows")));
    }

    #[test]
    fn monotonicity_flags_an_undeclared_growing_constant() {
        let problem = SddeProblem::scalar(
            "cubic-growth",
            1.0,
            2.0,
            |x, _| x * x * x,
            |_, _| 0.0,
            |_| 0.0,
            AssumptionParams::new(3.0),
        )
        .unwrap();
        let report = monotonicity_probe(&problem, 1.0, None, 4.0, 5000, 23).unwrap();
        assert!(report.violations >= 1);
        assert!(report.notes.iter().any(|n| n.contains("grows")));
        assert!(report.worst_margin.is_nan());
    }

    #[test]
    fn monotonicity_catches_an_understated_constant() {
        let problem = builtin("example1").unwrap();
        let report = monotonicity_probe(&problem, 1.0, Some(0.05), 5.0, 2000, 17).unwrap();
        assert!(report.violations > 0);
        assert!(report.worst_margin < 0.0);
    }

    #[test]
    fn history_probe_fits_the_cosine_constant() {
        let problem = builtin("example1").unwrap();
        let report = history_holder_probe(&problem, 20_000).unwrap();
        assert_eq!(report.violations, 0);
        let fitted = report.fitted.iter().find(|(n, _)| n == "K_history").unwrap().1;
        assert!((fitted - 1.0f64.sin()).abs() < 2e-3, "fitted {fitted}");
    }

    #[test]
    fn history_probe_fits_a_quadratic_and_checks_the_declared_bound() {
        let mut good = AssumptionParams::new(2.0);
        good.history_holder_const = Some(2.0);
        good.history_holder_exponent = Some(1.0);
        let problem = SddeProblem::scalar(
            "quad-history",
            1.0,
            2.0,
            |_, _| 0.0,
            |_, _| 0.0,
            |t| t * t,
            good,
        )
        .unwrap();
        let report = history_holder_probe(&problem, 20_000).unwrap();
        assert_eq!(report.violations, 0);
        let fitted = report.fitted.iter().find(|(n, _)| n == "K_history").unwrap().1;
        assert!((fitted - 2.0).abs() < 2e-3, "fitted {fitted}");

        let mut tight = AssumptionParams::new(2.0);
        tight.history_holder_const = Some(1.5);
        tight.history_holder_exponent = Some(1.0);
        let problem = SddeProblem::scalar(
            "quad-history-tight",
            1.0,
            2.0,
            |_, _| 0.0,
            |_, _| 0.0,
            |t| t * t,
            tight,
        )
        .unwrap();
        let report = history_holder_probe(&problem, 20_000).unwrap();
        assert!(report.violations > 0);
        assert!(report.worst_margin < 0.0);
    }

    fn linear_problem() -> SddeProblem {
        SddeProblem::scalar(
            "linear",
            1.0,
            2.0,
            |x, xd| -2.0 * x + xd,
            |x, _| 0.1 * x,
            |t| t.cos(),
            AssumptionParams::new(2.0),
        )
        .unwrap()
    }

    #[test]
    fn c_stability_accepts_a_generous_constant_on_a_linear_problem() {
        let problem = linear_problem();
        let report =
            c_stability_probe(&problem, 1.0 / 16.0, 2.0, Some(16.0), 40, 400, 31).unwrap();
        assert_eq!(report.violations, 0);
        let fitted = report.fitted.iter().find(|(n, _)| n == "C_fitted").unwrap().1;
        assert!(fitted >= 0.0 && fitted < 16.0, "fitted C {fitted}");
    }

    #[test]
    fn c_stability_rejects_a_zero_constant() {
        let problem = linear_problem();
        let report =
            c_stability_probe(&problem, 1.0 / 16.0, 2.0, Some(0.0), 40, 400, 31).unwrap();
        assert!(report.violations > 0);
        assert!(report.worst_margin < 0.0);
    }

    #[test]
    fn c_stability_two_pass_mode_reports_both_constants() {
        let problem = linear_problem();
        let report = c_stability_probe(&problem, 1.0 / 16.0, 2.0, None, 24, 200, 31).unwrap();
        let names: Vec<&str> = report.fitted.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"C_fitted"));
        assert!(names.contains(&"C_refit"));
        assert!(report.notes.iter().any(|n| n.contains("fresh")));
    }

    #[test]
    fn b_consistency_smoke_run_produces_plausible_orders() {
        let problem = builtin("example1").unwrap();
        let report = b_consistency_probe(&problem, 1.0, &[8, 16], 8, 300, 3).unwrap();
        let order = |name: &str| {
            report
                .fitted
                .iter()
                .find(|(n, _)| n == name)
                .unwrap_or_else(|| panic!("missing {name} in {:?}", report.fitted))
                .1
        };
        let mean_order = order("order_mean");
        let dev_order = order("order_dev");
        assert!((1.0..=2.0).contains(&mean_order), "mean order {mean_order}");
        assert!((0.6..=1.4).contains(&dev_order), "dev order {dev_order}");
        assert_eq!(report.samples, 600);
    }

    #[test]
    fn b_consistency_validates_the_anchor() {
        let problem = builtin("example1").unwrap();
        assert!(b_consistency_probe(&problem, 0.33, &[8], 8, 16, 3).is_err());
        assert!(b_consistency_probe(&problem, 1.0, &[], 8, 16, 3).is_err());
        assert!(b_consistency_probe(&problem, 1.0, &[8], 1, 16, 3).is_err());
    }
}

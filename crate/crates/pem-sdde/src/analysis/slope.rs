//! Least-squares slope estimation on log2-log2 axes.

use crate::error::{Result, SddeError};

/// Result of fitting log2(y) = intercept + slope * log2(x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual-based standard error of the slope; zero when the fit is
    /// exact or has no degrees of freedom (two points).
    pub slope_stderr: f64,
}

/// Fits a straight line through (log2 x, log2 y). Needs at least two points
/// with distinct x; every coordinate must be positive and finite.
pub fn fit_log2_line(points: &[(f64, f64)]) -> Result<LineFit> {
    if points.len() < 2 {
        return Err(SddeError::invalid(format!(
            "slope fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    for &(x, y) in points {
        if !(x.is_finite() && x > 0.0 && y.is_finite() && y > 0.0) {
            return Err(SddeError::invalid(format!(
                "slope fit points must be positive and finite, got ({x}, {y})"
            )));
        }
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SddeError::invalid("slope fit needs at least two distinct x values"));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let dof = points.len() as f64 - 2.0;
    let slope_stderr = if dof > 0.0 {
        let ss_res: f64 = logs
            .iter()
            .map(|&(x, y)| {
                let r = y - (intercept + slope * x);
                r * r
            })
            .sum();
        (ss_res / dof / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

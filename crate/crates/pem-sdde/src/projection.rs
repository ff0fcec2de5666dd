use crate::error::{Result, SddeError};
use crate::fp::euclidean_norm;

/// Parameters of the projection map x -> min(1, h^-alpha / |x|) x.
///
/// `radius()` is the clipping radius h^-alpha. It is computed as
/// `exp2(-alpha * log2(h))`, which is exact for the dyadic steps and dyadic
/// alpha used throughout (for example h = 2^-8, alpha = 1/8 gives exactly 2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionParams {
    alpha: f64,
    step: f64,
    radius: f64,
}

impl ProjectionParams {
    /// Requires alpha > 0 and step in (0, 1].
    pub fn new(alpha: f64, step: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(SddeError::invalid(format!("alpha must be finite and > 0, got {alpha}")));
        }
        if !(step.is_finite() && step > 0.0 && step <= 1.0) {
            return Err(SddeError::invalid(format!("step must lie in (0, 1], got {step}")));
        }
        let radius = (-alpha * step.log2()).exp2();
        if !radius.is_finite() {
            return Err(SddeError::invalid(format!(
                "clipping radius step^-alpha overflows for alpha={alpha}, step={step}"
            )));
        }
        Ok(ProjectionParams { alpha, step, radius })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Clipping radius h^-alpha (always >= 1 since h <= 1).
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// The projection exponent alpha = 1 / (2 (q - 1)) matched to a polynomial
/// growth exponent q > 1. For q = 5 this is exactly 1/8.
pub fn default_alpha(growth_exponent: f64) -> Result<f64> {
    if !(growth_exponent.is_finite() && growth_exponent > 1.0) {
        return Err(SddeError::invalid(format!(
            "growth exponent q must be finite and > 1, got {growth_exponent}"
        )));
    }
    Ok(1.0 / (2.0 * (growth_exponent - 1.0)))
}

/// Projects `x` onto the closed ball of radius `params.radius()` and writes
/// the result into `out`.
///
/// Inside the ball the input is copied bit-exactly (no arithmetic touches
/// it). Outside, the result is `x` times the largest scale of the form
/// nextdown^k(radius / |x|) whose product lands inside the ball, so the
/// output norm never exceeds the radius and projecting twice is exact. The
/// map is nonexpansive up to a few ulps per component.
pub fn project_into(params: &ProjectionParams, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), out.len());
    let norm = euclidean_norm(x);
    debug_assert!(norm.is_finite(), "projection input must be finite");
    if norm <= params.radius {
        out.copy_from_slice(x);
        return;
    }
    let mut scale = params.radius / norm;
    let mut rounds = 0;
    loop {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = v * scale;
        }
        if euclidean_norm(out) <= params.radius {
            return;
        }
        scale = scale.next_down();
        rounds += 1;
        debug_assert!(rounds < 64, "projection rescale failed to settle");
    }
}

/// Allocating variant of [`project_into`].
pub fn project(params: &ProjectionParams, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    project_into(params, x, &mut out);
    out
}

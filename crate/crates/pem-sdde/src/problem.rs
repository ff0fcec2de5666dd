use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SddeError};

/// Drift coefficient: writes f(x, x_delayed) into `out` (length `dim_state`).
pub type DriftFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Diffusion coefficient: writes the `dim_state x dim_noise` matrix
/// g(x, x_delayed) into `out` in row-major order.
pub type DiffusionFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
/// Initial history: writes xi(t) into `out` for t in [-delay, 0].
pub type HistoryFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Structural constants a problem is assumed (or verified by probes) to
/// satisfy. Only the polynomial growth exponent `q` is mandatory; the rest
/// are metadata that probes compare against when present.
///
/// The two `K1` constants are unrelated: `history_holder_const` bounds the
/// Hoelder regularity of the initial history, `khasminskii_const` bounds the
/// coercivity inequality controlling p-th moments. They are stored as
/// distinct fields even though traditional notation reuses one symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionParams {
    /// Polynomial growth exponent q > 1: |f| and |g| grow at most like
    /// 1 + |x|^q + |x_delayed|^q (up to the constant below).
    pub growth_exponent: f64,
    /// Constant L in the global monotonicity and growth bounds, when known.
    pub monotonicity_const: Option<f64>,
    /// Weight eta > 1/2 on the diffusion difference in the monotonicity bound.
    pub monotonicity_eta: Option<f64>,
    /// Hoelder constant of the initial history.
    pub history_holder_const: Option<f64>,
    /// Hoelder exponent beta in [1/2, 1] of the initial history.
    pub history_holder_exponent: Option<f64>,
    /// Moment order p >= 2 for which the coercivity bound is assumed.
    pub khasminskii_p: Option<f64>,
    /// Constant in the coercivity bound.
    pub khasminskii_const: Option<f64>,
}

impl AssumptionParams {
    /// Metadata with only the growth exponent set.
    pub fn new(growth_exponent: f64) -> Self {
        AssumptionParams {
            growth_exponent,
            monotonicity_const: None,
            monotonicity_eta: None,
            history_holder_const: None,
            history_holder_exponent: None,
            khasminskii_p: None,
            khasminskii_const: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.growth_exponent.is_finite() && self.growth_exponent > 1.0) {
            return Err(SddeError::invalid(format!(
                "growth exponent q must be finite and > 1, got {}",
                self.growth_exponent
            )));
        }
        if let Some(l) = self.monotonicity_const {
            if !(l.is_finite() && l >= 0.0) {
                return Err(SddeError::invalid("monotonicity constant L must be finite and >= 0"));
            }
        }
        if let Some(eta) = self.monotonicity_eta {
            if !(eta.is_finite() && eta > 0.5) {
                return Err(SddeError::invalid("monotonicity weight eta must be > 1/2"));
            }
        }
        if let Some(k) = self.history_holder_const {
            if !(k.is_finite() && k >= 0.0) {
                return Err(SddeError::invalid("history Hoelder constant must be finite and >= 0"));
            }
        }
        if let Some(b) = self.history_holder_exponent {
            if !(0.5..=1.0).contains(&b) {
                return Err(SddeError::invalid(format!(
                    "history Hoelder exponent beta must lie in [1/2, 1], got {b}"
                )));
            }
        }
        if let Some(p) = self.khasminskii_p {
            if !(p.is_finite() && p >= 2.0) {
                return Err(SddeError::invalid("moment order p must be finite and >= 2"));
            }
        }
        if let Some(k) = self.khasminskii_const {
            if !(k.is_finite() && k >= 0.0) {
                return Err(SddeError::invalid("coercivity constant must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// An SDDE with one constant delay:
///
/// ```text
/// dX(t) = f(X(t), X(t - delay)) dt + g(X(t), X(t - delay)) dW(t),
/// X(t)  = history(t) for t in [-delay, 0],
/// ```
///
/// with state in R^dim_state and an independent Wiener process per noise
/// column. Immutable after construction and safe to share across threads.
#[derive(Clone)]
pub struct SddeProblem {
    name: String,
    dim_state: usize,
    dim_noise: usize,
    delay: f64,
    horizon: f64,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    history: Arc<HistoryFn>,
    assumptions: AssumptionParams,
}

impl fmt::Debug for SddeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SddeProblem")
            .field("name", &self.name)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("delay", &self.delay)
            .field("horizon", &self.horizon)
            .field("assumptions", &self.assumptions)
            .finish_non_exhaustive()
    }
}

impl SddeProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        dim_state: usize,
        dim_noise: usize,
        delay: f64,
        horizon: f64,
        drift: Arc<DriftFn>,
        diffusion: Arc<DiffusionFn>,
        history: Arc<HistoryFn>,
        assumptions: AssumptionParams,
    ) -> Result<Self> {
        if dim_state == 0 || dim_noise == 0 {
            return Err(SddeError::invalid("state and noise dimensions must be >= 1"));
        }
        if !(delay.is_finite() && delay > 0.0) {
            return Err(SddeError::invalid(format!("delay must be finite and > 0, got {delay}")));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(SddeError::invalid(format!(
                "horizon must be finite and > 0, got {horizon}"
            )));
        }
        assumptions.validate()?;
        Ok(SddeProblem {
            name: name.into(),
            dim_state,
            dim_noise,
            delay,
            horizon,
            drift,
            diffusion,
            history,
            assumptions,
        })
    }

    /// Convenience constructor for scalar problems (d = m = 1) given plain
    /// closures f(x, x_delayed), g(x, x_delayed) and xi(t).
    pub fn scalar<F, G, H>(
        name: impl Into<String>,
        delay: f64,
        horizon: f64,
        drift: F,
        diffusion: G,
        history: H,
        assumptions: AssumptionParams,
    ) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        H: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        SddeProblem::new(
            name,
            1,
            1,
            delay,
            horizon,
            Arc::new(move |x: &[f64], xd: &[f64], out: &mut [f64]| out[0] = drift(x[0], xd[0])),
            Arc::new(move |x: &[f64], xd: &[f64], out: &mut [f64]| out[0] = diffusion(x[0], xd[0])),
            Arc::new(move |t: f64, out: &mut [f64]| out[0] = history(t)),
            assumptions,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Default integration horizon T.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn assumptions(&self) -> &AssumptionParams {
        &self.assumptions
    }

    /// Evaluates f(x, x_delayed) into `out` (length `dim_state`).
    pub fn drift_into(&self, x: &[f64], x_delayed: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(x_delayed.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state);
        (self.drift)(x, x_delayed, out);
    }

    /// Evaluates g(x, x_delayed) into `out` (row-major, length
    /// `dim_state * dim_noise`).
    pub fn diffusion_into(&self, x: &[f64], x_delayed: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim_state);
        debug_assert_eq!(x_delayed.len(), self.dim_state);
        debug_assert_eq!(out.len(), self.dim_state * self.dim_noise);
        (self.diffusion)(x, x_delayed, out);
    }

    /// Evaluates the initial history xi(t) into `out` for t in [-delay, 0].
    pub fn history_into(&self, t: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim_state);
        (self.history)(t, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_scalar(delay: f64, horizon: f64, q: f64) -> Result<SddeProblem> {
        SddeProblem::scalar("dummy", delay, horizon, |_, _| 0.0, |_, _| 0.0, |_| 0.0, AssumptionParams::new(q))
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(dummy_scalar(-1.0, 2.0, 5.0).is_err());
        assert!(dummy_scalar(0.0, 2.0, 5.0).is_err());
        assert!(dummy_scalar(1.0, 0.0, 5.0).is_err());
        assert!(dummy_scalar(1.0, 2.0, 1.0).is_err());
        assert!(dummy_scalar(1.0, 2.0, f64::NAN).is_err());
        assert!(dummy_scalar(1.0, 2.0, 5.0).is_ok());
    }

    #[test]
    fn assumption_ranges_are_enforced() {
        let mut a = AssumptionParams::new(5.0);
        a.monotonicity_eta = Some(0.5);
        assert!(a.validate().is_err());
        a.monotonicity_eta = Some(0.75);
        assert!(a.validate().is_ok());
        a.history_holder_exponent = Some(0.25);
        assert!(a.validate().is_err());
        a.history_holder_exponent = Some(0.5);
        assert!(a.validate().is_ok());
        a.khasminskii_p = Some(1.0);
        assert!(a.validate().is_err());
    }

    #[test]
    fn scalar_closures_are_wired_through() {
        let p = SddeProblem::scalar(
            "wiring",
            1.0,
            2.0,
            |x, xd| x + 10.0 * xd,
            |x, _| 3.0 * x,
            |t| 2.0 * t,
            AssumptionParams::new(2.0),
        )
        .unwrap();
        let mut out = [0.0];
        p.drift_into(&[1.0], &[2.0], &mut out);
        assert_eq!(out[0], 21.0);
        p.diffusion_into(&[4.0], &[0.0], &mut out);
        assert_eq!(out[0], 12.0);
        p.history_into(-0.5, &mut out);
        assert_eq!(out[0], -1.0);
    }
}

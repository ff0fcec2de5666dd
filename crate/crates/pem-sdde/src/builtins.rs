//! Built-in scalar test problems.
//!
//! Both problems run on [0, 2] with delay 1, history cos(t), and polynomial
//! growth exponent q = 5:
//!
//! * `example1`: dX = (-2 X + Xd - X^5) dt + X^2 dW, whose superlinear terms
//!   involve only the current state;
//! * `example2`: dX = (-2 X + Xd - X^5 - Xd^5) dt + (X^2 + Xd^2) dW, with
//!   superlinear terms in the delayed state as well.
//!
//! The coefficients are plain closures (powers via `powi`), so parsing the
//! same formulas from a problem file must reproduce them bit for bit; a test
//! below checks that on a grid of evaluation points.

use crate::error::{Result, SddeError};
use crate::problem::{AssumptionParams, SddeProblem};

pub fn builtin_names() -> &'static [&'static str] {
    &["example1", "example2"]
}

/// Constructs a built-in problem by name.
pub fn builtin(name: &str) -> Result<SddeProblem> {
    let mut assumptions = AssumptionParams::new(5.0);
    assumptions.khasminskii_p = Some(30.0);
    assumptions.history_holder_const = Some(1.0);
    assumptions.history_holder_exponent = Some(1.0);
    match name {
        "example1" => {
            // One-sided bounds for these coefficients peak well below 0.5 on
            // any ball, so the declared pair (L, eta) = (0.5, 1) holds with
            // margin; the growth of x -> x^5 is offset by its monotonicity.
            assumptions.monotonicity_const = Some(0.5);
            assumptions.monotonicity_eta = Some(1.0);
            SddeProblem::scalar(
                "example1",
                1.0,
                2.0,
                |x, xd| -2.0 * x + xd - x.powi(5),
                |x, _| x.powi(2),
                |t| t.cos(),
                assumptions,
            )
        }
        "example2" => SddeProblem::scalar(
            "example2",
            1.0,
            2.0,
            |x, xd| -2.0 * x + xd - x.powi(5) - xd.powi(5),
            |x, xd| x.powi(2) + xd.powi(2),
            |t| t.cos(),
            assumptions,
        ),
        other => Err(SddeError::invalid(format!(
            "unknown builtin problem `{other}`; available: {}",
            builtin_names().join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_expr, parse_history_expr};

    #[test]
    fn names_and_lookup_agree() {
        for name in builtin_names() {
            let problem = builtin(name).unwrap();
            assert_eq!(problem.name(), *name);
            assert_eq!(problem.dim_state(), 1);
            assert_eq!(problem.delay(), 1.0);
            assert_eq!(problem.horizon(), 2.0);
            assert_eq!(problem.assumptions().growth_exponent, 5.0);
        }
        let err = builtin("example3").unwrap_err();
        assert!(err.to_string().contains("example1"));
    }

    #[test]
    fn declared_constants_differ_where_the_structure_differs() {
        let p1 = builtin("example1").unwrap();
        assert_eq!(p1.assumptions().monotonicity_const, Some(0.5));
        assert_eq!(p1.assumptions().monotonicity_eta, Some(1.0));
        let p2 = builtin("example2").unwrap();
        assert_eq!(p2.assumptions().monotonicity_const, None);
        assert_eq!(p2.assumptions().khasminskii_p, Some(30.0));
    }

    #[test]
    fn formulas_parsed_from_text_match_the_closures_exactly() {
        let cases = [
            ("example1", "-2*x + xd - x^5", "x^2"),
            ("example2", "-2*x + xd - x^5 - xd^5", "x^2 + xd^2"),
        ];
        let vars = ["x", "xd"];
        for (name, drift_src, diffusion_src) in cases {
            let problem = builtin(name).unwrap();
            let drift = parse_expr(drift_src, &vars).unwrap();
            let diffusion = parse_expr(diffusion_src, &vars).unwrap();
            let history = parse_history_expr("cos(t)").unwrap();
            let mut out = [0.0];
            for i in 0..10 {
                for j in 0..10 {
                    let x = -2.0 + 0.45 * i as f64;
                    let xd = -2.0 + 0.45 * j as f64;
                    problem.drift_into(&[x], &[xd], &mut out);
                    assert_eq!(out[0].to_bits(), drift.eval(&[x, xd]).to_bits());
                    problem.diffusion_into(&[x], &[xd], &mut out);
                    assert_eq!(out[0].to_bits(), diffusion.eval(&[x, xd]).to_bits());
                }
                let t = -1.0 + 0.1 * i as f64;
                problem.history_into(t, &mut out);
                assert_eq!(out[0].to_bits(), history.eval(&[t]).to_bits());
            }
        }
    }
}

//! Small floating-point helpers shared across modules.

/// Unit in the last place of `x`: the gap between `|x|` and the next larger
/// representable double.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if !a.is_finite() {
        return f64::NAN;
    }
    if a == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(a.to_bits() + 1) - a
}

/// Euclidean norm of `x`, rescaled when components are large enough that the
/// plain sum of squares could overflow. The fast path (all magnitudes below
/// 1e150) sums squares in ascending index order.
pub fn euclidean_norm(x: &[f64]) -> f64 {
    let mut max = 0.0f64;
    for &v in x {
        let a = v.abs();
        if a > max {
            max = a;
        }
    }
    if max == 0.0 {
        return 0.0;
    }
    if max <= 1e150 {
        let mut s = 0.0;
        for &v in x {
            s += v * v;
        }
        s.sqrt()
    } else {
        let mut s = 0.0;
        for &v in x {
            let r = v / max;
            s += r * r;
        }
        max * s.sqrt()
    }
}

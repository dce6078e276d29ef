//! Safeguarded Newton iteration inside a bracket, falling back to bisection
//! whenever the Newton step leaves the bracket or stalls.

/// Find the root of `f` inside `[lo, hi]` (the signs of `f(lo)` and `f(hi)`
/// must differ). `df` is the derivative. Converges to a relative tolerance
/// `rtol` on the root location, or returns `None` after `max_iter` steps.
pub fn newton_bracketed(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    rtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let mid = 0.5 * (lo + hi);
    newton_bracketed_from(f, df, lo, hi, mid, rtol, max_iter)
}

/// Same as [`newton_bracketed`], but the first Newton step starts from `x0`
/// (clamped into the bracket) instead of the midpoint. A good analytic guess
/// typically saves a few iterations; a bad one costs nothing, the bracket
/// safeguard still applies.
pub fn newton_bracketed_from(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    x0: f64,
    rtol: f64,
    max_iter: usize,
) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    assert!(
        fa.signum() != fb.signum(),
        "newton_bracketed requires a sign change"
    );
    let mut x = x0.clamp(a, b);
    for _ in 0..max_iter {
        let fx = f(x);
        if fx == 0.0 {
            return Some(x);
        }
        // Shrink the bracket around the sign change.
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
        }
        let d = df(x);
        let newton = if d != 0.0 { x - fx / d } else { f64::NAN };
        x = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (b - a).abs() <= rtol * x.abs().max(1.0) {
            return Some(x);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finds_cosine_root() {
        let r = newton_bracketed(|x| x.cos(), |x| -x.sin(), 1.0, 2.0, 1e-14, 100).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn guess_outside_bracket_is_clamped() {
        let r =
            newton_bracketed_from(|x| x.cos(), |x| -x.sin(), 1.0, 2.0, 40.0, 1e-14, 100).unwrap();
        assert_relative_eq!(r, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn survives_flat_derivative() {
        // f has an inflection at the root; Newton from the midpoint would
        // overshoot, the bisection safeguard keeps it inside.
        let f = |x: f64| (x - 1.0).powi(3);
        let df = |x: f64| 3.0 * (x - 1.0).powi(2);
        let r = newton_bracketed(f, df, 0.0, 3.0, 1e-10, 200).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-6);
    }
}

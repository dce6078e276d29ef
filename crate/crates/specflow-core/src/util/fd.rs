//! Finite-difference derivative helpers.

/// Fourth-order central difference of a scalar function.
/// Error is O(step^4 f^(5)).
pub fn central_derivative_4(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (-f(x + 2.0 * step) + 8.0 * f(x + step) - 8.0 * f(x - step) + f(x - 2.0 * step))
        / (12.0 * step)
}

/// Second-order central difference.
pub fn central_derivative_2(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// Per-sample derivative of a sampled trace: central differences at interior
/// samples, one-sided at the two endpoints. `ts` must be strictly increasing.
pub fn sampled_derivative(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    assert_eq!(ts.len(), ys.len());
    let n = ts.len();
    assert!(n >= 2, "need at least two samples");
    let mut out = Vec::with_capacity(n);
    out.push((ys[1] - ys[0]) / (ts[1] - ts[0]));
    for i in 1..n - 1 {
        out.push((ys[i + 1] - ys[i - 1]) / (ts[i + 1] - ts[i - 1]));
    }
    out.push((ys[n - 1] - ys[n - 2]) / (ts[n - 1] - ts[n - 2]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fourth_order_accuracy() {
        let f = |x: f64| x.sin();
        let coarse = (central_derivative_4(f, 1.0, 1e-2) - 1.0f64.cos()).abs();
        let fine = (central_derivative_4(f, 1.0, 5e-3) - 1.0f64.cos()).abs();
        assert!(coarse / fine > 12.0, "ratio {}", coarse / fine);
    }

    #[test]
    fn sampled_linear_exact() {
        let ts: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * t + 1.0).collect();
        for d in sampled_derivative(&ts, &ys) {
            assert_relative_eq!(d, 3.0, epsilon = 1e-12);
        }
    }
}

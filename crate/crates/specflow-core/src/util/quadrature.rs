//! Quadrature rules on uniform grids. Three flavors cover every integral in
//! the crate: composite Simpson on closed intervals, the trapezoid rule on
//! periodic data (spectrally accurate there), and the midpoint rule on
//! staggered grids whose nodes sit at cell centers.

/// Composite Simpson over `n` intervals of width `h` given `n + 1` samples.
/// Falls back to a Simpson 3/8 block at the end when `n` is odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len().checked_sub(1).expect("need at least 2 samples");
    assert!(n >= 2, "need at least 3 samples for Simpson");
    let (even_part, tail) = if n % 2 == 0 {
        (n, 0)
    } else {
        (n - 3, 3)
    };
    let mut sum = 0.0;
    if even_part >= 2 {
        sum += values[0] + values[even_part];
        let mut j = 1;
        while j < even_part {
            sum += 4.0 * values[j];
            if j + 1 < even_part {
                sum += 2.0 * values[j + 1];
            }
            j += 2;
        }
        sum *= h / 3.0;
    }
    if tail == 3 {
        let v = &values[even_part..];
        sum += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
    }
    sum
}

/// Simpson rule applied to a function on `[a, b]` with `n` intervals
/// (`n` rounded up to even).
pub fn simpson_fn(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let values: Vec<f64> = (0..=n).map(|j| f(a + h * j as f64)).collect();
    simpson(&values, h)
}

/// Trapezoid rule for periodic samples: `values[j] = f(j h)` with period
/// `len * h`. For smooth periodic integrands this converges faster than any
/// power of `h`.
pub fn periodic_trapezoid(values: &[f64], h: f64) -> f64 {
    h * values.iter().sum::<f64>()
}

/// Midpoint rule on a staggered grid: `values[j] = f((j + 1/2) h)` covering
/// `[0, len * h]` exactly.
pub fn staggered_midpoint(values: &[f64], h: f64) -> f64 {
    h * values.iter().sum::<f64>()
}

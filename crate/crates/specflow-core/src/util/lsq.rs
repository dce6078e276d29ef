//! Ordinary least squares for a handful of basis columns, solved through
//! column-scaled normal equations with partial pivoting. Adequate for the
//! 2-3 column fits used here (counting-function and heat-trace fits).

/// Fit `y ~ sum_k c_k * cols[k]`. Returns the coefficients and the root mean
/// square residual. Panics if the columns are empty or inconsistent.
pub fn lsq_fit(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let k = cols.len();
    let n = y.len();
    assert!(k >= 1 && n >= k);
    for c in cols {
        assert_eq!(c.len(), n, "column length mismatch");
    }
    // Scale columns to unit max-norm for conditioning.
    let scales: Vec<f64> = cols
        .iter()
        .map(|c| {
            let m = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    // Normal equations in the scaled basis.
    let mut ata = vec![vec![0.0; k]; k];
    let mut aty = vec![0.0; k];
    for i in 0..k {
        for j in i..k {
            let mut s = 0.0;
            for t in 0..n {
                s += cols[i][t] * cols[j][t] / (scales[i] * scales[j]);
            }
            ata[i][j] = s;
            ata[j][i] = s;
        }
        let mut s = 0.0;
        for t in 0..n {
            s += cols[i][t] * y[t] / scales[i];
        }
        aty[i] = s;
    }
    let scaled = solve_dense(&mut ata, &mut aty);
    let coeffs: Vec<f64> = scaled.iter().zip(&scales).map(|(c, s)| c / s).collect();
    let mut ss = 0.0;
    for t in 0..n {
        let mut pred = 0.0;
        for i in 0..k {
            pred += coeffs[i] * cols[i][t];
        }
        ss += (y[t] - pred).powi(2);
    }
    (coeffs, (ss / n as f64).sqrt())
}

/// Slope and intercept of `y ~ a + b x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let ones = vec![1.0; x.len()];
    let (c, _) = lsq_fit(&[ones, x.to_vec()], y);
    (c[0], c[1])
}

fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let diag = a[col][col];
        assert!(diag.abs() > 0.0, "singular normal equations");
        for row in col + 1..k {
            let f = a[row][col] / diag;
            for j in col..k {
                a[row][j] -= f * a[col][j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for col in (0..k).rev() {
        let mut s = b[col];
        for j in col + 1..k {
            s -= a[col][j] * x[j];
        }
        x[col] = s / a[col][col];
    }
    x
}

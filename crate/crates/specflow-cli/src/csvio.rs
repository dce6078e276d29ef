//! Text serialization helpers. Every floating-point value this tool writes
//! goes through [`fmt_f64`]: scientific notation with 17 significant digits,
//! enough to reproduce the bits exactly on read-back.

use std::fmt::Write as _;

/// 17-significant-digit scientific form, e.g. `1.0000000000000000e-4`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Build a CSV body from a header and rows of already formatted cells.
pub struct Csv {
    body: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let columns = header.split(',').count();
        let mut body = String::with_capacity(1024);
        body.push_str(header);
        body.push('\n');
        Csv { body, columns }
    }

    /// A headerless table (bare coordinate files).
    pub fn headerless(columns: usize) -> Csv {
        Csv { body: String::with_capacity(1024), columns }
    }

    pub fn row(&mut self, cells: &[String]) {
        assert_eq!(cells.len(), self.columns, "row width mismatch");
        let mut first = true;
        for cell in cells {
            if !first {
                self.body.push(',');
            }
            first = false;
            self.body.push_str(cell);
        }
        self.body.push('\n');
    }

    /// Convenience: a row of floats.
    pub fn float_row(&mut self, values: &[f64]) {
        let mut first = true;
        assert_eq!(values.len(), self.columns, "row width mismatch");
        for v in values {
            if !first {
                self.body.push(',');
            }
            first = false;
            let _ = write!(self.body, "{v:.16e}");
        }
        self.body.push('\n');
    }

    pub fn finish(self) -> String {
        self.body
    }
}

/// Indices `0..len` thinned to roughly `target` entries, always keeping the
/// first and last. Deterministic; used to keep trace CSVs and plot
/// polylines at a sane size.
pub fn thin_indices(len: usize, target: usize) -> Vec<usize> {
    assert!(target >= 2);
    if len <= target {
        return (0..len).collect();
    }
    let stride = len.div_ceil(target);
    let mut idx: Vec<usize> = (0..len).step_by(stride).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_roundtrips_bits() {
        for &v in &[0.0, 1.0, -1.5, 1e-300, std::f64::consts::PI, 2.0f64.powi(-52)] {
            let text = fmt_f64(v);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{text}");
        }
    }

    #[test]
    fn csv_shapes() {
        let mut c = Csv::new("a,b");
        c.float_row(&[1.0, 2.0]);
        let text = c.finish();
        assert!(text.starts_with("a,b\n1.0000000000000000e0,"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn thinning_keeps_endpoints() {
        let idx = thin_indices(1000, 100);
        assert_eq!(*idx.first().unwrap(), 0);
        assert_eq!(*idx.last().unwrap(), 999);
        assert!(idx.len() <= 101);
        assert_eq!(thin_indices(5, 10), vec![0, 1, 2, 3, 4]);
    }
}

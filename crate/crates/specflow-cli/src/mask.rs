//! Reader for the ASCII domain-mask format: a header line `h=<spacing>`
//! followed by rows of whitespace-separated `0`/`1` flags (1 = interior),
//! listed top to bottom like a raster. Blank lines and `#`/`;` comments are
//! skipped. Example, a 3 x 2 plus-sign-ish domain with spacing 0.25:
//!
//! ```text
//! h=0.25
//! 0 1 0
//! 1 1 1
//! ```

use specflow_core::spectrum::{DomainMask, SpectrumError};

#[derive(Debug)]
pub enum MaskError {
    Format(String),
    Invalid(SpectrumError),
}

impl std::fmt::Display for MaskError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskError::Format(m) => write!(f, "mask format: {m}"),
            MaskError::Invalid(e) => write!(f, "mask rejected: {e}"),
        }
    }
}

impl std::error::Error for MaskError {}

pub fn parse_mask(text: &str) -> Result<DomainMask, MaskError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#') && !l.starts_with(';'));

    let header = lines
        .next()
        .ok_or_else(|| MaskError::Format("empty file".into()))?;
    let h: f64 = header
        .strip_prefix("h=")
        .ok_or_else(|| MaskError::Format(format!("first line must be h=<spacing>, got {header:?}")))?
        .trim()
        .parse()
        .map_err(|_| MaskError::Format(format!("unreadable spacing in {header:?}")))?;

    let mut rows: Vec<Vec<bool>> = Vec::new();
    for line in lines {
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            match token {
                "0" => row.push(false),
                "1" => row.push(true),
                other => {
                    return Err(MaskError::Format(format!(
                        "row {}: flags must be 0 or 1, got {other:?}",
                        rows.len() + 1
                    )))
                }
            }
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(MaskError::Format(format!(
                    "row {} has {} columns, expected {}",
                    rows.len() + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MaskError::Format("no grid rows after the header".into()));
    }

    let nx = rows[0].len();
    let ny = rows.len();
    // File rows run top to bottom; the grid's row 0 is the bottom.
    let mut inside = Vec::with_capacity(nx * ny);
    for row in rows.iter().rev() {
        inside.extend_from_slice(row);
    }
    DomainMask::from_grid(h, nx, ny, inside).map_err(MaskError::Invalid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_small_mask() {
        let text = "# plus domain\nh=0.25\n0 1 0\n1 1 1\n";
        let mask = parse_mask(text).unwrap();
        assert_eq!(mask.interior_count(), 4);
        assert!(mask.is_inside(0, 0)); // bottom row is the file's last line
        assert!(!mask.is_inside(0, 1));
        assert!(mask.is_inside(1, 1));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(parse_mask(""), Err(MaskError::Format(_))));
        assert!(matches!(parse_mask("0 1\n1 1\n"), Err(MaskError::Format(_))));
        assert!(matches!(parse_mask("h=0.1\n0 1\n1\n"), Err(MaskError::Format(_))));
        assert!(matches!(parse_mask("h=0.1\n0 2\n"), Err(MaskError::Format(_))));
        assert!(matches!(parse_mask("h=0.1\n0 0\n"), Err(MaskError::Invalid(_))));
        assert!(matches!(parse_mask("h=-1\n1 1\n"), Err(MaskError::Invalid(_))));
    }
}

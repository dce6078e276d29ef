//! The JSON summary every run persists. The schema is flat and stable:
//!
//! ```json
//! {
//!   "experiment": "...",
//!   "passed": true,
//!   "resolved_config": { "key": "value", ... },
//!   "checks": [ { "name": "...", "passed": true, "value": x, "tolerance": y } ],
//!   "artifacts": [ "trace.csv", ... ]
//! }
//! ```
//!
//! Serialized by hand so float formatting (17 significant digits) and key
//! order are bit-stable across runs.

use crate::csvio::fmt_f64;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One built-in invariant check: the measured value and the tolerance it
/// was held to. What the tolerance bounds (an absolute difference, a
/// relative drift, a window half-width) is named by the check itself.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// Pass iff `|value - target| <= tolerance`.
    pub fn near(name: &str, value: f64, target: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            passed: (value - target).abs() <= tolerance && value.is_finite(),
            value,
            tolerance,
        }
    }

    /// Pass iff `value <= bound` (and finite).
    pub fn at_most(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            passed: value <= bound && value.is_finite(),
            value,
            tolerance: bound,
        }
    }

    /// Pass iff `value >= bound` (and finite).
    pub fn at_least(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            passed: value >= bound && value.is_finite(),
            value,
            tolerance: bound,
        }
    }

    /// A boolean condition; `value` carries 1.0 / 0.0.
    pub fn holds(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            tolerance: 0.0,
        }
    }
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// Render the summary document.
pub fn summary_json(
    experiment: &str,
    resolved_config: &BTreeMap<String, String>,
    checks: &[Check],
    artifacts: &[String],
) -> String {
    let passed = checks.iter().all(|c| c.passed);
    let mut s = String::with_capacity(1024);
    s.push_str("{\n");
    let _ = writeln!(s, "  \"experiment\": \"{}\",", json_escape(experiment));
    let _ = writeln!(s, "  \"passed\": {passed},");

    s.push_str("  \"resolved_config\": {\n");
    let last = resolved_config.len().saturating_sub(1);
    for (i, (k, v)) in resolved_config.iter().enumerate() {
        let comma = if i == last { "" } else { "," };
        let _ = writeln!(s, "    \"{}\": \"{}\"{comma}", json_escape(k), json_escape(v));
    }
    s.push_str("  },\n");

    s.push_str("  \"checks\": [\n");
    for (i, c) in checks.iter().enumerate() {
        let comma = if i + 1 == checks.len() { "" } else { "," };
        let _ = writeln!(
            s,
            "    {{ \"name\": \"{}\", \"passed\": {}, \"value\": {}, \"tolerance\": {} }}{comma}",
            json_escape(&c.name),
            c.passed,
            fmt_f64(c.value),
            fmt_f64(c.tolerance)
        );
    }
    s.push_str("  ],\n");

    s.push_str("  \"artifacts\": [\n");
    for (i, a) in artifacts.iter().enumerate() {
        let comma = if i + 1 == artifacts.len() { "" } else { "," };
        let _ = writeln!(s, "    \"{}\"{comma}", json_escape(a));
    }
    s.push_str("  ]\n}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_is_wellformed_and_ordered() {
        let mut cfg = BTreeMap::new();
        cfg.insert("dt".to_string(), "1.0e-4".to_string());
        cfg.insert("name".to_string(), "demo \"quoted\"".to_string());
        let checks = vec![
            Check::near("close", 1.0, 1.0, 1e-9),
            Check::at_most("drift", 2.0, 1.0),
        ];
        let json = summary_json("demo", &cfg, &checks, &["trace.csv".into()]);
        assert!(json.contains("\"passed\": false"));
        assert!(json.contains("\\\"quoted\\\""));
        assert!(json.contains("\"value\": 2.0000000000000000e0"));
        // Balanced braces and brackets, no trailing commas before closers.
        assert_eq!(json.matches('{').count(), json.matches('}').count());
        assert!(!json.contains(",\n  ]"));
        assert!(!json.contains(",\n  }"));
    }

    #[test]
    fn check_constructors() {
        assert!(Check::near("a", 1.05, 1.0, 0.1).passed);
        assert!(!Check::near("a", f64::NAN, 1.0, 0.1).passed);
        assert!(Check::at_most("b", -5.0, 0.0).passed);
        assert!(Check::at_least("c", 3.0, 0.0).passed);
        assert!(!Check::holds("d", false).passed);
    }
}

//! INI-style experiment configs: `[section]` headers are cosmetic (the key
//! namespace is flat), `#` and `;` start comments, and each entry is a
//! `key = value` pair split on the first `=`. Every parameter an experiment
//! understands is declared in its registry entry; anything else is rejected,
//! and every defaulted value is echoed back into the resolved table so the
//! persisted config is complete.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

/// Scalar kinds a parameter can declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    F64,
    U64,
    Usize,
    Bool,
    Str,
    /// A string restricted to a fixed set of values.
    Enum(&'static [&'static str]),
}

impl Kind {
    fn expected(&self) -> String {
        match self {
            Kind::F64 => "a finite number".into(),
            Kind::U64 => "an unsigned integer".into(),
            Kind::Usize => "an unsigned integer".into(),
            Kind::Bool => "true or false".into(),
            Kind::Str => "a string".into(),
            Kind::Enum(allowed) => format!("one of {}", allowed.join(", ")),
        }
    }
}

/// One declared parameter: its key, kind, and default. `default: None`
/// marks the parameter required.
#[derive(Debug, Clone, Copy)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
}

/// A parsed scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    F64(f64),
    U64(u64),
    Usize(usize),
    Bool(bool),
    Str(String),
}

impl Value {
    /// Canonical text form, used when echoing the resolved config. Floats
    /// are serialized with 17 significant digits like every other float
    /// this tool writes.
    pub fn echo(&self) -> String {
        match self {
            Value::F64(v) => crate::csvio::fmt_f64(*v),
            Value::U64(v) => v.to_string(),
            Value::Usize(v) => v.to_string(),
            Value::Bool(v) => v.to_string(),
            Value::Str(v) => v.clone(),
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Malformed { path: PathBuf, line: usize, text: String },
    UnknownKey { key: String },
    TypeMismatch { key: String, expected: String, found: String },
    MissingRequired { key: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => {
                write!(f, "cannot read config {}: {message}", path.display())
            }
            ConfigError::Malformed { path, line, text } => write!(
                f,
                "{}:{line}: not a `key = value` line: {text:?}",
                path.display()
            ),
            ConfigError::UnknownKey { key } => write!(f, "unknown key `{key}`"),
            ConfigError::TypeMismatch { key, expected, found } => {
                write!(f, "key `{key}` expects {expected}, got {found:?}")
            }
            ConfigError::MissingRequired { key } => {
                write!(f, "missing required key `{key}`")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Output format switches, parsed from a comma list like `csv,json,svg`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Formats {
    pub const ALL: Formats = Formats { csv: true, json: true, svg: true };

    pub fn parse(list: &str) -> Result<Formats, ConfigError> {
        let mut out = Formats { csv: false, json: false, svg: false };
        for item in list.split(',') {
            match item.trim() {
                "csv" => out.csv = true,
                "json" => out.json = true,
                "svg" => out.svg = true,
                other => {
                    return Err(ConfigError::TypeMismatch {
                        key: "formats".into(),
                        expected: "a comma list drawn from csv, json, svg".into(),
                        found: other.into(),
                    })
                }
            }
        }
        Ok(out)
    }

    pub fn echo(&self) -> String {
        let mut parts = Vec::new();
        if self.csv {
            parts.push("csv");
        }
        if self.json {
            parts.push("json");
        }
        if self.svg {
            parts.push("svg");
        }
        parts.join(",")
    }
}

/// A validated config: experiment name, universal fields, and the fully
/// defaulted parameter table.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub experiment: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub formats: Formats,
    params: BTreeMap<String, Value>,
}

impl ResolvedConfig {
    pub fn f64(&self, key: &str) -> f64 {
        match self.params.get(key) {
            Some(Value::F64(v)) => *v,
            other => panic!("param {key} is not an f64: {other:?}"),
        }
    }

    pub fn u64(&self, key: &str) -> u64 {
        match self.params.get(key) {
            Some(Value::U64(v)) => *v,
            other => panic!("param {key} is not a u64: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        match self.params.get(key) {
            Some(Value::Usize(v)) => *v,
            other => panic!("param {key} is not a usize: {other:?}"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        match self.params.get(key) {
            Some(Value::Bool(v)) => *v,
            other => panic!("param {key} is not a bool: {other:?}"),
        }
    }

    pub fn str(&self, key: &str) -> &str {
        match self.params.get(key) {
            Some(Value::Str(v)) => v,
            other => panic!("param {key} is not a string: {other:?}"),
        }
    }

    /// The complete table echoed into the summary: every parameter plus the
    /// universal fields, defaults included.
    pub fn echo_table(&self) -> BTreeMap<String, String> {
        let mut table: BTreeMap<String, String> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), v.echo()))
            .collect();
        table.insert("name".into(), self.experiment.clone());
        table.insert("seed".into(), self.seed.to_string());
        table.insert("out_dir".into(), self.out_dir.display().to_string());
        table.insert("formats".into(), self.formats.echo());
        table
    }
}

/// Overrides carried in from the command line; each one replaces the file's
/// value before defaults are applied.
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub out: Option<PathBuf>,
    pub formats: Option<String>,
    pub seed: Option<u64>,
}

fn parse_u64(text: &str) -> Option<u64> {
    let clean = text.replace('_', "");
    if let Some(hex) = clean.strip_prefix("0x").or_else(|| clean.strip_prefix("0X")) {
        u64::from_str_radix(hex, 16).ok()
    } else {
        clean.parse().ok()
    }
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value, ConfigError> {
    let mismatch = || ConfigError::TypeMismatch {
        key: key.into(),
        expected: kind.expected(),
        found: raw.into(),
    };
    match kind {
        Kind::F64 => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::F64)
            .ok_or_else(mismatch),
        Kind::U64 => parse_u64(raw).map(Value::U64).ok_or_else(mismatch),
        Kind::Usize => parse_u64(raw)
            .and_then(|v| usize::try_from(v).ok())
            .map(Value::Usize)
            .ok_or_else(mismatch),
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(mismatch()),
        },
        Kind::Str => Ok(Value::Str(raw.into())),
        Kind::Enum(allowed) => {
            if allowed.contains(&raw) {
                Ok(Value::Str(raw.into()))
            } else {
                Err(mismatch())
            }
        }
    }
}

/// Raw `key = value` pairs from an INI file, in file order.
fn read_pairs(path: &PathBuf) -> Result<Vec<(String, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let mut pairs = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if trimmed.starts_with('[') && trimmed.ends_with(']') {
            continue; // sections organize the file; the key namespace is flat
        }
        match trimmed.split_once('=') {
            Some((key, value)) => pairs.push((key.trim().into(), value.trim().into())),
            None => {
                return Err(ConfigError::Malformed {
                    path: path.clone(),
                    line: line_no + 1,
                    text: trimmed.into(),
                })
            }
        }
    }
    Ok(pairs)
}

/// Parse and validate a config file against an experiment's parameter
/// registry, applying command-line overrides and filling defaults.
pub fn parse_config(
    path: &PathBuf,
    experiment: &str,
    specs: &[ParamSpec],
    default_seed: u64,
    overrides: &CliOverrides,
) -> Result<ResolvedConfig, ConfigError> {
    let pairs = read_pairs(path)?;

    let mut params: BTreeMap<String, Value> = BTreeMap::new();
    let mut seed = default_seed;
    let mut out_dir = PathBuf::from("out");
    let mut formats = Formats::ALL;

    for (key, raw) in &pairs {
        match key.as_str() {
            "name" => {
                if raw != experiment {
                    return Err(ConfigError::TypeMismatch {
                        key: "name".into(),
                        expected: format!("the invoked experiment `{experiment}`"),
                        found: raw.clone(),
                    });
                }
            }
            "seed" => {
                seed = parse_u64(raw).ok_or_else(|| ConfigError::TypeMismatch {
                    key: "seed".into(),
                    expected: "an unsigned 64-bit integer".into(),
                    found: raw.clone(),
                })?;
            }
            "out_dir" => out_dir = PathBuf::from(raw),
            "formats" => formats = Formats::parse(raw)?,
            _ => {
                let spec = specs
                    .iter()
                    .find(|s| s.key == key.as_str())
                    .ok_or_else(|| ConfigError::UnknownKey { key: key.clone() })?;
                params.insert(key.clone(), parse_value(key, spec.kind, raw)?);
            }
        }
    }

    for spec in specs {
        if params.contains_key(spec.key) {
            continue;
        }
        match spec.default {
            Some(raw) => {
                let v = parse_value(spec.key, spec.kind, raw)
                    .expect("registry default must parse under its own kind");
                params.insert(spec.key.into(), v);
            }
            None => return Err(ConfigError::MissingRequired { key: spec.key.into() }),
        }
    }

    if let Some(out) = &overrides.out {
        out_dir = out.clone();
    }
    if let Some(list) = &overrides.formats {
        formats = Formats::parse(list)?;
    }
    if let Some(s) = overrides.seed {
        seed = s;
    }

    Ok(ResolvedConfig {
        experiment: experiment.into(),
        seed,
        out_dir,
        formats,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn specs() -> Vec<ParamSpec> {
        vec![
            ParamSpec { key: "dt", kind: Kind::F64, default: Some("1e-4") },
            ParamSpec { key: "n", kind: Kind::Usize, default: Some("512") },
            ParamSpec {
                key: "law",
                kind: Kind::Enum(&["shortening", "area-preserving"]),
                default: Some("area-preserving"),
            },
            ParamSpec { key: "path", kind: Kind::Str, default: None },
        ]
    }

    fn write_temp(content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "specflow-config-test-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cfg.ini");
        std::fs::write(&path, content).unwrap();
        path
    }

    #[test]
    fn defaults_fill_and_echo() {
        let path = write_temp("[run]\npath = a.csv\nseed = 0x10\n");
        let cfg = parse_config(&path, "demo", &specs(), 7, &CliOverrides::default()).unwrap();
        assert_eq!(cfg.f64("dt"), 1e-4);
        assert_eq!(cfg.usize("n"), 512);
        assert_eq!(cfg.str("law"), "area-preserving");
        assert_eq!(cfg.seed, 16);
        let table = cfg.echo_table();
        assert_eq!(table["dt"], "1.0000000000000000e-4");
        assert_eq!(table["n"], "512");
        assert_eq!(table["name"], "demo");
    }

    #[test]
    fn unknown_key_is_named() {
        let path = write_temp("path = a.csv\ndtt = 1e-3\n");
        match parse_config(&path, "demo", &specs(), 0, &CliOverrides::default()) {
            Err(ConfigError::UnknownKey { key }) => assert_eq!(key, "dtt"),
            other => panic!("expected UnknownKey, got {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_and_missing_required() {
        let path = write_temp("path = a.csv\ndt = fast\n");
        match parse_config(&path, "demo", &specs(), 0, &CliOverrides::default()) {
            Err(ConfigError::TypeMismatch { key, found, .. }) => {
                assert_eq!(key, "dt");
                assert_eq!(found, "fast");
            }
            other => panic!("expected TypeMismatch, got {other:?}"),
        }
        let path = write_temp("dt = 1e-3\n");
        match parse_config(&path, "demo", &specs(), 0, &CliOverrides::default()) {
            Err(ConfigError::MissingRequired { key }) => assert_eq!(key, "path"),
            other => panic!("expected MissingRequired, got {other:?}"),
        }
    }

    #[test]
    fn enum_values_are_validated() {
        let path = write_temp("path = a.csv\nlaw = gage\n");
        match parse_config(&path, "demo", &specs(), 0, &CliOverrides::default()) {
            Err(ConfigError::TypeMismatch { key, expected, .. }) => {
                assert_eq!(key, "law");
                assert!(expected.contains("area-preserving"));
            }
            other => panic!("expected TypeMismatch, got {other:?}"),
        }
    }

    #[test]
    fn overrides_beat_file_values() {
        let path = write_temp("path = a.csv\nseed = 3\nout_dir = filed\n");
        let ov = CliOverrides {
            out: Some(PathBuf::from("beats")),
            formats: Some("csv".into()),
            seed: Some(11),
        };
        let cfg = parse_config(&path, "demo", &specs(), 0, &ov).unwrap();
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.out_dir, PathBuf::from("beats"));
        assert!(cfg.formats.csv && !cfg.formats.svg && !cfg.formats.json);
    }
}

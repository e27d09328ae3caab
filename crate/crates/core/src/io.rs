//! File formats.
//!
//! Traces are CSV with `#`-prefixed `key: value` metadata lines above a
//! header row. The first column is the independent variable and its header
//! carries a unit suffix, e.g. `t_exch_ns`.
//!
//! ```text
//! # config_hash: 3f1c…
//! # seed: 1
//! # version: 0.1.0
//! t_exch_ns,p_triplet
//! 0,0.1
//! 0.05,0.1034
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a write/read round trip is exact.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::controller::ExperimentTrace;
use crate::error::{invalid, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Unit suffixes accepted on the first column.
pub const UNIT_SUFFIXES: [&str; 6] = ["_ns", "_us", "_s", "_mhz", "_ghz", "_index"];

/// SHA-256 of the canonical TOML form, hex encoded. The output directory is
/// left out, so a run reproduced elsewhere hashes the same.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = RunConfig { out: Default::default(), ..cfg.clone() };
    hex::encode(Sha256::digest(canonical.to_toml().as_bytes()))
}

/// Suffix of a column name, if it is a known unit.
pub fn unit_of(column: &str) -> Option<&'static str> {
    UNIT_SUFFIXES.iter().copied().find(|u| column.ends_with(u))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    /// In file order.
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    /// Column-major.
    pub data: Vec<Vec<f64>>,
}

impl TraceFile {
    /// An empty table. The first column name must carry a unit suffix.
    pub fn new(columns: &[&str]) -> Result<Self> {
        let first = columns.first().ok_or_else(|| invalid("columns", "need at least one column"))?;
        if unit_of(first).is_none() {
            return Err(Error::UnitMismatch { expected: format!("one of {}", UNIT_SUFFIXES.join(" ")), found: first.to_string() });
        }
        if let Some(c) = columns.iter().find(|c| c.is_empty() || c.contains([',', '\n', '#'])) {
            return Err(invalid("columns", format!("`{c}` is not a valid column name")));
        }
        Ok(Self { metadata: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), data: vec![Vec::new(); columns.len()] })
    }

    /// Hash, seed and version of the producing run.
    pub fn with_provenance(mut self, cfg: &RunConfig, seed: u64) -> Self {
        self.set_meta("config_hash", config_hash(cfg));
        self.set_meta("seed", seed.to_string());
        self.set_meta("version", VERSION);
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<String>) {
        let value = value.into();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(kv) => kv.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(invalid("row", format!("{} values for {} columns", row.len(), self.columns.len())));
        }
        for (col, v) in self.data.iter_mut().zip(row) {
            col.push(*v);
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|i| self.data[i].as_slice())
    }

    pub fn x_label(&self) -> &str {
        &self.columns[0]
    }

    pub fn x(&self) -> &[f64] {
        &self.data[0]
    }

    /// Fails unless the first column carries `unit`, e.g. `"_ns"`.
    pub fn require_unit(&self, unit: &str) -> Result<()> {
        if self.x_label().ends_with(unit) {
            Ok(())
        } else {
            Err(Error::UnitMismatch { expected: format!("*{unit}"), found: self.x_label().to_string() })
        }
    }

    pub fn from_trace(trace: &ExperimentTrace) -> Result<Self> {
        let mut f = Self::new(&[&trace.x_label, "p_triplet"])?;
        f.set_meta("shots_per_point", trace.shots_per_point.to_string());
        f.data = vec![trace.x.clone(), trace.p_triplet.clone()];
        Ok(f)
    }

    /// Trace of column `column` against the first column.
    pub fn to_trace(&self, column: &str) -> Result<ExperimentTrace> {
        let p = self.column(column).ok_or_else(|| invalid("column", format!("no column `{column}`")))?;
        let shots = match self.meta("shots_per_point") {
            Some(s) => s.parse().map_err(|_| invalid("shots_per_point", format!("`{s}` is not a count")))?,
            None => 0,
        };
        Ok(ExperimentTrace { x_label: self.x_label().to_string(), x: self.x().to_vec(), p_triplet: p.to_vec(), shots_per_point: shots })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for i in 0..self.rows() {
            for (j, col) in self.data.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{}", col[i]);
            }
            s.push('\n');
        }
        s
    }

    /// Parses CSV text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
        let mut metadata = Vec::new();
        let mut offset = 0;
        let mut header_line = 0;
        for (i, raw) in text.split_inclusive('\n').enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest.split_once(':').ok_or_else(|| err(i + 1, format!("metadata line `{line}` is not `# key: value`")))?;
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            } else if !line.is_empty() {
                header_line = i + 1;
                break;
            }
            offset += raw.len();
        }
        if header_line == 0 {
            return Err(err(0, "no header row".into()));
        }
        let body = &text[offset..];
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(body.as_bytes());
        let columns: Vec<String> = reader.headers().map_err(|e| err(header_line, e.to_string()))?.iter().map(str::to_string).collect();
        if unit_of(&columns[0]).is_none() {
            return Err(Error::UnitMismatch { expected: format!("one of {}", UNIT_SUFFIXES.join(" ")), found: columns[0].clone() });
        }
        // The reader skips blank lines, so record k sits on the k-th non-blank line.
        let lines: Vec<usize> = body.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, _)| i + header_line).collect();
        let line_of = |k: u64| lines.get(k as usize).copied().unwrap_or(0);
        let mut data = vec![Vec::new(); columns.len()];
        for record in reader.records() {
            let record = record.map_err(|e| err(e.position().map_or(0, |p| line_of(p.record())), e.to_string()))?;
            let n = record.position().map_or(0, |p| line_of(p.record()));
            if record.iter().any(|f| f.starts_with('#')) {
                return Err(err(n, "metadata after the header row".into()));
            }
            if record.len() != columns.len() {
                return Err(err(n, format!("{} fields, header has {}", record.len(), columns.len())));
            }
            for (col, f) in data.iter_mut().zip(record.iter()) {
                col.push(f.parse().map_err(|_| err(n, format!("`{f}` is not a number")))?);
            }
        }
        Ok(Self { metadata, columns, data })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| invalid("json", e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> TraceFile {
        let mut f = TraceFile::new(&["t_exch_ns", "p_triplet"]).unwrap().with_provenance(&RunConfig::default(), 7);
        f.push_row(&[0.0, 0.1]).unwrap();
        f.push_row(&[0.05, 1.0 / 3.0]).unwrap();
        f
    }

    #[test]
    fn csv_layout() {
        let text = sample().to_csv();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# config_hash: "));
        assert_eq!(lines[1], "# seed: 7");
        assert_eq!(lines[2], format!("# version: {VERSION}"));
        assert_eq!(lines[3], "t_exch_ns,p_triplet");
        assert_eq!(lines[4], "0,0.1");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn hash_tracks_the_config() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        let c = RunConfig { out: "elsewhere".into(), ..RunConfig::default() };
        assert_eq!(config_hash(&a), config_hash(&c));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn header_needs_a_unit() {
        assert!(matches!(TraceFile::new(&["time", "p"]), Err(Error::UnitMismatch { .. })));
        assert!(matches!(TraceFile::parse("time,p\n1,2\n", "x"), Err(Error::UnitMismatch { .. })));
        let f = sample();
        assert!(f.require_unit("_ns").is_ok());
        assert!(matches!(f.require_unit("_us"), Err(Error::UnitMismatch { .. })));
    }

    #[test]
    fn malformed_rows_report_their_line() {
        let e = TraceFile::parse("# a: 1\nt_ns,p\n1,2\n3\n", "f.csv").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e}");
        let e = TraceFile::parse("t_ns,p\n1,x\n", "f.csv").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        assert!(TraceFile::parse("# only: meta\n", "f.csv").is_err());
        let e = TraceFile::parse("# a: 1\r\n\r\nt_ns,p\r\n1,2\r\n3,x\r\n", "f.csv").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }), "{e}");
    }

    #[test]
    fn trace_conversion_keeps_shots() {
        let tr = ExperimentTrace { x_label: "t_rf_ns".into(), x: vec![0.0, 1.0], p_triplet: vec![0.2, 0.4], shots_per_point: 50 };
        let f = TraceFile::parse(&TraceFile::from_trace(&tr).unwrap().to_csv(), "t").unwrap();
        assert_eq!(f.to_trace("p_triplet").unwrap(), tr);
        assert!(f.to_trace("q").is_err());
    }

    #[test]
    fn json_helper() {
        let j = to_json(&sample()).unwrap();
        let back: TraceFile = serde_json::from_str(&j).unwrap();
        assert_eq!(back, sample());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(rows in prop::collection::vec((-1e9f64..1e9, -1e-9f64..1e-9, any::<f64>().prop_filter("finite", |v| v.is_finite())), 0..40)) {
            let mut f = TraceFile::new(&["t_us", "a", "b"]).unwrap();
            f.set_meta("seed", "3");
            for (a, b, c) in &rows {
                f.push_row(&[*a, *b, *c]).unwrap();
            }
            let back = TraceFile::parse(&f.to_csv(), "p").unwrap();
            prop_assert_eq!(&back, &f);
            for (c0, c1) in back.data.iter().zip(&f.data) {
                for (x, y) in c0.iter().zip(c1) {
                    prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
                }
            }
        }
    }
}

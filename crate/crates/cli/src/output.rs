//! Output directory handling. Tables go out as CSV or JSON per the run
//! format; summaries are always JSON. Every file carries the config hash.

use serde_json::{json, Value};
use std::path::PathBuf;

use st0sim::config::{OutputFormat, RunConfig};
use st0sim::error::Result;
use st0sim::io::{config_hash, to_json, TraceFile, VERSION};

pub struct Output<'a> {
    cfg: &'a RunConfig,
    kind: &'static str,
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl<'a> Output<'a> {
    pub fn new(cfg: &'a RunConfig, kind: &'static str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out)?;
        Ok(Self { cfg, kind, dir: cfg.out.clone(), written: Vec::new() })
    }

    /// An empty table stamped with the run provenance.
    pub fn table(&self, columns: &[&str]) -> Result<TraceFile> {
        Ok(self.stamp(TraceFile::new(columns)?))
    }

    pub fn stamp(&self, mut t: TraceFile) -> TraceFile {
        t = t.with_provenance(self.cfg, self.cfg.seed);
        t.set_meta("experiment", self.kind);
        t
    }

    pub fn write_table(&mut self, name: &str, table: &TraceFile) -> Result<PathBuf> {
        let path = match self.cfg.format {
            OutputFormat::Csv => {
                let p = self.dir.join(format!("{name}.csv"));
                table.write(&p)?;
                p
            }
            OutputFormat::Json => {
                let p = self.dir.join(format!("{name}.json"));
                std::fs::write(&p, to_json(table)?)?;
                p
            }
        };
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_summary(&mut self, name: &str, body: Value) -> Result<PathBuf> {
        let doc = json!({
            "experiment": self.kind,
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.seed,
            "version": VERSION,
            "results": body,
        });
        let path = self.dir.join(format!("{name}.json"));
        std::fs::write(&path, to_json(&doc)?)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn finish(self) -> Vec<PathBuf> {
        self.written
    }
}

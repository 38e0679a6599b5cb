//! File formats: cluster configs, spectra, reports and run manifests.
//!
//! Tables are comma-separated with `# key: value` header lines. Numbers are
//! written with Rust's shortest round-trip formatting, so a file read and
//! written again comes back byte for byte.

pub mod config;
pub mod manifest;
pub mod report;
pub mod spectrum_io;

pub use config::{load_cluster, ClusterConfig, ClusterSubset};
pub use manifest::{digest_bytes, digest_file, RunManifest};
pub use spectrum_io::{load_spectrum, read_spectrum, spectrum_table, write_spectrum, SpectrumFormat};

use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Comment header plus a CSV body.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}")?;
        }
        writeln!(out, "# columns: {}", self.columns.join(","))?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut table = Table::default();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once(':') {
                    let (k, v) = (k.trim(), v.trim());
                    if k == "columns" {
                        table.columns = v.split(',').map(|c| c.trim().to_string()).collect();
                    } else {
                        table.meta.push((k.into(), v.into()));
                    }
                }
            } else if !line.trim().is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(body.as_bytes());
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse { path: origin.into(), message: e.to_string() })?;
            table.rows.push(rec.iter().map(String::from).collect());
        }
        Ok(table)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub(crate) fn parse_f64(s: &str, origin: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: origin.into(),
        message: format!("row {line}: '{s}': {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip() {
        let mut t = Table::new(&["a", "b"]).meta("run_id", "abc");
        t.push(vec![fmt_f64(0.1), fmt_f64(-1e-30)]);
        let s = t.to_string().unwrap();
        let back = Table::parse(&s, "mem").unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get_meta("run_id"), Some("abc"));
    }
}

//! Reading and writing asymmetry spectra.
//!
//! Asymmetry files: `time_us, asymmetry_pct[, sigma_pct[, valid]]`.
//! Counts files: `time_us, n_forward, n_backward`, converted with α.

use super::{fmt_f64, parse_f64, Table};
use crate::asymmetry::{experimental_asymmetry, Spectrum};
use crate::{Error, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectrumFormat {
    /// Raw detector counts; α has no default.
    Counts { alpha: f64 },
    /// Pre-binned asymmetry in %, with σ either as a column or constant.
    Asymmetry { default_sigma: Option<f64> },
}

pub const ASYMMETRY_COLUMNS: [&str; 4] = ["time_us", "asymmetry_pct", "sigma_pct", "valid"];
pub const COUNTS_COLUMNS: [&str; 3] = ["time_us", "n_forward", "n_backward"];

/// Serializes a spectrum, tagging it with the producing run.
pub fn spectrum_table(s: &Spectrum, run_id: Option<&str>) -> Table {
    let mut t = Table::new(&ASYMMETRY_COLUMNS).meta("kind", "asymmetry spectrum");
    if let Some(id) = run_id {
        t = t.meta("run_id", id);
    }
    if let Some(rf) = s.rf_on {
        t = t.meta("rf_on", rf);
    }
    if let Some(f0) = s.f0_khz {
        t = t.meta("f0_khz", fmt_f64(f0));
    }
    for k in 0..s.len() {
        t.push(vec![
            fmt_f64(s.times[k]),
            fmt_f64(s.asymmetry[k]),
            fmt_f64(s.sigma[k]),
            u8::from(s.valid[k]).to_string(),
        ]);
    }
    t
}

pub fn write_spectrum(path: &Path, s: &Spectrum, run_id: Option<&str>) -> Result<()> {
    spectrum_table(s, run_id).write(path)
}

fn parse_bool(v: &str, origin: &str) -> Result<bool> {
    match v {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Parse { path: origin.into(), message: format!("expected boolean, got '{v}'") }),
    }
}

/// Parses spectrum text in the given format.
pub fn read_spectrum(text: &str, origin: &str, format: SpectrumFormat) -> Result<Spectrum> {
    let mut table = Table::parse(text, origin)?;
    // A plain header line instead of `# columns:`.
    if table.rows.first().is_some_and(|r| r.first().is_some_and(|v| v.parse::<f64>().is_err())) {
        let header = table.rows.remove(0);
        if table.columns.is_empty() {
            table.columns = header;
        }
    }
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let width = table.rows.first().map_or(0, |r| r.len());
    for (i, row) in table.rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Parse { path: origin.into(), message: format!("row {i}: expected {width} columns") });
        }
        if cols.is_empty() {
            cols = vec![Vec::with_capacity(table.rows.len()); width];
        }
        for (c, v) in row.iter().enumerate() {
            cols[c].push(parse_f64(v, origin, i)?);
        }
    }
    let times = cols.first().cloned().unwrap_or_default();
    if times.windows(2).any(|w| w[1] <= w[0]) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Parse { path: origin.into(), message: "time column is not strictly increasing".into() });
    }
    let mut spectrum = match format {
        SpectrumFormat::Counts { alpha } => {
            if width != 3 {
                return Err(Error::Parse { path: origin.into(), message: format!("counts format needs 3 columns, found {width}") });
            }
            experimental_asymmetry(&times, &cols[1], &cols[2], alpha)?
        }
        SpectrumFormat::Asymmetry { default_sigma } => {
            let sigma = match (width, default_sigma) {
                (w, _) if w >= 3 => cols[2].clone(),
                (2, Some(s)) => vec![s; times.len()],
                (0, _) => Vec::new(),
                (2, None) => {
                    return Err(Error::Parse {
                        path: origin.into(),
                        message: "no sigma column and no default sigma given".into(),
                    })
                }
                _ => return Err(Error::Parse { path: origin.into(), message: format!("unexpected column count {width}") }),
            };
            let asym = if width >= 2 { cols[1].clone() } else { Vec::new() };
            let mut s = Spectrum::new(times.clone(), asym, sigma)?;
            if width >= 4 {
                s.valid = cols[3].iter().map(|v| *v != 0.0).collect();
            }
            s
        }
    };
    if let Some(v) = table.get_meta("rf_on") {
        spectrum.rf_on = Some(parse_bool(v, origin)?);
    }
    if let Some(v) = table.get_meta("f0_khz") {
        spectrum.f0_khz = Some(parse_f64(v, origin, 0)?);
    }
    Ok(spectrum)
}

pub fn load_spectrum(path: &Path, format: SpectrumFormat) -> Result<Spectrum> {
    let text = std::fs::read_to_string(path)?;
    read_spectrum(&text, &path.display().to_string(), format)
}

/// Writes forward/backward counts in the counts format.
pub fn counts_table(times: &[f64], nf: &[f64], nb: &[f64]) -> Table {
    let mut t = Table::new(&COUNTS_COLUMNS).meta("kind", "detector counts");
    for k in 0..times.len() {
        t.push(vec![fmt_f64(times[k]), fmt_f64(nf[k]), fmt_f64(nb[k])]);
    }
    t
}

//! Tabular reports: fit results, level lists, field sweeps and transitions.

use super::{fmt_f64, Table};
use crate::analytic::{EigenLevel, LevelSweep, Transition};
use crate::dynamics::PolarizationSeries;
use crate::fit::FitReport;
use crate::model::FitParams;

/// Parameter block followed by the derived block, one `name,value,unit` row each.
pub fn fit_report_table(r: &FitReport, run_id: Option<&str>) -> Table {
    let mut t = Table::new(&["quantity", "value", "unit"])
        .meta("kind", "fit report")
        .meta("f0_khz", fmt_f64(r.f0_khz))
        .meta("evaluations", r.evaluations)
        .meta("generations", r.generations);
    if let Some(id) = run_id {
        t = t.meta("run_id", id);
    }
    let row = |name: &str, v: f64, unit: &str| vec![name.to_string(), fmt_f64(v), unit.to_string()];
    for ((name, unit), v) in FitParams::NAMES.iter().zip(FitParams::UNITS).zip(r.params.to_array()) {
        t.push(row(name, v, unit));
    }
    for (label, d) in &r.derived.bond_lengths {
        t.push(row(&format!("r_mu_{label}"), *d, "angstrom"));
    }
    t.push(row("f_c", r.derived.f_c_khz, "kHz"));
    t.push(row("E_c", r.derived.e_c_nev, "neV"));
    t.push(row("g_c", r.derived.g_c_nev, "neV"));
    t.push(row("B_y", r.derived.b_y_mt, "mT"));
    t.push(row("chi2_red", r.chi2_red, ""));
    t
}

/// Best objective per generation.
pub fn history_table(history: &[f64]) -> Table {
    let mut t = Table::new(&["generation", "chi2_red"]).meta("kind", "fit history");
    for (g, v) in history.iter().enumerate() {
        t.push(vec![g.to_string(), fmt_f64(*v)]);
    }
    t
}

pub fn levels_table(levels: &[EigenLevel], unit_name: &str) -> Table {
    let mut t = Table::new(&["level", "energy", "degeneracy"])
        .meta("kind", "energy levels")
        .meta("energy_unit", unit_name);
    for (i, l) in levels.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f64(l.energy), l.degeneracy.to_string()]);
    }
    t
}

/// One row per field value; `tracked` selects branch-followed energies.
pub fn sweep_table(sweep: &LevelSweep, tracked: bool) -> Table {
    let n = sweep.sorted.first().map_or(0, |v| v.len());
    let mut cols = vec!["field_mT".to_string()];
    cols.extend((0..n).map(|k| format!("E{k}")));
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut t = Table::new(&col_refs)
        .meta("kind", "levels versus field")
        .meta("energy_unit", "rad/us")
        .meta("ordering", if tracked { "tracked" } else { "sorted" });
    let rows = if tracked { &sweep.tracked } else { &sweep.sorted };
    for (b, e) in sweep.fields.iter().zip(rows) {
        let mut row = vec![fmt_f64(*b)];
        row.extend(e.iter().map(|v| fmt_f64(*v)));
        t.push(row);
    }
    t
}

pub fn transitions_table(table: &[Transition]) -> Table {
    let mut t = Table::new(&["from", "to", "frequency", "frequency_khz", "drive_element", "allowed", "on_resonance"])
        .meta("kind", "transitions")
        .meta("frequency_unit", "omega_D");
    for tr in table {
        t.push(vec![
            tr.from_level.to_string(),
            tr.to_level.to_string(),
            fmt_f64(tr.frequency),
            fmt_f64(tr.frequency_khz),
            fmt_f64(tr.drive_matrix_element),
            tr.allowed.to_string(),
            tr.on_resonance.to_string(),
        ]);
    }
    t
}

pub fn polarization_table(p: &PolarizationSeries, meta: &[(&str, String)]) -> Table {
    let mut t = Table::new(&["time_us", "polarization"]).meta("kind", "muon polarization");
    for (k, v) in meta {
        t = t.meta(k, v);
    }
    for (x, y) in p.times.iter().zip(&p.values) {
        t.push(vec![fmt_f64(*x), fmt_f64(*y)]);
    }
    t
}

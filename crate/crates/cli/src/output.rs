//! CSV and text renderings.

use wavefront_core::profile::{PointName, WaveProfile};
use wavefront_core::shooting::FluxTrajectory;
use wavefront_core::verify::{OracleRow, Relation};

use crate::CliError;

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(format!("csv: {e}"))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(csv_error)
}

fn point_name(p: PointName) -> &'static str {
    match p {
        PointName::Zero => "zero",
        PointName::One => "one",
        PointName::Alpha => "alpha",
        PointName::Beta => "beta",
    }
}

/// Rows `(ξ, φ, z, label)` by increasing `ξ`: the far end of the upper tail,
/// every node, then the lower tail. Landmark rows carry the point name.
pub fn profile_rows(wp: &WaveProfile) -> Vec<(f64, f64, f64, &'static str)> {
    let mut rows = Vec::new();
    let first = &wp.pieces[0];
    for &(xi, phi, z) in first.upper.tail.iter().skip(1).rev() {
        rows.push((xi, phi, z, ""));
    }
    let junctions: Vec<_> = wp.junctions.iter().map(|j| (j.xi, point_name(j.point))).collect();
    for (k, p) in wp.pieces.iter().enumerate() {
        for (i, n) in p.nodes.iter().enumerate() {
            if k > 0 && i == 0 && rows.last().is_some_and(|r: &(f64, f64, f64, &str)| r.0 == n.xi) {
                continue;
            }
            let mut label = "";
            if k == 0 && i == 0 && p.upper.xi == Some(n.xi) {
                label = "one";
            } else if k + 1 == wp.pieces.len() && i + 1 == p.nodes.len() && p.lower.xi == Some(n.xi) {
                label = "zero";
            } else if let Some(&(_, name)) = junctions.iter().find(|j| j.0 == n.xi) {
                label = name;
            }
            rows.push((n.xi, n.phi, n.z, label));
        }
    }
    let last = &wp.pieces[wp.pieces.len() - 1];
    for &(xi, phi, z) in last.lower.tail.iter().skip(1) {
        rows.push((xi, phi, z, ""));
    }
    rows
}

pub fn profile_csv(wp: &WaveProfile) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["xi", "phi", "z", "label"]).map_err(csv_error)?;
    for (xi, phi, z, label) in profile_rows(wp) {
        w.write_record([xi.to_string(), phi.to_string(), z.to_string(), label.to_string()]).map_err(csv_error)?;
    }
    finish(w)
}

pub fn trajectory_csv(t: &FluxTrajectory) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["phi", "z", "xi", "dz"]).map_err(csv_error)?;
    for n in &t.nodes {
        w.write_record([n.phi.to_string(), n.z.to_string(), n.xi.to_string(), n.dz.to_string()]).map_err(csv_error)?;
    }
    finish(w)
}

fn relation(r: Relation) -> &'static str {
    match r {
        Relation::Near => "near",
        Relation::AtLeast => "at_least",
        Relation::Above => "above",
    }
}

pub fn oracle_csv(rows: &[OracleRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["example", "quantity", "relation", "expected", "computed", "tolerance", "pass"]).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.example.clone(),
            r.quantity.clone(),
            relation(r.relation).to_string(),
            r.expected.to_string(),
            r.computed.to_string(),
            r.tolerance.to_string(),
            r.pass.to_string(),
        ])
        .map_err(csv_error)?;
    }
    finish(w)
}

pub fn oracle_text(rows: &[OracleRow]) -> Vec<u8> {
    let width = rows.iter().map(|r| r.quantity.chars().count()).max().unwrap_or(0);
    let mut s = String::new();
    for r in rows {
        let cmp = match r.relation {
            Relation::Near if r.tolerance == 0.0 => format!("{:.6e}", r.expected),
            Relation::Near => format!("{:.6e} ± {:.0e}", r.expected, r.tolerance),
            Relation::AtLeast => format!(">= {:.6e}", r.expected),
            Relation::Above => format!("> {:.6e}", r.expected),
        };
        s.push_str(&format!(
            "{} {:<6} {:<width$}  {:>14.6e}  (expect {cmp})\n",
            if r.pass { "PASS" } else { "FAIL" },
            r.example,
            r.quantity,
            r.computed,
        ));
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    s.push_str(&format!("{} rows, {} failed\n", rows.len(), failed));
    s.into_bytes()
}

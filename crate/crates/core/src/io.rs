//! CSV ledgers and snapshots, JSON reports. Floats are written with 17
//! significant digits so that write, read, write reproduces the bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::DistributionField;
use crate::integrator::{EnergyLedger, LedgerRow};
use crate::projection::MacroFields;
use crate::verify::CheckResult;

/// Round-trip exact decimal form of an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line: Some(line),
        message: format!("`{field}` is not a number"),
    })
}

fn parse_usize(field: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| Error::Parse {
        line: Some(line),
        message: format!("`{field}` is not a non-negative integer"),
    })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse {
        line: e.position().map(|p| p.line() as usize),
        message: e.to_string(),
    }
}

fn write_csv(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    // Writing to memory cannot fail.
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 fields")
}

/// Header and records with their 1-based line numbers.
fn read_csv(text: &str) -> Result<(Vec<String>, Vec<(usize, Vec<String>)>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, rows))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

const LEDGER_TAIL: [&str; 5] = ["dissipation", "p_sigma_sq", "q_sigma_sq", "gamma_work", "transport_defect"];

fn ledger_header(ledger: &EnergyLedger) -> Vec<String> {
    let mut h = vec!["step".to_string(), "t".to_string()];
    for prefix in ["l2", "sigma", "energy"] {
        h.extend(ledger.theta.iter().map(|t| format!("{prefix}({t})")));
    }
    h.extend(ledger.moment_names.iter().map(|m| format!("moment({m})")));
    h.extend(LEDGER_TAIL.iter().map(|s| s.to_string()));
    h
}

pub fn ledger_to_csv(ledger: &EnergyLedger) -> String {
    let rows = ledger.rows.iter().map(|r| {
        let mut v = vec![r.step.to_string(), fmt_f64(r.t)];
        for series in [&r.l2, &r.sigma, &r.energy, &r.moments] {
            v.extend(series.iter().map(|&x| fmt_f64(x)));
        }
        v.extend([r.dissipation, r.p_sigma_sq, r.q_sigma_sq, r.gamma_work, r.transport_defect].map(fmt_f64));
        v
    });
    write_csv(&ledger_header(ledger), rows)
}

/// Splits `name(arg)` into `(name, arg)`.
fn bracketed(col: &str) -> Option<(&str, &str)> {
    let open = col.find('(')?;
    col.strip_suffix(')').map(|c| (&c[..open], &c[open + 1..]))
}

pub fn parse_ledger(text: &str) -> Result<EnergyLedger> {
    let (header, rows) = read_csv(text)?;
    let bad = |message: String| Error::Parse { line: Some(1), message };
    if header.len() < 2 + LEDGER_TAIL.len() || header[0] != "step" || header[1] != "t" {
        return Err(bad("ledger header must start with step,t".into()));
    }
    let tail_start = header.len() - LEDGER_TAIL.len();
    if header[tail_start..] != LEDGER_TAIL {
        return Err(bad(format!("ledger header must end with {}", LEDGER_TAIL.join(","))));
    }
    let mut groups: [Vec<String>; 4] = Default::default();
    let prefixes = ["l2", "sigma", "energy", "moment"];
    let mut stage = 0;
    for col in &header[2..tail_start] {
        let (name, arg) = bracketed(col).ok_or_else(|| bad(format!("unexpected column `{col}`")))?;
        let k = prefixes.iter().position(|&p| p == name).ok_or_else(|| bad(format!("unexpected column `{col}`")))?;
        if k < stage {
            return Err(bad(format!("column `{col}` out of order")));
        }
        stage = k;
        groups[k].push(arg.to_string());
    }
    let theta: Vec<f64> = groups[0].iter().map(|t| parse_f64(t, 1)).collect::<Result<_>>()?;
    for g in &groups[1..3] {
        if *g != groups[0] {
            return Err(bad("l2, sigma and energy columns must list the same weights".into()));
        }
    }
    let nt = theta.len();
    let nm = groups[3].len();
    let mut out = EnergyLedger {
        theta,
        moment_names: groups[3].clone(),
        rows: Vec::with_capacity(rows.len()),
    };
    for (line, rec) in rows {
        if rec.len() != header.len() {
            return Err(Error::Parse {
                line: Some(line),
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let nums: Vec<f64> = rec[1..].iter().map(|f| parse_f64(f, line)).collect::<Result<_>>()?;
        let slice = |start: usize, len: usize| nums[start..start + len].to_vec();
        let tail = &nums[1 + 3 * nt + nm..];
        out.rows.push(LedgerRow {
            step: parse_usize(&rec[0], line)?,
            t: nums[0],
            l2: slice(1, nt),
            sigma: slice(1 + nt, nt),
            energy: slice(1 + 2 * nt, nt),
            moments: slice(1 + 3 * nt, nm),
            dissipation: tail[0],
            p_sigma_sq: tail[1],
            q_sigma_sq: tail[2],
            gamma_work: tail[3],
            transport_defect: tail[4],
        });
    }
    Ok(out)
}

pub fn write_ledger(path: &Path, ledger: &EnergyLedger) -> Result<()> {
    write_file(path, &ledger_to_csv(ledger))
}

pub fn read_ledger(path: &Path) -> Result<EnergyLedger> {
    parse_ledger(&read_file(path)?)
}

/// One phase-space sample of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub cell: usize,
    pub x: [f64; 2],
    pub volume: f64,
    pub node: usize,
    pub v: [f64; 3],
    pub f: f64,
}

const SNAPSHOT_HEADER: [&str; 9] = ["cell", "x1", "x2", "volume", "node", "v1", "v2", "v3", "f"];

pub fn snapshot_rows(field: &DistributionField) -> Vec<SnapshotRow> {
    let mut out = Vec::with_capacity(field.values.len());
    for c in 0..field.cells() {
        for (node, &f) in field.cell(c).iter().enumerate() {
            out.push(SnapshotRow {
                cell: c,
                x: field.mesh.centers[c],
                volume: field.mesh.volumes[c],
                node,
                v: field.grid.node(node),
                f,
            });
        }
    }
    out
}

pub fn snapshot_to_csv(rows: &[SnapshotRow]) -> String {
    let header: Vec<String> = SNAPSHOT_HEADER.iter().map(|s| s.to_string()).collect();
    write_csv(
        &header,
        rows.iter().map(|r| {
            vec![
                r.cell.to_string(),
                fmt_f64(r.x[0]),
                fmt_f64(r.x[1]),
                fmt_f64(r.volume),
                r.node.to_string(),
                fmt_f64(r.v[0]),
                fmt_f64(r.v[1]),
                fmt_f64(r.v[2]),
                fmt_f64(r.f),
            ]
        }),
    )
}

pub fn parse_snapshot(text: &str) -> Result<Vec<SnapshotRow>> {
    let (header, rows) = read_csv(text)?;
    if header != SNAPSHOT_HEADER {
        return Err(Error::Parse {
            line: Some(1),
            message: format!("snapshot header must be {}", SNAPSHOT_HEADER.join(",")),
        });
    }
    rows.into_iter()
        .map(|(line, rec)| {
            if rec.len() != SNAPSHOT_HEADER.len() {
                return Err(Error::Parse {
                    line: Some(line),
                    message: format!("expected {} fields, found {}", SNAPSHOT_HEADER.len(), rec.len()),
                });
            }
            let num = |i: usize| parse_f64(&rec[i], line);
            Ok(SnapshotRow {
                cell: parse_usize(&rec[0], line)?,
                x: [num(1)?, num(2)?],
                volume: num(3)?,
                node: parse_usize(&rec[4], line)?,
                v: [num(5)?, num(6)?, num(7)?],
                f: num(8)?,
            })
        })
        .collect()
}

/// Rebuilds a field on `template`'s mesh and grid; rows must list every
/// (cell, node) pair in order.
pub fn field_from_snapshot(rows: &[SnapshotRow], template: &DistributionField) -> Result<DistributionField> {
    let nodes = template.grid.len();
    if rows.len() != template.values.len() {
        return Err(Error::Shape {
            expected: template.values.len(),
            actual: rows.len(),
        });
    }
    for (i, r) in rows.iter().enumerate() {
        if r.cell != i / nodes || r.node != i % nodes {
            return Err(Error::Parse {
                line: Some(i + 2),
                message: format!("expected cell {} node {}", i / nodes, i % nodes),
            });
        }
    }
    DistributionField::with_values(template.mesh.clone(), template.grid.clone(), rows.iter().map(|r| r.f).collect())
}

pub fn write_snapshot(path: &Path, field: &DistributionField) -> Result<()> {
    write_file(path, &snapshot_to_csv(&snapshot_rows(field)))
}

pub fn read_snapshot(path: &Path) -> Result<Vec<SnapshotRow>> {
    parse_snapshot(&read_file(path)?)
}

pub fn macro_fields_to_csv(fields: &MacroFields) -> String {
    let header: Vec<String> = ["cell", "x1", "x2", "a", "b1", "b2", "b3", "c"].iter().map(|s| s.to_string()).collect();
    write_csv(
        &header,
        (0..fields.a.len()).map(|i| {
            let mut v = vec![i.to_string()];
            v.extend([fields.centers[i][0], fields.centers[i][1], fields.a[i]].map(fmt_f64));
            v.extend(fields.b[i].map(fmt_f64));
            v.push(fmt_f64(fields.c[i]));
            v
        }),
    )
}

/// Pretty JSON with object keys in sorted order and a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps objects in a `BTreeMap`, which sorts the keys.
    let v = serde_json::to_value(value).map_err(|e| Error::Parse {
        line: None,
        message: e.to_string(),
    })?;
    let mut s = serde_json::to_string_pretty(&v).expect("values always serialize");
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &to_sorted_json(value)?)
}

pub fn write_report(path: &Path, result: &CheckResult) -> Result<()> {
    write_json(path, result)
}

/// `name,passed,tolerance,details` per check.
pub fn summary_table(results: &[CheckResult]) -> String {
    let header: Vec<String> = ["name", "passed", "tolerance", "details"].iter().map(|s| s.to_string()).collect();
    write_csv(
        &header,
        results
            .iter()
            .map(|r| vec![r.name.clone(), r.passed.to_string(), fmt_f64(r.tolerance), r.details.clone()]),
    )
}

/// Fixed-width text table for terminals.
pub fn format_columns(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &mut header.iter().copied());
    for row in rows {
        line(&mut out, &mut row.iter().map(String::as_str));
    }
    out
}

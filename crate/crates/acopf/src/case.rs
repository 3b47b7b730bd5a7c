//! MATPOWER case files.
//!
//! Only the four matrix blocks the solver needs are read (`mpc.bus`,
//! `mpc.gen`, `mpc.branch`, `mpc.gencost`) together with `mpc.baseMVA`.
//! Everything else in the file is ignored.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("missing block mpc.{0}")]
    MissingBlock(&'static str),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: bus {bus} does not exist")]
    DanglingBus { line: usize, bus: i64 },
    #[error("line {line}: unsupported cost ({message})")]
    UnsupportedCost { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: i64,
    pub kind: u8,
    /// Demand and shunt values are per unit.
    pub pd: f64,
    pub qd: f64,
    pub gs: f64,
    pub bs: f64,
    pub vmin: f64,
    pub vmax: f64,
}

/// Polynomial cost `c2 p^2 + c1 p + c0` in $/h with `p` per unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenCost {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl GenCost {
    pub fn eval(&self, p: f64) -> f64 {
        (self.c2 * p + self.c1) * p + self.c0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    /// Index into [`NetworkCase::buses`].
    pub bus: usize,
    pub pmin: f64,
    pub pmax: f64,
    pub qmin: f64,
    pub qmax: f64,
    pub cost: GenCost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Indices into [`NetworkCase::buses`].
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance.
    pub b: f64,
    /// Off-nominal tap ratio, 1 when the file says 0.
    pub tap: f64,
    /// Phase shift in radians.
    pub shift: f64,
    /// Long-term rating in per unit; 0 means unlimited.
    pub rate_a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub generators: Vec<Generator>,
    pub branches: Vec<Branch>,
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

/// Finds `mpc.<name> = [ ... ];` and splits it into rows.
fn matrix_block(text: &str, name: &'static str) -> Result<Vec<Row>, CaseError> {
    let key = format!("mpc.{name}");
    let mut rows = Vec::new();
    let mut inside = false;
    let mut found = false;
    let mut current: Vec<f64> = Vec::new();
    let mut current_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut line = strip_comment(raw);
        if !inside {
            let trimmed = line.trim_start();
            let Some(rest) = trimmed.strip_prefix(key.as_str()) else {
                continue;
            };
            let rest = rest.trim_start();
            let Some(rest) = rest.strip_prefix('=') else {
                continue;
            };
            let Some(rest) = rest.trim_start().strip_prefix('[') else {
                return Err(CaseError::Malformed {
                    line: line_no,
                    message: format!("expected '[' after {key} ="),
                });
            };
            inside = true;
            found = true;
            line = rest;
        }
        let (body, closes) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        for (k, chunk) in body.split(';').enumerate() {
            if k > 0 && !current.is_empty() {
                rows.push(Row {
                    line: current_line,
                    values: std::mem::take(&mut current),
                });
            }
            for tok in chunk.split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let v: f64 = tok.parse().map_err(|_| CaseError::Malformed {
                    line: line_no,
                    message: format!("bad number {tok:?} in mpc.{name}"),
                })?;
                if current.is_empty() {
                    current_line = line_no;
                }
                current.push(v);
            }
        }
        // a newline also ends a row
        if !current.is_empty() {
            rows.push(Row {
                line: current_line,
                values: std::mem::take(&mut current),
            });
        }
        if closes {
            inside = false;
            break;
        }
    }
    if !found {
        return Err(CaseError::MissingBlock(name));
    }
    if inside {
        return Err(CaseError::Malformed {
            line: text.lines().count(),
            message: format!("mpc.{name} is not closed"),
        });
    }
    Ok(rows)
}

fn base_mva(text: &str) -> Result<f64, CaseError> {
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        let Some(rest) = line.strip_prefix("mpc.baseMVA") else {
            continue;
        };
        let value = rest
            .trim_start()
            .strip_prefix('=')
            .map(|v| v.trim().trim_end_matches(';').trim());
        return match value.and_then(|v| v.parse::<f64>().ok()) {
            Some(b) if b > 0.0 => Ok(b),
            _ => Err(CaseError::Malformed {
                line: idx + 1,
                message: "mpc.baseMVA must be a positive number".into(),
            }),
        };
    }
    Err(CaseError::MissingBlock("baseMVA"))
}

fn need(row: &Row, cols: usize, block: &str) -> Result<(), CaseError> {
    if row.values.len() < cols {
        return Err(CaseError::Malformed {
            line: row.line,
            message: format!(
                "mpc.{block} row has {} columns, expected at least {cols}",
                row.values.len()
            ),
        });
    }
    Ok(())
}

fn malformed(line: usize, message: impl Into<String>) -> CaseError {
    CaseError::Malformed {
        line,
        message: message.into(),
    }
}

/// Parses the text of a MATPOWER case file.
///
/// Powers are converted to per unit, out-of-service generators and branches
/// are dropped, tap ratio 0 becomes 1 and shift angles become radians.
/// Costs are rescaled so that they take per-unit power.
pub fn parse_matpower(text: &str) -> Result<NetworkCase, CaseError> {
    let base = base_mva(text)?;
    let bus_rows = matrix_block(text, "bus")?;
    let gen_rows = matrix_block(text, "gen")?;
    let branch_rows = matrix_block(text, "branch")?;
    let cost_rows = matrix_block(text, "gencost")?;

    let mut buses = Vec::with_capacity(bus_rows.len());
    let mut index = HashMap::new();
    for row in &bus_rows {
        need(row, 13, "bus")?;
        let v = &row.values;
        let id = v[0] as i64;
        if v[0].fract() != 0.0 {
            return Err(malformed(row.line, "bus id must be an integer"));
        }
        if index.insert(id, buses.len()).is_some() {
            return Err(malformed(row.line, format!("duplicate bus {id}")));
        }
        let (vmax, vmin) = (v[11], v[12]);
        if !(vmin <= vmax) || vmin < 0.0 {
            return Err(malformed(row.line, "need 0 <= Vmin <= Vmax"));
        }
        buses.push(Bus {
            id,
            kind: v[1] as u8,
            pd: v[2] / base,
            qd: v[3] / base,
            gs: v[4] / base,
            bs: v[5] / base,
            vmin,
            vmax,
        });
    }
    let lookup = |line: usize, raw: f64| -> Result<usize, CaseError> {
        let id = raw as i64;
        index
            .get(&id)
            .copied()
            .ok_or(CaseError::DanglingBus { line, bus: id })
    };

    if cost_rows.len() < gen_rows.len() {
        return Err(malformed(
            cost_rows.last().map_or(1, |r| r.line),
            format!(
                "mpc.gencost has {} rows for {} generators",
                cost_rows.len(),
                gen_rows.len()
            ),
        ));
    }

    let mut generators = Vec::new();
    for (row, cost_row) in gen_rows.iter().zip(&cost_rows) {
        need(row, 10, "gen")?;
        let v = &row.values;
        let bus = lookup(row.line, v[0])?;
        let cost = parse_cost(cost_row, base)?;
        if v[7] <= 0.0 {
            continue;
        }
        let (qmax, qmin, pmax, pmin) = (v[3] / base, v[4] / base, v[8] / base, v[9] / base);
        if !(pmin <= pmax) || !(qmin <= qmax) {
            return Err(malformed(row.line, "need Pmin <= Pmax and Qmin <= Qmax"));
        }
        generators.push(Generator {
            bus,
            pmin,
            pmax,
            qmin,
            qmax,
            cost,
        });
    }

    let mut branches = Vec::new();
    for row in &branch_rows {
        need(row, 11, "branch")?;
        let v = &row.values;
        let from = lookup(row.line, v[0])?;
        let to = lookup(row.line, v[1])?;
        if v[10] <= 0.0 {
            continue;
        }
        let tap = if v[8] == 0.0 { 1.0 } else { v[8] };
        if tap < 0.0 {
            return Err(malformed(row.line, "negative tap ratio"));
        }
        if v[2] == 0.0 && v[3] == 0.0 {
            return Err(malformed(row.line, "branch has zero impedance"));
        }
        branches.push(Branch {
            from,
            to,
            r: v[2],
            x: v[3],
            b: v[4],
            tap,
            shift: v[9].to_radians(),
            rate_a: v[5] / base,
        });
    }

    Ok(NetworkCase {
        base_mva: base,
        buses,
        generators,
        branches,
    })
}

fn parse_cost(row: &Row, base: f64) -> Result<GenCost, CaseError> {
    need(row, 4, "gencost")?;
    let v = &row.values;
    if v[0] != 2.0 {
        return Err(CaseError::UnsupportedCost {
            line: row.line,
            message: format!("model {} is not polynomial", v[0]),
        });
    }
    let n = v[3];
    if !(n >= 0.0 && n.fract() == 0.0) {
        return Err(malformed(row.line, "bad number of cost coefficients"));
    }
    let n = n as usize;
    if n > 3 {
        return Err(CaseError::UnsupportedCost {
            line: row.line,
            message: format!("polynomial of degree {}", n - 1),
        });
    }
    need(row, 4 + n, "gencost")?;
    let mut c = [0.0; 3];
    // coefficients are listed from the highest degree down
    for (k, slot) in (0..n).rev().enumerate() {
        c[slot] = v[4 + k];
    }
    Ok(GenCost {
        c2: c[2] * base * base,
        c1: c[1] * base,
        c0: c[0],
    })
}

pub fn read_case(path: impl AsRef<Path>) -> Result<NetworkCase, CaseError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CaseError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_matpower(&text)
}

/// Bundled nine-bus case.
pub const CASE9: &str = include_str!("../data/case9.m");
/// Two buses joined by one line, a generator at bus 1 and a load at bus 2.
pub const CASE2_TOY: &str = include_str!("../data/case2_toy.m");
/// Three-bus ring without demand.
pub const CASE3_ZERO: &str = include_str!("../data/case3_zero.m");

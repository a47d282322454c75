//! Free-format MPS and CPLEX LP export, plus an MPS reader for round trips.
//!
//! Output depends only on the model: rows and columns appear in id order,
//! every variable gets explicit bounds and numbers use Rust's shortest
//! round-trip formatting, so identical models give identical bytes.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::error::ModelError;
use crate::model::{MilpModel, RowSense, VarKind};

const OBJ_ROW: &str = "OBJ";

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Renders `model` as free-format MPS.
pub fn mps_string(model: &MilpModel) -> String {
    let mut s = String::new();
    let name = if model.name.is_empty() { "model" } else { &model.name };
    let _ = writeln!(s, "NAME {name}");
    s.push_str("ROWS\n");
    let _ = writeln!(s, " N {OBJ_ROW}");
    for row in model.rows() {
        let tag = match row.sense {
            RowSense::Le => 'L',
            RowSense::Ge => 'G',
            RowSense::Eq => 'E',
        };
        let _ = writeln!(s, " {tag} {}", row.name);
    }

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, row) in model.rows().iter().enumerate() {
        for &(j, a) in &row.coeffs {
            columns[j].push((i, a));
        }
    }
    s.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (j, var) in model.vars().iter().enumerate() {
        let is_int = var.kind == VarKind::Integer;
        if is_int != in_int {
            let tag = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(s, "    M{marker} 'MARKER' '{tag}'");
            if !is_int {
                marker += 1;
            }
            in_int = is_int;
        }
        let c = model.objective()[j];
        if c != 0.0 || columns[j].is_empty() {
            let _ = writeln!(s, "    {} {OBJ_ROW} {}", var.name, num(c));
        }
        for &(i, a) in &columns[j] {
            let _ = writeln!(s, "    {} {} {}", var.name, model.rows()[i].name, num(a));
        }
    }
    if in_int {
        let _ = writeln!(s, "    M{marker} 'MARKER' 'INTEND'");
    }

    s.push_str("RHS\n");
    if model.objective_constant() != 0.0 {
        let _ = writeln!(s, "    RHS {OBJ_ROW} {}", num(-model.objective_constant()));
    }
    for row in model.rows() {
        if row.rhs != 0.0 {
            let _ = writeln!(s, "    RHS {} {}", row.name, num(row.rhs));
        }
    }

    s.push_str("BOUNDS\n");
    for var in model.vars() {
        let (lo, hi, n) = (var.lower, var.upper, &var.name);
        if lo == hi {
            let _ = writeln!(s, " FX BND {n} {}", num(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(s, " FR BND {n}");
        } else if lo == f64::NEG_INFINITY {
            let _ = writeln!(s, " MI BND {n}");
            let _ = writeln!(s, " UP BND {n} {}", num(hi));
        } else if hi == f64::INFINITY {
            let _ = writeln!(s, " LO BND {n} {}", num(lo));
            let _ = writeln!(s, " PL BND {n}");
        } else {
            let _ = writeln!(s, " LO BND {n} {}", num(lo));
            let _ = writeln!(s, " UP BND {n} {}", num(hi));
        }
    }
    s.push_str("ENDATA\n");
    s
}

pub fn write_mps(model: &MilpModel, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, mps_string(model))
}

fn lp_term(s: &mut String, first: &mut bool, coeff: f64, name: &str) {
    let sign = if coeff < 0.0 { '-' } else { '+' };
    if *first {
        if coeff < 0.0 {
            s.push_str(" -");
        }
        *first = false;
    } else {
        let _ = write!(s, " {sign}");
    }
    let _ = write!(s, " {} {name}", num(coeff.abs()));
}

/// Renders `model` in CPLEX LP format, in the same order as the MPS output.
pub fn lp_string(model: &MilpModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "\\ {}", model.name);
    s.push_str("Minimize\n obj:");
    let mut first = true;
    for (j, &c) in model.objective().iter().enumerate() {
        if c != 0.0 {
            lp_term(&mut s, &mut first, c, &model.var(j).name);
        }
    }
    let k = model.objective_constant();
    if k != 0.0 || first {
        let sign = if k < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign} {}", num(k.abs()));
    }
    s.push_str("\nSubject To\n");
    for row in model.rows() {
        let _ = write!(s, " {}:", row.name);
        let mut first = true;
        for &(j, a) in &row.coeffs {
            lp_term(&mut s, &mut first, a, &model.var(j).name);
        }
        if first {
            s.push_str(" 0 ");
            s.push_str(&model.vars().first().map_or("x".to_string(), |v| v.name.clone()));
        }
        let op = match row.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(s, " {op} {}", num(row.rhs));
    }
    s.push_str("Bounds\n");
    for var in model.vars() {
        let (lo, hi, n) = (var.lower, var.upper, &var.name);
        if lo == hi {
            let _ = writeln!(s, " {n} = {}", num(lo));
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let _ = writeln!(s, " {n} free");
        } else {
            let l = if lo == f64::NEG_INFINITY { "-inf".to_string() } else { num(lo) };
            let h = if hi == f64::INFINITY { "+inf".to_string() } else { num(hi) };
            let _ = writeln!(s, " {l} <= {n} <= {h}");
        }
    }
    let ints: Vec<&str> = model
        .vars()
        .iter()
        .filter(|v| v.kind == VarKind::Integer)
        .map(|v| v.name.as_str())
        .collect();
    if !ints.is_empty() {
        s.push_str("General\n");
        for n in ints {
            let _ = writeln!(s, " {n}");
        }
    }
    s.push_str("End\n");
    s
}

pub fn write_lp(model: &MilpModel, path: impl AsRef<Path>) -> io::Result<()> {
    std::fs::write(path, lp_string(model))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MpsError> {
    tok.parse().map_err(|_| MpsError::Parse {
        line,
        message: format!("bad number `{tok}`"),
    })
}

/// Parses free-format MPS (the subset produced by [`write_mps`] plus the
/// common bound types). The first `N` row is the objective.
pub fn parse_mps(text: &str) -> Result<MilpModel, MpsError> {
    struct RowDef {
        name: String,
        sense: RowSense,
        coeffs: Vec<(usize, f64)>,
        rhs: f64,
    }
    let mut name = String::new();
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut rows: Vec<RowDef> = Vec::new();
    let mut row_index: HashMap<String, Option<usize>> = HashMap::new();
    let mut vars: Vec<(String, VarKind, f64, f64, bool)> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut objective: Vec<f64> = Vec::new();
    let mut constant = 0.0;
    let mut integer = false;

    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |message: String| MpsError::Parse { line, message };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1).unwrap_or(&"").to_string();
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                other => return Err(err(format!("unknown section `{other}`"))),
            };
            continue;
        }
        match section {
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(err("expected `<type> <name>`".into()));
                }
                let sense = match toks[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(toks[1].to_string());
                        }
                        row_index.insert(toks[1].to_string(), None);
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    t => return Err(err(format!("unknown row type `{t}`"))),
                };
                row_index.insert(toks[1].to_string(), Some(rows.len()));
                rows.push(RowDef {
                    name: toks[1].to_string(),
                    sense,
                    coeffs: Vec::new(),
                    rhs: 0.0,
                });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1].trim_matches('\'') == "MARKER" {
                    match toks[2].trim_matches('\'') {
                        "INTORG" => integer = true,
                        "INTEND" => integer = false,
                        m => return Err(err(format!("unknown marker `{m}`"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(err("expected `<col> <row> <value> [<row> <value>]`".into()));
                }
                let j = match var_index.get(toks[0]) {
                    Some(&j) => j,
                    None => {
                        let kind = if integer { VarKind::Integer } else { VarKind::Continuous };
                        var_index.insert(toks[0].to_string(), vars.len());
                        vars.push((toks[0].to_string(), kind, 0.0, f64::INFINITY, false));
                        objective.push(0.0);
                        vars.len() - 1
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let v = parse_num(pair[1], line)?;
                    match row_index.get(pair[0]) {
                        Some(None) => {
                            if obj_row.as_deref() == Some(pair[0]) {
                                objective[j] += v;
                            }
                        }
                        Some(Some(i)) => rows[*i].coeffs.push((j, v)),
                        None => return Err(err(format!("unknown row `{}`", pair[0]))),
                    }
                }
            }
            Section::Rhs => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                for pair in pairs.chunks(2) {
                    if pair.len() != 2 {
                        return Err(err("dangling RHS entry".into()));
                    }
                    let v = parse_num(pair[1], line)?;
                    match row_index.get(pair[0]) {
                        Some(None) => {
                            if obj_row.as_deref() == Some(pair[0]) {
                                constant = -v;
                            }
                        }
                        Some(Some(i)) => rows[*i].rhs = v,
                        None => return Err(err(format!("unknown row `{}`", pair[0]))),
                    }
                }
            }
            Section::Ranges => return Err(err("RANGES are not supported".into())),
            Section::Bounds => {
                if toks.len() < 3 {
                    return Err(err("expected `<type> <set> <col> [<value>]`".into()));
                }
                let j = *var_index
                    .get(toks[2])
                    .ok_or_else(|| err(format!("unknown column `{}`", toks[2])))?;
                let value = match toks.get(3) {
                    Some(t) => Some(parse_num(t, line)?),
                    None => None,
                };
                let need = |v: Option<f64>| v.ok_or_else(|| err(format!("bound `{}` needs a value", toks[0])));
                let var = &mut vars[j];
                match toks[0] {
                    "UP" => {
                        let v = need(value)?;
                        if v < 0.0 && var.2 == 0.0 && !var.4 {
                            var.2 = f64::NEG_INFINITY;
                        }
                        var.3 = v;
                    }
                    "LO" => {
                        var.2 = need(value)?;
                        var.4 = true;
                    }
                    "FX" => {
                        let v = need(value)?;
                        var.2 = v;
                        var.3 = v;
                        var.4 = true;
                    }
                    "FR" => {
                        var.2 = f64::NEG_INFINITY;
                        var.3 = f64::INFINITY;
                        var.4 = true;
                    }
                    "MI" => {
                        var.2 = f64::NEG_INFINITY;
                        var.4 = true;
                    }
                    "PL" => var.3 = f64::INFINITY,
                    "BV" => {
                        var.1 = VarKind::Integer;
                        var.2 = 0.0;
                        var.3 = 1.0;
                        var.4 = true;
                    }
                    "LI" => {
                        var.1 = VarKind::Integer;
                        var.2 = need(value)?;
                        var.4 = true;
                    }
                    "UI" => {
                        var.1 = VarKind::Integer;
                        var.3 = need(value)?;
                    }
                    t => return Err(err(format!("unknown bound type `{t}`"))),
                }
            }
            Section::None => return Err(err("data outside of a section".into())),
        }
    }

    let mut model = MilpModel::new(name);
    for (j, (n, kind, lo, hi, _)) in vars.into_iter().enumerate() {
        model.add_var(n, kind, lo, hi)?;
        model.set_objective(j, objective[j]);
    }
    model.set_objective_constant(constant);
    for r in rows {
        model.add_row(r.name, r.coeffs, r.sense, r.rhs)?;
    }
    Ok(model)
}

pub fn read_mps(path: impl AsRef<Path>) -> Result<MilpModel, MpsError> {
    parse_mps(&std::fs::read_to_string(path)?)
}

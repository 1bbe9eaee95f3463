//! Free-format MPS export and import.
//!
//! Row names are the constraint tags; a repeated tag gets a `#n` suffix
//! that the reader strips again. The objective constant is written as
//! the negated right-hand side of the cost row.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::instance::TerminalId;
use crate::milp::{CostComponent, Integrality, MilpModel, Sense, Subject, VarFamily};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

const COST_ROW: &str = "COST";

fn num(v: f64) -> String {
    format!("{v}")
}

pub fn write_mps(m: &MilpModel) -> String {
    let mut out = String::new();
    let mut row_names = Vec::with_capacity(m.constraints.len());
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for c in &m.constraints {
        let n = seen.entry(c.tag.as_str()).or_insert(0);
        row_names.push(if *n == 0 || c.tag.is_empty() {
            if c.tag.is_empty() { format!("r#{}", row_names.len()) } else { c.tag.clone() }
        } else {
            format!("{}#{}", c.tag, n)
        });
        *n += 1;
    }

    writeln!(out, "NAME railplan").unwrap();
    writeln!(out, "ROWS").unwrap();
    writeln!(out, " N {COST_ROW}").unwrap();
    for (c, name) in m.constraints.iter().zip(&row_names) {
        let s = match c.sense {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        writeln!(out, " {s} {name}").unwrap();
    }

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m.num_vars()];
    for (r, c) in m.constraints.iter().enumerate() {
        for &(j, a) in &c.terms {
            cols[j].push((r, a));
        }
    }
    let cost = m.cost_vector();
    writeln!(out, "COLUMNS").unwrap();
    let mut in_int = false;
    let mut marker = 0;
    for v in &m.variables {
        let int = v.integrality != Integrality::Continuous;
        if int != in_int {
            let kind = if int { "INTORG" } else { "INTEND" };
            writeln!(out, " MARKER{marker} 'MARKER' '{kind}'").unwrap();
            marker += 1;
            in_int = int;
        }
        if cost[v.id] != 0.0 {
            writeln!(out, " {} {COST_ROW} {}", v.name, num(cost[v.id])).unwrap();
        }
        for &(r, a) in &cols[v.id] {
            writeln!(out, " {} {} {}", v.name, row_names[r], num(a)).unwrap();
        }
        if cost[v.id] == 0.0 && cols[v.id].is_empty() {
            // keep the column declared
            writeln!(out, " {} {COST_ROW} 0", v.name).unwrap();
        }
    }
    if in_int {
        writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'").unwrap();
    }

    writeln!(out, "RHS").unwrap();
    if m.offset != 0.0 {
        writeln!(out, " RHS {COST_ROW} {}", num(-m.offset)).unwrap();
    }
    for (c, name) in m.constraints.iter().zip(&row_names) {
        if c.rhs != 0.0 {
            writeln!(out, " RHS {name} {}", num(c.rhs)).unwrap();
        }
    }
    writeln!(out, "RANGES").unwrap();

    writeln!(out, "BOUNDS").unwrap();
    for v in &m.variables {
        let n = &v.name;
        if v.integrality == Integrality::Binary && v.lower == 0.0 && v.upper == 1.0 {
            writeln!(out, " BV BND {n}").unwrap();
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => writeln!(out, " FR BND {n}").unwrap(),
            (false, true) => {
                writeln!(out, " MI BND {n}").unwrap();
                writeln!(out, " UP BND {n} {}", num(v.upper)).unwrap();
            }
            (true, lo_up) => {
                // UP with a negative value implies a zero lower bound in some
                // readers, so LO always comes first
                writeln!(out, " LO BND {n} {}", num(v.lower)).unwrap();
                if lo_up {
                    writeln!(out, " UP BND {n} {}", num(v.upper)).unwrap();
                } else {
                    writeln!(out, " PL BND {n}").unwrap();
                }
            }
        }
    }
    writeln!(out, "ENDATA").unwrap();
    out
}

pub fn export_mps(m: &MilpModel, path: &Path) -> Result<(), MpsError> {
    std::fs::write(path, write_mps(m))?;
    Ok(())
}

/// Family and subject recovered from the variable naming convention.
fn classify(name: &str) -> (VarFamily, Subject) {
    fn arc(rest: &str) -> Option<Subject> {
        rest.parse().ok().map(Subject::Arc)
    }
    fn terminal(rest: &str) -> Option<Subject> {
        rest.parse().ok().map(|k| Subject::Terminal(TerminalId(k)))
    }
    fn terminal_day(rest: &str) -> Option<Subject> {
        let (k, d) = rest.split_once("_d")?;
        Some(Subject::TerminalDay(TerminalId(k.parse().ok()?), d.parse().ok()?))
    }
    let parsed = [
        ("x_a", VarFamily::X, arc as fn(&str) -> Option<Subject>),
        ("yso_a", VarFamily::YSo, arc),
        ("ypu_a", VarFamily::YPu, arc),
        ("u_a", VarFamily::U, arc),
        ("z1_k", VarFamily::Z1, terminal),
        ("z2_k", VarFamily::Z2, terminal_day),
        ("w1_k", VarFamily::W1, terminal),
        ("w2_k", VarFamily::W2, terminal_day),
    ]
    .into_iter()
    .find_map(|(p, fam, f)| name.strip_prefix(p).and_then(f).map(|s| (fam, s)));
    parsed.unwrap_or((VarFamily::Other, Subject::None))
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

struct Col {
    name: String,
    int: bool,
    lower: Option<f64>,
    upper: Option<f64>,
    binary: bool,
    free_lower: bool,
}

pub fn read_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut section = Section::None;
    let mut rows: Vec<(String, Option<Sense>)> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut cols: Vec<Col> = Vec::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs: HashMap<usize, f64> = HashMap::new();
    let mut ranges: HashMap<usize, f64> = HashMap::new();
    let mut in_int = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| MpsError::Parse { line, message };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            section = match f[0] {
                "NAME" => Section::None,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => break,
                s => return Err(err(format!("unknown section {s}"))),
            };
            continue;
        }
        let value = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number {s:?}")));
        let row_of = |name: &str| row_index.get(name).copied().ok_or_else(|| err(format!("unknown row {name}")));
        match section {
            Section::None => return Err(err("data outside a section".into())),
            Section::Rows => {
                if f.len() != 2 {
                    return Err(err("expected sense and name".into()));
                }
                let sense = match f[0] {
                    "N" => None,
                    "L" => Some(Sense::Le),
                    "E" => Some(Sense::Eq),
                    "G" => Some(Sense::Ge),
                    s => return Err(err(format!("unknown row type {s}"))),
                };
                row_index.insert(f[1].to_string(), rows.len());
                rows.push((f[1].to_string(), sense));
            }
            Section::Columns => {
                if f.len() >= 3 && f[1] == "'MARKER'" {
                    in_int = f[2] == "'INTORG'";
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(err("expected column, row, value".into()));
                }
                let j = match col_index.get(f[0]) {
                    Some(&j) => j,
                    None => {
                        col_index.insert(f[0].to_string(), cols.len());
                        cols.push(Col {
                            name: f[0].to_string(),
                            int: in_int,
                            lower: None,
                            upper: None,
                            binary: false,
                            free_lower: false,
                        });
                        cols.len() - 1
                    }
                };
                for pair in f[1..].chunks(2) {
                    entries.push((row_of(pair[0])?, j, value(pair[1])?));
                }
            }
            Section::Rhs | Section::Ranges => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(err("expected set, row, value".into()));
                }
                for pair in f[1..].chunks(2) {
                    let r = row_of(pair[0])?;
                    let target = if section == Section::Rhs { &mut rhs } else { &mut ranges };
                    target.insert(r, value(pair[1])?);
                }
            }
            Section::Bounds => {
                if f.len() < 3 {
                    return Err(err("expected bound type, set, column".into()));
                }
                let j = *col_index.get(f[2]).ok_or_else(|| err(format!("unknown column {}", f[2])))?;
                let c = &mut cols[j];
                let v = || f.get(3).ok_or_else(|| err("missing bound value".into())).and_then(|s| value(s));
                match f[0] {
                    "LO" => c.lower = Some(v()?),
                    "UP" => c.upper = Some(v()?),
                    "FX" => {
                        let x = v()?;
                        c.lower = Some(x);
                        c.upper = Some(x);
                    }
                    "FR" => {
                        c.free_lower = true;
                        c.upper = Some(f64::INFINITY);
                    }
                    "MI" => c.free_lower = true,
                    "PL" => c.upper = Some(f64::INFINITY),
                    "BV" => c.binary = true,
                    s => return Err(err(format!("unknown bound type {s}"))),
                }
            }
        }
    }

    let mut m = MilpModel::new();
    for c in &cols {
        let (family, subject) = classify(&c.name);
        let (lower, upper, integrality) = if c.binary {
            (0.0, 1.0, Integrality::Binary)
        } else {
            let lower = if c.free_lower { f64::NEG_INFINITY } else { c.lower.unwrap_or(0.0) };
            let upper = c.upper.unwrap_or(f64::INFINITY);
            let int = if c.int { Integrality::Integer } else { Integrality::Continuous };
            (lower, upper, int)
        };
        m.add_var(c.name.clone(), family, subject, lower, upper, integrality);
    }
    let mut row_terms: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for &(r, j, a) in &entries {
        row_terms[r].push((j, a));
    }
    let strip = |name: &str| match name.rsplit_once('#') {
        Some((base, n)) if n.parse::<usize>().is_ok() => base.to_string(),
        _ => name.to_string(),
    };
    let mut objective_seen = false;
    for (r, (name, sense)) in rows.iter().enumerate() {
        let b = rhs.get(&r).copied().unwrap_or(0.0);
        let terms = std::mem::take(&mut row_terms[r]);
        let Some(sense) = *sense else {
            // later free rows are ignored, as most readers do
            if !objective_seen {
                objective_seen = true;
                for (j, a) in terms {
                    m.add_objective(j, a, CostComponent::Other);
                }
                m.offset = -b;
            }
            continue;
        };
        let tag = strip(name);
        match ranges.get(&r) {
            None => m.add_constraint(terms, sense, b, tag),
            Some(&rng) => {
                let (lo, hi) = match sense {
                    Sense::Le => (b - rng.abs(), b),
                    Sense::Ge => (b, b + rng.abs()),
                    Sense::Eq if rng >= 0.0 => (b, b + rng),
                    Sense::Eq => (b + rng, b),
                };
                m.add_constraint(terms.clone(), Sense::Ge, lo, tag.clone());
                m.add_constraint(terms, Sense::Le, hi, tag);
            }
        }
    }
    Ok(m)
}

pub fn import_mps(path: &Path) -> Result<MilpModel, MpsError> {
    read_mps(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical(m: &MilpModel) -> (Vec<(String, f64, f64, Integrality)>, Vec<(Vec<(usize, f64)>, Sense, f64, String)>, Vec<f64>, f64) {
        (
            m.variables
                .iter()
                .map(|v| (v.name.clone(), v.lower, v.upper, v.integrality))
                .collect(),
            m.constraints
                .iter()
                .map(|c| (c.terms.clone(), c.sense, c.rhs, c.tag.clone()))
                .collect(),
            m.cost_vector(),
            m.offset,
        )
    }

    #[test]
    fn round_trip_random_models() {
        for seed in 0..20 {
            let mut m = super::super::tests::random_model(seed, 8);
            m.offset = -(seed as f64) * 1.5;
            let back = read_mps(&write_mps(&m)).unwrap();
            assert_eq!(canonical(&m), canonical(&back), "seed {seed}");
        }
    }

    #[test]
    fn round_trip_network_model() {
        use crate::model::{build_base_model, ModelOptions};
        use crate::spacetime::{build_network, tests::fig1};
        let inst = fig1();
        let net = build_network(&inst);
        let m = build_base_model(&net, &inst.costs, &ModelOptions::default());
        let back = read_mps(&write_mps(&m)).unwrap();
        assert_eq!(canonical(&m), canonical(&back));
        for (a, b) in m.variables.iter().zip(&back.variables) {
            assert_eq!((a.family, a.subject), (b.family, b.subject), "{}", a.name);
        }
    }

    #[test]
    fn mixed_columns_and_duplicate_tags() {
        let mut m = MilpModel::new();
        let a = m.add_var("a", VarFamily::Other, Subject::None, f64::NEG_INFINITY, 3.0, Integrality::Continuous);
        let b = m.add_var("b", VarFamily::Other, Subject::None, -2.0, f64::INFINITY, Integrality::Integer);
        let c = m.add_var("c", VarFamily::Other, Subject::None, f64::NEG_INFINITY, f64::INFINITY, Integrality::Continuous);
        m.add_constraint(vec![(a, 1.0), (b, 1.0)], Sense::Le, 4.0, "dup");
        m.add_constraint(vec![(b, 2.0), (c, -1.0)], Sense::Ge, -1.0, "dup");
        m.add_objective(c, 1.0, CostComponent::Other);
        let back = read_mps(&write_mps(&m)).unwrap();
        assert_eq!(canonical(&m), canonical(&back));
    }

    #[test]
    fn ranged_rows_split() {
        let text = "NAME t\nROWS\n N obj\n L r\nCOLUMNS\n x obj 1 r 1\nRHS\n RHS r 5\nRANGES\n RNG r 2\nBOUNDS\n UP BND x 9\nENDATA\n";
        let m = read_mps(text).unwrap();
        assert_eq!(m.constraints.len(), 2);
        assert_eq!((m.constraints[0].sense, m.constraints[0].rhs), (Sense::Ge, 3.0));
        assert_eq!((m.constraints[1].sense, m.constraints[1].rhs), (Sense::Le, 5.0));
        assert_eq!(m.constraints[0].tag, "r");
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = read_mps("NAME t\nROWS\n Q r\n").unwrap_err();
        assert!(matches!(err, MpsError::Parse { line: 3, .. }));
    }
}

//! Solvers for [`MilpModel`]: branch-and-bound over an LP relaxation, an
//! exhaustive oracle for tiny models, and MPS export/import for external
//! tools.

mod bb;
mod enumerate;
pub mod mps;
mod simplex;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{Decomposition, Integrality, MilpModel, Sense};

pub use bb::solve_bb;
pub use enumerate::{solve_enumeration, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("no value for variable {0}")]
    MissingVariable(String),
    #[error("enumeration is limited to {cap} variables, model has {actual}")]
    CapExceeded { cap: usize, actual: usize },
    #[error("variable {0} has an unbounded range")]
    UnboundedRange(String),
    #[error("starting assignment violates: {}", .0.join(", "))]
    InfeasibleStart(Vec<String>),
    #[error("linear relaxation did not converge")]
    Numerical,
    #[error("relaxation is unbounded (variable {0} hit the artificial bound)")]
    Unbounded(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Feasible,
    Infeasible,
    BudgetExceeded,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Feasible => "feasible",
            Status::Infeasible => "infeasible",
            Status::BudgetExceeded => "budget_exceeded",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: Status,
    pub objective: Option<f64>,
    pub bounds: Bounds,
    pub values: BTreeMap<String, i64>,
    pub decomposition: Option<Decomposition>,
    pub node_count: u64,
    pub wall_time: f64,
}

impl Solution {
    pub(crate) fn infeasible(nodes: u64, wall: f64) -> Self {
        Self {
            status: Status::Infeasible,
            objective: None,
            bounds: Bounds {
                lower: None,
                upper: None,
            },
            values: BTreeMap::new(),
            decomposition: None,
            node_count: nodes,
            wall_time: wall,
        }
    }

    pub fn has_incumbent(&self) -> bool {
        self.objective.is_some()
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, name: &str) -> i64 {
        self.values.get(name).copied().unwrap_or(0)
    }

    /// Values in variable order of `m`.
    pub fn values_for(&self, m: &MilpModel) -> Result<Vec<i64>, SolverError> {
        m.variables
            .iter()
            .map(|v| {
                self.values
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| SolverError::MissingVariable(v.name.clone()))
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub(crate) fn from_values(m: &MilpModel, values: &[i64], status: Status, lower: f64, nodes: u64, wall: f64) -> Self {
        let (obj, dec) = evaluate_values(m, values);
        Self {
            status,
            objective: Some(obj),
            bounds: Bounds {
                lower: Some(lower.min(obj)),
                upper: Some(obj),
            },
            values: m.variables.iter().map(|v| (v.name.clone(), values[v.id])).collect(),
            decomposition: Some(dec),
            node_count: nodes,
            wall_time: wall,
        }
    }
}

/// Limits for [`solve_bb`].
#[derive(Clone, Debug, PartialEq)]
pub struct SolveBudget {
    pub max_seconds: f64,
    pub max_nodes: u64,
    /// Relative gap at which the search stops early.
    pub gap: f64,
}

impl Default for SolveBudget {
    fn default() -> Self {
        Self {
            max_seconds: 60.0,
            max_nodes: 2_000_000,
            gap: 1e-9,
        }
    }
}

impl SolveBudget {
    pub fn nodes(max_nodes: u64) -> Self {
        Self {
            max_seconds: f64::INFINITY,
            max_nodes,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityViolation {
    pub tag: String,
    /// Amount by which the row or bound is exceeded.
    pub excess: f64,
    pub message: String,
}

const FEAS_TOL: f64 = 1e-6;

/// Every violated constraint and bound of `values` (indexed by variable id).
pub fn check_feasibility(m: &MilpModel, values: &[i64]) -> Vec<FeasibilityViolation> {
    let x: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    let mut out = Vec::new();
    for v in &m.variables {
        let val = x[v.id];
        let excess = (v.lower - val).max(val - v.upper);
        if excess > FEAS_TOL {
            out.push(FeasibilityViolation {
                tag: v.bound_tag.clone(),
                excess,
                message: format!("{} = {} outside [{}, {}]", v.name, val, v.lower, v.upper),
            });
        }
        if v.integrality == Integrality::Binary && !(val == 0.0 || val == 1.0) {
            out.push(FeasibilityViolation {
                tag: v.bound_tag.clone(),
                excess: 1.0,
                message: format!("{} = {} is not binary", v.name, val),
            });
        }
    }
    for c in &m.constraints {
        let act = c.activity(&x);
        let excess = match c.sense {
            Sense::Le => act - c.rhs,
            Sense::Ge => c.rhs - act,
            Sense::Eq => (act - c.rhs).abs(),
        };
        if excess > FEAS_TOL {
            out.push(FeasibilityViolation {
                tag: c.tag.clone(),
                excess,
                message: format!("activity {act} {} {}", c.sense, c.rhs),
            });
        }
    }
    out
}

/// [`check_feasibility`] for a name-keyed assignment.
pub fn check_solution(m: &MilpModel, values: &BTreeMap<String, i64>) -> Result<Vec<FeasibilityViolation>, SolverError> {
    let v = named_values(m, values)?;
    Ok(check_feasibility(m, &v))
}

fn named_values(m: &MilpModel, values: &BTreeMap<String, i64>) -> Result<Vec<i64>, SolverError> {
    m.variables
        .iter()
        .map(|v| {
            values
                .get(&v.name)
                .copied()
                .ok_or_else(|| SolverError::MissingVariable(v.name.clone()))
        })
        .collect()
}

pub(crate) fn evaluate_values(m: &MilpModel, values: &[i64]) -> (f64, Decomposition) {
    let x: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    m.evaluate(&x)
}

/// Objective value and its split into ownership, deadheading, light
/// travel and work-event cost.
pub fn evaluate_objective(m: &MilpModel, values: &BTreeMap<String, i64>) -> Result<(f64, Decomposition), SolverError> {
    Ok(evaluate_values(m, &named_values(m, values)?))
}

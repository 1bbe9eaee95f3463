//! Exhaustive search over the integer box of a small model.
//!
//! Variables are assigned depth-first in a fixed order; a partial
//! assignment is abandoned only when some row cannot be satisfied by any
//! completion within the variable bounds, or when no completion can beat
//! the best objective found so far. No relaxation is solved.

use std::time::Instant;

use super::{Solution, SolverError, Status};
use crate::milp::{Integrality, MilpModel, Sense};

pub const DEFAULT_ENUMERATION_CAP: usize = 24;

struct Search<'a> {
    m: &'a MilpModel,
    order: Vec<usize>,
    lo: Vec<i64>,
    up: Vec<i64>,
    cost: Vec<f64>,
    /// rows touching each variable
    rows_of: Vec<Vec<usize>>,
    assigned: Vec<Option<i64>>,
    best: Option<(f64, Vec<i64>)>,
    visited: u64,
}

impl Search<'_> {
    fn row_possible(&self, r: usize) -> bool {
        let row = &self.m.constraints[r];
        let (mut lo, mut hi) = (0.0, 0.0);
        for &(j, a) in &row.terms {
            match self.assigned[j] {
                Some(v) => {
                    lo += a * v as f64;
                    hi += a * v as f64;
                }
                None => {
                    let (l, u) = (self.lo[j] as f64, self.up[j] as f64);
                    lo += (a * l).min(a * u);
                    hi += (a * l).max(a * u);
                }
            }
        }
        let tol = 1e-9;
        match row.sense {
            Sense::Le => lo <= row.rhs + tol,
            Sense::Ge => hi >= row.rhs - tol,
            Sense::Eq => lo <= row.rhs + tol && hi >= row.rhs - tol,
        }
    }

    fn objective_floor(&self) -> f64 {
        (0..self.lo.len())
            .map(|j| match self.assigned[j] {
                Some(v) => self.cost[j] * v as f64,
                None => (self.cost[j] * self.lo[j] as f64).min(self.cost[j] * self.up[j] as f64),
            })
            .sum()
    }

    fn dfs(&mut self, depth: usize) {
        self.visited += 1;
        if let Some((best, _)) = &self.best {
            if self.objective_floor() >= best - 1e-9 {
                return;
            }
        }
        if depth == self.order.len() {
            let vals: Vec<i64> = self.assigned.iter().map(|v| v.expect("complete")).collect();
            let obj = self.objective_floor();
            self.best = Some((obj, vals));
            return;
        }
        let j = self.order[depth];
        for v in self.lo[j]..=self.up[j] {
            self.assigned[j] = Some(v);
            if self.rows_of[j].iter().all(|&r| self.row_possible(r)) {
                self.dfs(depth + 1);
            }
        }
        self.assigned[j] = None;
    }
}

/// Proven optimum of a model with at most `cap` variables, all integer with
/// finite bounds.
pub fn solve_enumeration(m: &MilpModel, cap: usize) -> Result<Solution, SolverError> {
    let started = Instant::now();
    let n = m.num_vars();
    if n > cap {
        return Err(SolverError::CapExceeded { cap, actual: n });
    }
    let mut lo = Vec::with_capacity(n);
    let mut up = Vec::with_capacity(n);
    for v in &m.variables {
        if !v.lower.is_finite() || !v.upper.is_finite() || v.integrality == Integrality::Continuous {
            return Err(SolverError::UnboundedRange(v.name.clone()));
        }
        lo.push(v.lower.ceil() as i64);
        up.push(v.upper.floor() as i64);
    }
    let mut rows_of = vec![Vec::new(); n];
    for (r, c) in m.constraints.iter().enumerate() {
        for &(j, _) in &c.terms {
            rows_of[j].push(r);
        }
    }
    // Assign variables of short rows first so rows close early.
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    let mut rows: Vec<usize> = (0..m.constraints.len()).collect();
    rows.sort_by_key(|&r| (m.constraints[r].terms.len(), r));
    for r in rows {
        for &(j, _) in &m.constraints[r].terms {
            if !placed[j] {
                placed[j] = true;
                order.push(j);
            }
        }
    }
    order.extend((0..n).filter(|&j| !placed[j]));

    let mut s = Search {
        m,
        order,
        lo,
        up,
        cost: m.cost_vector(),
        rows_of,
        assigned: vec![None; n],
        best: None,
        visited: 0,
    };
    // rows without variables
    let empty_ok = (0..m.constraints.len())
        .filter(|&r| m.constraints[r].terms.is_empty())
        .all(|r| s.row_possible(r));
    if empty_ok && s.lo.iter().zip(&s.up).all(|(l, u)| l <= u) {
        s.dfs(0);
    }
    let wall = started.elapsed().as_secs_f64();
    Ok(match s.best {
        None => Solution::infeasible(s.visited, wall),
        Some((_, vals)) => {
            let obj = super::evaluate_values(m, &vals).0;
            Solution::from_values(m, &vals, Status::Optimal, obj, s.visited, wall)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{CostComponent, Subject, VarFamily};

    #[test]
    fn single_leg_prefers_minimum_power() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarFamily::X, Subject::None, 2.0, 3.0, Integrality::Integer);
        m.add_objective(x, 600.0, CostComponent::Deadhead);
        m.offset = -1200.0;
        let s = solve_enumeration(&m, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(s.value("x"), 2);
        assert_eq!(s.objective, Some(0.0));
    }

    #[test]
    fn cap_is_enforced() {
        let mut m = MilpModel::new();
        for j in 0..30 {
            m.add_var(format!("v{j}"), VarFamily::Other, Subject::None, 0.0, 1.0, Integrality::Binary);
        }
        assert_eq!(
            solve_enumeration(&m, DEFAULT_ENUMERATION_CAP).unwrap_err(),
            SolverError::CapExceeded { cap: 24, actual: 30 }
        );
    }

    #[test]
    fn infeasible_model() {
        let mut m = MilpModel::new();
        let x = m.add_var("x", VarFamily::Other, Subject::None, 0.0, 1.0, Integrality::Binary);
        m.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0, "r");
        assert_eq!(solve_enumeration(&m, 24).unwrap().status, Status::Infeasible);
    }
}

//! Branch-and-bound over the LP relaxation.
//!
//! The search dives depth-first, always taking the up-branch, and stores
//! the down-branch with its parent bound. When a dive ends the open node
//! with the lowest bound is resumed (ties go to the older node). Branching
//! picks the most fractional variable, ties to the lowest id.

use std::time::Instant;

use log::debug;

use super::simplex::{Lp, LpStatus, BIG};
use super::{check_feasibility, evaluate_values, Bounds, Solution, SolveBudget, SolverError, Status};
use crate::milp::{Integrality, MilpModel};

const INT_TOL: f64 = 1e-6;

struct Open {
    bound: f64,
    seq: u64,
    /// Bound changes relative to the root, applied in order.
    changes: Vec<(usize, f64, f64)>,
}

pub fn solve_bb(m: &MilpModel, budget: &SolveBudget) -> Result<Solution, SolverError> {
    let started = Instant::now();
    let n = m.num_vars();
    let is_int: Vec<bool> = m
        .variables
        .iter()
        .map(|v| v.integrality != Integrality::Continuous)
        .collect();
    let costs = m.cost_vector();
    // all feasible objective values differ by integers
    let granular = is_int.iter().all(|&b| b) && costs.iter().all(|c| c.fract() == 0.0);

    let mut incumbent: Option<(f64, Vec<i64>)> = None;
    if let Some(start) = &m.start {
        let bad = check_feasibility(m, start);
        if !bad.is_empty() {
            return Err(SolverError::InfeasibleStart(bad.into_iter().map(|v| v.tag).collect()));
        }
        incumbent = Some((evaluate_values(m, start).0, start.clone()));
    }

    let mut lp = Lp::from_model(m);
    let root_lo: Vec<f64> = lp.lo[..n].to_vec();
    let root_up: Vec<f64> = lp.up[..n].to_vec();
    let max_iter = 50 * (lp.m + lp.n) + 1000;

    // LP objectives exclude the constant offset
    let cutoff = |inc: &Option<(f64, Vec<i64>)>| -> f64 {
        match inc {
            None => f64::INFINITY,
            Some((obj, _)) => {
                let raw = obj - m.offset;
                let by_gap = raw - (budget.gap * obj.abs()).max(1e-6);
                if granular {
                    by_gap.min(raw - 1.0 + 1e-6)
                } else {
                    by_gap
                }
            }
        }
    };

    let mut open: Vec<Open> = Vec::new();
    let mut seq = 0u64;
    let mut current: Option<(Vec<(usize, f64, f64)>, f64)> = Some((Vec::new(), f64::NEG_INFINITY));
    let mut nodes = 0u64;
    let mut exhausted = false;

    loop {
        let Some((changes, parent_bound)) = current.take() else {
            // resume the best open node
            let limit = cutoff(&incumbent);
            open.retain(|o| o.bound < limit);
            let Some(best) = (0..open.len()).min_by(|&a, &b| {
                open[a]
                    .bound
                    .total_cmp(&open[b].bound)
                    .then(open[a].seq.cmp(&open[b].seq))
            }) else {
                exhausted = true;
                break;
            };
            let o = open.swap_remove(best);
            for j in 0..n {
                lp.set_bounds(j, root_lo[j], root_up[j]);
            }
            for &(j, l, u) in &o.changes {
                lp.set_bounds(j, l, u);
            }
            current = Some((o.changes, o.bound));
            continue;
        };

        if nodes >= budget.max_nodes || started.elapsed().as_secs_f64() > budget.max_seconds {
            current = Some((changes, parent_bound));
            break;
        }
        nodes += 1;

        let limit = cutoff(&incumbent);
        match lp.solve(limit, max_iter) {
            LpStatus::IterationLimit => return Err(SolverError::Numerical),
            LpStatus::Infeasible | LpStatus::Cutoff => continue,
            LpStatus::Optimal => {}
        }
        let obj = lp.objective();
        if obj >= limit {
            continue;
        }
        let x = lp.values();
        for (j, v) in m.variables.iter().enumerate() {
            if x[j].abs() >= BIG * 0.5 && (v.lower.is_infinite() || v.upper.is_infinite()) {
                return Err(SolverError::Unbounded(v.name.clone()));
            }
        }

        let mut branch: Option<(usize, f64)> = None;
        for j in 0..n {
            if !is_int[j] {
                continue;
            }
            let frac = x[j] - x[j].floor();
            let score = frac.min(1.0 - frac);
            if score > INT_TOL && branch.is_none_or(|(_, s)| score > s) {
                branch = Some((j, score));
            }
        }

        match branch {
            None => {
                let vals: Vec<i64> = x.iter().map(|v| v.round() as i64).collect();
                if !check_feasibility(m, &vals).is_empty() {
                    debug!("rounded relaxation solution fails the feasibility check; node dropped");
                    continue;
                }
                let val = evaluate_values(m, &vals).0;
                if incumbent.as_ref().is_none_or(|(best, _)| val < *best) {
                    debug!("incumbent {val} after {nodes} nodes");
                    incumbent = Some((val, vals));
                }
            }
            Some((j, _)) => {
                let (lo, up) = (lp.lo[j], lp.up[j]);
                let down = x[j].floor();
                let mut down_changes = changes.clone();
                down_changes.push((j, lo, down));
                open.push(Open {
                    bound: obj,
                    seq,
                    changes: down_changes,
                });
                seq += 1;
                let mut up_changes = changes;
                up_changes.push((j, down + 1.0, up));
                lp.set_bounds(j, down + 1.0, up);
                current = Some((up_changes, obj));
            }
        }
    }

    let wall = started.elapsed().as_secs_f64();
    let near_exact = budget.gap <= 1e-6;
    if exhausted {
        return Ok(match incumbent {
            None => Solution::infeasible(nodes, wall),
            Some((obj, vals)) => {
                let status = if near_exact { Status::Optimal } else { Status::Feasible };
                let lower = if near_exact { obj } else { obj - budget.gap * obj.abs() };
                Solution::from_values(m, &vals, status, lower, nodes, wall)
            }
        });
    }

    // budget exhausted: the lower bound is the weakest unresolved node
    let pending = current.map(|(_, b)| b).unwrap_or(f64::INFINITY);
    let raw_lower = open.iter().map(|o| o.bound).fold(pending, f64::min);
    let lower = if raw_lower.is_finite() { Some(raw_lower + m.offset) } else { None };
    Ok(match incumbent {
        Some((obj, vals)) => {
            let mut s = Solution::from_values(m, &vals, Status::BudgetExceeded, lower.unwrap_or(f64::NEG_INFINITY), nodes, wall);
            if lower.is_none() {
                s.bounds.lower = None;
            }
            s.objective = Some(obj);
            s
        }
        None => {
            let mut s = Solution::infeasible(nodes, wall);
            s.status = Status::BudgetExceeded;
            s.bounds = Bounds { lower, upper: None };
            s
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{CostComponent, Sense, Subject, VarFamily};

    fn knapsack() -> MilpModel {
        // max 5a + 4b + 3c  s.t.  2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MilpModel::new();
        let v: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|n| m.add_var(*n, VarFamily::Other, Subject::None, 0.0, 3.0, Integrality::Integer))
            .collect();
        for (j, c) in [5.0, 4.0, 3.0].iter().enumerate() {
            m.add_objective(v[j], -c, CostComponent::Other);
        }
        m.add_constraint(vec![(v[0], 2.0), (v[1], 3.0), (v[2], 1.0)], Sense::Le, 5.0, "r1");
        m.add_constraint(vec![(v[0], 4.0), (v[1], 1.0), (v[2], 2.0)], Sense::Le, 11.0, "r2");
        m.add_constraint(vec![(v[0], 3.0), (v[1], 4.0), (v[2], 2.0)], Sense::Le, 8.0, "r3");
        m
    }

    #[test]
    fn small_integer_program() {
        let s = solve_bb(&knapsack(), &SolveBudget::default()).unwrap();
        assert_eq!(s.status, Status::Optimal);
        // a = 2, c = 1 gives 13
        assert_eq!(s.objective, Some(-13.0));
        assert_eq!(s.bounds.lower, s.bounds.upper);
    }

    #[test]
    fn infeasible_bounds() {
        let mut m = MilpModel::new();
        m.add_var("x", VarFamily::Other, Subject::None, 3.0, 2.0, Integrality::Integer);
        let s = solve_bb(&m, &SolveBudget::default()).unwrap();
        assert_eq!(s.status, Status::Infeasible);
    }

    #[test]
    fn deterministic_under_node_budget() {
        let m = super::super::tests::random_model(5, 10);
        let a = solve_bb(&m, &SolveBudget::nodes(3)).unwrap();
        let b = solve_bb(&m, &SolveBudget::nodes(3)).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn warm_start_is_kept_when_optimal() {
        let mut m = knapsack();
        m.start = Some(vec![2, 0, 1]);
        let s = solve_bb(&m, &SolveBudget::default()).unwrap();
        assert_eq!(s.objective, Some(-13.0));
        m.start = Some(vec![3, 3, 3]);
        assert!(matches!(solve_bb(&m, &SolveBudget::default()), Err(SolverError::InfeasibleStart(_))));
    }
}

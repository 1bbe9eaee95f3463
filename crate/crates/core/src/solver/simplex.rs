//! Dense bounded dual simplex.
//!
//! Rows are written as `A x - r = 0` with one logical `r_i` per constraint
//! whose bounds carry the sense and right-hand side. The tableau
//! `T = B^-1 [A | -I]` and the reduced costs are kept explicitly. Starting
//! from the all-logical basis with every structural at the bound favoured by
//! its cost, the basis is dual feasible. Dual feasibility does not depend on
//! the bounds, so any later node of a search can resume from whatever basis
//! the previous node ended with. The one exception is a variable that was
//! fixed while nonbasic: the ratio test ignores it, so its reduced cost may
//! have any sign once the bounds are widened again. [`Lp::solve`] moves such
//! variables to the bound their reduced cost favours before iterating.

use crate::milp::{MilpModel, Sense};

/// Stand-in for infinite structural bounds.
pub(crate) const BIG: f64 = 1e9;
const PRIMAL_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const STALL_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum State {
    Basic,
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    /// The objective reached the cutoff; the true optimum is at least as large.
    Cutoff,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub(crate) struct Lp {
    pub m: usize,
    pub n: usize,
    ntot: usize,
    /// Original matrix `[A | -I]`, row-major.
    orig: Vec<f64>,
    c: Vec<f64>,
    pub lo: Vec<f64>,
    pub up: Vec<f64>,
    t: Vec<f64>,
    d: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    xb: Vec<f64>,
    since_refactor: usize,
    pub pivots: u64,
}

impl Lp {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let m = model.constraints.len();
        let ntot = n + m;
        let mut orig = vec![0.0; m * ntot];
        let mut lo = vec![0.0; ntot];
        let mut up = vec![0.0; ntot];
        for (i, row) in model.constraints.iter().enumerate() {
            for &(j, a) in &row.terms {
                orig[i * ntot + j] += a;
            }
            orig[i * ntot + n + i] = -1.0;
            let (l, u) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lo[n + i] = l;
            up[n + i] = u;
        }
        for (j, v) in model.variables.iter().enumerate() {
            lo[j] = v.lower.max(-BIG);
            up[j] = v.upper.min(BIG);
        }
        let mut c = model.cost_vector();
        c.resize(ntot, 0.0);
        let mut lp = Lp {
            m,
            n,
            ntot,
            orig,
            c,
            lo,
            up,
            t: Vec::new(),
            d: Vec::new(),
            basis: Vec::new(),
            state: Vec::new(),
            xb: vec![0.0; m],
            since_refactor: 0,
            pivots: 0,
        };
        lp.slack_basis();
        lp
    }

    fn slack_basis(&mut self) {
        self.basis = (self.n..self.ntot).collect();
        self.state = (0..self.ntot)
            .map(|j| {
                if j >= self.n {
                    State::Basic
                } else if self.c[j] >= 0.0 {
                    State::Lower
                } else {
                    State::Upper
                }
            })
            .collect();
        let ok = self.refactor();
        debug_assert!(ok, "slack basis is never singular");
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lo[j],
            State::Upper => self.up[j],
            State::Basic => f64::NAN,
        }
    }

    /// Rebuilds the tableau and reduced costs from the original matrix.
    /// Returns false when the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        let (m, w) = (self.m, self.ntot);
        let mut t = self.orig.clone();
        let mut order = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for &col in &self.basis {
            let mut best = None;
            let mut best_abs = 1e-11;
            for i in 0..m {
                if !used[i] && t[i * w + col].abs() > best_abs {
                    best_abs = t[i * w + col].abs();
                    best = Some(i);
                }
            }
            let Some(p) = best else { return false };
            used[p] = true;
            order[p] = col;
            pivot_rows(&mut t, w, m, p, col);
        }
        self.t = t;
        self.basis = order;
        self.d = self.c.clone();
        for i in 0..m {
            let cb = self.c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.t[i * w..(i + 1) * w];
                for (dj, &tij) in self.d.iter_mut().zip(row) {
                    *dj -= cb * tij;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
        self.since_refactor = 0;
        true
    }

    fn compute_xb(&mut self) {
        let w = self.ntot;
        let active: Vec<(usize, f64)> = (0..w)
            .filter(|&j| self.state[j] != State::Basic)
            .map(|j| (j, self.value(j)))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        for i in 0..self.m {
            let row = &self.t[i * w..(i + 1) * w];
            self.xb[i] = -active.iter().map(|&(j, v)| row[j] * v).sum::<f64>();
        }
    }

    pub fn objective(&self) -> f64 {
        let mut z = 0.0;
        for j in 0..self.ntot {
            if self.c[j] != 0.0 && self.state[j] != State::Basic {
                z += self.c[j] * self.value(j);
            }
        }
        for (i, &b) in self.basis.iter().enumerate() {
            z += self.c[b] * self.xb[i];
        }
        z
    }

    /// Structural values of the current basic solution.
    pub fn values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n).map(|j| self.value(j)).collect();
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.xb[i];
            }
        }
        x
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, up: f64) {
        self.lo[j] = lo;
        self.up[j] = up;
    }

    fn infeasibility(&self, i: usize) -> f64 {
        let b = self.basis[i];
        let x = self.xb[i];
        let tol = PRIMAL_TOL * (1.0 + x.abs().min(1e6));
        if x < self.lo[b] - tol {
            self.lo[b] - x
        } else if x > self.up[b] + tol {
            x - self.up[b]
        } else {
            0.0
        }
    }

    /// Runs dual simplex iterations until the basis is primal feasible, the
    /// problem is proven infeasible, or the objective reaches `cutoff`.
    pub fn solve(&mut self, cutoff: f64, max_iter: usize) -> LpStatus {
        let w = self.ntot;
        self.restore_dual_feasibility();
        let mut best_obj = f64::NEG_INFINITY;
        let mut stall = 0usize;
        let mut refactored_at_end = false;
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                self.slack_basis();
            }
            self.compute_xb();
            let obj = self.objective();
            if obj >= cutoff {
                return LpStatus::Cutoff;
            }
            if obj > best_obj + 1e-9 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
            }
            let bland = stall > STALL_LIMIT;

            // leaving row
            let mut r = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let inf = self.infeasibility(i);
                if inf > 0.0 {
                    if bland {
                        if r.is_none_or(|p: usize| self.basis[i] < self.basis[p]) {
                            r = Some(i);
                        }
                    } else if inf > worst {
                        worst = inf;
                        r = Some(i);
                    }
                }
            }
            let Some(r) = r else {
                if self.since_refactor > 0 && !refactored_at_end {
                    // confirm optimality on a fresh factorization
                    refactored_at_end = true;
                    if !self.refactor() {
                        self.slack_basis();
                    }
                    continue;
                }
                return LpStatus::Optimal;
            };
            let leaving = self.basis[r];
            let to_lower = self.xb[r] < self.lo[leaving];
            let s = if to_lower { 1.0 } else { -1.0 };

            // ratio test
            let row = &self.t[r * w..(r + 1) * w];
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..w {
                let st = self.state[j];
                if st == State::Basic || self.lo[j] == self.up[j] {
                    continue;
                }
                let a = row[j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let dj = match st {
                    State::Lower if a * s < 0.0 => self.d[j].max(0.0),
                    State::Upper if a * s > 0.0 => (-self.d[j]).max(0.0),
                    _ => continue,
                };
                cands.push((j, dj, a.abs()));
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }
            let q = if bland {
                let mut best = cands[0];
                for &c in &cands[1..] {
                    if c.1 / c.2 < best.1 / best.2 - 1e-12 {
                        best = c;
                    }
                }
                best.0
            } else {
                let tmax = cands
                    .iter()
                    .map(|&(_, dj, a)| (dj + DUAL_TOL) / a)
                    .fold(f64::INFINITY, f64::min);
                let mut best: Option<(usize, f64)> = None;
                for &(j, dj, a) in &cands {
                    if dj / a <= tmax && best.is_none_or(|(_, ba)| a > ba) {
                        best = Some((j, a));
                    }
                }
                best.expect("tmax admits the minimum ratio").0
            };

            self.pivot(r, q);
            self.state[leaving] = if to_lower { State::Lower } else { State::Upper };
            refactored_at_end = false;
        }
        LpStatus::IterationLimit
    }

    fn restore_dual_feasibility(&mut self) {
        for j in 0..self.ntot {
            match self.state[j] {
                State::Lower if self.d[j] < -DUAL_TOL && self.up[j].is_finite() => self.state[j] = State::Upper,
                State::Upper if self.d[j] > DUAL_TOL && self.lo[j].is_finite() => self.state[j] = State::Lower,
                _ => {}
            }
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.ntot;
        pivot_rows(&mut self.t, w, self.m, r, q);
        let dq = self.d[q];
        if dq != 0.0 {
            let row = &self.t[r * w..(r + 1) * w];
            for (dj, &tj) in self.d.iter_mut().zip(row) {
                *dj -= dq * tj;
            }
        }
        self.d[q] = 0.0;
        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.since_refactor += 1;
        self.pivots += 1;
    }
}

/// Gauss-Jordan pivot of a row-major `m x w` matrix on `(r, q)`.
fn pivot_rows(t: &mut [f64], w: usize, m: usize, r: usize, q: usize) {
    let p = t[r * w + q];
    let (before, rest) = t.split_at_mut(r * w);
    let (prow, after) = rest.split_at_mut(w);
    for v in prow.iter_mut() {
        *v /= p;
    }
    prow[q] = 1.0;
    for chunk in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
        let f = chunk[q];
        if f != 0.0 {
            for (v, &pv) in chunk.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            chunk[q] = 0.0;
        }
    }
    let _ = m;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Integrality, Subject, VarFamily};

    fn var(m: &mut MilpModel, name: &str, lo: f64, up: f64) -> usize {
        m.add_var(name, VarFamily::Other, Subject::None, lo, up, Integrality::Continuous)
    }

    #[test]
    fn small_lp() {
        // max x + y  s.t.  x + 2y <= 4, 3x + y <= 6  ->  x = 1.6, y = 1.2
        let mut m = MilpModel::new();
        let x = var(&mut m, "x", 0.0, 10.0);
        let y = var(&mut m, "y", 0.0, 10.0);
        m.add_constraint(vec![(x, 1.0), (y, 2.0)], Sense::Le, 4.0, "a");
        m.add_constraint(vec![(x, 3.0), (y, 1.0)], Sense::Le, 6.0, "b");
        m.add_objective(x, -1.0, crate::milp::CostComponent::Other);
        m.add_objective(y, -1.0, crate::milp::CostComponent::Other);
        let mut lp = Lp::from_model(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        let v = lp.values();
        assert!((v[0] - 1.6).abs() < 1e-9 && (v[1] - 1.2).abs() < 1e-9);
        assert!((lp.objective() + 2.8).abs() < 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min 2x + 3y  s.t.  x + y = 5, x >= 1, y >= 2, x <= 2.5
        let mut m = MilpModel::new();
        let x = var(&mut m, "x", 0.0, 2.5);
        let y = var(&mut m, "y", 0.0, 100.0);
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Eq, 5.0, "sum");
        m.add_constraint(vec![(x, 1.0)], Sense::Ge, 1.0, "xmin");
        m.add_constraint(vec![(y, 1.0)], Sense::Ge, 2.0, "ymin");
        m.add_objective(x, 2.0, crate::milp::CostComponent::Other);
        m.add_objective(y, 3.0, crate::milp::CostComponent::Other);
        let mut lp = Lp::from_model(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() - 12.5).abs() < 1e-9);
    }

    #[test]
    fn infeasible_lp() {
        let mut m = MilpModel::new();
        let x = var(&mut m, "x", 0.0, 1.0);
        m.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0, "a");
        let mut lp = Lp::from_model(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Infeasible);
    }

    #[test]
    fn bound_change_resolves_from_current_basis() {
        let mut m = MilpModel::new();
        let x = var(&mut m, "x", 0.0, 10.0);
        let y = var(&mut m, "y", 0.0, 10.0);
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.5, "a");
        m.add_objective(x, 1.0, crate::milp::CostComponent::Other);
        m.add_objective(y, 2.0, crate::milp::CostComponent::Other);
        let mut lp = Lp::from_model(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() - 3.5).abs() < 1e-9);
        lp.set_bounds(x, 0.0, 3.0);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() - 4.0).abs() < 1e-9);
        lp.set_bounds(y, 0.0, 0.0);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Infeasible);
        lp.set_bounds(y, 0.0, 10.0);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn unfixing_a_variable_keeps_bounds_valid() {
        // min -x - y  s.t.  x + y <= 3; solve with x fixed, then release it
        let mut m = MilpModel::new();
        let x = var(&mut m, "x", 0.0, 2.0);
        let y = var(&mut m, "y", 0.0, 2.0);
        m.add_constraint(vec![(x, 1.0), (y, 1.0)], Sense::Le, 3.0, "a");
        m.add_objective(x, -2.0, crate::milp::CostComponent::Other);
        m.add_objective(y, -1.0, crate::milp::CostComponent::Other);
        let mut lp = Lp::from_model(&m);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() + 5.0).abs() < 1e-9);
        lp.set_bounds(y, 2.0, 2.0);
        lp.set_bounds(x, 0.0, 0.0);
        assert_eq!(lp.solve(f64::INFINITY, 1000), LpStatus::Optimal);
        assert!((lp.objective() + 2.0).abs() < 1e-9);
        lp.set_bounds(x, 0.0, 2.0);
        lp.set_bounds(y, 0.0, 2.0);
        // a bound above the optimum must not cut it off
        assert_eq!(lp.solve(-4.5, 1000), LpStatus::Optimal);
        assert!((lp.objective() + 5.0).abs() < 1e-9);
    }
}

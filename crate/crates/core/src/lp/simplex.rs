//! Bounded-variable two-phase primal simplex with an explicit dense basis
//! inverse, periodic refactorization, and Bland's rule as the anti-cycling
//! fallback once the objective stalls.

use super::{LinearModel, Sense, SolveOptions};

/// LP-level termination state. `Unbounded` never escapes the signal-timing
/// builders (their objectives are bounded below) but a generic caller can
/// construct such a model, so it is reported rather than panicked on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub objective: f64,
    /// One value per model variable (structural variables only).
    pub values: Vec<f64>,
    pub pivots: usize,
}

/// Solves the LP relaxation of `model` (binary flags ignored, bounds kept).
/// `pivot_budget` caps simplex pivots for this call.
pub fn solve_lp_relaxation(
    model: &LinearModel,
    opts: &SolveOptions,
    pivot_budget: usize,
) -> LpResult {
    let mut w = Worker::new(model, opts, pivot_budget);
    let status = w.run();
    let values: Vec<f64> = w.x[..w.n_struct].to_vec();
    LpResult {
        status,
        objective: model.objective_value(&values),
        values,
        pivots: w.pivots,
    }
}

const PIVOT_EPS: f64 = 1e-9;
const REFACTOR_EVERY: usize = 120;

struct Worker<'a> {
    model: &'a LinearModel,
    opts: &'a SolveOptions,
    budget: usize,

    m: usize,
    n_struct: usize,
    n_total: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rhs: Vec<f64>,
    cost: Vec<f64>,

    x: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major m*m basis inverse.
    binv: Vec<f64>,

    pivots: usize,
    since_refactor: usize,
    bland: bool,
    stall: usize,
    artificials: Vec<usize>,
}

impl<'a> Worker<'a> {
    fn new(model: &'a LinearModel, opts: &'a SolveOptions, budget: usize) -> Self {
        let m = model.num_constraints();
        let n_struct = model.num_vars();

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct + m];
        let mut lo = Vec::with_capacity(n_struct + m);
        let mut hi = Vec::with_capacity(n_struct + m);
        for v in model.vars() {
            lo.push(v.lower);
            hi.push(v.upper);
        }
        let mut rhs = Vec::with_capacity(m);
        for (i, c) in model.constraints().iter().enumerate() {
            for &(j, a) in &c.terms {
                cols[j].push((i, a));
            }
            // Row sense is encoded in the slack bounds: a'x + s = b.
            let (slo, shi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            cols[n_struct + i].push((i, 1.0));
            lo.push(slo);
            hi.push(shi);
            rhs.push(c.rhs);
        }

        // Nonbasic start: every variable at its finite bound nearest zero
        // preference order lower, upper; free variables sit at zero.
        let mut x = vec![0.0; n_struct + m];
        for j in 0..n_struct + m {
            x[j] = if lo[j].is_finite() {
                lo[j]
            } else if hi[j].is_finite() {
                hi[j]
            } else {
                0.0
            };
        }

        // Residual each row must absorb through its basic variable.
        let mut resid = rhs.clone();
        for (j, col) in cols.iter().enumerate().take(n_struct) {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    resid[i] -= a * x[j];
                }
            }
        }

        let mut basis = Vec::with_capacity(m);
        let mut is_basic = vec![false; n_struct + m];
        let mut artificials = Vec::new();
        for i in 0..m {
            let s = n_struct + i;
            let r = resid[i] - x[s]; // x[s] is 0 for every slack kind
            if r >= lo[s] - 1e-12 && r <= hi[s] + 1e-12 {
                x[s] = r.clamp(lo[s], hi[s]);
                basis.push(s);
                is_basic[s] = true;
            } else {
                // Artificial column signed so its basic value is nonnegative.
                let a = cols.len();
                let sign = if r >= 0.0 { 1.0 } else { -1.0 };
                cols.push(vec![(i, sign)]);
                lo.push(0.0);
                hi.push(f64::INFINITY);
                x.push(r.abs());
                is_basic.push(true);
                basis.push(a);
                artificials.push(a);
            }
        }
        let n_total = cols.len();

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            // Initial basis columns are +/- unit vectors.
            let j = basis[i];
            let sign = cols[j][0].1;
            binv[i * m + i] = 1.0 / sign;
        }

        let cost = vec![0.0; n_total];
        Worker {
            model,
            opts,
            budget,
            m,
            n_struct,
            n_total,
            cols,
            lo,
            hi,
            rhs,
            cost,
            x,
            basis,
            is_basic,
            binv,
            pivots: 0,
            since_refactor: 0,
            bland: false,
            stall: 0,
            artificials,
        }
    }

    fn run(&mut self) -> LpStatus {
        if !self.artificials.is_empty() {
            for j in 0..self.n_total {
                self.cost[j] = 0.0;
            }
            for &a in &self.artificials.clone() {
                self.cost[a] = 1.0;
            }
            match self.iterate() {
                LpStatus::Optimal => {}
                LpStatus::Unbounded => return LpStatus::Unbounded,
                other => return other,
            }
            let infeas: f64 = self.artificials.iter().map(|&a| self.x[a]).sum();
            if infeas > self.opts.feas_tol * (1.0 + (self.m as f64).sqrt()) {
                return LpStatus::Infeasible;
            }
            // Pin artificials at zero for phase two.
            for &a in &self.artificials.clone() {
                self.hi[a] = 0.0;
                self.x[a] = 0.0;
            }
            self.refactor();
        }

        for j in 0..self.n_total {
            self.cost[j] = 0.0;
        }
        for j in 0..self.n_struct {
            self.cost[j] = self.model.objective()[j];
        }
        self.bland = false;
        self.stall = 0;
        let status = self.iterate();
        if status == LpStatus::Optimal {
            self.refactor();
            let viol = self.primal_violation();
            if viol > self.opts.feas_tol * 100.0 {
                log::warn!("simplex finished with residual violation {viol:.3e}");
                return LpStatus::IterationLimit;
            }
        }
        status
    }

    fn iterate(&mut self) -> LpStatus {
        let mut obj = self.current_cost();
        loop {
            if self.pivots >= self.budget {
                return LpStatus::IterationLimit;
            }
            let duals = self.duals();
            let entering = self.choose_entering(&duals);
            let Some((j, dir)) = entering else {
                return LpStatus::Optimal;
            };

            let ycol = self.ftran(j);
            let Some(step) = self.ratio_test(j, dir, &ycol) else {
                return LpStatus::Unbounded;
            };

            self.apply_step(j, dir, step, &ycol);
            self.pivots += 1;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }

            let new_obj = self.current_cost();
            if obj - new_obj < 1e-11 {
                self.stall += 1;
                if self.stall >= self.opts.stall_threshold {
                    self.bland = true;
                }
            } else {
                self.stall = 0;
            }
            obj = new_obj;
        }
    }

    fn current_cost(&self) -> f64 {
        self.cost
            .iter()
            .zip(&self.x)
            .map(|(c, v)| c * v)
            .sum::<f64>()
    }

    /// y = c_B * B^-1
    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.cost[b];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for k in 0..m {
                    y[k] += cb * row[k];
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, duals: &[f64]) -> f64 {
        let mut rc = self.cost[j];
        for &(i, a) in &self.cols[j] {
            rc -= duals[i] * a;
        }
        rc
    }

    /// Picks the entering variable: Dantzig by default, lowest eligible
    /// index once Bland's rule is engaged. Returns (var, direction).
    fn choose_entering(&self, duals: &[f64]) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64, f64)> = None; // (var, dir, score)
        for j in 0..self.n_total {
            if self.is_basic[j] || self.hi[j] - self.lo[j] <= 1e-12 {
                continue;
            }
            let rc = self.reduced_cost(j, duals);
            let at_lower = self.x[j] <= self.lo[j] + 1e-12;
            let at_upper = self.x[j] >= self.hi[j] - 1e-12;
            let free = !self.lo[j].is_finite() && !self.hi[j].is_finite();
            let dir = if (at_lower || free) && rc < -tol {
                1.0
            } else if (at_upper || free) && rc > tol {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            let score = rc.abs();
            if best.map_or(true, |(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// B^-1 * A_j
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for i in 0..m {
                y[i] += self.binv[i * m + r] * a;
            }
        }
        y
    }

    /// Returns the limiting step, or None when the direction is unbounded.
    fn ratio_test(&self, j: usize, dir: f64, ycol: &[f64]) -> Option<Step> {
        // The entering variable's own opposite bound limits the step too.
        let own = if dir > 0.0 && self.hi[j].is_finite() {
            self.hi[j] - self.x[j]
        } else if dir < 0.0 && self.lo[j].is_finite() {
            self.x[j] - self.lo[j]
        } else {
            f64::INFINITY
        };

        // Pass 1: minimum blocking step over the basics.
        let mut limits: Vec<(usize, f64, f64)> = Vec::new(); // (row, limit, |pivot|)
        let mut t_min = own;
        for (i, &y) in ycol.iter().enumerate() {
            let delta = -dir * y; // rate of change of basic i per unit step
            if delta.abs() <= PIVOT_EPS {
                continue;
            }
            let b = self.basis[i];
            let limit = if delta > 0.0 {
                if !self.hi[b].is_finite() {
                    continue;
                }
                (self.hi[b] - self.x[b]) / delta
            } else {
                if !self.lo[b].is_finite() {
                    continue;
                }
                (self.lo[b] - self.x[b]) / delta
            }
            .max(0.0);
            limits.push((i, limit, y.abs()));
            t_min = t_min.min(limit);
        }
        if t_min.is_infinite() {
            return None;
        }

        // A flip to the opposite bound needs no basis change.
        if own <= t_min + 1e-12 {
            return Some(Step {
                t: own,
                leave: Leave::BoundFlip,
            });
        }

        // Pass 2: pick the leaving row among ties — largest pivot magnitude
        // for stability, or smallest basic variable index under Bland's rule.
        let mut choice: Option<(usize, f64)> = None;
        for &(i, limit, piv) in &limits {
            if limit > t_min + 1e-12 {
                continue;
            }
            let better = match choice {
                None => true,
                Some((r, best)) => {
                    if self.bland {
                        self.basis[i] < self.basis[r]
                    } else {
                        piv > best
                    }
                }
            };
            if better {
                choice = Some((i, piv));
            }
        }
        let (row, _) = choice.expect("ratio test found a finite limit but no row");
        Some(Step {
            t: t_min,
            leave: Leave::Row(row),
        })
    }

    fn apply_step(&mut self, j: usize, dir: f64, step: Step, ycol: &[f64]) {
        let t = step.t;
        for (i, &y) in ycol.iter().enumerate() {
            let b = self.basis[i];
            self.x[b] += -dir * y * t;
        }
        self.x[j] += dir * t;

        match step.leave {
            Leave::BoundFlip => {
                // Snap exactly onto the bound that limited the step.
                self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
            }
            Leave::Row(r) => {
                let out = self.basis[r];
                let delta = -dir * ycol[r];
                self.x[out] = if delta > 0.0 { self.hi[out] } else { self.lo[out] };
                self.is_basic[out] = false;
                self.basis[r] = j;
                self.is_basic[j] = true;
                self.update_binv(r, ycol);
            }
        }
    }

    /// Elementary row operations turning column `ycol` into unit vector e_r.
    fn update_binv(&mut self, r: usize, ycol: &[f64]) {
        let m = self.m;
        let p = ycol[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        for i in 0..m {
            if i == r {
                continue;
            }
            let f = ycol[i];
            if f.abs() <= 1e-14 {
                continue;
            }
            for k in 0..m {
                self.binv[i * m + k] -= f * self.binv[r * m + k];
            }
        }
    }

    /// Rebuilds B^-1 from scratch and recomputes basic values to wash out
    /// accumulated drift.
    fn refactor(&mut self) {
        let m = self.m;
        if m == 0 {
            return;
        }
        // Dense Gauss-Jordan inversion with partial pivoting.
        let mut a = vec![0.0; m * m];
        for (i, &b) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[b] {
                a[r * m + i] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut piv = col;
            let mut best = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best < 1e-12 {
                log::error!("singular basis during refactorization");
                return;
            }
            if piv != col {
                for k in 0..m {
                    a.swap(col * m + k, piv * m + k);
                    inv.swap(col * m + k, piv * m + k);
                }
            }
            let d = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= d;
                inv[col * m + k] /= d;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..m {
                    a[r * m + k] -= f * a[col * m + k];
                    inv[r * m + k] -= f * inv[col * m + k];
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.n_total {
            if !self.is_basic[j] && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        for i in 0..m {
            let mut v = 0.0;
            for k in 0..m {
                v += self.binv[i * m + k] * r[k];
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn primal_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.n_total {
            worst = worst
                .max(self.lo[j] - self.x[j])
                .max(self.x[j] - self.hi[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
struct Step {
    t: f64,
    leave: Leave,
}

#[derive(Debug, Clone, Copy)]
enum Leave {
    /// Entering variable jumps to its opposite bound; basis unchanged.
    BoundFlip,
    /// Basic variable in this row leaves at one of its bounds.
    Row(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{LinearModel, Sense, SolveOptions};

    fn solve(model: &LinearModel) -> LpResult {
        solve_lp_relaxation(model, &SolveOptions::default(), 100_000)
    }

    #[test]
    fn single_constraint_lp() {
        // min x s.t. x >= 3, x >= 0
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.add_constraint("c0", vec![(x, 1.0)], Sense::Ge, 3.0);
        let r = solve(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
        assert!((r.values[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_pair() {
        // x >= 1 and x <= 0
        let mut m = LinearModel::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.add_constraint("ge", vec![(x, 1.0)], Sense::Ge, 1.0);
        m.add_constraint("le", vec![(x, 1.0)], Sense::Le, 0.0);
        assert_eq!(solve(&m).status, LpStatus::Infeasible);
    }

    #[test]
    fn pure_bound_optimum_via_bound_flip() {
        // min -x, x in [0, 5]; no constraints at all.
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 5.0);
        m.set_objective(x, -1.0);
        let r = solve(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 5.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_and_equality() {
        // min x + y  s.t. -x <= -2 (x >= 2), x + y = 5, y >= 0
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, f64::INFINITY);
        let y = m.add_var("y", 0.0, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.set_objective(y, 1.0);
        m.add_constraint("neg", vec![(x, -1.0)], Sense::Le, -2.0);
        m.add_constraint("eq", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 5.0);
        let r = solve(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective - 5.0).abs() < 1e-8);
        assert!(r.values[0] >= 2.0 - 1e-9);
    }

    #[test]
    fn free_variable() {
        // min y s.t. y >= x - 4, y >= -x, x free => optimum at x = 2, y = -2.
        let mut m = LinearModel::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        m.set_objective(y, 1.0);
        m.add_constraint("a", vec![(y, 1.0), (x, -1.0)], Sense::Ge, -4.0);
        m.add_constraint("b", vec![(y, 1.0), (x, 1.0)], Sense::Ge, 0.0);
        let r = solve(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 2.0).abs() < 1e-8);
    }

    #[test]
    fn unbounded_detected() {
        let mut m = LinearModel::new();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY);
        m.set_objective(x, 1.0);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Le, 10.0);
        assert_eq!(solve(&m).status, LpStatus::Unbounded);
    }

    #[test]
    fn upper_bounded_mix() {
        // max 3x + 2y (min negative) s.t. x + y <= 4, x <= 2.5, y <= 3.
        let mut m = LinearModel::new();
        let x = m.add_var("x", 0.0, 2.5);
        let y = m.add_var("y", 0.0, 3.0);
        m.set_objective(x, -3.0);
        m.set_objective(y, -2.0);
        m.add_constraint("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0);
        let r = solve(&m);
        assert_eq!(r.status, LpStatus::Optimal);
        // x = 2.5, y = 1.5 -> 10.5
        assert!((r.objective + 10.5).abs() < 1e-8);
    }
}

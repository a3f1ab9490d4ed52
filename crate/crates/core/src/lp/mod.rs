//! Linear and mixed-integer linear programming.
//!
//! [`LinearModel`] is a plain carrier for a minimization problem over bounded
//! variables: linear constraints, a linear objective, and a binary flag per
//! variable. LP relaxations are solved by a bounded-variable primal simplex
//! ([`simplex`]); binaries are resolved by best-first branch-and-bound
//! ([`branch`]). Model dumps are deterministic text so two dumps of the same
//! model diff clean.

mod branch;
mod simplex;
pub mod testgen;

pub use branch::{solve_milp, MilpStats};
pub use simplex::{solve_lp_relaxation, LpResult, LpStatus};

use crate::{Error, Result};
use std::fmt::Write as _;

/// Constraint sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

/// Index of a variable in its model.
pub type VarId = usize;

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    /// Sparse row: (variable index, coefficient). At most one term per variable.
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization problem over bounded continuous and binary variables.
#[derive(Debug, Clone, Default)]
pub struct LinearModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<f64>,
    obj_offset: f64,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            binary: false,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> VarId {
        let id = self.add_var(name, 0.0, 1.0);
        self.vars[id].binary = true;
        id
    }

    /// Overwrites the variable's objective coefficient.
    pub fn set_objective(&mut self, var: VarId, coef: f64) {
        self.objective[var] = coef;
    }

    /// Adds a constant to the objective (carried through to solutions).
    pub fn add_objective_offset(&mut self, offset: f64) {
        self.obj_offset += offset;
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            sense,
            rhs,
        });
    }

    /// Narrows a variable's bounds (used by branch-and-bound fixings).
    pub fn restrict_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        let v = &mut self.vars[var];
        v.lower = v.lower.max(lower);
        v.upper = v.upper.min(upper);
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn obj_offset(&self) -> f64 {
        self.obj_offset
    }

    pub fn binary_vars(&self) -> Vec<VarId> {
        (0..self.vars.len()).filter(|&i| self.vars[i].binary).collect()
    }

    /// Objective value of a point, including the constant offset.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset
            + self
                .objective
                .iter()
                .zip(x)
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Largest constraint or bound violation of a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, v) in self.vars.iter().enumerate() {
            worst = worst.max(v.lower - x[i]).max(x[i] - v.upper);
        }
        for c in &self.constraints {
            let lhs: f64 = c.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let viol = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Rejects non-finite coefficients, crossed bounds, bad binary bounds,
    /// and duplicate variable references within one row.
    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() {
                return Err(Error::InvalidModel(format!("variable {} has NaN bound", v.name)));
            }
            if v.lower > v.upper {
                return Err(Error::InvalidModel(format!(
                    "variable {} has lower {} > upper {}",
                    v.name, v.lower, v.upper
                )));
            }
            if v.binary && (v.lower < -1e-12 || v.upper > 1.0 + 1e-12) {
                return Err(Error::InvalidModel(format!(
                    "binary variable {} must stay within [0,1]",
                    v.name
                )));
            }
            if !self.objective[i].is_finite() {
                return Err(Error::InvalidModel(format!(
                    "objective coefficient of {} is not finite",
                    v.name
                )));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(Error::InvalidModel(format!("constraint {} rhs not finite", c.name)));
            }
            let mut seen = vec![false; self.vars.len()];
            for &(j, a) in &c.terms {
                if j >= self.vars.len() {
                    return Err(Error::InvalidModel(format!(
                        "constraint {} references unknown variable {}",
                        c.name, j
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "constraint {} has non-finite coefficient",
                        c.name
                    )));
                }
                if seen[j] {
                    return Err(Error::InvalidModel(format!(
                        "constraint {} references {} twice",
                        c.name, self.vars[j].name
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(())
    }

    /// Deterministic LP-style text dump: objective, constraints, bounds,
    /// binaries, all in construction order.
    pub fn dump(&self) -> String {
        fn num(x: f64) -> String {
            if x == f64::INFINITY {
                "+inf".into()
            } else if x == f64::NEG_INFINITY {
                "-inf".into()
            } else {
                format!("{x}")
            }
        }
        let term = |j: VarId, a: f64| -> String {
            let sign = if a < 0.0 { "-" } else { "+" };
            format!("{sign} {} {}", num(a.abs()), self.vars[j].name)
        };
        let mut out = String::new();
        out.push_str("minimize\n ");
        let mut any = false;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {}", term(j, c));
                any = true;
            }
        }
        if self.obj_offset != 0.0 {
            let sign = if self.obj_offset < 0.0 { "-" } else { "+" };
            let _ = write!(out, " {} {}", sign, num(self.obj_offset.abs()));
            any = true;
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nsubject to\n");
        for c in &self.constraints {
            let _ = write!(out, " {}: ", c.name);
            if c.terms.is_empty() {
                out.push('0');
            }
            for (k, &(j, a)) in c.terms.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{}", term(j, a));
            }
            let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
        }
        out.push_str("bounds\n");
        for v in &self.vars {
            let _ = writeln!(out, " {} <= {} <= {}", num(v.lower), v.name, num(v.upper));
        }
        let binaries: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.binary)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            let _ = writeln!(out, "binary\n {}", binaries.join(" "));
        }
        out.push_str("end\n");
        out
    }
}

/// Termination state of an LP or MILP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

/// A primal solution: objective value (offset included) and one value per
/// model variable.
#[derive(Debug, Clone)]
pub struct Solution {
    pub objective: f64,
    pub values: Vec<f64>,
}

/// Outcome of a solve; `solution` is present for `Optimal` and, when an
/// incumbent was found before the budget ran out, for `IterationLimit`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: SolveStatus,
    pub solution: Option<Solution>,
    pub stats: MilpStats,
}

/// Solver knobs. Defaults match the documented contracts: 1e-7 internal
/// tolerances and a 10^6 total simplex pivot budget.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Total simplex pivots across all branch-and-bound nodes.
    pub pivot_limit: usize,
    pub node_limit: usize,
    /// Consecutive non-improving pivots before Bland's rule engages.
    pub stall_threshold: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            pivot_limit: 1_000_000,
            node_limit: 200_000,
            stall_threshold: 200,
        }
    }
}

/// Solves the model: plain simplex when no binaries, branch-and-bound
/// otherwise.
pub fn solve(model: &LinearModel, opts: &SolveOptions) -> Result<Outcome> {
    model.validate()?;
    solve_milp(model, opts)
}

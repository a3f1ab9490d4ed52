//! Seeded random model generation, shared by property tests, the acceptance
//! suite, and benchmarks.

use super::{LinearModel, Sense};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Shape limits for [`random_model`].
#[derive(Debug, Clone, Copy)]
pub struct GenLimits {
    pub max_continuous: usize,
    pub max_binaries: usize,
    pub max_rows: usize,
}

impl Default for GenLimits {
    fn default() -> Self {
        Self {
            max_continuous: 30,
            max_binaries: 6,
            max_rows: 20,
        }
    }
}

/// Builds a random bounded model. Every continuous variable gets finite
/// bounds so the model is never unbounded; feasibility is not guaranteed.
pub fn random_model(seed: u64, limits: GenLimits) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_cont = rng.gen_range(1..=limits.max_continuous.max(1));
    let n_bin = rng.gen_range(0..=limits.max_binaries);
    let n_rows = rng.gen_range(1..=limits.max_rows.max(1));

    let mut m = LinearModel::new();
    for i in 0..n_cont {
        let a = rng.gen_range(-5.0..5.0);
        let b = rng.gen_range(-5.0..5.0);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let v = m.add_var(format!("x{i}"), lo, hi);
        m.set_objective(v, rng.gen_range(-3.0..3.0));
    }
    for i in 0..n_bin {
        let v = m.add_binary(format!("b{i}"));
        m.set_objective(v, rng.gen_range(-3.0..3.0));
    }
    let n = m.num_vars();
    for r in 0..n_rows {
        let k = rng.gen_range(1..=4.min(n));
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(k);
        idx.sort_unstable();
        let terms: Vec<(usize, f64)> = idx
            .into_iter()
            .map(|j| (j, rng.gen_range(-4.0..4.0)))
            .filter(|&(_, a): &(usize, f64)| a.abs() > 0.05)
            .collect();
        if terms.is_empty() {
            continue;
        }
        let sense = match rng.gen_range(0..5) {
            0 | 1 => Sense::Le,
            2 | 3 => Sense::Ge,
            _ => Sense::Eq,
        };
        // Anchor the rhs near an interior point, slanted by sense, so a fair
        // share of models stay feasible.
        let anchor: f64 = terms
            .iter()
            .map(|&(j, a)| {
                let v = &m.vars()[j];
                a * 0.5 * (v.lower + v.upper)
            })
            .sum();
        let rhs = anchor
            + match sense {
                Sense::Le => rng.gen_range(-0.5..3.0),
                Sense::Ge => rng.gen_range(-3.0..0.5),
                Sense::Eq => rng.gen_range(-0.5..0.5),
            };
        m.add_constraint(format!("r{r}"), terms, sense, rhs);
    }
    m
}

/// Exhaustive oracle: enumerates all binary assignments, solves each LP, and
/// returns the best objective (None when every assignment is infeasible).
/// Intended for models with few binaries.
pub fn enumerate_binaries_oracle(
    model: &LinearModel,
    opts: &super::SolveOptions,
) -> Option<(f64, Vec<f64>)> {
    use super::simplex::{solve_lp_relaxation, LpStatus};
    let binaries = model.binary_vars();
    assert!(binaries.len() <= 20, "oracle is exponential in binaries");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1u32 << binaries.len()) {
        let mut fixed = model.clone();
        for (k, &b) in binaries.iter().enumerate() {
            let val = if mask & (1 << k) != 0 { 1.0 } else { 0.0 };
            fixed.restrict_bounds(b, val, val);
        }
        let r = solve_lp_relaxation(&fixed, opts, opts.pivot_limit);
        if r.status == LpStatus::Optimal
            && best.as_ref().map_or(true, |(obj, _)| r.objective < *obj)
        {
            best = Some((r.objective, r.values));
        }
    }
    best
}

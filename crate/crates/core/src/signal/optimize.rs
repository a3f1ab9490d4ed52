//! Optimization drivers: solve one built model, search the cycle grid in
//! fixed-time mode (candidates fan out in parallel), and run the
//! deterministic baselines by swapping the rate realization.

use super::build::{BinaryBinding, CycleVar};
use super::{
    build_fixed_time_model, build_real_time_model, robust_counterpart, BuiltModel, CvOutcome,
    Mode, MovementOutcome, OptimizationInstance, SolveResult,
};
use crate::lp::{self, MilpStats, SolveOptions, SolveStatus};
use crate::par;
use crate::trajectory::MovementId;
use crate::uncertainty::BoxUncertaintySet;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Outcome of one cycle-length candidate in the fixed-time grid search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateDiag {
    pub cycle_length: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub note: Option<String>,
}

/// Solves a built model and decodes the solution into a [`SolveResult`].
pub fn solve_built_model(
    built: &BuiltModel,
    inst: &OptimizationInstance,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let outcome = lp::solve(&built.model, opts)?;
    let mut result = SolveResult {
        status: outcome.status,
        objective: f64::NAN,
        cycle_length: None,
        movements: BTreeMap::new(),
        cvs: Vec::new(),
        candidates: Vec::new(),
        stats: outcome.stats,
    };
    let Some(sol) = outcome.solution else {
        return Ok(result);
    };
    result.objective = sol.objective;

    let c = match built.cycle {
        CycleVar::Fixed(c) => c,
        CycleVar::Var(v) => sol.values[v],
    };
    result.cycle_length = Some(c);

    // Stage boundaries: the running prefix sums of the stage durations.
    let mut boundaries = Vec::with_capacity(built.stage_vars.len() + 1);
    boundaries.push(0.0);
    let mut acc = 0.0;
    for &v in &built.stage_vars {
        acc += sol.values[v];
        boundaries.push(acc);
    }

    for (id, q_var) in &built.q_vars {
        let m = inst.movement(id).expect("movement exists");
        let s = m.stage_index;
        result.movements.insert(
            id.clone(),
            MovementOutcome {
                g_s: boundaries[s],
                g_e: boundaries[s + 1] - m.yellow,
                residual_queue: sol.values[*q_var],
            },
        );
    }

    for cv in &built.cvs {
        let m = inst.movement(&cv.movement_id).expect("movement exists");
        let e_k = boundaries[m.stage_index + 1];
        let (t_i, b_i) = match cv.binding {
            BinaryBinding::None => (cv.t_mod, None),
            BinaryBinding::Fixed(b) => (cv.t_mod - e_k + f64::from(b) * c, Some(b)),
            BinaryBinding::Var(v) => {
                let b = sol.values[v].round() as u8;
                (cv.t_mod - e_k + f64::from(b) * c, Some(b))
            }
        };
        result.cvs.push(CvOutcome {
            movement_id: cv.movement_id.clone(),
            t_i0: cv.t0,
            t_i,
            d_i: sol.values[cv.d_var],
            b_i,
        });
    }
    Ok(result)
}

fn merge_stats(into: &mut MilpStats, from: MilpStats) {
    into.nodes += from.nodes;
    into.pivots += from.pivots;
}

/// Shared engine: fixed-time grid search or single real-time LP at a given
/// rate realization.
pub fn optimize_with_rates(
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
    cycle_grid: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    inst.validate()?;
    match inst.mode {
        Mode::RealTime => {
            let built = build_real_time_model(inst, rates)?;
            solve_built_model(&built, inst, opts)
        }
        Mode::FixedTime => {
            if cycle_grid.is_empty() {
                return Err(Error::Parameter("cycle grid is empty".into()));
            }
            let mut grid: Vec<f64> = cycle_grid.to_vec();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            for &c in &grid {
                if !(inst.phase.c_min - 1e-9..=inst.phase.c_max + 1e-9).contains(&c) {
                    return Err(Error::Parameter(format!(
                        "grid cycle length {c} outside [{}, {}]",
                        inst.phase.c_min, inst.phase.c_max
                    )));
                }
            }

            // Candidates are independent models; fan out, then reduce with a
            // deterministic argmin (ties break toward the shortest cycle,
            // which the ascending grid order provides).
            let solved: Vec<(f64, Result<SolveResult>)> = par::map_collect(grid, |c| {
                let r = build_fixed_time_model(inst, rates, c)
                    .and_then(|built| solve_built_model(&built, inst, opts));
                (c, r)
            });

            let mut stats = MilpStats::default();
            let mut candidates = Vec::new();
            let mut best: Option<SolveResult> = None;
            let mut saw_limit = false;
            for (c, r) in solved {
                match r {
                    Ok(res) => {
                        merge_stats(&mut stats, res.stats);
                        candidates.push(CandidateDiag {
                            cycle_length: c,
                            status: res.status,
                            objective: res.cycle_length.map(|_| res.objective),
                            note: None,
                        });
                        match res.status {
                            SolveStatus::Optimal => {
                                let better = best
                                    .as_ref()
                                    .map_or(true, |b| res.objective < b.objective - 1e-9);
                                if better {
                                    best = Some(res);
                                }
                            }
                            SolveStatus::IterationLimit => saw_limit = true,
                            SolveStatus::Infeasible => {}
                        }
                    }
                    Err(Error::Infeasible(msg)) => {
                        candidates.push(CandidateDiag {
                            cycle_length: c,
                            status: SolveStatus::Infeasible,
                            objective: None,
                            note: Some(msg),
                        });
                    }
                    Err(e) => return Err(e),
                }
            }

            match best {
                Some(mut res) => {
                    res.candidates = candidates;
                    res.stats = stats;
                    Ok(res)
                }
                None => Ok(SolveResult {
                    status: if saw_limit {
                        SolveStatus::IterationLimit
                    } else {
                        SolveStatus::Infeasible
                    },
                    objective: f64::NAN,
                    cycle_length: None,
                    movements: BTreeMap::new(),
                    cvs: Vec::new(),
                    candidates,
                    stats,
                }),
            }
        }
    }
}

fn counterpart_rates(
    inst: &OptimizationInstance,
    set: &BoxUncertaintySet,
) -> Result<BTreeMap<MovementId, f64>> {
    for m in &inst.movements {
        if set.interval(&m.movement_id).is_none() {
            return Err(Error::Parameter(format!(
                "box set has no interval for movement {}",
                m.movement_id
            )));
        }
    }
    Ok(robust_counterpart(set))
}

/// Robust fixed-time optimization: worst-case rates from the box set, one
/// MILP per candidate cycle length, best objective wins.
pub fn optimize_fixed_time(
    inst: &OptimizationInstance,
    set: &BoxUncertaintySet,
    cycle_grid: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let rates = counterpart_rates(inst, set)?;
    optimize_with_rates(inst, &rates, cycle_grid, opts)
}

/// Robust real-time optimization: worst-case rates, single LP.
pub fn optimize_real_time(
    inst: &OptimizationInstance,
    set: &BoxUncertaintySet,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    let rates = counterpart_rates(inst, set)?;
    optimize_with_rates(inst, &rates, &[], opts)
}

/// Deterministic baseline: the identical pipeline fed point estimates
/// (CV-derived means, or ground-truth rates for the true-rate baseline).
pub fn deterministic_baseline(
    inst: &OptimizationInstance,
    point_rates: &BTreeMap<MovementId, f64>,
    cycle_grid: &[f64],
    opts: &SolveOptions,
) -> Result<SolveResult> {
    optimize_with_rates(inst, point_rates, cycle_grid, opts)
}

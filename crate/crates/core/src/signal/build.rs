//! Builders turning an [`OptimizationInstance`] plus a fixed rate
//! realization into a [`LinearModel`].
//!
//! Stage durations are the structural variables; green windows derive from
//! the running stage boundaries. In fixed-time mode the cycle length is a
//! constant (one model per candidate), each CV contributes a delay variable
//! and, unless its wrap binary is already forced by the reachable range of
//! its movement's red start, a binary with the big-M side constraints. In
//! real-time mode cycle length is a variable, arrivals are constants, and
//! the model is a pure LP.

use super::{Mode, OptimizationInstance};
use crate::lp::{LinearModel, Sense, VarId};
use crate::trajectory::MovementId;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// How a CV's wrap binary is represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinaryBinding {
    Var(VarId),
    Fixed(u8),
    /// Real-time mode has no wrap binaries.
    None,
}

/// Bookkeeping for one CV's variables in a built model.
#[derive(Debug, Clone)]
pub struct CvTerm {
    pub movement_id: MovementId,
    pub t0: f64,
    /// Fixed-time: t0 wrapped into the cycle. Real-time: the constant
    /// cycle-relative arrival (already clamped at zero).
    pub t_mod: f64,
    pub d_var: VarId,
    pub binding: BinaryBinding,
}

/// Whether the cycle length is data or a variable in this model.
#[derive(Debug, Clone, Copy)]
pub enum CycleVar {
    Fixed(f64),
    Var(VarId),
}

/// A built model plus the layout needed to decode its solution.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub model: LinearModel,
    pub cycle: CycleVar,
    pub stage_vars: Vec<VarId>,
    pub q_vars: Vec<(MovementId, VarId)>,
    pub cvs: Vec<CvTerm>,
    /// Real-time arrivals clamped up to zero (virtually arrived before the
    /// red start; their demand is residual-queue pressure, not delay).
    pub clamped_arrivals: usize,
}

fn require_rates(
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
) -> Result<()> {
    for m in &inst.movements {
        match rates.get(&m.movement_id) {
            Some(r) if *r >= 0.0 && r.is_finite() => {}
            Some(r) => {
                return Err(Error::Parameter(format!(
                    "rate for movement {} must be finite and nonnegative, got {r}",
                    m.movement_id
                )))
            }
            None => {
                return Err(Error::Parameter(format!(
                    "no rate realization for movement {}",
                    m.movement_id
                )))
            }
        }
    }
    Ok(())
}

/// Builds the fixed-time MILP for one candidate cycle length.
pub fn build_fixed_time_model(
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
    cycle_length: f64,
) -> Result<BuiltModel> {
    inst.validate()?;
    require_rates(inst, rates)?;
    if inst.mode != Mode::FixedTime {
        return Err(Error::Parameter("instance mode is not fixed-time".into()));
    }
    let phase = &inst.phase;
    if !(phase.c_min - 1e-9..=phase.c_max + 1e-9).contains(&cycle_length) {
        return Err(Error::Parameter(format!(
            "cycle length {cycle_length} outside [{}, {}]",
            phase.c_min, phase.c_max
        )));
    }
    let min_total = phase.min_green_total();
    if min_total > cycle_length + 1e-9 {
        return Err(Error::Infeasible(format!(
            "minimum greens sum to {min_total}, exceeding cycle length {cycle_length}"
        )));
    }

    let c = cycle_length;
    let mut model = LinearModel::new();

    // Stage durations, bounded below by the stage minimum green and above by
    // what the other stages' minimums leave over.
    let stage_vars: Vec<VarId> = phase
        .stages
        .iter()
        .enumerate()
        .map(|(s, stage)| {
            let others: f64 = min_total - stage.min_green;
            model.add_var(format!("D_{s}"), stage.min_green, c - others)
        })
        .collect();
    model.add_constraint(
        "stage_sum",
        stage_vars.iter().map(|&v| (v, 1.0)).collect(),
        Sense::Eq,
        c,
    );

    let mut q_vars = Vec::new();
    for m in &inst.movements {
        let q = model.add_var(format!("Q_{}", m.movement_id), 0.0, f64::INFINITY);
        model.set_objective(q, inst.alpha);
        let rate = rates[&m.movement_id];
        let h = m.discharge_headway;
        // Q_k >= rate*C - (D_s - L_y - L_s)/h
        model.add_constraint(
            format!("queue_{}", m.movement_id),
            vec![(q, 1.0), (stage_vars[m.stage_index], 1.0 / h)],
            Sense::Ge,
            rate * c + (m.yellow_lost + m.startup_lost) / h,
        );
        q_vars.push((m.movement_id.clone(), q));
    }

    // Reachable range of each movement's red start E_k (its stage prefix
    // sum), used to pre-resolve wrap binaries that no feasible plan can
    // flip.
    let prefix_min: Vec<f64> = {
        let mut acc = 0.0;
        phase
            .stages
            .iter()
            .map(|s| {
                acc += s.min_green;
                acc
            })
            .collect()
    };
    let suffix_min_after: Vec<f64> = (0..phase.stages.len())
        .map(|s| {
            phase.stages[s + 1..]
                .iter()
                .map(|st| st.min_green)
                .sum::<f64>()
        })
        .collect();

    let mut cvs = Vec::new();
    for m in &inst.movements {
        let Some(arrivals) = inst.cv_arrivals.get(&m.movement_id) else {
            continue;
        };
        let s = m.stage_index;
        let rate = rates[&m.movement_id];
        let w = 1.0 - rate * m.discharge_headway;
        let e_min = prefix_min[s];
        let e_max = c - suffix_min_after[s];
        for (i, &t0) in arrivals.iter().enumerate() {
            let t_mod = t0 - (t0 / c).floor() * c;
            let d = model.add_var(format!("d_{}_{i}", m.movement_id), 0.0, f64::INFINITY);
            model.set_objective(d, 1.0);

            let binding = if t_mod >= e_max + 1e-9 {
                BinaryBinding::Fixed(0)
            } else if t_mod <= e_min - inst.epsilon - 1e-9 {
                BinaryBinding::Fixed(1)
            } else {
                BinaryBinding::Var(model.add_binary(format!("b_{}_{i}", m.movement_id)))
            };

            // d >= (C - D_s) + L_s - w*(t_mod - E_k + b*C), with E_k the
            // prefix sum of stage durations through stage s.
            let mut coefs: BTreeMap<VarId, f64> = BTreeMap::new();
            *coefs.entry(d).or_insert(0.0) += 1.0;
            *coefs.entry(stage_vars[s]).or_insert(0.0) += 1.0;
            for &sv in &stage_vars[..=s] {
                *coefs.entry(sv).or_insert(0.0) -= w;
            }
            let mut rhs = c + m.startup_lost - w * t_mod;
            match binding {
                BinaryBinding::Var(b) => {
                    *coefs.entry(b).or_insert(0.0) += w * c;
                }
                BinaryBinding::Fixed(v) => rhs -= w * c * f64::from(v),
                BinaryBinding::None => unreachable!(),
            }
            model.add_constraint(
                format!("delay_{}_{i}", m.movement_id),
                coefs.into_iter().filter(|&(_, a)| a != 0.0).collect(),
                Sense::Ge,
                rhs,
            );

            if let BinaryBinding::Var(b) = binding {
                // t_mod - E_k + b*M >= 0
                let mut terms: Vec<(VarId, f64)> = vec![(b, inst.big_m)];
                terms.extend(stage_vars[..=s].iter().map(|&sv| (sv, -1.0)));
                model.add_constraint(
                    format!("wrap_lo_{}_{i}", m.movement_id),
                    terms.clone(),
                    Sense::Ge,
                    -t_mod,
                );
                // t_mod - E_k + (b-1)*M + eps <= 0
                model.add_constraint(
                    format!("wrap_hi_{}_{i}", m.movement_id),
                    terms,
                    Sense::Le,
                    inst.big_m - inst.epsilon - t_mod,
                );
            }

            cvs.push(CvTerm {
                movement_id: m.movement_id.clone(),
                t0,
                t_mod,
                d_var: d,
                binding,
            });
        }
    }

    Ok(BuiltModel {
        model,
        cycle: CycleVar::Fixed(c),
        stage_vars,
        q_vars,
        cvs,
        clamped_arrivals: 0,
    })
}

/// Builds the real-time LP: cycle length is a bounded variable, arrivals are
/// constants measured from each movement's red start, clamped at zero.
pub fn build_real_time_model(
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
) -> Result<BuiltModel> {
    inst.validate()?;
    require_rates(inst, rates)?;
    if inst.mode != Mode::RealTime {
        return Err(Error::Parameter("instance mode is not real-time".into()));
    }
    let phase = &inst.phase;
    let min_total = phase.min_green_total();
    if min_total > phase.c_max + 1e-9 {
        return Err(Error::Infeasible(format!(
            "minimum greens sum to {min_total}, exceeding the cycle upper bound {}",
            phase.c_max
        )));
    }

    let mut model = LinearModel::new();
    let c_var = model.add_var("C", phase.c_min.max(min_total), phase.c_max);
    let stage_vars: Vec<VarId> = phase
        .stages
        .iter()
        .enumerate()
        .map(|(s, stage)| {
            let others: f64 = min_total - stage.min_green;
            model.add_var(format!("D_{s}"), stage.min_green, phase.c_max - others)
        })
        .collect();
    let mut sum_terms: Vec<(VarId, f64)> = stage_vars.iter().map(|&v| (v, 1.0)).collect();
    sum_terms.push((c_var, -1.0));
    model.add_constraint("stage_sum", sum_terms, Sense::Eq, 0.0);

    let mut q_vars = Vec::new();
    for m in &inst.movements {
        let q = model.add_var(format!("Q_{}", m.movement_id), 0.0, f64::INFINITY);
        model.set_objective(q, inst.alpha);
        let rate = rates[&m.movement_id];
        let h = m.discharge_headway;
        model.add_constraint(
            format!("queue_{}", m.movement_id),
            vec![
                (q, 1.0),
                (stage_vars[m.stage_index], 1.0 / h),
                (c_var, -rate),
            ],
            Sense::Ge,
            (m.yellow_lost + m.startup_lost) / h,
        );
        q_vars.push((m.movement_id.clone(), q));
    }

    let mut cvs = Vec::new();
    let mut clamped = 0usize;
    for m in &inst.movements {
        let Some(arrivals) = inst.cv_arrivals.get(&m.movement_id) else {
            continue;
        };
        if arrivals.is_empty() {
            continue;
        }
        let red_start = inst.red_starts[&m.movement_id];
        let rate = rates[&m.movement_id];
        let w = 1.0 - rate * m.discharge_headway;
        for (i, &t0) in arrivals.iter().enumerate() {
            let raw = t0 - red_start;
            let t_i = raw.max(0.0);
            if raw < 0.0 {
                clamped += 1;
            }
            let d = model.add_var(format!("d_{}_{i}", m.movement_id), 0.0, f64::INFINITY);
            model.set_objective(d, 1.0);
            // d >= (C - D_s) + L_s - w*t_i
            model.add_constraint(
                format!("delay_{}_{i}", m.movement_id),
                vec![(d, 1.0), (c_var, -1.0), (stage_vars[m.stage_index], 1.0)],
                Sense::Ge,
                m.startup_lost - w * t_i,
            );
            cvs.push(CvTerm {
                movement_id: m.movement_id.clone(),
                t0,
                t_mod: t_i,
                d_var: d,
                binding: BinaryBinding::None,
            });
        }
    }
    if clamped > 0 {
        log::debug!("real-time model clamped {clamped} arrivals at the red start");
    }

    Ok(BuiltModel {
        model,
        cycle: CycleVar::Var(c_var),
        stage_vars,
        q_vars,
        cvs,
        clamped_arrivals: clamped,
    })
}

//! Closed-form plan evaluation, the independent oracle for solver
//! tightness: at a fixed plan every delay and residual queue has an explicit
//! lower envelope, and minimization must land exactly on it.

use super::{
    cyclic_arrival_terms, Mode, MovementParams, OptimizationInstance, SignalPlan, SolveResult,
};
use crate::lp::SolveStatus;
use crate::trajectory::MovementId;
use crate::{Error, Result};
use std::collections::BTreeMap;

/// Per-CV closed-form delay.
#[derive(Debug, Clone, PartialEq)]
pub struct CvDelay {
    pub movement_id: MovementId,
    pub t_i0: f64,
    pub t_i: f64,
    pub d_i: f64,
}

/// Closed-form objective breakdown at a fixed plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormEval {
    pub objective: f64,
    pub delays: Vec<CvDelay>,
    pub residual_queues: BTreeMap<MovementId, f64>,
}

/// How cycle-relative arrivals derive from global ones.
#[derive(Debug, Clone, Copy)]
pub enum ArrivalConvention<'a> {
    /// Wrap into the cycle and measure from the movement's red start.
    FixedTime,
    /// Subtract the supplied red start, clamped at zero.
    RealTime {
        red_starts: &'a BTreeMap<MovementId, f64>,
    },
}

/// Evaluates a plan against a rate realization:
/// `d_i = max(0, R_k + L_s - (1 - rate*h)*t_i)` and
/// `Q_k = max(0, rate*C - G_eff/h)`, objective `sum d_i + alpha * sum Q_k`.
pub fn evaluate_plan_closed_form(
    plan: &SignalPlan,
    movements: &[MovementParams],
    rates: &BTreeMap<MovementId, f64>,
    cv_arrivals: &BTreeMap<MovementId, Vec<f64>>,
    alpha: f64,
    convention: ArrivalConvention<'_>,
) -> Result<ClosedFormEval> {
    let mut delays = Vec::new();
    let mut residual_queues = BTreeMap::new();
    let mut objective = 0.0;
    for m in movements {
        let rate = *rates.get(&m.movement_id).ok_or_else(|| {
            Error::Parameter(format!("no rate for movement {}", m.movement_id))
        })?;
        let red = plan.red_time(m)?;
        let g_eff = plan.effective_green(m)?;
        let w = 1.0 - rate * m.discharge_headway;

        let q = (rate * plan.cycle_length - g_eff / m.discharge_headway).max(0.0);
        objective += alpha * q;
        residual_queues.insert(m.movement_id.clone(), q);

        if let Some(arrivals) = cv_arrivals.get(&m.movement_id) {
            let green = plan.green(&m.movement_id)?;
            for &t0 in arrivals {
                let t_i = match convention {
                    ArrivalConvention::FixedTime => {
                        cyclic_arrival_terms(t0, plan.cycle_length, green.end, m.yellow).2
                    }
                    ArrivalConvention::RealTime { red_starts } => {
                        let rs = *red_starts.get(&m.movement_id).ok_or_else(|| {
                            Error::Parameter(format!(
                                "no red start for movement {}",
                                m.movement_id
                            ))
                        })?;
                        (t0 - rs).max(0.0)
                    }
                };
                let d = (red + m.startup_lost - w * t_i).max(0.0);
                objective += d;
                delays.push(CvDelay {
                    movement_id: m.movement_id.clone(),
                    t_i0: t0,
                    t_i,
                    d_i: d,
                });
            }
        }
    }
    Ok(ClosedFormEval {
        objective,
        delays,
        residual_queues,
    })
}

/// Verifies that an `Optimal` solve sits exactly on the closed-form lower
/// envelopes: every `d_i` and `Q_k` within `tol` of the evaluator at the
/// returned plan, every wrap binary equal to the branch rule, and every
/// cycle-relative arrival inside `[0, C)`. Returns a description of the
/// first mismatch.
pub fn check_solver_tightness(
    result: &SolveResult,
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
    tol: f64,
) -> std::result::Result<(), String> {
    if result.status != SolveStatus::Optimal {
        return Err(format!("expected an optimal result, got {:?}", result.status));
    }
    let plan = result
        .plan(&inst.movements)
        .map_err(|e| format!("result has no plan: {e}"))?;
    let convention = match inst.mode {
        Mode::FixedTime => ArrivalConvention::FixedTime,
        Mode::RealTime => ArrivalConvention::RealTime {
            red_starts: &inst.red_starts,
        },
    };
    let cf = evaluate_plan_closed_form(
        &plan,
        &inst.movements,
        rates,
        &inst.cv_arrivals,
        inst.alpha,
        convention,
    )
    .map_err(|e| format!("closed form failed: {e}"))?;

    if (cf.objective - result.objective).abs() > tol * (1.0 + cf.objective.abs()) {
        return Err(format!(
            "objective mismatch: solver {} vs closed form {}",
            result.objective, cf.objective
        ));
    }
    if cf.delays.len() != result.cvs.len() {
        return Err(format!(
            "cv count mismatch: solver {} vs closed form {}",
            result.cvs.len(),
            cf.delays.len()
        ));
    }
    for (got, want) in result.cvs.iter().zip(&cf.delays) {
        if got.movement_id != want.movement_id || (got.t_i0 - want.t_i0).abs() > 1e-9 {
            return Err(format!(
                "cv ordering mismatch at movement {} t0 {}",
                got.movement_id, got.t_i0
            ));
        }
        if (got.d_i - want.d_i).abs() > tol * (1.0 + want.d_i.abs()) {
            return Err(format!(
                "delay mismatch for {} t0={}: solver {} vs closed form {}",
                got.movement_id, got.t_i0, got.d_i, want.d_i
            ));
        }
        if !(-tol..result.cycle_length.unwrap_or(f64::INFINITY)).contains(&got.t_i) {
            return Err(format!(
                "t_i {} outside [0, C) for {} t0={}",
                got.t_i, got.movement_id, got.t_i0
            ));
        }
        if inst.mode == Mode::FixedTime {
            let m = inst.movement(&got.movement_id).expect("movement exists");
            let green = plan.green(&got.movement_id).expect("green exists");
            let (_, b_rule, t_rule) =
                cyclic_arrival_terms(got.t_i0, plan.cycle_length, green.end, m.yellow);
            match got.b_i {
                Some(b) if b == b_rule => {}
                other => {
                    return Err(format!(
                        "binary mismatch for {} t0={}: solver {:?} vs rule {} (t_rule={t_rule})",
                        got.movement_id, got.t_i0, other, b_rule
                    ))
                }
            }
            if (got.t_i - t_rule).abs() > tol * (1.0 + t_rule.abs()) {
                return Err(format!(
                    "t_i mismatch for {} t0={}: solver {} vs rule {t_rule}",
                    got.movement_id, got.t_i0, got.t_i
                ));
            }
        }
    }
    for (id, want) in &cf.residual_queues {
        let got = result
            .movements
            .get(id)
            .ok_or_else(|| format!("result lacks movement {id}"))?;
        if (got.residual_queue - want).abs() > tol * (1.0 + want.abs()) {
            return Err(format!(
                "residual queue mismatch for {id}: solver {} vs closed form {want}",
                got.residual_queue
            ));
        }
    }
    Ok(())
}

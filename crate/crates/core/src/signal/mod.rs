//! Robust signal-timing optimization.
//!
//! The timing program minimizes total CV delay plus a residual-queue penalty
//! over cycle length and per-stage green durations, subject to per-CV delay
//! constraints, per-movement residual-queue constraints, and the stage
//! structure. Over a box uncertainty set the worst case fixes every arrival
//! rate at its interval's upper endpoint (all rate coefficients are
//! nonnegative for nonnegative cycle-relative arrivals), so the min-max
//! program reduces to one deterministic MILP per candidate cycle length in
//! fixed-time mode, or a single LP in real-time mode.

mod build;
mod evaluate;
mod optimize;

pub use build::{build_fixed_time_model, build_real_time_model, BuiltModel, CvTerm};
pub use evaluate::{
    check_solver_tightness, evaluate_plan_closed_form, ArrivalConvention, ClosedFormEval, CvDelay,
};
pub use optimize::{
    deterministic_baseline, optimize_fixed_time, optimize_real_time, optimize_with_rates,
    solve_built_model, CandidateDiag,
};

use crate::lp::{MilpStats, SolveStatus};
use crate::trajectory::MovementId;
use crate::uncertainty::BoxUncertaintySet;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Fixed movement parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementParams {
    pub movement_id: MovementId,
    /// Discharge headway h_k, seconds/vehicle.
    pub discharge_headway: f64,
    /// Yellow time Y_k, seconds.
    pub yellow: f64,
    /// Start-up lost time, seconds.
    pub startup_lost: f64,
    /// Yellow lost time, seconds.
    pub yellow_lost: f64,
    /// Stage this movement receives green in.
    pub stage_index: usize,
}

impl MovementParams {
    pub fn validate(&self) -> Result<()> {
        if self.discharge_headway <= 0.0 {
            return Err(Error::Parameter(format!(
                "movement {}: discharge headway must be positive",
                self.movement_id
            )));
        }
        if !(self.yellow >= self.yellow_lost && self.yellow_lost >= 0.0) {
            return Err(Error::Parameter(format!(
                "movement {}: require yellow >= yellow_lost >= 0",
                self.movement_id
            )));
        }
        if self.startup_lost < 0.0 {
            return Err(Error::Parameter(format!(
                "movement {}: start-up lost time must be nonnegative",
                self.movement_id
            )));
        }
        Ok(())
    }
}

/// One stage of the single-ring sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub min_green: f64,
    pub movements: Vec<MovementId>,
}

/// Ordered stages plus cycle-length bounds. Stage spans tile the cycle in
/// order; each movement's yellow sits at the end of its stage span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseStructure {
    pub stages: Vec<Stage>,
    pub c_min: f64,
    pub c_max: f64,
}

impl PhaseStructure {
    pub fn min_green_total(&self) -> f64 {
        self.stages.iter().map(|s| s.min_green).sum()
    }

    /// Checks stage membership against the movement list: every movement in
    /// exactly one stage, matching its declared stage index, and stage
    /// minimum greens long enough to cover yellows and lost times.
    pub fn validate(&self, movements: &[MovementParams]) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Parameter("phase structure has no stages".into()));
        }
        if !(self.c_min > 0.0 && self.c_min <= self.c_max) {
            return Err(Error::Parameter(format!(
                "require 0 < c_min <= c_max, got [{}, {}]",
                self.c_min, self.c_max
            )));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.min_green <= 0.0 {
                return Err(Error::Parameter(format!("stage {i}: min_green must be positive")));
            }
        }
        for m in movements {
            m.validate()?;
            let Some(stage) = self.stages.get(m.stage_index) else {
                return Err(Error::Parameter(format!(
                    "movement {} references stage {} of {}",
                    m.movement_id,
                    m.stage_index,
                    self.stages.len()
                )));
            };
            if !stage.movements.contains(&m.movement_id) {
                return Err(Error::Parameter(format!(
                    "movement {} missing from stage {} member list",
                    m.movement_id, m.stage_index
                )));
            }
            let needed = (m.yellow + 0.1).max(m.startup_lost + m.yellow_lost);
            if stage.min_green < needed {
                return Err(Error::Parameter(format!(
                    "stage {} min_green {} too short for movement {} (needs >= {})",
                    m.stage_index, stage.min_green, m.movement_id, needed
                )));
            }
            let members = self
                .stages
                .iter()
                .filter(|s| s.movements.contains(&m.movement_id))
                .count();
            if members != 1 {
                return Err(Error::Parameter(format!(
                    "movement {} appears in {} stages, expected exactly 1",
                    m.movement_id, members
                )));
            }
        }
        for stage in &self.stages {
            for id in &stage.movements {
                if !movements.iter().any(|m| &m.movement_id == id) {
                    return Err(Error::Parameter(format!(
                        "stage member {id} has no movement parameters"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Cycle-relative green window of one movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenWindow {
    pub start: f64,
    pub end: f64,
}

/// A timing plan: cycle length and one green window per movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPlan {
    pub cycle_length: f64,
    pub greens: BTreeMap<MovementId, GreenWindow>,
}

impl SignalPlan {
    pub fn green(&self, movement: &MovementId) -> Result<GreenWindow> {
        self.greens.get(movement).copied().ok_or_else(|| {
            Error::Plan(format!("plan has no green window for movement {movement}"))
        })
    }

    /// Red time R_k = C - (g_e - g_s + Y_k).
    pub fn red_time(&self, m: &MovementParams) -> Result<f64> {
        let g = self.green(&m.movement_id)?;
        Ok(self.cycle_length - (g.end - g.start + m.yellow))
    }

    /// Effective green G_eff = g_e - g_s + Y_k - L_y - L_s.
    pub fn effective_green(&self, m: &MovementParams) -> Result<f64> {
        let g = self.green(&m.movement_id)?;
        Ok(g.end - g.start + m.yellow - m.yellow_lost - m.startup_lost)
    }

    /// Cycle-relative red start of the movement: the end of its yellow.
    pub fn red_start_offset(&self, m: &MovementParams) -> Result<f64> {
        let g = self.green(&m.movement_id)?;
        Ok(g.end + m.yellow)
    }

    /// Checks window ordering, nonnegative red and effective green, and the
    /// stage sequencing (greens of stage j end before stage j+1 begins).
    pub fn validate(&self, movements: &[MovementParams]) -> Result<()> {
        const TOL: f64 = 1e-6;
        for m in movements {
            let g = self.green(&m.movement_id)?;
            if !(-TOL..=self.cycle_length + TOL).contains(&g.start) || g.start >= g.end - TOL {
                return Err(Error::Plan(format!(
                    "movement {}: bad green window [{}, {}] in cycle {}",
                    m.movement_id, g.start, g.end, self.cycle_length
                )));
            }
            if g.end + m.yellow > self.cycle_length + TOL {
                return Err(Error::Plan(format!(
                    "movement {}: green plus yellow exceeds cycle",
                    m.movement_id
                )));
            }
            if self.red_time(m)? < -TOL {
                return Err(Error::Plan(format!("movement {}: negative red", m.movement_id)));
            }
            if self.effective_green(m)? < -TOL {
                return Err(Error::Plan(format!(
                    "movement {}: negative effective green",
                    m.movement_id
                )));
            }
        }
        // Stage ordering.
        for a in movements {
            for b in movements {
                if a.stage_index < b.stage_index {
                    let ga = self.green(&a.movement_id)?;
                    let gb = self.green(&b.movement_id)?;
                    if ga.end > gb.start + TOL {
                        return Err(Error::Plan(format!(
                            "stage order violated: {} (stage {}) ends after {} (stage {}) starts",
                            a.movement_id, a.stage_index, b.movement_id, b.stage_index
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Control regime the program is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    FixedTime,
    RealTime,
}

/// Everything the model builders need.
#[derive(Debug, Clone)]
pub struct OptimizationInstance {
    pub mode: Mode,
    pub movements: Vec<MovementParams>,
    pub phase: PhaseStructure,
    /// Global virtual arrival times of the CVs per movement.
    pub cv_arrivals: BTreeMap<MovementId, Vec<f64>>,
    /// Residual-queue penalty (time-of-day length for fixed-time control,
    /// historical average cycle length for real-time control).
    pub alpha: f64,
    /// Per-movement red start on the global clock (real-time mode only).
    pub red_starts: BTreeMap<MovementId, f64>,
    pub big_m: f64,
    pub epsilon: f64,
}

impl OptimizationInstance {
    pub fn validate(&self) -> Result<()> {
        if self.alpha <= 0.0 {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.movements.is_empty() {
            return Err(Error::Parameter("instance has no movements".into()));
        }
        self.phase.validate(&self.movements)?;
        if self.big_m <= self.phase.c_max {
            return Err(Error::Parameter(format!(
                "big M ({}) must exceed the largest cycle length ({})",
                self.big_m, self.phase.c_max
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        if self.mode == Mode::RealTime {
            for (id, arrivals) in &self.cv_arrivals {
                if !arrivals.is_empty() && !self.red_starts.contains_key(id) {
                    return Err(Error::Parameter(format!(
                        "real-time mode needs a red start for movement {id}"
                    )));
                }
            }
        }
        for id in self.cv_arrivals.keys() {
            if !self.movements.iter().any(|m| &m.movement_id == id) {
                return Err(Error::Parameter(format!(
                    "CV arrivals reference unknown movement {id}"
                )));
            }
        }
        Ok(())
    }

    pub fn movement(&self, id: &MovementId) -> Option<&MovementParams> {
        self.movements.iter().find(|m| &m.movement_id == id)
    }
}

/// Default big-M constant for the cyclic-arrival linearization.
pub const DEFAULT_BIG_M: f64 = 300.0;
/// Default tie-breaking epsilon for the linearization.
pub const DEFAULT_EPSILON: f64 = 0.001;

/// Worst-case rate realization over the box set: the upper endpoint per
/// movement. Exact because every rate coefficient in the delay and
/// residual-queue constraints is nonnegative once cycle-relative arrivals
/// are nonnegative.
pub fn robust_counterpart(set: &BoxUncertaintySet) -> BTreeMap<MovementId, f64> {
    set.upper_rates()
}

/// The cyclic-arrival linearization, evaluated directly: wraps the global
/// virtual arrival into the cycle, then measures it from the movement's red
/// start (green end plus yellow), adding one cycle when it lands before the
/// red start. Returns `(t_mod, b, t_i)`. Serves both as the template the
/// model builder linearizes with big-M side constraints and as the post-hoc
/// verifier of solved binaries; exact equality at `t_mod == g_e + Y` takes
/// `b = 0` (the epsilon term in the side constraints breaks the tie that
/// way).
pub fn cyclic_arrival_terms(t0: f64, cycle: f64, green_end: f64, yellow: f64) -> (f64, u8, f64) {
    let t_mod = t0 - (t0 / cycle).floor() * cycle;
    let expr = t_mod - green_end - yellow;
    let b = u8::from(expr < 0.0);
    let t_i = expr + f64::from(b) * cycle;
    (t_mod, b, t_i)
}

/// Per-CV record in a solve result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub movement_id: MovementId,
    pub t_i0: f64,
    pub t_i: f64,
    pub d_i: f64,
    /// Cyclic wrap binary; absent in real-time mode.
    pub b_i: Option<u8>,
}

/// Per-movement record in a solve result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovementOutcome {
    pub g_s: f64,
    pub g_e: f64,
    #[serde(rename = "Q_k")]
    pub residual_queue: f64,
}

/// Result of a timing optimization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    #[serde(rename = "C")]
    pub cycle_length: Option<f64>,
    pub movements: BTreeMap<MovementId, MovementOutcome>,
    pub cvs: Vec<CvOutcome>,
    /// One entry per attempted cycle-length candidate (fixed-time mode).
    pub candidates: Vec<CandidateDiag>,
    #[serde(skip)]
    pub stats: MilpStats,
}

impl SolveResult {
    pub fn plan(&self, movements: &[MovementParams]) -> Result<SignalPlan> {
        let c = self
            .cycle_length
            .ok_or_else(|| Error::Infeasible("no plan in solve result".into()))?;
        let mut greens = BTreeMap::new();
        for m in movements {
            let out = self.movements.get(&m.movement_id).ok_or_else(|| {
                Error::Plan(format!("result lacks movement {}", m.movement_id))
            })?;
            greens.insert(
                m.movement_id.clone(),
                GreenWindow {
                    start: out.g_s,
                    end: out.g_e,
                },
            );
        }
        Ok(SignalPlan {
            cycle_length: c,
            greens,
        })
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_terms_unwrapped_branch() {
        // t0=250, C=100, g_e=40, Y=3: t_mod=50, expr=7 >= 0 so b=0, t_i=7.
        let (t_mod, b, t_i) = cyclic_arrival_terms(250.0, 100.0, 40.0, 3.0);
        assert_eq!(t_mod, 50.0);
        assert_eq!(b, 0);
        assert!((t_i - 7.0).abs() < 1e-12);
    }

    #[test]
    fn cyclic_terms_wrapped_branch() {
        // t0=220, C=100, g_e=43, Y=0: t_mod=20, expr=-23 < 0 so b=1, t_i=77.
        let (t_mod, b, t_i) = cyclic_arrival_terms(220.0, 100.0, 43.0, 0.0);
        assert_eq!(t_mod, 20.0);
        assert_eq!(b, 1);
        assert!((t_i - 77.0).abs() < 1e-12);
    }

    #[test]
    fn cyclic_terms_boundary_takes_zero() {
        // t0 exactly at g_e + Y (within the first cycle): b=0 and t_i=0.
        let (t_mod, b, t_i) = cyclic_arrival_terms(43.0, 100.0, 40.0, 3.0);
        assert_eq!(t_mod, 43.0);
        assert_eq!(b, 0);
        assert_eq!(t_i, 0.0);
    }

    #[test]
    fn cyclic_terms_range_property() {
        for k in 0..500 {
            let t0 = 0.37 + 13.77 * k as f64;
            let (_, _, t_i) = cyclic_arrival_terms(t0, 90.0, 55.0, 3.0);
            assert!((0.0..90.0).contains(&t_i), "t_i={t_i} out of range");
        }
    }

    #[test]
    fn robust_counterpart_is_upper_endpoints() {
        use crate::uncertainty::BoxInterval;
        let mut set = BoxUncertaintySet::default();
        set.movements.insert(
            MovementId("k1".into()),
            BoxInterval {
                l_hat: 0.1,
                u_hat: 0.3,
                support_count: 3,
            },
        );
        set.movements.insert(
            MovementId("k2".into()),
            BoxInterval {
                l_hat: 0.2,
                u_hat: 0.5,
                support_count: 3,
            },
        );
        let rates = robust_counterpart(&set);
        assert_eq!(rates[&MovementId("k1".into())], 0.3);
        assert_eq!(rates[&MovementId("k2".into())], 0.5);

        // Degenerate and single-movement boxes.
        let mut set = BoxUncertaintySet::default();
        set.movements.insert(
            MovementId("k".into()),
            BoxInterval {
                l_hat: 0.25,
                u_hat: 0.25,
                support_count: 1,
            },
        );
        assert_eq!(robust_counterpart(&set)[&MovementId("k".into())], 0.25);
    }
}

//! Experiment configuration: one TOML document describes the intersection,
//! the demand scenario, the bounds parameters, the base (data-collection)
//! plan, the optimizer settings, and the sweep axes, so a whole experiment
//! reproduces from a single artifact plus a seed.

use crate::signal::{
    GreenWindow, Mode, MovementParams, OptimizationInstance, PhaseStructure, SignalPlan, Stage,
    DEFAULT_BIG_M, DEFAULT_EPSILON,
};
use crate::sim::{MovementDemand, ScenarioConfig};
use crate::trajectory::{ClassifyParams, MovementId};
use crate::uncertainty::BoundsParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub intersection: IntersectionSection,
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    pub base_plan: PlanSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub io: IoSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionSection {
    #[serde(default = "default_c_min")]
    pub c_min: f64,
    #[serde(default = "default_c_max")]
    pub c_max: f64,
    pub stages: Vec<StageSection>,
    pub movements: Vec<MovementSection>,
}

fn default_c_min() -> f64 {
    40.0
}
fn default_c_max() -> f64 {
    160.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSection {
    pub min_green: f64,
    pub movements: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementSection {
    pub id: String,
    pub stage: usize,
    #[serde(default = "default_headway")]
    pub discharge_headway: f64,
    #[serde(default = "default_yellow")]
    pub yellow: f64,
    #[serde(default = "default_startup_lost")]
    pub startup_lost: f64,
    #[serde(default = "default_yellow_lost")]
    pub yellow_lost: f64,
    #[serde(default)]
    pub demand_vph: f64,
}

fn default_headway() -> f64 {
    2.0
}
fn default_yellow() -> f64 {
    3.0
}
fn default_startup_lost() -> f64 {
    2.0
}
fn default_yellow_lost() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    #[serde(default)]
    pub fluctuation_cv: f64,
    #[serde(default = "default_penetration")]
    pub penetration_rate: f64,
    #[serde(default = "default_horizon")]
    pub horizon_cycles: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_link_length")]
    pub link_length: f64,
    #[serde(default = "default_free_flow")]
    pub free_flow_speed: f64,
    #[serde(default = "default_jam_spacing")]
    pub jam_spacing: f64,
}

fn default_penetration() -> f64 {
    1.0
}
fn default_horizon() -> usize {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_link_length() -> f64 {
    600.0
}
fn default_free_flow() -> f64 {
    15.0
}
fn default_jam_spacing() -> f64 {
    7.0
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            fluctuation_cv: 0.0,
            penetration_rate: default_penetration(),
            horizon_cycles: default_horizon(),
            seed: default_seed(),
            link_length: default_link_length(),
            free_flow_speed: default_free_flow(),
            jam_spacing: default_jam_spacing(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    /// Empirical maximum arrival rate; default is the saturation rate 1/h_s.
    pub lambda_max: Option<f64>,
    /// Queued-vehicle headway for the upper-bound cap; default is the mean
    /// movement discharge headway.
    pub h_s: Option<f64>,
    #[serde(default = "default_stop_speed")]
    pub stop_speed: f64,
    #[serde(default = "default_min_stop")]
    pub min_stop_duration: f64,
}

fn default_stop_speed() -> f64 {
    2.0
}
fn default_min_stop() -> f64 {
    4.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub cycle_length: f64,
    pub greens: BTreeMap<String, GreenSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenSection {
    pub g_s: f64,
    pub g_e: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default = "default_mode")]
    pub mode: String,
    /// Residual-queue penalty; defaults to 3600 s (time-of-day length) in
    /// fixed-time mode and the base-plan cycle length in real-time mode.
    pub alpha: Option<f64>,
    #[serde(default = "default_big_m")]
    pub big_m: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Cycle-length grid step for fixed-time search over [c_min, c_max].
    #[serde(default = "default_grid_step")]
    pub cycle_grid_step: f64,
    /// Explicit grid override.
    pub cycle_grid: Option<Vec<f64>>,
    /// Base-plan cycle index whose red starts anchor real-time arrivals.
    #[serde(default)]
    pub target_cycle: i64,
}

fn default_mode() -> String {
    "fixed-time".into()
}
fn default_big_m() -> f64 {
    DEFAULT_BIG_M
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_grid_step() -> f64 {
    2.0
}

impl Default for OptimizeSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            alpha: None,
            big_m: default_big_m(),
            epsilon: default_epsilon(),
            cycle_grid_step: default_grid_step(),
            cycle_grid: None,
            target_cycle: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_penetrations")]
    pub penetration_rates: Vec<f64>,
    pub fluctuation_cvs: Option<Vec<f64>>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_train_cycles")]
    pub train_cycles: usize,
    #[serde(default = "default_eval_cycles")]
    pub eval_cycles: usize,
    pub master_seed: Option<u64>,
    /// Worker threads for the cell fan-out; 0 means all available cores.
    #[serde(default)]
    pub workers: usize,
}

fn default_methods() -> Vec<String> {
    vec!["cv-ro".into(), "cv-do".into(), "true-rate".into()]
}
fn default_penetrations() -> Vec<f64> {
    vec![0.1, 0.2, 0.4, 0.8, 1.0]
}
fn default_replications() -> usize {
    20
}
fn default_train_cycles() -> usize {
    40
}
fn default_eval_cycles() -> usize {
    100
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            methods: default_methods(),
            penetration_rates: default_penetrations(),
            fluctuation_cvs: None,
            replications: default_replications(),
            train_cycles: default_train_cycles(),
            eval_cycles: default_eval_cycles(),
            master_seed: None,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    /// Trajectory CSV consumed by `bounds` and `optimize`.
    pub trajectories: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.phase()?.validate(&self.movements())?;
        self.scenario(self.scenario.horizon_cycles, self.scenario.seed)?
            .validate()?;
        self.base_plan()?.validate(&self.movements())?;
        self.bounds_params()?.validate()?;
        match self.optimize.mode.as_str() {
            "fixed-time" | "real-time" => {}
            other => {
                return Err(Error::Config(format!(
                    "optimize.mode must be \"fixed-time\" or \"real-time\", got {other:?}"
                )))
            }
        }
        for m in &self.sweep.methods {
            parse_method(m)?;
        }
        if self.sweep.replications < 1 {
            return Err(Error::Config("sweep.replications must be at least 1".into()));
        }
        if self.sweep.penetration_rates.is_empty() {
            return Err(Error::Config("sweep.penetration_rates must be nonempty".into()));
        }
        if self.sweep.methods.is_empty() {
            return Err(Error::Config("sweep.methods must be nonempty".into()));
        }
        Ok(())
    }

    pub fn movements(&self) -> Vec<MovementParams> {
        self.intersection
            .movements
            .iter()
            .map(|m| MovementParams {
                movement_id: MovementId(m.id.clone()),
                discharge_headway: m.discharge_headway,
                yellow: m.yellow,
                startup_lost: m.startup_lost,
                yellow_lost: m.yellow_lost,
                stage_index: m.stage,
            })
            .collect()
    }

    pub fn phase(&self) -> Result<PhaseStructure> {
        Ok(PhaseStructure {
            stages: self
                .intersection
                .stages
                .iter()
                .map(|s| Stage {
                    min_green: s.min_green,
                    movements: s.movements.iter().map(|id| MovementId(id.clone())).collect(),
                })
                .collect(),
            c_min: self.intersection.c_min,
            c_max: self.intersection.c_max,
        })
    }

    pub fn scenario(&self, horizon_cycles: usize, seed: u64) -> Result<ScenarioConfig> {
        Ok(ScenarioConfig {
            demands: self
                .intersection
                .movements
                .iter()
                .map(|m| MovementDemand {
                    movement_id: MovementId(m.id.clone()),
                    demand_vph: m.demand_vph,
                })
                .collect(),
            fluctuation_cv: self.scenario.fluctuation_cv,
            penetration_rate: self.scenario.penetration_rate,
            horizon_cycles,
            seed,
            link_length: self.scenario.link_length,
            free_flow_speed: self.scenario.free_flow_speed,
            jam_spacing: self.scenario.jam_spacing,
        })
    }

    pub fn base_plan(&self) -> Result<SignalPlan> {
        let mut greens = BTreeMap::new();
        for m in &self.intersection.movements {
            let g = self.base_plan.greens.get(&m.id).ok_or_else(|| {
                Error::Config(format!("base_plan.greens missing movement {}", m.id))
            })?;
            greens.insert(
                MovementId(m.id.clone()),
                GreenWindow {
                    start: g.g_s,
                    end: g.g_e,
                },
            );
        }
        Ok(SignalPlan {
            cycle_length: self.base_plan.cycle_length,
            greens,
        })
    }

    pub fn mean_discharge_headway(&self) -> f64 {
        let ms = &self.intersection.movements;
        ms.iter().map(|m| m.discharge_headway).sum::<f64>() / ms.len().max(1) as f64
    }

    pub fn bounds_params(&self) -> Result<BoundsParams> {
        let h_s = self.bounds.h_s.unwrap_or_else(|| self.mean_discharge_headway());
        Ok(BoundsParams {
            lambda_max: self.bounds.lambda_max.unwrap_or(1.0 / h_s),
            h_s,
        })
    }

    pub fn classify_params(&self) -> ClassifyParams {
        ClassifyParams {
            stop_speed: self.bounds.stop_speed,
            min_stop_duration: self.bounds.min_stop_duration,
            jam_spacing: self.scenario.jam_spacing,
            free_flow_speed: self.scenario.free_flow_speed,
        }
    }

    pub fn mode(&self) -> Mode {
        match self.optimize.mode.as_str() {
            "real-time" => Mode::RealTime,
            _ => Mode::FixedTime,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.optimize.alpha.unwrap_or(match self.mode() {
            Mode::FixedTime => 3600.0,
            Mode::RealTime => self.base_plan.cycle_length,
        })
    }

    /// Fixed-time candidate cycle lengths: the explicit list when given,
    /// otherwise [c_min, c_max] stepped by `cycle_grid_step`.
    pub fn cycle_grid(&self) -> Vec<f64> {
        if let Some(grid) = &self.optimize.cycle_grid {
            let mut g = grid.clone();
            g.sort_by(f64::total_cmp);
            g.dedup();
            return g;
        }
        let mut g = Vec::new();
        let mut c = self.intersection.c_min;
        while c <= self.intersection.c_max + 1e-9 {
            g.push(c);
            c += self.optimize.cycle_grid_step;
        }
        g
    }

    /// Red starts of the base plan's `target_cycle`, for real-time mode.
    pub fn red_starts(&self) -> Result<BTreeMap<MovementId, f64>> {
        let plan = self.base_plan()?;
        let mut out = BTreeMap::new();
        for m in self.movements() {
            let offset = plan.red_start_offset(&m)?;
            out.insert(
                m.movement_id.clone(),
                offset + self.optimize.target_cycle as f64 * plan.cycle_length,
            );
        }
        Ok(out)
    }

    /// Assembles an optimization instance from parsed trajectories' virtual
    /// arrivals.
    pub fn instance(&self, cv_arrivals: BTreeMap<MovementId, Vec<f64>>) -> Result<OptimizationInstance> {
        let inst = OptimizationInstance {
            mode: self.mode(),
            movements: self.movements(),
            phase: self.phase()?,
            cv_arrivals,
            alpha: self.alpha(),
            red_starts: if self.mode() == Mode::RealTime {
                self.red_starts()?
            } else {
                BTreeMap::new()
            },
            big_m: self.optimize.big_m,
            epsilon: self.optimize.epsilon,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Benchmark method identifiers used in sweeps and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Robust optimization over the CV-derived box set.
    CvRo,
    /// Deterministic optimization at the CV-derived mean rates.
    CvDo,
    /// Deterministic optimization at the simulator's true mean rates.
    TrueRate,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::CvRo => "cv-ro",
            Method::CvDo => "cv-do",
            Method::TrueRate => "true-rate",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub fn parse_method(s: &str) -> Result<Method> {
    match s.to_ascii_lowercase().as_str() {
        "cv-ro" | "cvro" => Ok(Method::CvRo),
        "cv-do" | "cvdo" => Ok(Method::CvDo),
        "true-rate" | "truerate" => Ok(Method::TrueRate),
        other => Err(Error::Config(format!(
            "unknown method {other:?}; expected cv-ro, cv-do, or true-rate"
        ))),
    }
}

//! Discrete-time point-queue simulation of one signalized intersection.
//!
//! Vehicles traverse the approach link at free-flow speed, stack in a
//! vertical queue at the stopline, and discharge one per saturation headway
//! during effective green (start-up lost time delays the first discharge;
//! the usable window extends through the yellow minus the yellow lost
//! time). Control delay is the stopline crossing time minus the unimpeded
//! crossing time. Everything runs on a 0.1 s tick grid and is deterministic
//! given (plan, arrivals, config).
//!
//! Each movement's cycle on its own clock starts at its red start (the end
//! of its yellow), so per-cycle ground truth lines up with the windows the
//! trajectory classifier uses.

mod demand;
mod trajectories;

pub use demand::{derive_seed, generate_demand};
pub use trajectories::sample_cvs;

use crate::signal::{MovementParams, SignalPlan};
use crate::trajectory::{CycleSpec, MovementId};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Simulation timestep, seconds.
pub const TICK: f64 = 0.1;

pub fn to_tick(seconds: f64) -> i64 {
    (seconds / TICK).round() as i64
}

pub fn to_seconds(tick: i64) -> f64 {
    tick as f64 * TICK
}

/// Mean demand for one movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementDemand {
    pub movement_id: MovementId,
    pub demand_vph: f64,
}

/// Scenario knobs for one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub demands: Vec<MovementDemand>,
    /// Coefficient of variation of the per-cycle demand rate.
    pub fluctuation_cv: f64,
    /// Fraction of vehicles that report trajectories.
    pub penetration_rate: f64,
    pub horizon_cycles: usize,
    pub seed: u64,
    /// Approach link length, meters.
    pub link_length: f64,
    /// Free-flow speed, m/s.
    pub free_flow_speed: f64,
    /// Stopped vehicle spacing, meters/vehicle.
    pub jam_spacing: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.demands.is_empty() {
            return Err(Error::Config("scenario has no movement demands".into()));
        }
        for d in &self.demands {
            if d.demand_vph < 0.0 {
                return Err(Error::Config(format!(
                    "movement {}: negative demand",
                    d.movement_id
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.penetration_rate) {
            return Err(Error::Config(format!(
                "penetration rate {} outside [0, 1]",
                self.penetration_rate
            )));
        }
        if self.fluctuation_cv < 0.0 {
            return Err(Error::Config("fluctuation_cv must be nonnegative".into()));
        }
        if self.horizon_cycles < 1 {
            return Err(Error::Config("horizon_cycles must be at least 1".into()));
        }
        if self.link_length <= 0.0 || self.free_flow_speed <= 0.0 || self.jam_spacing <= 0.0 {
            return Err(Error::Config(
                "link_length, free_flow_speed, jam_spacing must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One standstill of one vehicle (engine-side record; trajectory emission
/// re-derives the creep between consecutive stops).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopSeg {
    pub distance: f64,
    pub start: f64,
    pub end: f64,
}

/// Full history of one simulated vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    pub movement_id: MovementId,
    pub seq: u64,
    /// Quantized virtual (unimpeded) stopline arrival, seconds.
    pub virtual_arrival: f64,
    /// Link entry time: virtual arrival minus the free-flow travel time.
    pub entry_time: f64,
    pub crossing: Option<f64>,
    pub stops: Vec<StopSeg>,
    /// Joined a discharging queue: delayed but never at standstill.
    pub creep_join: bool,
}

impl VehicleRecord {
    pub fn delay(&self) -> Option<f64> {
        self.crossing.map(|c| c - self.virtual_arrival)
    }

    pub fn vehicle_id(&self) -> String {
        format!("{}-{:06}", self.movement_id, self.seq)
    }
}

/// Ground truth for one movement-cycle window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub movement_id: MovementId,
    pub cycle_index: i64,
    /// True arrivals: vehicles whose virtual arrival falls in the window.
    pub arrivals: u32,
    pub residual_at_start: u32,
    pub residual_at_end: u32,
}

impl CycleTruth {
    pub fn undersaturated(&self) -> bool {
        self.residual_at_start == 0 && self.residual_at_end == 0
    }
}

/// Output of one simulation run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub vehicles: Vec<VehicleRecord>,
    pub cycles: Vec<CycleTruth>,
    /// Mean control delay over vehicles that crossed, seconds.
    pub average_delay: f64,
    /// A queue outgrew the link storage at some point.
    pub spillback: bool,
    /// End of the demand horizon (drain time excluded), seconds.
    pub horizon_end: f64,
}

/// Per-movement cycle windows aligned with the movement's red start, for
/// `1..horizon_cycles` (the partial leading window is dropped).
pub fn movement_cycles(
    plan: &SignalPlan,
    m: &MovementParams,
    horizon_cycles: usize,
) -> Result<Vec<CycleSpec>> {
    let c = plan.cycle_length;
    let green = plan.green(&m.movement_id)?;
    let red_offset = green.end + m.yellow;
    let red_len = c - (green.end - green.start + m.yellow);
    let green_len = green.end - green.start;
    let mut out = Vec::new();
    for idx in 1..horizon_cycles as i64 {
        let red_start = red_offset + (idx - 1) as f64 * c;
        out.push(CycleSpec {
            cycle_index: idx,
            red_start,
            green_start: red_start + red_len,
            green_end: red_start + red_len + green_len,
            cycle_length: c,
            yellow: m.yellow,
        });
    }
    Ok(out)
}

struct QueueEntry {
    vehicle: usize,
    /// Position on the standing-queue grid (1 = at the stopline).
    position: u32,
    /// The vehicle joined a moving queue: no standstill recorded (yet).
    creep: bool,
}

/// Runs the point-queue dynamics for `plan` against pre-generated virtual
/// arrival times (seconds, per movement). The engine simulates one extra
/// cycle past the demand horizon so trailing queues can drain.
pub fn simulate(
    plan: &SignalPlan,
    movements: &[MovementParams],
    arrivals: &BTreeMap<MovementId, Vec<f64>>,
    config: &ScenarioConfig,
) -> Result<SimResult> {
    config.validate()?;
    plan.validate(movements)?;
    let c = plan.cycle_length;
    let horizon_end_tick = to_tick(c * config.horizon_cycles as f64);
    let sim_end_tick = horizon_end_tick + to_tick(c);
    let mut vehicles: Vec<VehicleRecord> = Vec::new();
    let mut cycles: Vec<CycleTruth> = Vec::new();
    let mut spillback = false;
    let storage = (config.link_length / config.jam_spacing).floor() as usize;

    for m in movements {
        let Some(times) = arrivals.get(&m.movement_id) else {
            continue;
        };
        let green = plan.green(&m.movement_id)?;
        let open_offset = to_tick(green.start);
        let close_offset = to_tick(green.end + m.yellow - m.yellow_lost);
        let discharge_offset = to_tick(green.start + m.startup_lost);
        let cycle_ticks = to_tick(c);
        let h_ticks = to_tick(m.discharge_headway).max(1);
        let h_secs = m.discharge_headway;
        let travel = config.link_length / config.free_flow_speed;
        let g_eff = plan.effective_green(m)?;
        let window_cap = (g_eff / m.discharge_headway).ceil() as u32 + 1;

        let mut q_ticks: Vec<i64> = times.iter().map(|&t| to_tick(t)).collect();
        q_ticks.sort_unstable();

        let base = vehicles.len();
        for (i, &q) in q_ticks.iter().enumerate() {
            vehicles.push(VehicleRecord {
                movement_id: m.movement_id.clone(),
                seq: i as u64,
                virtual_arrival: to_seconds(q),
                entry_time: to_seconds(q) - travel,
                crossing: None,
                stops: Vec::new(),
                creep_join: false,
            });
        }

        let in_green = |t: i64| -> bool {
            let phase = t.rem_euclid(cycle_ticks);
            phase >= open_offset && phase <= close_offset
        };
        let discharging = |t: i64| -> bool {
            let phase = t.rem_euclid(cycle_ticks);
            phase >= discharge_offset && phase <= close_offset
        };

        let mut queue: std::collections::VecDeque<QueueEntry> = std::collections::VecDeque::new();
        let mut next_arrival = 0usize;
        let mut last_cross = i64::MIN / 2;
        let mut crossings_this_window = 0u32;
        let mut prev_discharging = false;

        let cross = |vehicles: &mut Vec<VehicleRecord>,
                         entry: Option<&QueueEntry>,
                         vi: usize,
                         t: i64| {
            let secs = to_seconds(t);
            vehicles[vi].crossing = Some(secs);
            if let Some(e) = entry {
                if !e.creep {
                    if let Some(seg) = vehicles[vi].stops.last_mut() {
                        seg.end = secs - f64::from(e.position) * h_secs;
                        if seg.end <= seg.start {
                            vehicles[vi].stops.pop();
                        }
                    }
                }
            }
        };

        for t in 0..=sim_end_tick {
            let phase = t.rem_euclid(cycle_ticks);
            if phase == open_offset {
                crossings_this_window = 0;
            }
            if phase == discharge_offset {
                // The discharge wave starts here; the first standing vehicle
                // crosses one headway later, and flying vehicles cannot slot
                // in ahead of it.
                last_cross = last_cross.max(t);
            }

            // Queue discharge.
            if !queue.is_empty()
                && discharging(t)
                && t >= last_cross + h_ticks
                && crossings_this_window < window_cap
            {
                let entry = queue.pop_front().expect("queue nonempty");
                cross(&mut vehicles, Some(&entry), entry.vehicle, t);
                last_cross = t;
                crossings_this_window += 1;
            }

            // Arrivals at this tick.
            while next_arrival < q_ticks.len() && q_ticks[next_arrival] == t {
                let vi = base + next_arrival;
                next_arrival += 1;
                let free_ok = in_green(t)
                    && queue.is_empty()
                    && t >= last_cross + h_ticks
                    && crossings_this_window < window_cap;
                if free_ok {
                    cross(&mut vehicles, None, vi, t);
                    last_cross = t;
                    crossings_this_window += 1;
                } else {
                    let position = queue.back().map_or(0, |e| e.position) + 1;
                    let creep = discharging(t) || queue.back().is_some_and(|e| e.creep);
                    if !creep {
                        let d = f64::from(position) * config.jam_spacing;
                        vehicles[vi].stops.push(StopSeg {
                            distance: d,
                            start: to_seconds(t) - d / config.free_flow_speed,
                            end: f64::NAN,
                        });
                    }
                    queue.push_back(QueueEntry {
                        vehicle: vi,
                        position,
                        creep,
                    });
                    if queue.len() > storage {
                        spillback = true;
                    }
                }
            }

            // Discharge window closed with survivors: the standing queue
            // packs back to the stopline, each vehicle rolling forward one
            // headway per slot it gained, then stands again.
            let now_discharging = discharging(t);
            if prev_discharging && !now_discharging {
                let close_secs = to_seconds(t - 1);
                for (rank, entry) in queue.iter_mut().enumerate() {
                    let new_pos = rank as u32 + 1;
                    debug_assert!(entry.position >= new_pos);
                    let gained = entry.position - new_pos;
                    if gained == 0 {
                        // Did not move; a rolling joiner freezes in place.
                        if entry.creep {
                            vehicles[entry.vehicle].stops.push(StopSeg {
                                distance: f64::from(entry.position) * config.jam_spacing,
                                start: close_secs,
                                end: f64::NAN,
                            });
                            entry.creep = false;
                        }
                        continue;
                    }
                    entry.position = new_pos;
                    let v = &mut vehicles[entry.vehicle];
                    if !entry.creep {
                        if let Some(seg) = v.stops.last_mut() {
                            seg.end = close_secs;
                            if seg.end <= seg.start {
                                v.stops.pop();
                            }
                        }
                    }
                    v.stops.push(StopSeg {
                        distance: f64::from(new_pos) * config.jam_spacing,
                        start: close_secs + f64::from(gained) * h_secs,
                        end: f64::NAN,
                    });
                    entry.creep = false;
                }
            }
            prev_discharging = now_discharging;
        }

        // Close any stop still open at the end of the run.
        let end_secs = to_seconds(sim_end_tick);
        for v in &mut vehicles[base..] {
            if let Some(seg) = v.stops.last_mut() {
                if seg.end.is_nan() {
                    seg.end = end_secs;
                }
            }
            v.creep_join = v.stops.is_empty() && v.delay().is_some_and(|d| d > 0.0);
        }

        // Ground-truth windows.
        for spec in movement_cycles(plan, m, config.horizon_cycles)? {
            let start = to_tick(spec.red_start);
            let end = to_tick(spec.end());
            let arrivals_in = q_ticks.iter().filter(|&&q| q >= start && q < end).count() as u32;
            let residual = |boundary: i64| -> u32 {
                vehicles[base..]
                    .iter()
                    .filter(|v| {
                        to_tick(v.virtual_arrival) < boundary
                            && v.crossing.map_or(true, |cr| to_tick(cr) >= boundary)
                    })
                    .count() as u32
            };
            cycles.push(CycleTruth {
                movement_id: m.movement_id.clone(),
                cycle_index: spec.cycle_index,
                arrivals: arrivals_in,
                residual_at_start: residual(start),
                residual_at_end: residual(end),
            });
        }
    }

    let crossed: Vec<f64> = vehicles.iter().filter_map(|v| v.delay()).collect();
    let average_delay = if crossed.is_empty() {
        0.0
    } else {
        crossed.iter().sum::<f64>() / crossed.len() as f64
    };
    Ok(SimResult {
        vehicles,
        cycles,
        average_delay,
        spillback,
        horizon_end: to_seconds(horizon_end_tick),
    })
}

/// Aggregate statistics over a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub vehicles_total: usize,
    pub vehicles_crossed: usize,
    pub mean_delay: f64,
    pub median_delay: f64,
    /// Share of tracked cycles ending with a residual queue.
    pub residual_cycle_frequency: f64,
    pub per_cycle_arrivals: BTreeMap<MovementId, Vec<u32>>,
    pub spillback: bool,
}

/// Exact arithmetic over the per-vehicle records; empty input yields an
/// explicit empty marker.
pub fn measure(result: &SimResult) -> Option<SummaryStats> {
    if result.vehicles.is_empty() {
        return None;
    }
    let mut delays: Vec<f64> = result.vehicles.iter().filter_map(|v| v.delay()).collect();
    delays.sort_by(f64::total_cmp);
    let mean = if delays.is_empty() {
        0.0
    } else {
        delays.iter().sum::<f64>() / delays.len() as f64
    };
    let median = if delays.is_empty() {
        0.0
    } else if delays.len() % 2 == 1 {
        delays[delays.len() / 2]
    } else {
        0.5 * (delays[delays.len() / 2 - 1] + delays[delays.len() / 2])
    };
    let residual_cycles = result
        .cycles
        .iter()
        .filter(|c| c.residual_at_end > 0)
        .count();
    let freq = if result.cycles.is_empty() {
        0.0
    } else {
        residual_cycles as f64 / result.cycles.len() as f64
    };
    let mut per_cycle = BTreeMap::new();
    for c in &result.cycles {
        per_cycle
            .entry(c.movement_id.clone())
            .or_insert_with(Vec::new)
            .push(c.arrivals);
    }
    Some(SummaryStats {
        vehicles_total: result.vehicles.len(),
        vehicles_crossed: delays.len(),
        mean_delay: mean,
        median_delay: median,
        residual_cycle_frequency: freq,
        per_cycle_arrivals: per_cycle,
        spillback: result.spillback,
    })
}

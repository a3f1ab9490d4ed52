//! CV sampling and trajectory emission.
//!
//! Each sampled vehicle's motion is a piecewise-linear distance profile:
//! free-flow approach, standstills at queue positions, creep rolls between
//! them, and the final roll across the stopline. Points are emitted at 1 Hz
//! plus the exact entry and crossing instants, so standstills (and their
//! grid-aligned distances) survive sampling.

use super::{ScenarioConfig, SimResult, StopSeg, VehicleRecord};
use crate::signal::MovementParams;
use crate::trajectory::{CvTrajectory, TrajectoryPoint};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Marks each vehicle as a CV independently with probability `penetration`
/// and emits trajectories for the marked ones.
pub fn sample_cvs(
    result: &SimResult,
    movements: &[MovementParams],
    config: &ScenarioConfig,
    penetration: f64,
    seed: u64,
) -> Vec<CvTrajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for v in &result.vehicles {
        let marked = penetration >= 1.0 || (penetration > 0.0 && rng.gen_bool(penetration));
        if !marked {
            continue;
        }
        let h = movements
            .iter()
            .find(|m| m.movement_id == v.movement_id)
            .map_or(2.0, |m| m.discharge_headway);
        let v_creep = config.jam_spacing / h;
        if let Some(traj) = emit(v, config, v_creep) {
            out.push(traj);
        }
    }
    out
}

/// Breakpoints of the piecewise-linear distance profile, time-increasing.
fn breakpoints(v: &VehicleRecord, config: &ScenarioConfig, v_creep: f64) -> Vec<(f64, f64)> {
    let vf = config.free_flow_speed;
    let link = config.link_length;
    let mut pts: Vec<(f64, f64)> = vec![(v.entry_time, link)];

    // Standstills, sanitized: positive span, non-increasing distance, and
    // not after the final creep to the stopline has begun.
    let final_creep_start = v.crossing.map(|t| {
        let d_last = v
            .stops
            .last()
            .map_or(0.0, |s| s.distance.min(link));
        t - d_last / v_creep
    });
    let mut stops: Vec<StopSeg> = Vec::new();
    for s in &v.stops {
        let mut seg = *s;
        seg.distance = seg.distance.min(link);
        if let Some(prev) = stops.last() {
            if seg.start < prev.end {
                seg.start = prev.end;
            }
            if seg.distance > prev.distance {
                continue;
            }
        }
        if let Some(fc) = final_creep_start {
            if Some(s) == v.stops.last() {
                // The last standstill ends when the final creep begins.
                seg.end = seg.end.min(fc.max(seg.start));
            } else if seg.start >= fc {
                continue;
            }
        }
        if seg.end - seg.start > 1e-9 {
            stops.push(seg);
        }
    }

    match (stops.is_empty(), v.crossing) {
        (true, Some(t_cross)) => {
            let delay = t_cross - v.virtual_arrival;
            if delay <= 1e-9 {
                pts.push((t_cross, 0.0));
            } else {
                // Joined a moving queue: free-flow leg, then roll at creep
                // speed to cross at t_cross.
                let kink_t = (vf * v.virtual_arrival - v_creep * t_cross) / (vf - v_creep);
                let kink_d = vf * (v.virtual_arrival - kink_t);
                if kink_d < link && kink_t > v.entry_time {
                    pts.push((kink_t, kink_d));
                }
                pts.push((t_cross, 0.0));
            }
        }
        (false, crossing) => {
            for s in &stops {
                pts.push((s.start, s.distance));
                pts.push((s.end, s.distance));
            }
            if let Some(t_cross) = crossing {
                pts.push((t_cross, 0.0));
            }
        }
        (true, None) => {}
    }

    // Keep strictly increasing times and non-increasing distances.
    let mut clean: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for (t, d) in pts {
        if let Some(&(pt, pd)) = clean.last() {
            if t <= pt + 1e-9 || d > pd + 1e-9 {
                continue;
            }
        }
        clean.push((t, d));
    }
    clean
}

fn emit(v: &VehicleRecord, config: &ScenarioConfig, v_creep: f64) -> Option<CvTrajectory> {
    let pts = breakpoints(v, config, v_creep);
    if pts.len() < 2 {
        return None;
    }
    let t0 = pts[0].0;
    let t1 = pts.last().unwrap().0;

    let mut times: Vec<f64> = vec![t0];
    let mut k = t0.ceil();
    if k - t0 < 1e-9 {
        k += 1.0;
    }
    while k < t1 - 1e-9 {
        times.push(k);
        k += 1.0;
    }
    times.push(t1);

    let mut points = Vec::with_capacity(times.len());
    let mut seg = 0usize;
    for &t in &times {
        while seg + 2 < pts.len() && t >= pts[seg + 1].0 {
            seg += 1;
        }
        let (ta, da) = pts[seg];
        let (tb, db) = pts[seg + 1];
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        let d = da + (db - da) * frac;
        let speed = ((da - db) / (tb - ta)).abs();
        points.push(TrajectoryPoint {
            timestamp: t,
            distance_to_stopline: d.max(0.0),
            speed,
        });
    }
    Some(CvTrajectory {
        vehicle_id: v.vehicle_id(),
        movement_id: v.movement_id.clone(),
        points,
    })
}

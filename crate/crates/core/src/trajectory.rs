//! Connected-vehicle trajectory ingestion and per-cycle classification.
//!
//! A trajectory is a time-ordered list of (timestamp, distance-to-stopline,
//! speed) samples for one vehicle on one movement. Per signal cycle, each
//! vehicle crossing the stopline is classified as queued, non-queued, or
//! residual (left over from an earlier cycle's queue), and the cycle is
//! digested into a [`CycleObservation`] carrying the queue positions,
//! virtual arrival times, and stopline crossing times the arrival-rate
//! bounds need.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

/// Identifier of a signal-controlled traffic stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MovementId(pub String);

impl fmt::Display for MovementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MovementId {
    fn from(s: &str) -> Self {
        MovementId(s.to_string())
    }
}

/// One trajectory sample. Distances are measured upstream from the stopline
/// (crossing at 0) and never increase over time beyond a 0.5 m tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub timestamp: f64,
    pub distance_to_stopline: f64,
    pub speed: f64,
}

/// Samples of one vehicle on one movement, strictly time-ordered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvTrajectory {
    pub vehicle_id: String,
    pub movement_id: MovementId,
    pub points: Vec<TrajectoryPoint>,
}

/// One movement's signal cycle on the global clock. The cycle window is
/// `[red_start, red_start + cycle_length)`, red first, then green, then
/// yellow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleSpec {
    pub cycle_index: i64,
    pub red_start: f64,
    pub green_start: f64,
    pub green_end: f64,
    pub cycle_length: f64,
    pub yellow: f64,
}

impl CycleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.red_start < self.green_start
            && self.green_start < self.green_end
            && self.green_end <= self.red_start + self.cycle_length)
        {
            return Err(Error::Parameter(format!(
                "cycle {}: require red_start < green_start < green_end <= red_start + cycle_length",
                self.cycle_index
            )));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.red_start + self.cycle_length
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.red_start && t < self.end()
    }
}

/// Classification of one CV within one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueueClass {
    Queued,
    NonQueued,
    Residual,
}

/// Per-cycle, per-movement digest of the classified CVs. Times are relative
/// to the cycle's red start; `t_lr` may be negative (residual vehicles
/// virtually arrived before this cycle began).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleObservation {
    pub movement_id: MovementId,
    pub cycle_index: i64,
    pub cycle_length: f64,
    /// Queue position of the last queued CV.
    pub p_lq: Option<u32>,
    /// Virtual arrival of the last queued CV.
    pub t_lq: Option<f64>,
    /// Stopline through time of the last queued CV.
    pub tau_lq: Option<f64>,
    /// Queue position of the last residual CV.
    pub p_lr: Option<u32>,
    /// Virtual arrival of the last residual CV.
    pub t_lr: Option<f64>,
    /// Number of non-queued CVs crossing during the cycle.
    pub n_nq: u32,
    /// Stopline through time of the first non-queued CV.
    pub tau_fn: Option<f64>,
    pub oversaturated: bool,
}

impl CycleObservation {
    /// True when the cycle carries enough information for the arrival-rate
    /// bounds (a queued CV was observed).
    pub fn informative(&self) -> bool {
        self.p_lq.is_some() && self.t_lq.is_some()
    }

    /// Checks the cross-field invariants that hold for consistently sampled
    /// data. Used by tests and diagnostics, not enforced on construction,
    /// since sparse sampling can leave fields legitimately absent.
    pub fn check_invariants(&self) -> Result<()> {
        let c = self.cycle_length;
        if let (Some(t), Some(tau)) = (self.t_lq, self.tau_lq) {
            if !(0.0 <= t && t < tau && tau <= c) {
                return Err(Error::Parameter(format!(
                    "cycle {}: expected 0 <= t_lq < tau_lq <= C, got t_lq={t}, tau_lq={tau}, C={c}",
                    self.cycle_index
                )));
            }
        }
        if let Some(tau_fn) = self.tau_fn {
            if !(0.0 <= tau_fn && tau_fn <= c) {
                return Err(Error::Parameter(format!(
                    "cycle {}: tau_fn={tau_fn} outside [0, {c}]",
                    self.cycle_index
                )));
            }
            if let Some(tau_lq) = self.tau_lq {
                if tau_lq > tau_fn {
                    return Err(Error::Parameter(format!(
                        "cycle {}: tau_lq={tau_lq} > tau_fn={tau_fn}",
                        self.cycle_index
                    )));
                }
            }
        }
        if let (Some(p_lr), Some(p_lq)) = (self.p_lr, self.p_lq) {
            if p_lr >= p_lq {
                return Err(Error::Parameter(format!(
                    "cycle {}: residual position {p_lr} not ahead of last queued {p_lq}",
                    self.cycle_index
                )));
            }
        }
        if let (Some(t_lr), Some(t_lq)) = (self.t_lr, self.t_lq) {
            if t_lr >= t_lq {
                return Err(Error::Parameter(format!(
                    "cycle {}: t_lr={t_lr} not before t_lq={t_lq}",
                    self.cycle_index
                )));
            }
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str =
    "vehicle_id,movement_id,timestamp_s,distance_to_stopline_m,speed_mps";

/// Maximum forward creep allowed before a trajectory is rejected as
/// reversing.
const REVERSE_TOLERANCE_M: f64 = 0.5;

/// Parses the trajectory CSV schema: one row per sample, grouped into one
/// trajectory per distinct (vehicle, movement), each sorted by timestamp.
pub fn parse_trajectories<R: BufRead>(reader: R) -> Result<Vec<CvTrajectory>> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty input, expected header row".into(),
            })
        }
    };
    if header.trim_end() != TRAJECTORY_CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unexpected header {header:?}"),
        });
    }

    let mut groups: BTreeMap<(String, String), Vec<TrajectoryPoint>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let parse_f64 = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid {what}: {s:?}"),
            })
        };
        let timestamp = parse_f64(fields[2], "timestamp_s")?;
        let distance = parse_f64(fields[3], "distance_to_stopline_m")?;
        let speed = parse_f64(fields[4], "speed_mps")?;
        if !timestamp.is_finite() || !distance.is_finite() || !speed.is_finite() {
            return Err(Error::Parse {
                line: line_no,
                msg: "non-finite value".into(),
            });
        }
        if distance < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("negative distance {distance}"),
            });
        }
        if speed < 0.0 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("negative speed {speed}"),
            });
        }
        groups
            .entry((fields[0].to_string(), fields[1].to_string()))
            .or_default()
            .push(TrajectoryPoint {
                timestamp,
                distance_to_stopline: distance,
                speed,
            });
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((vehicle_id, movement_id), mut points) in groups {
        points.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        for w in points.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::Trajectory {
                    vehicle_id,
                    msg: format!("non-monotone timestamps at t={}", w[1].timestamp),
                });
            }
            if w[1].distance_to_stopline > w[0].distance_to_stopline + REVERSE_TOLERANCE_M {
                return Err(Error::Trajectory {
                    vehicle_id,
                    msg: format!(
                        "distance increases from {} to {} at t={}",
                        w[0].distance_to_stopline, w[1].distance_to_stopline, w[1].timestamp
                    ),
                });
            }
        }
        out.push(CvTrajectory {
            vehicle_id,
            movement_id: MovementId(movement_id),
            points,
        });
    }
    Ok(out)
}

/// Writes trajectories in the CSV schema with 3-decimal fields, the exact
/// byte format [`parse_trajectories`] reads back.
pub fn write_trajectories<W: Write>(trajs: &[CvTrajectory], mut w: W) -> Result<()> {
    writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
    for t in trajs {
        for p in &t.points {
            writeln!(
                w,
                "{},{},{:.3},{:.3},{:.3}",
                t.vehicle_id, t.movement_id, p.timestamp, p.distance_to_stopline, p.speed
            )?;
        }
    }
    Ok(())
}

/// A detected standstill: the vehicle held `position` meters upstream of the
/// stopline from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopEpisode {
    pub position: f64,
    pub start: f64,
    pub end: f64,
}

/// Finds maximal sample runs with speed below `stop_speed` lasting at least
/// `min_stop_duration` seconds, in time order.
pub fn detect_stop(
    traj: &CvTrajectory,
    stop_speed: f64,
    min_stop_duration: f64,
) -> Vec<StopEpisode> {
    let mut episodes = Vec::new();
    let mut run_start: Option<usize> = None;
    let n = traj.points.len();
    for i in 0..=n {
        let below = i < n && traj.points[i].speed < stop_speed;
        match (run_start, below) {
            (None, true) => run_start = Some(i),
            (Some(s), false) => {
                let first = &traj.points[s];
                let last = &traj.points[i - 1];
                if last.timestamp - first.timestamp >= min_stop_duration {
                    episodes.push(StopEpisode {
                        position: first.distance_to_stopline,
                        start: first.timestamp,
                        end: last.timestamp,
                    });
                }
                run_start = None;
            }
            _ => {}
        }
    }
    episodes
}

/// Projects the first sample to the stopline at free-flow speed: the global
/// time the vehicle would have crossed had nothing impeded it.
pub fn virtual_arrival_time(traj: &CvTrajectory, free_flow_speed: f64) -> Result<f64> {
    if free_flow_speed <= 0.0 {
        return Err(Error::Parameter(format!(
            "free_flow_speed must be positive, got {free_flow_speed}"
        )));
    }
    let first = traj.points.first().ok_or_else(|| Error::Trajectory {
        vehicle_id: traj.vehicle_id.clone(),
        msg: "empty trajectory".into(),
    })?;
    Ok(first.timestamp + first.distance_to_stopline / free_flow_speed)
}

/// Knobs for stop detection and queue-position recovery.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClassifyParams {
    pub stop_speed: f64,
    pub min_stop_duration: f64,
    pub jam_spacing: f64,
    pub free_flow_speed: f64,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        Self {
            stop_speed: 2.0,
            min_stop_duration: 4.0,
            jam_spacing: 7.0,
            free_flow_speed: 15.0,
        }
    }
}

/// Counters for CVs a classification call could not place.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ClassifyDiagnostics {
    /// Trajectories with no stopline crossing inside the cycle window.
    pub outside_cycle: usize,
}

/// Classification record for one CV in one cycle.
#[derive(Debug, Clone)]
struct Crosser {
    class: QueueClass,
    position: u32,
    arrival_rel: f64,
    crossing_rel: f64,
    vehicle_id: String,
}

/// Timestamp at which the trajectory reaches the stopline, if sampled.
fn crossing_time(traj: &CvTrajectory) -> Option<f64> {
    traj.points
        .iter()
        .find(|p| p.distance_to_stopline <= 1e-6)
        .map(|p| p.timestamp)
}

/// Classifies every CV crossing the stopline during `cycle` and digests the
/// cycle into a [`CycleObservation`].
///
/// A CV is residual when its first standstill began before the cycle's red
/// start, queued when it stopped during the cycle, and non-queued otherwise.
/// Queue positions come from standstill distance via the jam-spacing grid;
/// residual CVs rank by their final standstill, i.e. where they stood in
/// this cycle's queue. The cycle is flagged oversaturated when a residual CV
/// crossed it or when a CV that queued during it failed to cross before the
/// cycle end.
pub fn classify_and_observe(
    trajs: &[CvTrajectory],
    cycle: &CycleSpec,
    params: &ClassifyParams,
) -> Result<(CycleObservation, ClassifyDiagnostics)> {
    cycle.validate()?;
    let mut diags = ClassifyDiagnostics::default();
    let mut crossers: Vec<Crosser> = Vec::new();
    let mut queued_failed_to_cross = false;

    for traj in trajs {
        let stops = detect_stop(traj, params.stop_speed, params.min_stop_duration);
        let cross = crossing_time(traj);

        // A vehicle that queued during this cycle and did not cross before
        // the cycle end makes the cycle oversaturated even though it will be
        // classified (as residual) in a later cycle.
        if let Some(first) = stops.first() {
            if cycle.contains(first.start) && !cross.map_or(false, |t| t < cycle.end()) {
                queued_failed_to_cross = true;
            }
        }

        let Some(cross) = cross else {
            diags.outside_cycle += 1;
            continue;
        };
        if !cycle.contains(cross) {
            diags.outside_cycle += 1;
            continue;
        }

        let t0 = virtual_arrival_time(traj, params.free_flow_speed)?;
        let before_cross: Vec<&StopEpisode> =
            stops.iter().filter(|s| s.start < cross).collect();
        let (class, position) = match (before_cross.first(), before_cross.last()) {
            (None, _) => (QueueClass::NonQueued, 0),
            (Some(first), Some(last)) => {
                let class = if first.start < cycle.red_start {
                    QueueClass::Residual
                } else {
                    QueueClass::Queued
                };
                let p = (last.position / params.jam_spacing).round().max(1.0) as u32;
                (class, p)
            }
            _ => unreachable!(),
        };
        crossers.push(Crosser {
            class,
            position,
            arrival_rel: t0 - cycle.red_start,
            crossing_rel: cross - cycle.red_start,
            vehicle_id: traj.vehicle_id.clone(),
        });
    }

    // Deterministic pick of the "last" CV of each class: deepest queue
    // position, latest arrival, then vehicle id.
    let last_of = |class: QueueClass, list: &[Crosser]| -> Option<Crosser> {
        list.iter()
            .filter(|c| c.class == class)
            .max_by(|a, b| {
                a.position
                    .cmp(&b.position)
                    .then(a.arrival_rel.total_cmp(&b.arrival_rel))
                    .then(a.vehicle_id.cmp(&b.vehicle_id))
            })
            .cloned()
    };
    let last_queued = last_of(QueueClass::Queued, &crossers);
    let last_residual = last_of(QueueClass::Residual, &crossers);
    let non_queued: Vec<&Crosser> = crossers
        .iter()
        .filter(|c| c.class == QueueClass::NonQueued)
        .collect();
    let tau_fn = non_queued
        .iter()
        .map(|c| c.crossing_rel)
        .min_by(f64::total_cmp);

    let oversaturated = last_residual.is_some() || queued_failed_to_cross;
    let obs = CycleObservation {
        movement_id: trajs
            .first()
            .map(|t| t.movement_id.clone())
            .unwrap_or_else(|| MovementId(String::new())),
        cycle_index: cycle.cycle_index,
        cycle_length: cycle.cycle_length,
        p_lq: last_queued.as_ref().map(|c| c.position),
        t_lq: last_queued.as_ref().map(|c| c.arrival_rel),
        tau_lq: last_queued.as_ref().map(|c| c.crossing_rel),
        p_lr: last_residual.as_ref().map(|c| c.position),
        t_lr: last_residual.as_ref().map(|c| c.arrival_rel),
        n_nq: non_queued.len() as u32,
        tau_fn,
        oversaturated,
    };
    Ok((obs, diags))
}

/// Per-CV classification of one cycle, for diagnostics and tests.
pub fn classify_cycle(
    trajs: &[CvTrajectory],
    cycle: &CycleSpec,
    params: &ClassifyParams,
) -> Result<Vec<(String, QueueClass)>> {
    cycle.validate()?;
    let mut out = Vec::new();
    for traj in trajs {
        let Some(cross) = crossing_time(traj) else { continue };
        if !cycle.contains(cross) {
            continue;
        }
        let stops = detect_stop(traj, params.stop_speed, params.min_stop_duration);
        let before: Vec<&StopEpisode> = stops.iter().filter(|s| s.start < cross).collect();
        let class = match before.first() {
            None => QueueClass::NonQueued,
            Some(first) if first.start < cycle.red_start => QueueClass::Residual,
            Some(_) => QueueClass::Queued,
        };
        out.push((traj.vehicle_id.clone(), class));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_traj(vehicle: &str, pts: &[(f64, f64, f64)]) -> CvTrajectory {
        CvTrajectory {
            vehicle_id: vehicle.into(),
            movement_id: MovementId("EB".into()),
            points: pts
                .iter()
                .map(|&(t, d, v)| TrajectoryPoint {
                    timestamp: t,
                    distance_to_stopline: d,
                    speed: v,
                })
                .collect(),
        }
    }

    #[test]
    fn parse_header_only_is_empty() {
        let data = format!("{TRAJECTORY_CSV_HEADER}\n");
        let trajs = parse_trajectories(data.as_bytes()).unwrap();
        assert!(trajs.is_empty());
    }

    #[test]
    fn parse_groups_one_vehicle() {
        let data = format!(
            "{TRAJECTORY_CSV_HEADER}\nv1,EB,0.000,100.000,15.000\nv1,EB,1.000,85.000,15.000\nv1,EB,2.000,70.000,15.000\n"
        );
        let trajs = parse_trajectories(data.as_bytes()).unwrap();
        assert_eq!(trajs.len(), 1);
        assert_eq!(trajs[0].points.len(), 3);
    }

    #[test]
    fn parse_interleaved_vehicles_sorted() {
        // Oracle: sorting the 6 rows by hand gives v1 at t=0,1,2 and
        // v2 at t=0.5,1.5,2.5, each strictly increasing.
        let data = format!(
            "{TRAJECTORY_CSV_HEADER}\n\
             v1,EB,2.000,70.000,15.000\n\
             v2,EB,0.500,95.000,15.000\n\
             v1,EB,0.000,100.000,15.000\n\
             v2,EB,2.500,65.000,15.000\n\
             v1,EB,1.000,85.000,15.000\n\
             v2,EB,1.500,80.000,15.000\n"
        );
        let trajs = parse_trajectories(data.as_bytes()).unwrap();
        assert_eq!(trajs.len(), 2);
        let v1 = trajs.iter().find(|t| t.vehicle_id == "v1").unwrap();
        let times: Vec<f64> = v1.points.iter().map(|p| p.timestamp).collect();
        assert_eq!(times, vec![0.0, 1.0, 2.0]);
        let v2 = trajs.iter().find(|t| t.vehicle_id == "v2").unwrap();
        let times: Vec<f64> = v2.points.iter().map(|p| p.timestamp).collect();
        assert_eq!(times, vec![0.5, 1.5, 2.5]);
    }

    #[test]
    fn parse_malformed_row_names_line() {
        let data = format!("{TRAJECTORY_CSV_HEADER}\nv1,EB,0.0,100.0\n");
        match parse_trajectories(data.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_duplicate_timestamp_names_vehicle() {
        let data = format!(
            "{TRAJECTORY_CSV_HEADER}\nv7,EB,1.000,100.000,15.000\nv7,EB,1.000,85.000,15.000\n"
        );
        match parse_trajectories(data.as_bytes()) {
            Err(Error::Trajectory { vehicle_id, .. }) => assert_eq!(vehicle_id, "v7"),
            other => panic!("expected trajectory error, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_is_byte_identical() {
        let trajs = vec![mk_traj("v1", &[(0.0, 100.0, 15.0), (1.0, 85.0, 15.0)])];
        let mut buf = Vec::new();
        write_trajectories(&trajs, &mut buf).unwrap();
        let parsed = parse_trajectories(&buf[..]).unwrap();
        let mut buf2 = Vec::new();
        write_trajectories(&parsed, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn no_stop_at_constant_speed() {
        let pts: Vec<(f64, f64, f64)> = (0..10).map(|i| (i as f64, 150.0 - 15.0 * i as f64, 15.0)).collect();
        let traj = mk_traj("v", &pts);
        assert!(detect_stop(&traj, 2.0, 4.0).is_empty());
    }

    #[test]
    fn single_stop_episode_position_and_span() {
        let mut pts = vec![(0.0, 70.0, 15.0), (1.0, 55.0, 15.0), (2.0, 40.0, 15.0)];
        for i in 0..31 {
            pts.push((3.0 + i as f64, 40.0, 0.0));
        }
        pts.push((34.0, 20.0, 10.0));
        let traj = mk_traj("v", &pts);
        let stops = detect_stop(&traj, 2.0, 4.0);
        assert_eq!(stops.len(), 1);
        assert_eq!(stops[0].position, 40.0);
        assert_eq!(stops[0].start, 3.0);
        assert_eq!(stops[0].end, 33.0);
    }

    #[test]
    fn two_stop_episodes_with_move_up() {
        // Hand-constructed oversaturation pattern: stop at 42 m, creep to
        // 14 m during a green, stop again, then discharge.
        let mut pts = vec![(0.0, 72.0, 15.0), (1.0, 57.0, 15.0)];
        for i in 0..20 {
            pts.push((2.0 + i as f64, 42.0, 0.0));
        }
        for i in 0..7 {
            pts.push((22.0 + i as f64, 42.0 - 4.0 * (i + 1) as f64, 4.0));
        }
        for i in 0..15 {
            pts.push((29.0 + i as f64, 14.0, 0.0));
        }
        pts.push((44.0, 7.0, 3.5));
        pts.push((45.0, 0.0, 3.5));
        let traj = mk_traj("v", &pts);
        let stops = detect_stop(&traj, 2.0, 4.0);
        assert_eq!(stops.len(), 2);
        assert_eq!(stops[0].position, 42.0);
        assert_eq!(stops[1].position, 14.0);
        assert!(stops[0].end < stops[1].start);
    }

    #[test]
    fn virtual_arrival_examples() {
        let at_line = mk_traj("v", &[(100.0, 0.0, 15.0), (101.0, 0.0, 15.0)]);
        assert_eq!(virtual_arrival_time(&at_line, 15.0).unwrap(), 100.0);

        let upstream = mk_traj("v", &[(100.0, 150.0, 15.0), (101.0, 135.0, 15.0)]);
        assert!((virtual_arrival_time(&upstream, 15.0).unwrap() - 110.0).abs() < 1e-12);

        assert!(virtual_arrival_time(&upstream, 0.0).is_err());
    }

    #[test]
    fn virtual_arrival_translation_equivariance() {
        let base = mk_traj("v", &[(10.0, 120.0, 15.0), (11.0, 105.0, 15.0)]);
        let t0 = virtual_arrival_time(&base, 15.0).unwrap();
        for shift in [-20.0, 3.5, 1234.25] {
            let mut shifted = base.clone();
            for p in &mut shifted.points {
                p.timestamp += shift;
            }
            let t1 = virtual_arrival_time(&shifted, 15.0).unwrap();
            assert!((t1 - (t0 + shift)).abs() < 1e-9);
        }
    }

    fn cycle() -> CycleSpec {
        CycleSpec {
            cycle_index: 1,
            red_start: 100.0,
            green_start: 140.0,
            green_end: 177.0,
            cycle_length: 80.0,
            yellow: 3.0,
        }
    }

    #[test]
    fn queued_cv_position_from_stop_distance() {
        // Stops at 12 m with 6 m jam spacing -> position 2; crosses in green.
        let params = ClassifyParams {
            jam_spacing: 6.0,
            ..ClassifyParams::default()
        };
        let mut pts = vec![(105.0, 42.0, 15.0), (106.0, 27.0, 15.0)];
        for i in 0..40 {
            pts.push((107.0 + i as f64, 12.0, 0.0));
        }
        pts.push((148.0, 0.0, 3.5));
        let traj = mk_traj("v", &pts);
        let (obs, diags) = classify_and_observe(&[traj], &cycle(), &params).unwrap();
        assert_eq!(diags.outside_cycle, 0);
        assert_eq!(obs.p_lq, Some(2));
        assert!(!obs.oversaturated);
        assert_eq!(obs.n_nq, 0);
        // Hand classification: virtual arrival 105 + 42/15 = 107.8 global,
        // 7.8 cycle-relative; crossing 148 global = 48 relative.
        assert!((obs.t_lq.unwrap() - 7.8).abs() < 1e-9);
        assert!((obs.tau_lq.unwrap() - 48.0).abs() < 1e-9);
        obs.check_invariants().unwrap();
    }

    #[test]
    fn free_flow_cv_is_non_queued() {
        let traj = mk_traj(
            "v",
            &[(145.0, 60.0, 15.0), (146.0, 45.0, 15.0), (147.0, 30.0, 15.0), (149.0, 0.0, 15.0)],
        );
        let (obs, _) = classify_and_observe(&[traj], &cycle(), &ClassifyParams::default()).unwrap();
        assert_eq!(obs.n_nq, 1);
        assert_eq!(obs.p_lq, None);
        assert!((obs.tau_fn.unwrap() - 49.0).abs() < 1e-9);
        assert!(!obs.oversaturated);
    }

    #[test]
    fn residual_cv_flags_oversaturation() {
        // Stopped at 80 s (before red start 100) and crosses this cycle.
        let mut pts = vec![(78.0, 44.0, 15.0), (79.0, 29.0, 15.0)];
        for i in 0..64 {
            pts.push((80.0 + i as f64, 14.0, 0.0));
        }
        pts.push((146.0, 0.0, 3.5));
        let traj = mk_traj("v", &pts);
        let (obs, _) = classify_and_observe(&[traj], &cycle(), &ClassifyParams::default()).unwrap();
        assert!(obs.oversaturated);
        assert_eq!(obs.p_lr, Some(2));
        assert!(obs.t_lr.unwrap() < 0.0);
        assert_eq!(obs.p_lq, None);
    }

    #[test]
    fn empty_cycle_is_uninformative() {
        let (obs, _) = classify_and_observe(&[], &cycle(), &ClassifyParams::default()).unwrap();
        assert!(!obs.informative());
        assert_eq!(obs.n_nq, 0);
        assert!(!obs.oversaturated);
    }

    #[test]
    fn queued_vehicle_missing_green_flags_oversaturation() {
        // Stops during this cycle's red but never crosses before the window
        // ends (trajectory extends past the cycle, still at distance).
        let mut pts = vec![(102.0, 50.0, 15.0), (103.0, 35.0, 15.0)];
        for i in 0..90 {
            pts.push((104.0 + i as f64, 21.0, 0.0));
        }
        let traj = mk_traj("v", &pts);
        let (obs, diags) = classify_and_observe(&[traj], &cycle(), &ClassifyParams::default()).unwrap();
        assert!(obs.oversaturated);
        assert_eq!(diags.outside_cycle, 1);
        assert!(!obs.informative());
    }
}

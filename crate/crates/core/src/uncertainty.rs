//! Arrival-rate bounds per cycle and their aggregation into a per-movement
//! box uncertainty set.
//!
//! A queued CV at position p proves that at least p vehicles arrived before
//! its virtual arrival time, which yields a hard lower bound on the cycle's
//! arrival rate. Between the last queued CV's arrival and the first
//! non-queued CV's crossing, unseen arrivals are capped by the queue
//! discharge rate; after that only the empirical maximum rate caps them.
//! The per-cycle bounds are aggregated by the median, which keeps at least
//! half of the observed cycles inside the box on each side.

use crate::trajectory::{CycleObservation, MovementId};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

/// Arrival-rate interval for one movement-cycle, in vehicles/second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalBounds {
    pub movement_id: MovementId,
    pub cycle_index: i64,
    pub lower: f64,
    pub upper: f64,
    pub valid: bool,
}

impl ArrivalBounds {
    fn invalid(movement_id: MovementId, cycle_index: i64) -> Self {
        ArrivalBounds {
            movement_id,
            cycle_index,
            lower: 0.0,
            upper: 0.0,
            valid: false,
        }
    }
}

/// Parameters of the upper-bound cap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BoundsParams {
    /// Empirical maximum arrival rate, vehicles/second.
    pub lambda_max: f64,
    /// Average time headway of queued vehicles, seconds/vehicle.
    pub h_s: f64,
}

impl BoundsParams {
    /// Default cap: the saturation rate 1/h_s.
    pub fn saturation(h_s: f64) -> Self {
        BoundsParams {
            lambda_max: 1.0 / h_s,
            h_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_max <= 0.0 || self.h_s <= 0.0 {
            return Err(Error::Parameter(format!(
                "bounds params must be positive: lambda_max={}, h_s={}",
                self.lambda_max, self.h_s
            )));
        }
        Ok(())
    }
}

/// Per-movement arrival-rate interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxInterval {
    pub l_hat: f64,
    pub u_hat: f64,
    /// Number of valid cycles behind the medians (0 marks the fallback).
    pub support_count: usize,
}

/// The box uncertainty set: one arrival-rate interval per movement.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoxUncertaintySet {
    pub movements: BTreeMap<MovementId, BoxInterval>,
}

impl BoxUncertaintySet {
    pub fn interval(&self, movement: &MovementId) -> Option<&BoxInterval> {
        self.movements.get(movement)
    }

    /// Worst-case rate realization: the upper endpoint of every interval.
    pub fn upper_rates(&self) -> BTreeMap<MovementId, f64> {
        self.movements
            .iter()
            .map(|(k, v)| (k.clone(), v.u_hat))
            .collect()
    }
}

/// Number of arrivals evidenced before the last queued CV's arrival.
///
/// Undersaturated cycles count the full queue ahead of the last queued CV.
/// Oversaturated cycles interpolate between the last residual CV and the
/// last queued CV, scaled to the share of that arrival window inside this
/// cycle; the result is fractional by construction and kept fractional.
pub fn first_arrivals_count(obs: &CycleObservation) -> Result<f64> {
    let (Some(p_lq), Some(t_lq)) = (obs.p_lq, obs.t_lq) else {
        return Err(Error::Parameter(format!(
            "cycle {} movement {} has no queued CV",
            obs.cycle_index, obs.movement_id
        )));
    };
    if obs.oversaturated {
        if let (Some(p_lr), Some(t_lr)) = (obs.p_lr, obs.t_lr) {
            if t_lq <= t_lr {
                return Err(Error::DegenerateCycle {
                    movement_id: obs.movement_id.0.clone(),
                    cycle_index: obs.cycle_index,
                    msg: format!("t_lq={t_lq} <= t_lr={t_lr}"),
                });
            }
            let span = p_lq.saturating_sub(p_lr) as f64;
            return Ok(span * t_lq / (t_lq - t_lr));
        }
        // Oversaturated flag without an observed residual CV: the queued CVs
        // still all arrived within this cycle, so fall through to the plain
        // count.
    }
    Ok(p_lq as f64)
}

/// The discharge-capped maximum rate over the window between the last
/// queued CV's arrival and the first non-queued CV's crossing.
pub fn effective_max_rate(obs: &CycleObservation, params: &BoundsParams) -> Result<f64> {
    params.validate()?;
    let (Some(tau_fn), Some(tau_lq), Some(t_lq)) = (obs.tau_fn, obs.tau_lq, obs.t_lq) else {
        return Err(Error::Parameter(format!(
            "cycle {} movement {} lacks tau_fn/tau_lq/t_lq",
            obs.cycle_index, obs.movement_id
        )));
    };
    effective_max_rate_values(tau_fn, tau_lq, t_lq, params, obs)
}

fn effective_max_rate_values(
    tau_fn: f64,
    tau_lq: f64,
    t_lq: f64,
    params: &BoundsParams,
    obs: &CycleObservation,
) -> Result<f64> {
    if tau_fn <= t_lq {
        return Err(Error::DegenerateCycle {
            movement_id: obs.movement_id.0.clone(),
            cycle_index: obs.cycle_index,
            msg: format!("tau_fn={tau_fn} <= t_lq={t_lq}"),
        });
    }
    let capped = (tau_fn - tau_lq) / (params.h_s * (tau_fn - t_lq));
    Ok(params.lambda_max.min(capped))
}

/// Per-cycle arrival-rate interval.
///
/// `lower = (N1 + n_nq) / C`. The upper bound adds the discharge-capped
/// allowance up to the first non-queued crossing and the empirical-maximum
/// allowance for the rest of the cycle. Oversaturated cycles (and cycles
/// with no non-queued CV at all) take `tau_fn = C`, which makes the
/// empirical-maximum term vanish. Degenerate denominators mark the cycle
/// invalid rather than erroring out of a batch.
pub fn cycle_arrival_bounds(obs: &CycleObservation, params: &BoundsParams) -> Result<ArrivalBounds> {
    params.validate()?;
    if !obs.informative() {
        return Ok(ArrivalBounds::invalid(
            obs.movement_id.clone(),
            obs.cycle_index,
        ));
    }
    let c = obs.cycle_length;
    let t_lq = obs.t_lq.unwrap();
    let Some(tau_lq) = obs.tau_lq else {
        return Ok(ArrivalBounds::invalid(
            obs.movement_id.clone(),
            obs.cycle_index,
        ));
    };

    let n1 = match first_arrivals_count(obs) {
        Ok(v) => v,
        Err(Error::DegenerateCycle { .. }) => {
            return Ok(ArrivalBounds::invalid(
                obs.movement_id.clone(),
                obs.cycle_index,
            ))
        }
        Err(e) => return Err(e),
    };

    let tau_fn_eff = if obs.oversaturated {
        c
    } else {
        obs.tau_fn.unwrap_or(c)
    };

    let lambda_eff = match effective_max_rate_values(tau_fn_eff, tau_lq, t_lq, params, obs) {
        Ok(v) => v,
        Err(Error::DegenerateCycle { .. }) => {
            return Ok(ArrivalBounds::invalid(
                obs.movement_id.clone(),
                obs.cycle_index,
            ))
        }
        Err(e) => return Err(e),
    };

    let lower = (n1 + obs.n_nq as f64) / c;
    let upper = (n1 + lambda_eff * (tau_fn_eff - t_lq) + params.lambda_max * (c - tau_fn_eff)) / c;
    let valid = lower.is_finite() && upper.is_finite() && lower <= upper && lower >= 0.0;
    Ok(ArrivalBounds {
        movement_id: obs.movement_id.clone(),
        cycle_index: obs.cycle_index,
        lower,
        upper,
        valid,
    })
}

/// Median with the even-count convention: midpoint of the two central order
/// statistics.
fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Builds the box set over `movements` from per-cycle bounds: the median of
/// the valid lower bounds and the median of the valid upper bounds per
/// movement. Movements with no valid cycle fall back to `[0, lambda_max]`
/// with a warning, so the optimizer always has inputs.
pub fn build_box_set(
    bounds: &[ArrivalBounds],
    movements: &[MovementId],
    params: &BoundsParams,
) -> Result<BoxUncertaintySet> {
    params.validate()?;
    let mut set = BoxUncertaintySet::default();
    for movement in movements {
        let mut lowers: Vec<f64> = Vec::new();
        let mut uppers: Vec<f64> = Vec::new();
        for b in bounds.iter().filter(|b| b.valid && &b.movement_id == movement) {
            lowers.push(b.lower);
            uppers.push(b.upper);
        }
        let support_count = lowers.len();
        let interval = match (median(&mut lowers), median(&mut uppers)) {
            (Some(l_hat), Some(u_hat)) => BoxInterval {
                l_hat,
                u_hat,
                support_count,
            },
            _ => {
                log::warn!(
                    "movement {movement}: no valid cycles, falling back to [0, {}]",
                    params.lambda_max
                );
                BoxInterval {
                    l_hat: 0.0,
                    u_hat: params.lambda_max,
                    support_count: 0,
                }
            }
        };
        debug_assert!(interval.l_hat <= interval.u_hat + 1e-12);
        set.movements.insert(movement.clone(), interval);
    }
    Ok(set)
}

/// Mean of the interval midpoints over the valid cycles of one movement, the
/// point estimate a deterministic baseline consumes. None when no cycle is
/// valid.
pub fn mean_rate_estimate(bounds: &[ArrivalBounds]) -> Option<f64> {
    let mids: Vec<f64> = bounds
        .iter()
        .filter(|b| b.valid)
        .map(|b| 0.5 * (b.lower + b.upper))
        .collect();
    if mids.is_empty() {
        None
    } else {
        Some(mids.iter().sum::<f64>() / mids.len() as f64)
    }
}

/// Point estimates for every movement, with the `lambda_max / 2` fallback for
/// movements that have no valid cycles.
pub fn mean_rates(
    bounds: &[ArrivalBounds],
    movements: &[MovementId],
    params: &BoundsParams,
) -> BTreeMap<MovementId, f64> {
    movements
        .iter()
        .map(|m| {
            let own: Vec<ArrivalBounds> = bounds
                .iter()
                .filter(|b| &b.movement_id == m)
                .cloned()
                .collect();
            let rate = mean_rate_estimate(&own).unwrap_or_else(|| {
                log::warn!("movement {m}: no valid cycles, point estimate falls back");
                params.lambda_max / 2.0
            });
            (m.clone(), rate)
        })
        .collect()
}

pub const BOUNDS_CSV_HEADER: &str = "movement_id,cycle_index,lower_vps,upper_vps,valid";

/// Writes per-cycle bounds as CSV, sorted by (movement, cycle).
pub fn write_bounds_csv<W: Write>(bounds: &[ArrivalBounds], mut w: W) -> Result<()> {
    let mut rows: Vec<&ArrivalBounds> = bounds.iter().collect();
    rows.sort_by(|a, b| {
        a.movement_id
            .cmp(&b.movement_id)
            .then(a.cycle_index.cmp(&b.cycle_index))
    });
    writeln!(w, "{BOUNDS_CSV_HEADER}")?;
    for b in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.movement_id, b.cycle_index, b.lower, b.upper, b.valid
        )?;
    }
    Ok(())
}

/// Reads the bounds CSV back.
pub fn read_bounds_csv<R: BufRead>(reader: R) -> Result<Vec<ArrivalBounds>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim_end();
        if line_no == 1 {
            if trimmed != BOUNDS_CSV_HEADER {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected header {trimmed:?}"),
                });
            }
            continue;
        }
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
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid {what}: {s:?}"),
            })
        };
        out.push(ArrivalBounds {
            movement_id: MovementId(fields[0].to_string()),
            cycle_index: fields[1].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid cycle_index: {:?}", fields[1]),
            })?,
            lower: parse(fields[2], "lower_vps")?,
            upper: parse(fields[3], "upper_vps")?,
            valid: match fields[4] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("invalid valid flag: {other:?}"),
                    })
                }
            },
        });
    }
    Ok(out)
}

/// Serializes the box set as a JSON object keyed by movement id.
pub fn write_box_json<W: Write>(set: &BoxUncertaintySet, mut w: W) -> Result<()> {
    let doc = serde_json::to_string_pretty(&set.movements)?;
    writeln!(w, "{doc}")?;
    Ok(())
}

pub fn read_box_json<R: std::io::Read>(mut reader: R) -> Result<BoxUncertaintySet> {
    let mut buf = String::new();
    reader.read_to_string(&mut buf)?;
    let movements: BTreeMap<MovementId, BoxInterval> = serde_json::from_str(&buf)?;
    Ok(BoxUncertaintySet { movements })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(movement: &str) -> CycleObservation {
        CycleObservation {
            movement_id: MovementId(movement.into()),
            cycle_index: 0,
            cycle_length: 100.0,
            p_lq: None,
            t_lq: None,
            tau_lq: None,
            p_lr: None,
            t_lr: None,
            n_nq: 0,
            tau_fn: None,
            oversaturated: false,
        }
    }

    fn params() -> BoundsParams {
        BoundsParams {
            lambda_max: 0.5,
            h_s: 2.0,
        }
    }

    #[test]
    fn first_arrivals_undersaturated_is_position() {
        let mut o = obs("EB");
        o.p_lq = Some(6);
        o.t_lq = Some(30.0);
        assert_eq!(first_arrivals_count(&o).unwrap(), 6.0);
    }

    #[test]
    fn first_arrivals_oversaturated_interpolates() {
        // Hand evaluation: (10-4) * 50 / (50 - (-20)) = 300/70.
        let mut o = obs("EB");
        o.oversaturated = true;
        o.p_lq = Some(10);
        o.p_lr = Some(4);
        o.t_lq = Some(50.0);
        o.t_lr = Some(-20.0);
        let n1 = first_arrivals_count(&o).unwrap();
        assert!((n1 - 300.0 / 70.0).abs() < 1e-12);
        assert!((n1 - 4.285714285714286).abs() < 1e-12);
    }

    #[test]
    fn first_arrivals_equal_positions_is_zero() {
        let mut o = obs("EB");
        o.oversaturated = true;
        o.p_lq = Some(4);
        o.p_lr = Some(4);
        o.t_lq = Some(50.0);
        o.t_lr = Some(-20.0);
        assert_eq!(first_arrivals_count(&o).unwrap(), 0.0);
    }

    #[test]
    fn first_arrivals_degenerate_denominator() {
        let mut o = obs("EB");
        o.oversaturated = true;
        o.p_lq = Some(10);
        o.p_lr = Some(4);
        o.t_lq = Some(50.0);
        o.t_lr = Some(50.0);
        assert!(matches!(
            first_arrivals_count(&o),
            Err(Error::DegenerateCycle { .. })
        ));
    }

    #[test]
    fn effective_max_rate_examples() {
        let mut o = obs("EB");
        o.t_lq = Some(30.0);
        o.tau_lq = Some(45.0);
        o.tau_fn = Some(60.0);
        // min{0.5, 15/60} = 0.25
        assert!((effective_max_rate(&o, &params()).unwrap() - 0.25).abs() < 1e-12);
        // Cap binds.
        let small = BoundsParams {
            lambda_max: 0.1,
            h_s: 2.0,
        };
        assert!((effective_max_rate(&o, &small).unwrap() - 0.1).abs() < 1e-12);
        // tau_fn == tau_lq -> zero numerator.
        o.tau_fn = Some(45.0);
        assert_eq!(effective_max_rate(&o, &params()).unwrap(), 0.0);
        // tau_fn <= t_lq -> degenerate.
        o.tau_fn = Some(30.0);
        assert!(matches!(
            effective_max_rate(&o, &params()),
            Err(Error::DegenerateCycle { .. })
        ));
    }

    #[test]
    fn cycle_bounds_full_example() {
        let mut o = obs("EB");
        o.p_lq = Some(6);
        o.n_nq = 2;
        o.t_lq = Some(30.0);
        o.tau_lq = Some(45.0);
        o.tau_fn = Some(60.0);
        let b = cycle_arrival_bounds(&o, &params()).unwrap();
        assert!(b.valid);
        assert!((b.lower - 0.08).abs() < 1e-12);
        // Independent scaled-integer recomputation of the same quantity:
        // 1000*(6 + 0.25*30 + 0.5*40) = 6000 + 7500 + 20000 = 33500,
        // over 1000*C = 100000.
        let scaled_upper = 33_500.0 / 100_000.0;
        assert!((b.upper - scaled_upper).abs() < 1e-12);
        assert!((b.upper - 0.335).abs() < 1e-12);
    }

    #[test]
    fn oversaturated_bounds_match_symbolic_substitution() {
        // With tau_fn forced to C, upper = (N1 + lambda_eff*(C - t_lq)) / C.
        let mut o = obs("EB");
        o.oversaturated = true;
        o.p_lq = Some(10);
        o.p_lr = Some(4);
        o.t_lq = Some(50.0);
        o.t_lr = Some(-20.0);
        o.tau_lq = Some(70.0);
        o.n_nq = 0;
        let p = params();
        let b = cycle_arrival_bounds(&o, &p).unwrap();
        let n1 = 300.0 / 70.0;
        let lambda_eff = p.lambda_max.min((100.0 - 70.0) / (p.h_s * (100.0 - 50.0)));
        let expect_upper = (n1 + lambda_eff * (100.0 - 50.0)) / 100.0;
        assert!(b.valid);
        assert!((b.upper - expect_upper).abs() < 1e-12);
        assert!((b.lower - n1 / 100.0).abs() < 1e-12);
    }

    #[test]
    fn uninformative_cycle_is_invalid() {
        let b = cycle_arrival_bounds(&obs("EB"), &params()).unwrap();
        assert!(!b.valid);
    }

    fn mk_bounds(movement: &str, pairs: &[(f64, f64)]) -> Vec<ArrivalBounds> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(lower, upper))| ArrivalBounds {
                movement_id: MovementId(movement.into()),
                cycle_index: i as i64,
                lower,
                upper,
                valid: true,
            })
            .collect()
    }

    #[test]
    fn box_set_medians() {
        let ms = vec![MovementId("EB".into())];
        let b = mk_bounds("EB", &[(0.05, 0.2), (0.07, 0.3), (0.09, 0.4)]);
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let iv = set.interval(&ms[0]).unwrap();
        assert_eq!(iv.l_hat, 0.07);
        assert_eq!(iv.u_hat, 0.3);
        assert_eq!(iv.support_count, 3);

        let b = mk_bounds("EB", &[(0.05, 0.2), (0.07, 0.3)]);
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let iv = set.interval(&ms[0]).unwrap();
        assert!((iv.l_hat - 0.06).abs() < 1e-12);
        assert!((iv.u_hat - 0.25).abs() < 1e-12);

        let b = mk_bounds("EB", &[(0.11, 0.21)]);
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let iv = set.interval(&ms[0]).unwrap();
        assert_eq!((iv.l_hat, iv.u_hat), (0.11, 0.21));
    }

    #[test]
    fn box_set_fallback_when_no_valid_cycles() {
        let ms = vec![MovementId("NB".into())];
        let mut b = mk_bounds("NB", &[(0.2, 0.1)]);
        b[0].valid = false;
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let iv = set.interval(&ms[0]).unwrap();
        assert_eq!((iv.l_hat, iv.u_hat, iv.support_count), (0.0, 0.5, 0));
    }

    #[test]
    fn box_set_is_permutation_invariant() {
        let ms = vec![MovementId("EB".into())];
        let mut b = mk_bounds("EB", &[(0.05, 0.2), (0.09, 0.4), (0.07, 0.3), (0.2, 0.6)]);
        let forward = build_box_set(&b, &ms, &params()).unwrap();
        b.reverse();
        let backward = build_box_set(&b, &ms, &params()).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn median_coverage_counts() {
        // For every movement, at least half the valid cycles satisfy
        // lower <= u_hat and at least half satisfy upper >= l_hat.
        let ms = vec![MovementId("EB".into())];
        let b = mk_bounds(
            "EB",
            &[(0.02, 0.1), (0.05, 0.2), (0.07, 0.25), (0.09, 0.4), (0.2, 0.6)],
        );
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let iv = set.interval(&ms[0]).unwrap();
        let valid: Vec<&ArrivalBounds> = b.iter().filter(|x| x.valid).collect();
        let need = valid.len().div_ceil(2);
        let covered_low = valid.iter().filter(|x| x.lower <= iv.u_hat).count();
        let covered_up = valid.iter().filter(|x| x.upper >= iv.l_hat).count();
        assert!(covered_low >= need);
        assert!(covered_up >= need);
    }

    #[test]
    fn mean_rate_examples() {
        let b = mk_bounds("EB", &[(0.08, 0.335)]);
        assert!((mean_rate_estimate(&b).unwrap() - 0.2075).abs() < 1e-12);
        let b = mk_bounds("EB", &[(0.1, 0.2), (0.2, 0.4)]);
        assert!((mean_rate_estimate(&b).unwrap() - 0.225).abs() < 1e-12);
        let b = mk_bounds("EB", &[(0.3, 0.3), (0.3, 0.3)]);
        assert!((mean_rate_estimate(&b).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(mean_rate_estimate(&[]), None);
    }

    #[test]
    fn scaling_covariance() {
        // Scaling all times by c and lambda_max by 1/c scales both bounds by 1/c.
        let c = 3.0;
        let mut o = obs("EB");
        o.p_lq = Some(6);
        o.n_nq = 2;
        o.t_lq = Some(30.0);
        o.tau_lq = Some(45.0);
        o.tau_fn = Some(60.0);
        let base = cycle_arrival_bounds(&o, &params()).unwrap();

        let mut scaled = o.clone();
        scaled.cycle_length *= c;
        scaled.t_lq = scaled.t_lq.map(|v| v * c);
        scaled.tau_lq = scaled.tau_lq.map(|v| v * c);
        scaled.tau_fn = scaled.tau_fn.map(|v| v * c);
        let p = BoundsParams {
            lambda_max: params().lambda_max / c,
            h_s: params().h_s * c,
        };
        let got = cycle_arrival_bounds(&scaled, &p).unwrap();
        assert!((got.lower - base.lower / c).abs() < 1e-12);
        assert!((got.upper - base.upper / c).abs() < 1e-12);
    }

    #[test]
    fn bounds_csv_round_trip() {
        let b = mk_bounds("EB", &[(0.08, 0.335), (0.1, 0.25)]);
        let mut buf = Vec::new();
        write_bounds_csv(&b, &mut buf).unwrap();
        let parsed = read_bounds_csv(&buf[..]).unwrap();
        assert_eq!(parsed, b);
    }

    #[test]
    fn box_json_round_trip() {
        let ms = vec![MovementId("EB".into()), MovementId("NB".into())];
        let mut b = mk_bounds("EB", &[(0.05, 0.2), (0.07, 0.3)]);
        b.extend(mk_bounds("NB", &[(0.1, 0.5)]));
        let set = build_box_set(&b, &ms, &params()).unwrap();
        let mut buf = Vec::new();
        write_box_json(&set, &mut buf).unwrap();
        let parsed = read_box_json(&buf[..]).unwrap();
        assert_eq!(parsed, set);
    }
}

//! Shared fixtures for the integration and acceptance suites.
#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use sigro::signal::{
    Mode, MovementParams, OptimizationInstance, PhaseStructure, SignalPlan, Stage,
    DEFAULT_BIG_M, DEFAULT_EPSILON,
};
use sigro::trajectory::MovementId;
use sigro::uncertainty::{BoxInterval, BoxUncertaintySet};
use std::collections::BTreeMap;

pub fn mid(id: &str) -> MovementId {
    MovementId(id.to_string())
}

pub fn movement(id: &str, stage: usize) -> MovementParams {
    MovementParams {
        movement_id: mid(id),
        discharge_headway: 2.0,
        yellow: 3.0,
        startup_lost: 2.0,
        yellow_lost: 1.0,
        stage_index: stage,
    }
}

/// Two movements, two stages, 15 s minimum greens, cycle bounds [40, 160].
pub fn two_stage_instance(
    cv_eb: Vec<f64>,
    cv_nb: Vec<f64>,
    alpha: f64,
) -> OptimizationInstance {
    let movements = vec![movement("EB", 0), movement("NB", 1)];
    let phase = PhaseStructure {
        stages: vec![
            Stage {
                min_green: 15.0,
                movements: vec![mid("EB")],
            },
            Stage {
                min_green: 15.0,
                movements: vec![mid("NB")],
            },
        ],
        c_min: 40.0,
        c_max: 160.0,
    };
    let mut cv_arrivals = BTreeMap::new();
    cv_arrivals.insert(mid("EB"), cv_eb);
    cv_arrivals.insert(mid("NB"), cv_nb);
    OptimizationInstance {
        mode: Mode::FixedTime,
        movements,
        phase,
        cv_arrivals,
        alpha,
        red_starts: BTreeMap::new(),
        big_m: DEFAULT_BIG_M,
        epsilon: DEFAULT_EPSILON,
    }
}

pub fn box_set(rates: &[(&str, f64, f64)]) -> BoxUncertaintySet {
    let mut set = BoxUncertaintySet::default();
    for &(id, l, u) in rates {
        set.movements.insert(
            mid(id),
            BoxInterval {
                l_hat: l,
                u_hat: u,
                support_count: 1,
            },
        );
    }
    set
}

pub fn rates(pairs: &[(&str, f64)]) -> BTreeMap<MovementId, f64> {
    pairs.iter().map(|&(id, r)| (mid(id), r)).collect()
}

/// Random small fixed-time fixture: 1-3 movements in as many stages, a box
/// interval per movement, and one candidate cycle length.
pub struct RandomFixture {
    pub inst: OptimizationInstance,
    pub set: BoxUncertaintySet,
    pub cycle: f64,
}

pub fn random_fixture(seed: u64) -> RandomFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_mov = rng.gen_range(1..=3usize);
    let names = ["EB", "NB", "WB"];
    let mut movements = Vec::new();
    let mut stages = Vec::new();
    let mut set = BoxUncertaintySet::default();
    let mut cv_arrivals = BTreeMap::new();
    for (s, &name) in names.iter().take(n_mov).enumerate() {
        movements.push(MovementParams {
            movement_id: mid(name),
            discharge_headway: rng.gen_range(1.8..2.5),
            yellow: 3.0,
            startup_lost: rng.gen_range(1.0..2.5),
            yellow_lost: rng.gen_range(0.5..1.0),
            stage_index: s,
        });
        stages.push(Stage {
            min_green: rng.gen_range(10.0..16.0),
            movements: vec![mid(name)],
        });
        let u = rng.gen_range(0.05..0.35);
        let l = u * rng.gen_range(0.3..1.0);
        set.movements.insert(
            mid(name),
            BoxInterval {
                l_hat: l,
                u_hat: u,
                support_count: 1,
            },
        );
    }
    let min_total: f64 = stages.iter().map(|s| s.min_green).sum();
    let cycle = rng.gen_range((min_total + 5.0).max(40.0)..120.0);
    for &name in names.iter().take(n_mov) {
        let n_cv = rng.gen_range(0..=6usize);
        let mut arrivals: Vec<f64> = (0..n_cv)
            .map(|_| rng.gen_range(0.0..3.0 * cycle))
            .collect();
        arrivals.sort_by(f64::total_cmp);
        cv_arrivals.insert(mid(name), arrivals);
    }
    let inst = OptimizationInstance {
        mode: Mode::FixedTime,
        movements,
        phase: PhaseStructure {
            stages,
            c_min: 30.0_f64.min(min_total),
            c_max: 160.0,
        },
        cv_arrivals,
        alpha: rng.gen_range(600.0..3600.0),
        red_starts: BTreeMap::new(),
        big_m: DEFAULT_BIG_M,
        epsilon: DEFAULT_EPSILON,
    };
    RandomFixture { inst, set, cycle }
}

/// Random valid plan for an instance at a given cycle length: stage splits
/// drawn above the minimum greens and normalized to the cycle.
pub fn random_plan(inst: &OptimizationInstance, cycle: f64, rng: &mut ChaCha8Rng) -> SignalPlan {
    let stages = &inst.phase.stages;
    let min_total: f64 = stages.iter().map(|s| s.min_green).sum();
    let slack = cycle - min_total;
    assert!(slack >= 0.0, "cycle shorter than minimum greens");
    let weights: Vec<f64> = stages.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let durations: Vec<f64> = stages
        .iter()
        .zip(&weights)
        .map(|(s, w)| s.min_green + slack * w / wsum)
        .collect();
    let mut greens = BTreeMap::new();
    let mut acc = 0.0;
    for (s, d) in durations.iter().enumerate() {
        for m in inst.movements.iter().filter(|m| m.stage_index == s) {
            greens.insert(
                m.movement_id.clone(),
                sigro::signal::GreenWindow {
                    start: acc,
                    end: acc + d - m.yellow,
                },
            );
        }
        acc += d;
    }
    SignalPlan {
        cycle_length: cycle,
        greens,
    }
}

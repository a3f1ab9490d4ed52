//! Experiment sweeps: train on a simulated horizon under the base plan,
//! build bounds from sampled CV trajectories, optimize one plan per method,
//! evaluate each plan on a disjoint seeded horizon, and report long-format
//! results.
//!
//! Seeding is paired for variance reduction: demand and CV-marking streams
//! depend only on (fluctuation, replication), so methods within a cell see
//! identical training data, penetration levels see nested CV subsets of the
//! same vehicles, and evaluation demand is shared by every method.

use crate::config::{parse_method, ExperimentConfig, Method};
use crate::lp::{SolveOptions, SolveStatus};
use crate::par;
use crate::signal::{optimize_with_rates, OptimizationInstance};
use crate::sim::{
    derive_seed, generate_demand, measure, movement_cycles, sample_cvs, simulate,
};
use crate::trajectory::{classify_and_observe, virtual_arrival_time, CvTrajectory, MovementId};
use crate::uncertainty::{build_box_set, cycle_arrival_bounds, mean_rates, ArrivalBounds};
use crate::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

/// One sweep cell's results (or its failure).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellRow {
    pub method: Method,
    pub penetration: f64,
    pub fluctuation: f64,
    pub replication: usize,
    pub status: CellStatus,
    pub mean_delay_s: Option<f64>,
    pub median_delay_s: Option<f64>,
    pub residual_cycle_freq: Option<f64>,
    pub spillback: Option<bool>,
    pub objective: Option<f64>,
    pub cycle_length_s: Option<f64>,
    pub solve_wall_ms: Option<f64>,
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// Per-(method, penetration, fluctuation) aggregate over replications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub penetration: f64,
    pub fluctuation: f64,
    pub replications: usize,
    pub failures: usize,
    pub mean_delay_s: f64,
    pub std_delay_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<CellRow>,
    pub aggregates: Vec<AggregateRow>,
}

impl EvaluationReport {
    /// Mean evaluated delay of one aggregate cell.
    pub fn cell_mean(&self, method: Method, penetration: f64, fluctuation: f64) -> Option<f64> {
        self.aggregates
            .iter()
            .find(|a| {
                a.method == method
                    && (a.penetration - penetration).abs() < 1e-12
                    && (a.fluctuation - fluctuation).abs() < 1e-12
            })
            .map(|a| a.mean_delay_s)
    }
}

/// Runs the sweep with the crate's default execution mode (parallel when the
/// `parallel` feature is on), writing per-cell artifacts under `out_dir`
/// when given.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<EvaluationReport> {
    run_inner(cfg, out_dir, true)
}

/// Always-sequential variant (benchmark baseline and minimal environments).
pub fn run_experiment_seq(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<EvaluationReport> {
    run_inner(cfg, out_dir, false)
}

fn run_inner(
    cfg: &ExperimentConfig,
    out_dir: Option<&Path>,
    parallel: bool,
) -> Result<EvaluationReport> {
    cfg.validate()?;
    let methods: Vec<Method> = cfg
        .sweep
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<_>>()?;
    let fluctuations: Vec<f64> = cfg
        .sweep
        .fluctuation_cvs
        .clone()
        .unwrap_or_else(|| vec![cfg.scenario.fluctuation_cv]);
    let master = cfg.sweep.master_seed.unwrap_or(cfg.scenario.seed);

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir.join("cells"))?;
    }

    let items: Vec<(usize, usize)> = fluctuations
        .iter()
        .enumerate()
        .flat_map(|(f_idx, _)| (0..cfg.sweep.replications).map(move |rep| (f_idx, rep)))
        .collect();

    let run_item = |&(f_idx, rep): &(usize, usize)| -> Vec<CellRow> {
        run_cell_group(cfg, &methods, &fluctuations, master, f_idx, rep, out_dir)
    };

    let groups: Vec<Vec<CellRow>> = if parallel {
        par::with_workers(cfg.sweep.workers, || {
            par::map_collect(items.clone(), |it| run_item(&it))
        })
    } else {
        par::map_collect_seq(items, |it| run_item(&it))
    };

    let mut rows: Vec<CellRow> = groups.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.penetration.total_cmp(&b.penetration))
            .then(a.fluctuation.total_cmp(&b.fluctuation))
            .then(a.replication.cmp(&b.replication))
    });

    let mut aggregates = Vec::new();
    for &method in &methods {
        for &pen in &cfg.sweep.penetration_rates {
            for &fl in &fluctuations {
                let cell: Vec<&CellRow> = rows
                    .iter()
                    .filter(|r| {
                        r.method == method
                            && (r.penetration - pen).abs() < 1e-12
                            && (r.fluctuation - fl).abs() < 1e-12
                    })
                    .collect();
                let delays: Vec<f64> = cell.iter().filter_map(|r| r.mean_delay_s).collect();
                let n = delays.len();
                let mean = if n > 0 {
                    delays.iter().sum::<f64>() / n as f64
                } else {
                    f64::NAN
                };
                let std = if n > 1 {
                    (delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64)
                        .sqrt()
                } else {
                    0.0
                };
                aggregates.push(AggregateRow {
                    method,
                    penetration: pen,
                    fluctuation: fl,
                    replications: cell.len(),
                    failures: cell.len() - n,
                    mean_delay_s: mean,
                    std_delay_s: std,
                });
            }
        }
    }

    let report = EvaluationReport { rows, aggregates };
    if let Some(dir) = out_dir {
        write_report(&report, dir)?;
    }
    Ok(report)
}

/// Everything sharing one (fluctuation, replication): one training
/// simulation, nested CV samples per penetration, one plan per method, one
/// shared evaluation demand.
#[allow(clippy::too_many_arguments)]
fn run_cell_group(
    cfg: &ExperimentConfig,
    methods: &[Method],
    fluctuations: &[f64],
    master: u64,
    f_idx: usize,
    rep: usize,
    out_dir: Option<&Path>,
) -> Vec<CellRow> {
    let fluctuation = fluctuations[f_idx];
    let mut rows = Vec::new();
    let fail_all = |msg: String| -> Vec<CellRow> {
        let mut out = Vec::new();
        for &method in methods {
            for &pen in &cfg.sweep.penetration_rates {
                out.push(failed_row(method, pen, fluctuation, rep, msg.clone()));
            }
        }
        out
    };

    let movements = cfg.movements();
    let base_plan = match cfg.base_plan() {
        Ok(p) => p,
        Err(e) => return fail_all(e.to_string()),
    };
    let bounds_params = match cfg.bounds_params() {
        Ok(p) => p,
        Err(e) => return fail_all(e.to_string()),
    };
    let classify_params = cfg.classify_params();
    let grid = cfg.cycle_grid();
    let opts = SolveOptions::default();

    // Training horizon under the base plan.
    let train_seed = derive_seed(master, &[1, f_idx as u64, rep as u64]);
    let mut train_scn = match cfg.scenario(cfg.sweep.train_cycles, train_seed) {
        Ok(s) => s,
        Err(e) => return fail_all(e.to_string()),
    };
    train_scn.fluctuation_cv = fluctuation;
    let mut train_arrivals = BTreeMap::new();
    for (i, d) in train_scn.demands.iter().enumerate() {
        train_arrivals.insert(
            d.movement_id.clone(),
            generate_demand(
                d.demand_vph,
                fluctuation,
                base_plan.cycle_length,
                cfg.sweep.train_cycles,
                derive_seed(train_seed, &[i as u64]),
            ),
        );
    }
    let train_res = match simulate(&base_plan, &movements, &train_arrivals, &train_scn) {
        Ok(r) => r,
        Err(e) => return fail_all(format!("training simulation: {e}")),
    };

    // Ground-truth mean rates over the tracked training cycles.
    let mut true_rates: BTreeMap<MovementId, f64> = BTreeMap::new();
    for m in &movements {
        let (sum, n) = train_res
            .cycles
            .iter()
            .filter(|c| c.movement_id == m.movement_id)
            .fold((0u32, 0usize), |(s, n), c| (s + c.arrivals, n + 1));
        let rate = if n > 0 {
            f64::from(sum) / (n as f64 * base_plan.cycle_length)
        } else {
            0.0
        };
        true_rates.insert(m.movement_id.clone(), rate);
    }

    // Evaluation demand, shared by every method and penetration.
    let eval_seed = derive_seed(master, &[2, f_idx as u64, rep as u64]);
    let mut eval_arrivals = BTreeMap::new();
    for (i, d) in train_scn.demands.iter().enumerate() {
        eval_arrivals.insert(
            d.movement_id.clone(),
            generate_demand(
                d.demand_vph,
                fluctuation,
                base_plan.cycle_length,
                cfg.sweep.eval_cycles,
                derive_seed(eval_seed, &[i as u64]),
            ),
        );
    }
    let eval_scn = match cfg.scenario(cfg.sweep.eval_cycles, eval_seed) {
        Ok(mut s) => {
            s.fluctuation_cv = fluctuation;
            s
        }
        Err(e) => return fail_all(e.to_string()),
    };

    let cv_seed = derive_seed(master, &[3, f_idx as u64, rep as u64]);
    for &pen in &cfg.sweep.penetration_rates {
        let trajs = sample_cvs(&train_res, &movements, &train_scn, pen, cv_seed);
        let mut by_movement: BTreeMap<&MovementId, Vec<&CvTrajectory>> = BTreeMap::new();
        for t in &trajs {
            by_movement.entry(&t.movement_id).or_default().push(t);
        }

        // Per-cycle bounds from the classified training cycles.
        let mut bounds: Vec<ArrivalBounds> = Vec::new();
        let mut classify_err: Option<String> = None;
        'outer: for m in &movements {
            let own: Vec<CvTrajectory> = by_movement
                .get(&m.movement_id)
                .map(|v| v.iter().map(|&t| t.clone()).collect())
                .unwrap_or_default();
            let specs = match movement_cycles(&base_plan, m, cfg.sweep.train_cycles) {
                Ok(s) => s,
                Err(e) => {
                    classify_err = Some(e.to_string());
                    break 'outer;
                }
            };
            for spec in specs {
                match classify_and_observe(&own, &spec, &classify_params) {
                    Ok((obs, _)) => match cycle_arrival_bounds(&obs, &bounds_params) {
                        Ok(mut b) => {
                            b.movement_id = m.movement_id.clone();
                            bounds.push(b);
                        }
                        Err(e) => {
                            classify_err = Some(e.to_string());
                            break 'outer;
                        }
                    },
                    Err(e) => {
                        classify_err = Some(e.to_string());
                        break 'outer;
                    }
                }
            }
        }
        if let Some(msg) = classify_err {
            for &method in methods {
                rows.push(failed_row(method, pen, fluctuation, rep, msg.clone()));
            }
            continue;
        }

        let movement_ids: Vec<MovementId> =
            movements.iter().map(|m| m.movement_id.clone()).collect();
        let set = match build_box_set(&bounds, &movement_ids, &bounds_params) {
            Ok(s) => s,
            Err(e) => {
                for &method in methods {
                    rows.push(failed_row(method, pen, fluctuation, rep, e.to_string()));
                }
                continue;
            }
        };
        let do_rates = mean_rates(&bounds, &movement_ids, &bounds_params);

        // CV arrivals feeding the delay terms, shared by all methods.
        let mut cv_arrivals: BTreeMap<MovementId, Vec<f64>> = BTreeMap::new();
        for m in &movements {
            let mut t0s: Vec<f64> = by_movement
                .get(&m.movement_id)
                .map(|v| {
                    v.iter()
                        .filter_map(|t| {
                            virtual_arrival_time(t, classify_params.free_flow_speed).ok()
                        })
                        .collect()
                })
                .unwrap_or_default();
            t0s.sort_by(f64::total_cmp);
            cv_arrivals.insert(m.movement_id.clone(), t0s);
        }
        let inst = match cfg.instance(cv_arrivals) {
            Ok(i) => i,
            Err(e) => {
                for &method in methods {
                    rows.push(failed_row(method, pen, fluctuation, rep, e.to_string()));
                }
                continue;
            }
        };

        for &method in methods {
            let rates = match method {
                Method::CvRo => set.upper_rates(),
                Method::CvDo => do_rates.clone(),
                Method::TrueRate => true_rates.clone(),
            };
            let row = run_method_cell(
                &inst,
                &rates,
                &grid,
                &opts,
                &movements,
                &eval_arrivals,
                &eval_scn,
                method,
                pen,
                fluctuation,
                rep,
                out_dir,
            );
            rows.push(row);
        }
    }
    rows
}

#[allow(clippy::too_many_arguments)]
fn run_method_cell(
    inst: &OptimizationInstance,
    rates: &BTreeMap<MovementId, f64>,
    grid: &[f64],
    opts: &SolveOptions,
    movements: &[crate::signal::MovementParams],
    eval_arrivals: &BTreeMap<MovementId, Vec<f64>>,
    eval_scn: &crate::sim::ScenarioConfig,
    method: Method,
    pen: f64,
    fluctuation: f64,
    rep: usize,
    out_dir: Option<&Path>,
) -> CellRow {
    let started = Instant::now();
    let solve = match optimize_with_rates(inst, rates, grid, opts) {
        Ok(s) => s,
        Err(e) => return failed_row(method, pen, fluctuation, rep, e.to_string()),
    };
    let wall_ms = started.elapsed().as_secs_f64() * 1e3;
    if solve.status != SolveStatus::Optimal {
        return failed_row(
            method,
            pen,
            fluctuation,
            rep,
            format!("optimization ended {:?}", solve.status),
        );
    }
    let plan = match solve.plan(movements) {
        Ok(p) => p,
        Err(e) => return failed_row(method, pen, fluctuation, rep, e.to_string()),
    };
    let eval = match simulate(&plan, movements, eval_arrivals, eval_scn) {
        Ok(r) => r,
        Err(e) => {
            return failed_row(method, pen, fluctuation, rep, format!("evaluation: {e}"))
        }
    };
    let stats = measure(&eval);

    if let Some(dir) = out_dir {
        let cell_dir = dir.join("cells").join(format!(
            "{}_p{:.2}_f{:.2}_r{rep}",
            method.name(),
            pen,
            fluctuation
        ));
        let _ = std::fs::create_dir_all(&cell_dir);
        if let Ok(json) = solve.to_json_pretty() {
            let _ = std::fs::write(cell_dir.join("solve.json"), json);
        }
        if let Some(st) = &stats {
            if let Ok(json) = serde_json::to_string_pretty(st) {
                let _ = std::fs::write(cell_dir.join("eval.json"), json + "\n");
            }
        }
    }

    CellRow {
        method,
        penetration: pen,
        fluctuation,
        replication: rep,
        status: CellStatus::Ok,
        mean_delay_s: Some(stats.as_ref().map_or(0.0, |s| s.mean_delay)),
        median_delay_s: Some(stats.as_ref().map_or(0.0, |s| s.median_delay)),
        residual_cycle_freq: Some(stats.as_ref().map_or(0.0, |s| s.residual_cycle_frequency)),
        spillback: Some(eval.spillback),
        objective: Some(solve.objective),
        cycle_length_s: solve.cycle_length,
        solve_wall_ms: Some(wall_ms),
        message: None,
    }
}

fn failed_row(
    method: Method,
    penetration: f64,
    fluctuation: f64,
    replication: usize,
    message: String,
) -> CellRow {
    CellRow {
        method,
        penetration,
        fluctuation,
        replication,
        status: CellStatus::Failed,
        mean_delay_s: None,
        median_delay_s: None,
        residual_cycle_freq: None,
        spillback: None,
        objective: None,
        cycle_length_s: None,
        solve_wall_ms: None,
        message: Some(message),
    }
}

pub const REPORT_CSV_HEADER: &str = "method,penetration,fluctuation,replication,status,\
mean_delay_s,median_delay_s,residual_cycle_freq,spillback,objective,cycle_length_s,\
solve_wall_ms,message";

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Writes `report.csv` (long format, one row per cell) and `report.json`
/// (rows plus aggregates).
pub fn write_report(report: &EvaluationReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::new();
    csv.push_str(REPORT_CSV_HEADER);
    csv.push('\n');
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.method,
            r.penetration,
            r.fluctuation,
            r.replication,
            match r.status {
                CellStatus::Ok => "ok",
                CellStatus::Failed => "failed",
            },
            opt_num(r.mean_delay_s),
            opt_num(r.median_delay_s),
            opt_num(r.residual_cycle_freq),
            r.spillback.map(|b| b.to_string()).unwrap_or_default(),
            opt_num(r.objective),
            opt_num(r.cycle_length_s),
            opt_num(r.solve_wall_ms),
            r.message.as_deref().unwrap_or("").replace(',', ";"),
        ));
    }
    std::fs::write(dir.join("report.csv"), csv)?;
    let json = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}

//! `sigro` command line: trajectory-to-bounds extraction, robust timing
//! optimization, single-run simulation, and full experiment sweeps, all
//! driven by one TOML config. Exit codes: 0 success, 1 validation error,
//! 2 infeasible optimization.

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand};
use sigro::config::ExperimentConfig;
use sigro::lp::SolveStatus;
use sigro::signal::{
    build_fixed_time_model, build_real_time_model, deterministic_baseline, optimize_fixed_time,
    optimize_real_time, robust_counterpart, Mode, SignalPlan, SolveResult,
};
use sigro::sim::{derive_seed, generate_demand, measure, sample_cvs, simulate};
use sigro::sweep::run_experiment;
use sigro::trajectory::{
    classify_and_observe, parse_trajectories, virtual_arrival_time, write_trajectories,
    CvTrajectory, MovementId,
};
use sigro::uncertainty::{
    build_box_set, cycle_arrival_bounds, mean_rates, read_bounds_csv, read_box_json,
    write_bounds_csv, write_box_json, ArrivalBounds, BoxUncertaintySet,
};
use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sigro", version, about = "Robust signal timing from sampled vehicle trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-cycle arrival-rate bounds and the box uncertainty set
    /// from a trajectory CSV.
    Bounds {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed (bounds extraction itself is
        /// deterministic).
        #[arg(long)]
        seed: Option<u64>,
        /// Trajectory CSV; defaults to io.trajectories from the config.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Solve the timing program from a box set (robust) or bounds CSV.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Box uncertainty set JSON (as written by `bounds`).
        #[arg(long = "box")]
        box_path: Option<PathBuf>,
        /// Per-cycle bounds CSV (as written by `bounds`).
        #[arg(long)]
        bounds: Option<PathBuf>,
        /// Run a deterministic baseline instead of the robust model
        /// (supported: cv-do).
        #[arg(long)]
        baseline: Option<String>,
        /// Also write the LP-style model dump of the winning model.
        #[arg(long)]
        dump_model: bool,
        /// Overrides optimize.mode from the config.
        #[arg(long)]
        mode: Option<String>,
        /// Trajectory CSV for the CV delay terms; defaults to
        /// io.trajectories, empty if absent.
        #[arg(long)]
        trajectories: Option<PathBuf>,
    },
    /// Simulate a plan against the configured demand scenario.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Plan JSON (a solve result or a bare plan); defaults to the
        /// config's base plan.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Sample CVs at this rate and emit trajectories.csv.
        #[arg(long)]
        penetration: Option<f64>,
    },
    /// Run the full experiment sweep and write report.csv / report.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides sweep.master_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Bounds {
            config,
            out,
            seed,
            trajectories,
        } => cmd_bounds(&config, &out, seed, trajectories.as_deref()),
        Command::Optimize {
            config,
            out,
            seed,
            box_path,
            bounds,
            baseline,
            dump_model,
            mode,
            trajectories,
        } => cmd_optimize(
            &config,
            &out,
            seed,
            box_path.as_deref(),
            bounds.as_deref(),
            baseline.as_deref(),
            dump_model,
            mode.as_deref(),
            trajectories.as_deref(),
        ),
        Command::Simulate {
            config,
            out,
            seed,
            plan,
            penetration,
        } => cmd_simulate(&config, &out, seed, plan.as_deref(), penetration),
        Command::Sweep { config, out, seed } => cmd_sweep(&config, &out, seed),
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)
        .with_context(|| format!("loading config {}", path.display()))?;
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    Ok(cfg)
}

fn load_trajectories(
    cfg: &ExperimentConfig,
    config_path: &Path,
    flag: Option<&Path>,
) -> anyhow::Result<Option<Vec<CvTrajectory>>> {
    let path = match flag {
        Some(p) => Some(p.to_path_buf()),
        None => cfg.io.trajectories.as_ref().map(|p| {
            if p.is_relative() {
                config_path.parent().unwrap_or(Path::new(".")).join(p)
            } else {
                p.clone()
            }
        }),
    };
    let Some(path) = path else { return Ok(None) };
    let file = fs::File::open(&path)
        .with_context(|| format!("opening trajectory file {}", path.display()))?;
    let trajs = parse_trajectories(BufReader::new(file))
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(trajs))
}

/// Classifies every tracked cycle of every movement and returns the
/// per-cycle bounds.
fn bounds_from_trajectories(
    cfg: &ExperimentConfig,
    trajs: &[CvTrajectory],
) -> anyhow::Result<Vec<ArrivalBounds>> {
    let plan = cfg.base_plan()?;
    let params = cfg.classify_params();
    let bparams = cfg.bounds_params()?;
    let mut by_movement: BTreeMap<&MovementId, Vec<CvTrajectory>> = BTreeMap::new();
    for t in trajs {
        by_movement.entry(&t.movement_id).or_default().push(t.clone());
    }
    let mut bounds = Vec::new();
    for m in cfg.movements() {
        let own = by_movement
            .get(&m.movement_id)
            .cloned()
            .unwrap_or_default();
        for spec in sigro::sim::movement_cycles(&plan, &m, cfg.scenario.horizon_cycles)? {
            let (obs, _) = classify_and_observe(&own, &spec, &params)?;
            let mut b = cycle_arrival_bounds(&obs, &bparams)?;
            b.movement_id = m.movement_id.clone();
            bounds.push(b);
        }
    }
    Ok(bounds)
}

fn cmd_bounds(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    trajectories: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config_path, seed)?;
    let trajs = load_trajectories(&cfg, config_path, trajectories)?
        .ok_or_else(|| anyhow!("no trajectory file: pass --trajectories or set io.trajectories"))?;
    let bounds = bounds_from_trajectories(&cfg, &trajs)?;
    let ids: Vec<MovementId> = cfg.movements().iter().map(|m| m.movement_id.clone()).collect();
    let set = build_box_set(&bounds, &ids, &cfg.bounds_params()?)?;

    fs::create_dir_all(out)?;
    let mut csv = Vec::new();
    write_bounds_csv(&bounds, &mut csv)?;
    fs::write(out.join("bounds.csv"), csv)?;
    let mut json = Vec::new();
    write_box_json(&set, &mut json)?;
    fs::write(out.join("box.json"), json)?;

    for (id, iv) in &set.movements {
        println!(
            "{id}: rate in [{:.4}, {:.4}] veh/s from {} valid cycles",
            iv.l_hat, iv.u_hat, iv.support_count
        );
    }
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_optimize(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    box_path: Option<&Path>,
    bounds_path: Option<&Path>,
    baseline: Option<&str>,
    dump_model: bool,
    mode: Option<&str>,
    trajectories: Option<&Path>,
) -> anyhow::Result<ExitCode> {
    let mut cfg = load_config(config_path, seed)?;
    if let Some(m) = mode {
        cfg.optimize.mode = m.to_string();
        cfg.validate()?;
    }

    let ids: Vec<MovementId> = cfg.movements().iter().map(|m| m.movement_id.clone()).collect();
    let bparams = cfg.bounds_params()?;
    let (set, cycle_bounds): (BoxUncertaintySet, Option<Vec<ArrivalBounds>>) =
        match (box_path, bounds_path) {
            (Some(p), _) => {
                let file = fs::File::open(p)
                    .with_context(|| format!("opening box set {}", p.display()))?;
                (read_box_json(BufReader::new(file))?, None)
            }
            (None, Some(p)) => {
                let file = fs::File::open(p)
                    .with_context(|| format!("opening bounds {}", p.display()))?;
                let rows = read_bounds_csv(BufReader::new(file))?;
                let set = build_box_set(&rows, &ids, &bparams)?;
                (set, Some(rows))
            }
            (None, None) => bail!("pass --box <box.json> or --bounds <bounds.csv>"),
        };

    let trajs = load_trajectories(&cfg, config_path, trajectories)?.unwrap_or_default();
    let mut cv_arrivals: BTreeMap<MovementId, Vec<f64>> = BTreeMap::new();
    for m in cfg.movements() {
        let mut t0s: Vec<f64> = trajs
            .iter()
            .filter(|t| t.movement_id == m.movement_id)
            .filter_map(|t| virtual_arrival_time(t, cfg.scenario.free_flow_speed).ok())
            .collect();
        t0s.sort_by(f64::total_cmp);
        cv_arrivals.insert(m.movement_id.clone(), t0s);
    }
    let inst = cfg.instance(cv_arrivals)?;
    let grid = cfg.cycle_grid();
    let opts = sigro::lp::SolveOptions::default();

    let result: SolveResult = match baseline {
        None => match inst.mode {
            Mode::FixedTime => optimize_fixed_time(&inst, &set, &grid, &opts)?,
            Mode::RealTime => optimize_real_time(&inst, &set, &opts)?,
        },
        Some("cv-do") => {
            let rows = cycle_bounds
                .ok_or_else(|| anyhow!("--baseline cv-do needs --bounds (per-cycle rows)"))?;
            let rates = mean_rates(&rows, &ids, &bparams);
            deterministic_baseline(&inst, &rates, &grid, &opts)?
        }
        Some(other) => bail!("unsupported baseline {other:?} (supported: cv-do)"),
    };

    fs::create_dir_all(out)?;
    fs::write(out.join("solve.json"), result.to_json_pretty()?)?;

    if dump_model {
        let rates = match baseline {
            None => robust_counterpart(&set),
            Some(_) => {
                let rows = read_bounds_csv(BufReader::new(fs::File::open(
                    bounds_path.expect("baseline requires bounds"),
                )?))?;
                mean_rates(&rows, &ids, &bparams)
            }
        };
        let built = match inst.mode {
            Mode::FixedTime => {
                let c = result
                    .cycle_length
                    .unwrap_or_else(|| *grid.first().expect("nonempty grid"));
                build_fixed_time_model(&inst, &rates, c)?
            }
            Mode::RealTime => build_real_time_model(&inst, &rates)?,
        };
        fs::write(out.join("model.lp"), built.model.dump())?;
    }

    match result.status {
        SolveStatus::Optimal => {
            let c = result.cycle_length.unwrap_or(f64::NAN);
            println!(
                "optimal: objective {:.3}, cycle {:.1} s, {} movements, {} CVs",
                result.objective,
                c,
                result.movements.len(),
                result.cvs.len()
            );
            for (id, m) in &result.movements {
                println!(
                    "  {id}: green [{:.1}, {:.1}] s, residual queue {:.3} veh",
                    m.g_s, m.g_e, m.residual_queue
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        status => {
            eprintln!("optimization ended without an optimal plan: {status:?}");
            for c in &result.candidates {
                eprintln!(
                    "  C={:.1}: {:?} {}",
                    c.cycle_length,
                    c.status,
                    c.note.as_deref().unwrap_or("")
                );
            }
            Ok(ExitCode::from(2))
        }
    }
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    seed: Option<u64>,
    plan_path: Option<&Path>,
    penetration: Option<f64>,
) -> anyhow::Result<ExitCode> {
    let cfg = load_config(config_path, seed)?;
    let movements = cfg.movements();
    let plan: SignalPlan = match plan_path {
        None => cfg.base_plan()?,
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading plan {}", p.display()))?;
            parse_plan_json(&text, &movements)?
        }
    };
    plan.validate(&movements).map_err(|e| anyhow!("invalid plan: {e}"))?;

    let scn = cfg.scenario(cfg.scenario.horizon_cycles, cfg.scenario.seed)?;
    let mut arrivals = BTreeMap::new();
    for (i, d) in scn.demands.iter().enumerate() {
        arrivals.insert(
            d.movement_id.clone(),
            generate_demand(
                d.demand_vph,
                scn.fluctuation_cv,
                plan.cycle_length,
                scn.horizon_cycles,
                derive_seed(scn.seed, &[10, i as u64]),
            ),
        );
    }
    let res = simulate(&plan, &movements, &arrivals, &scn)?;

    fs::create_dir_all(out)?;
    let summary = measure(&res);
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary)? + "\n",
    )?;

    let vehicles: Vec<serde_json::Value> = res
        .vehicles
        .iter()
        .map(|v| {
            serde_json::json!({
                "vehicle_id": v.vehicle_id(),
                "movement_id": v.movement_id,
                "virtual_arrival_s": v.virtual_arrival,
                "crossing_s": v.crossing,
                "delay_s": v.delay(),
            })
        })
        .collect();
    let truth = serde_json::json!({
        "cycles": res.cycles,
        "vehicles": vehicles,
        "average_delay_s": res.average_delay,
        "spillback": res.spillback,
    });
    fs::write(
        out.join("ground_truth.json"),
        serde_json::to_string_pretty(&truth)? + "\n",
    )?;

    if let Some(p) = penetration {
        let trajs = sample_cvs(&res, &movements, &scn, p, derive_seed(scn.seed, &[11]));
        let mut csv = Vec::new();
        write_trajectories(&trajs, &mut csv)?;
        fs::write(out.join("trajectories.csv"), csv)?;
        println!("sampled {} CV trajectories at penetration {p}", trajs.len());
    }

    println!(
        "simulated {} vehicles over {} cycles: mean delay {:.2} s{}",
        res.vehicles.len(),
        scn.horizon_cycles,
        res.average_delay,
        if res.spillback { " (spillback)" } else { "" }
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_plan_json(
    text: &str,
    movements: &[sigro::signal::MovementParams],
) -> anyhow::Result<SignalPlan> {
    if let Ok(result) = SolveResult::from_json(text) {
        if result.cycle_length.is_some() {
            return Ok(result.plan(movements)?);
        }
    }
    serde_json::from_str::<SignalPlan>(text)
        .map_err(|e| anyhow!("plan file is neither a solve result nor a plan: {e}"))
}

fn cmd_sweep(config_path: &Path, out: &Path, seed: Option<u64>) -> anyhow::Result<ExitCode> {
    let mut cfg = load_config(config_path, None)?;
    if let Some(s) = seed {
        cfg.sweep.master_seed = Some(s);
    }
    fs::create_dir_all(out)?;
    let report = run_experiment(&cfg, Some(out))?;
    let failed: Vec<_> = report
        .rows
        .iter()
        .filter(|r| r.status == sigro::sweep::CellStatus::Failed)
        .collect();
    println!(
        "sweep finished: {} cells, {} failed; report at {}",
        report.rows.len(),
        failed.len(),
        out.join("report.csv").display()
    );
    for a in &report.aggregates {
        println!(
            "  {} p={:.2} f={:.2}: mean delay {:.2} s (sd {:.2}, n={})",
            a.method,
            a.penetration,
            a.fluctuation,
            a.mean_delay_s,
            a.std_delay_s,
            a.replications - a.failures
        );
    }
    for f in failed {
        println!(
            "  FAILED {} p={:.2} f={:.2} r{}: {}",
            f.method,
            f.penetration,
            f.fluctuation,
            f.replication,
            f.message.as_deref().unwrap_or("")
        );
    }
    Ok(ExitCode::SUCCESS)
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use lnmpc_core::sim::{
    compute_metrics, initial_error, run_closed_loop, ControllerKind, Metrics, Scenario, TrajectoryLog,
};
use lnmpc_core::stability::{derive_bounds, feasibility_margin, stability_report, BoundSet, FeasibilityMargin, StabilityReport};
use lnmpc_core::{SmcGains, SolveStatus};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::RunConfig;

/// Output of one controller on the configured scenario.
#[derive(Debug, Clone)]
pub struct ControllerRun {
    pub kind: ControllerKind,
    pub log: TrajectoryLog,
    pub metrics: Metrics,
    pub stability: StabilityReport,
    pub wall_s: f64,
}

impl ControllerRun {
    pub fn contraction_violations(&self) -> usize {
        self.stability.monitor.contraction_violations.len()
    }

    fn status_count(&self, status: SolveStatus) -> usize {
        self.log.records.iter().filter(|r| r.status == Some(status)).count()
    }

    fn summary(&self) -> Value {
        json!({
            "controller": self.kind.as_str(),
            "metrics": self.metrics,
            "contraction_violations": self.contraction_violations(),
            "increase_violations": self.stability.monitor.increase_violations.len(),
            "mean_solve_ms": self.log.mean_solve_ms(),
            "max_iter_steps": self.status_count(SolveStatus::MaxIter),
            "fallback_steps": self.status_count(SolveStatus::FallbackSmc),
            "wall_s": self.wall_s,
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: Scenario,
    pub runs: Vec<ControllerRun>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    /// Contraction violations of the LNMPC run, if one was requested.
    pub fn lnmpc_violations(&self) -> Option<usize> {
        self.runs
            .iter()
            .find(|r| r.kind == ControllerKind::Lnmpc)
            .map(ControllerRun::contraction_violations)
    }

    /// Nonzero when the LNMPC run recorded a contraction violation.
    pub fn exit_code(&self) -> i32 {
        match self.lnmpc_violations() {
            Some(n) if n > 0 => 1,
            _ => 0,
        }
    }

    pub fn run(&self, kind: ControllerKind) -> Option<&ControllerRun> {
        self.runs.iter().find(|r| r.kind == kind)
    }
}

/// Certificate inputs for `scenario`, with any user overrides applied.
pub fn bounds_for(cfg: &RunConfig, scenario: &Scenario, gains: &SmcGains) -> BoundSet {
    let setup = &cfg.setup;
    let derived = derive_bounds(
        &setup.params,
        &setup.constraints,
        &scenario.reference_bounds(setup.horizon.dt),
        gains,
        &initial_error(scenario),
    );
    cfg.bounds.apply(derived)
}

fn simulate(cfg: &RunConfig, scenario: &Scenario, kind: ControllerKind) -> Result<ControllerRun> {
    let start = Instant::now();
    let log = run_closed_loop(scenario, kind, &cfg.setup, cfg.seed)
        .with_context(|| format!("{kind} run on scenario {}", scenario.name))?;
    let wall_s = start.elapsed().as_secs_f64();
    let metrics = compute_metrics(&log, scenario)?;
    let stability = stability_report(bounds_for(cfg, scenario, &cfg.setup.smc_gains), &log);
    log::info!(
        "{kind}: rmse = {:?}, {} contraction violations, {wall_s:.2} s",
        metrics.rmse,
        stability.monitor.contraction_violations.len()
    );
    Ok(ControllerRun { kind, log, metrics, stability, wall_s })
}

/// Log file for one controller: `<out>/scenario<id>_<controller>.csv`.
pub fn csv_path(out: &Path, scenario: &str, kind: ControllerKind) -> PathBuf {
    out.join(format!("scenario{scenario}_{kind}.csv"))
}

pub fn summary_path(out: &Path, scenario: &str) -> PathBuf {
    out.join(format!("scenario{scenario}_summary.json"))
}

pub fn stability_path(out: &Path, scenario: &str) -> PathBuf {
    out.join(format!("scenario{scenario}_stability.json"))
}

pub fn sweep_path(out: &Path, scenario: &str) -> PathBuf {
    out.join(format!("scenario{scenario}_sweep.csv"))
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    files.push(path);
    Ok(())
}

/// Runs every configured controller and writes logs, the summary, and the stability report.
pub fn run_command(cfg: &RunConfig) -> Result<RunOutcome> {
    let scenario = cfg.scenario()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let runs = cfg
        .controllers
        .par_iter()
        .map(|&kind| simulate(cfg, &scenario, kind))
        .collect::<Result<Vec<_>>>()?;

    let mut files = Vec::new();
    for run in &runs {
        write(csv_path(&cfg.out, &cfg.scenario, run.kind), &run.log.to_csv(), &mut files)?;
    }
    let summary = json!({
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "duration": scenario.duration,
        "disturbance": scenario.disturbance.label(),
        "dt": cfg.setup.horizon.dt,
        "n_stages": cfg.setup.horizon.n_stages,
        "horizon_length": cfg.horizon_length(),
        "rti": cfg.setup.options.rti,
        "controllers": runs.iter().map(ControllerRun::summary).collect::<Vec<_>>(),
    });
    write(summary_path(&cfg.out, &cfg.scenario), &serde_json::to_string_pretty(&summary)?, &mut files)?;
    let stability: Vec<Value> = runs
        .iter()
        .map(|r| json!({ "controller": r.kind.as_str(), "report": r.stability }))
        .collect();
    write(stability_path(&cfg.out, &cfg.scenario), &serde_json::to_string_pretty(&stability)?, &mut files)?;
    Ok(RunOutcome { scenario, runs, files })
}

pub fn render_run(outcome: &RunOutcome) -> String {
    let mut s = format!(
        "scenario {} ({:.1} s, disturbance {})\n",
        outcome.scenario.name,
        outcome.scenario.duration,
        outcome.scenario.disturbance.label()
    );
    s.push_str("controller  rmse_phi  rmse_theta  rmse_psi  violations  mean_solve_ms\n");
    for r in &outcome.runs {
        let m = &r.metrics;
        s.push_str(&format!(
            "{:<10}  {:>8.5}  {:>10.5}  {:>8.5}  {:>10}  {:>13}\n",
            r.kind.as_str(),
            m.rmse[0],
            m.rmse[1],
            m.rmse[2],
            r.contraction_violations(),
            r.log.mean_solve_ms().map_or("-".into(), |t| format!("{t:.3}")),
        ));
        if let Some(ts) = m.settling_time {
            let fmt = |t: Option<f64>| t.map_or("never".into(), |t| format!("{t:.2}"));
            s.push_str(&format!(
                "            settling {} / {} / {} s, overshoot {:.2}% / {:.2}% / {:.2}%\n",
                fmt(ts[0]),
                fmt(ts[1]),
                fmt(ts[2]),
                100.0 * m.overshoot.unwrap_or_default()[0],
                100.0 * m.overshoot.unwrap_or_default()[1],
                100.0 * m.overshoot.unwrap_or_default()[2],
            ));
        }
    }
    for f in &outcome.files {
        s.push_str(&format!("wrote {}\n", f.display()));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsOutcome {
    pub bounds: BoundSet,
    pub feasibility: FeasibilityMargin,
}

impl BoundsOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.feasibility.holds() {
            0
        } else {
            1
        }
    }
}

pub fn check_bounds(cfg: &RunConfig) -> Result<BoundsOutcome> {
    let scenario = cfg.scenario()?;
    let bounds = bounds_for(cfg, &scenario, &cfg.setup.smc_gains);
    Ok(BoundsOutcome { bounds, feasibility: feasibility_margin(&bounds) })
}

pub fn render_bounds(o: &BoundsOutcome) -> String {
    let b = &o.bounds;
    let rows = [
        ("xi2_bar", b.xi2_bar),
        ("xi3d_bar", b.xi3d_bar),
        ("i_bar", b.i_bar),
        ("l2_bar", b.l2_bar),
        ("z_bar", b.z_bar),
        ("lambda_bar", b.lambda_bar),
        ("c1_bar", b.c1_bar),
        ("c2_bar", b.c2_bar),
        ("tau_max", b.tau_max),
    ];
    let mut s: String = rows.iter().map(|(k, v)| format!("{k:<10} = {v:.6}\n")).collect();
    s.push_str(&format!("lhs        = {:.6}\n", o.feasibility.lhs));
    s.push_str(&format!("margin     = {:.6}\n", o.feasibility.margin));
    if o.feasibility.holds() {
        s.push_str("certificate: holds\n");
    } else {
        s.push_str(&format!(
            "certificate: VIOLATED (lhs exceeds tau_max by {:.6})\n",
            -o.feasibility.margin
        ));
    }
    s
}

/// Gain values to scan; each axis of a gain takes the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub lambda: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<(f64, f64, f64)> {
        let mut v = Vec::new();
        for &l in &self.lambda {
            for &a in &self.c1 {
                for &b in &self.c2 {
                    v.push((l, a, b));
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub feasibility: FeasibilityMargin,
    /// Per-controller RMSE and contraction-violation count, in configured order.
    pub results: Vec<(ControllerKind, [f64; 3], usize)>,
}

pub fn sweep(cfg: &RunConfig, grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    let scenario = cfg.scenario()?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|(lambda, c1, c2)| {
            let gains = SmcGains::uniform(lambda, c1, c2)?;
            let mut point = cfg.clone();
            point.setup.smc_gains = gains;
            let feasibility = feasibility_margin(&bounds_for(&point, &scenario, &gains));
            let results = point
                .controllers
                .iter()
                .map(|&kind| {
                    let run = simulate(&point, &scenario, kind)?;
                    Ok((kind, run.metrics.rmse, run.contraction_violations()))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepRow { lambda, c1, c2, feasibility, results })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    write(sweep_path(&cfg.out, &cfg.scenario), &render_sweep(&rows), &mut files)?;
    Ok(rows)
}

/// CSV with one row per grid point and one RMSE/violation block per controller.
pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,c1,c2,lhs,margin");
    if let Some(first) = rows.first() {
        for (kind, _, _) in &first.results {
            s.push_str(&format!(",{kind}_rmse_phi,{kind}_rmse_theta,{kind}_rmse_psi,{kind}_violations"));
        }
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}", r.lambda, r.c1, r.c2, r.feasibility.lhs, r.feasibility.margin));
        for (_, rmse, v) in &r.results {
            s.push_str(&format!(",{},{},{},{v}", rmse[0], rmse[1], rmse[2]));
        }
        s.push('\n');
    }
    s
}

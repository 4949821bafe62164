use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use hkflow_core::flow::{simulate, FlowConfig, Trajectory};
use hkflow_core::harness::{
    algterm_scan, counterexample_sequence, decay_fit, eep_sweep, inequality_report, rate_fit_loglog,
    write_sequence_csv, InequalityCase, SequenceColumn,
};
use hkflow_core::mesh::{build_density, build_grid, integrate, DensityBuilder, DensityKind, Field, Grid};
use hkflow_core::profiles::{default_sample, validate_pair, ProfileJson, PsiFamily, PsiSpec};
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::Failure;

/// Command reports plus a failure that should set the exit code after the
/// reports have been written.
pub struct Outcome {
    pub reports: Value,
    pub failure: Option<Failure>,
}

impl Outcome {
    fn ok(reports: Value) -> Self {
        Outcome { reports, failure: None }
    }
}

pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    match command {
        Command::Validate => validate(cfg),
        Command::Simulate => flow(cfg, out, false),
        Command::Decay => flow(cfg, out, true),
        Command::Inequality => inequality(cfg, out),
        Command::Counterexample => counterexample(cfg, out),
        Command::Sweep => sweep(cfg, out),
    }
}

fn psi_json(psi: &PsiSpec) -> ProfileJson {
    (*psi).into()
}

fn fields(cfg: &RunConfig) -> Result<(Grid, Field, Field), Failure> {
    let grid = cfg.grid.build()?;
    let steady = build_density(&grid, &cfg.seeded(&cfg.steady, 0), None)?;
    let initial = match &cfg.initial {
        Some(b) => build_density(&grid, &cfg.seeded(b, 1), Some(&steady))?,
        None => steady.clone(),
    };
    Ok((grid, steady, initial))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), Failure> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let (grid, _, _) = fields(cfg)?;
    let g = cfg.g()?;
    let sample = default_sample();
    let mut failed = Vec::new();
    let mut reports = Vec::new();
    for (i, psi) in cfg.psi()?.iter().enumerate() {
        let report = validate_pair(&g, psi, &sample);
        for c in report.checks.iter().filter(|c| !c.passed) {
            failed.push(format!("psi {i}: {}", c.name));
        }
        let scans: Vec<Value> = cfg
            .algterm
            .eps
            .iter()
            .map(|&eps| match algterm_scan(&g, psi, eps, cfg.algterm.s_max, cfg.algterm.samples) {
                Ok(scan) => json!({"eps": eps, "scan": scan}),
                Err(e) => {
                    failed.push(format!("psi {i}: algterm scan at eps = {eps}: {e}"));
                    json!({"eps": eps, "error": e.to_string()})
                }
            })
            .collect();
        reports.push(json!({"validation": report, "passed": report.all_passed(), "algterm": scans}));
    }
    let reports = json!({"cells": grid.cells(), "pairs": reports});
    let failure = (!failed.is_empty()).then(|| Failure::Validation(failed.join("; ")));
    Ok(Outcome { reports, failure })
}

fn lp_orders(monitors: &[PsiSpec]) -> Vec<f64> {
    let mut orders = vec![2.0];
    for psi in monitors {
        if let (PsiFamily::AbsPower, Some(p)) = (psi.family(), psi.p()) {
            if !orders.contains(&p) {
                orders.push(p);
            }
        }
    }
    orders
}

fn write_trajectory(traj: &Trajectory, out: &Path) -> Result<(), Failure> {
    traj.write_series_csv(BufWriter::new(File::create(out.join("series.csv"))?))?;
    for snap in &traj.snapshots {
        snap.field.write_csv(BufWriter::new(File::create(out.join(format!("snap_{}.csv", snap.step)))?))?;
    }
    Ok(())
}

fn flow(cfg: &RunConfig, out: &Path, decay: bool) -> Result<Outcome, Failure> {
    let (grid, steady, initial) = fields(cfg)?;
    let g = cfg.g()?;
    let monitors = cfg.psi()?;
    let f = &cfg.flow;
    let mut fc = FlowConfig::new(grid, g, steady.clone(), initial.clone(), f.t_end);
    fc.mode = f.mode;
    fc.psi_monitors = monitors.clone();
    fc.cfl = f.cfl;
    fc.snapshot_every = f.snapshot_every;
    fc.field_every = f.field_every;
    fc.integrator = f.integrator;
    fc.max_steps = f.max_steps;
    fc.lp_orders = lp_orders(&monitors);
    let traj = simulate(&fc)?;
    write_trajectory(&traj, out)?;

    let mut falsified = Vec::new();
    let mut monitor_reports = Vec::new();
    for (i, psi) in monitors.iter().enumerate() {
        let e = &traj.entropy_series[i];
        let fit = decay_fit(&traj.times, e, Some(f.floor_fraction * e[0]), f.margin);
        let mut entry = json!({
            "index": i,
            "psi": psi_json(psi),
            "entropy_initial": e[0],
            "entropy_final": e[e.len() - 1],
            "dissipation_residual": traj.dissipation_residual(i),
        });
        match &fit {
            Ok(fit) => {
                entry["decay_fit"] = json!(fit);
                if decay && !fit.bound_holds {
                    falsified.push(format!("entropy bound fails for monitor {i}"));
                }
            }
            Err(err) => {
                entry["decay_fit"] = Value::Null;
                entry["fit_error"] = json!(err.to_string());
            }
        }
        if decay {
            if let (PsiFamily::AbsPower, Some(p), Ok(fit)) = (psi.family(), psi.p(), &fit) {
                let j = fc.lp_orders.iter().position(|&q| q == p).expect("order registered");
                let check = lp_bound(&traj.times, &traj.lp_gap_series[j], &steady, fit.gamma_hat / p, f.margin);
                if !check["bound_holds"].as_bool().unwrap_or(false) {
                    falsified.push(format!("L^{p} bound fails for monitor {i}"));
                }
                entry["lp_bound"] = check;
            }
        }
        monitor_reports.push(entry);
    }
    let lower = integrate(&grid, &initial.zip_with(&steady, f64::min)?);
    let reports = json!({
        "steps": traj.total_steps,
        "final_time": traj.times[traj.times.len() - 1],
        "samples": traj.times.len(),
        "clamp_events": traj.clamp_events,
        "clamped_mass": traj.clamped_mass,
        "mass": {
            "initial": traj.mass_series[0],
            "final": traj.mass_series[traj.mass_series.len() - 1],
            "min": traj.mass_series.iter().copied().fold(f64::INFINITY, f64::min),
            "lower_bound": lower,
        },
        "lp_orders": fc.lp_orders,
        "monitors": monitor_reports,
    });
    let failure = (!falsified.is_empty()).then(|| Failure::Falsified(falsified.join("; ")));
    Ok(Outcome { reports, failure })
}

/// `||rho(t) - rho_inf||_p <= (1 + sup/inf rho_inf) ||rho0 - rho_inf||_p exp(-gamma_p (1 - margin) t)`.
pub fn lp_bound(times: &[f64], gaps: &[f64], steady: &Field, gamma_p: f64, margin: f64) -> Value {
    let constant = 1.0 + steady.max() / steady.min();
    let mut worst: f64 = 0.0;
    for (&t, &gap) in times.iter().zip(gaps) {
        let bound = constant * gaps[0] * (-gamma_p * (1.0 - margin) * t).exp();
        if bound > 0.0 {
            worst = worst.max(gap / bound);
        } else if gap > 0.0 {
            worst = f64::INFINITY;
        }
    }
    json!({
        "gamma_p": gamma_p,
        "constant": constant,
        "worst_fraction_of_bound": if worst.is_finite() { json!(worst) } else { json!("inf") },
        "bound_holds": worst <= 1.0,
    })
}

fn inequality(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let case_cfg = cfg.case.as_ref().ok_or_else(|| Failure::Config("inequality needs a `case` section".into()))?;
    let (grid, steady, rho) = fields(cfg)?;
    let g = cfg.g()?;
    let mut reports = Vec::new();
    let mut falsified = Vec::new();
    for psi in cfg.psi()? {
        let case = InequalityCase::new(case_cfg.name, g, psi, case_cfg.params())?;
        let rep = inequality_report(&case, &grid, &rho, &steady)?;
        if rep.ratio.is_infinite() {
            falsified.push(format!("{} ratio is infinite", rep.name));
        } else if case_cfg.ratio_cap.is_some_and(|cap| rep.ratio > cap) {
            falsified.push(format!("{} ratio {} exceeds the cap", rep.name, rep.ratio));
        }
        reports.push(rep);
    }
    write_json(&out.join("inequality.json"), &reports)?;
    let failure = (!falsified.is_empty()).then(|| Failure::Falsified(falsified.join("; ")));
    Ok(Outcome { reports: json!(reports), failure })
}

fn counterexample(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let sec = cfg
        .counterexample
        .as_ref()
        .ok_or_else(|| Failure::Config("counterexample needs a `counterexample` section".into()))?;
    let g = cfg.g()?;
    let n = sec.grid_n.unwrap_or(cfg.grid.n);
    let kind = cfg.grid.domain_kind;
    let steady = cfg.seeded(&cfg.steady, 0);
    let mut tables = Vec::new();
    for (i, psi) in cfg.psi()?.iter().enumerate() {
        let rows = counterexample_sequence(sec.kind, &sec.range, |_| build_grid(kind, n), &g, psi, &steady)?;
        let file = format!("sequence_{i}.csv");
        write_sequence_csv(&rows, BufWriter::new(File::create(out.join(&file))?))?;
        let slope = |y| rate_fit_loglog(&rows, SequenceColumn::Param, y).ok();
        tables.push(json!({
            "psi": psi_json(psi),
            "file": file,
            "rows": rows,
            "slopes": {
                "entropy": slope(SequenceColumn::Entropy),
                "production_w": slope(SequenceColumn::ProductionW),
                "production_h": slope(SequenceColumn::ProductionH),
            },
        }));
    }
    Ok(Outcome::ok(json!({"kind": sec.kind, "tables": tables})))
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<Outcome, Failure> {
    let sec = cfg.sweep.as_ref().ok_or_else(|| Failure::Config("sweep needs a `sweep` section".into()))?;
    let grid = cfg.grid.build()?;
    let steady = build_density(&grid, &cfg.seeded(&cfg.steady, 0), None)?;
    let g = cfg.g()?;
    let mut family: Vec<DensityBuilder> =
        sec.family.iter().enumerate().map(|(i, b)| cfg.seeded(b, 1 + i as u64)).collect();
    if let Some(t) = &sec.trig_random {
        family.extend((0..t.count as u64).map(|k| DensityBuilder {
            kind: DensityKind::TrigRandom { modes: t.modes, amplitude: t.amplitude, seed: Some(cfg.seed.wrapping_add(k)) },
            normalize: t.normalize,
        }));
    }
    if family.is_empty() {
        return Err(Failure::Config("sweep family is empty".into()));
    }
    let mut reports = Vec::new();
    let mut falsified = Vec::new();
    for (i, psi) in cfg.psi()?.iter().enumerate() {
        let rep = eep_sweep(&family, &g, psi, &grid, &steady, sec.mass_floor, sec.entropy_cap)?;
        if rep.infinite_entries() > 0 {
            falsified.push(format!("psi {i}: {} infinite ratios", rep.infinite_entries()));
        } else if sec.ratio_cap.is_some_and(|cap| rep.empirical_c_u > cap) {
            falsified.push(format!("psi {i}: empirical constant {} exceeds the cap", rep.empirical_c_u));
        }
        reports.push(json!({"psi": psi_json(psi), "report": rep}));
    }
    write_json(&out.join("sweep.json"), &reports)?;
    let failure = (!falsified.is_empty()).then(|| Failure::Falsified(falsified.join("; ")));
    Ok(Outcome { reports: json!({"members": family.len(), "sweeps": reports}), failure })
}

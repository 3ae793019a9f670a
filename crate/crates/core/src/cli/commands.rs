use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;

use super::output::{num, write_json, CsvOut};
use super::scenario::Scenario;
use super::CliError;
use crate::dynamics::{envelope_bound_check, integrate_from, EventKind};
use crate::growth::tabulate_g;
use crate::model::supply_stats;
use crate::periodic::{classify, convergence_study, find_periodic_orbit_from, verdict_from_stats, Verdict};
use crate::radial::solve_profile;

pub fn profile(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let run = &sc.run;
    if run.sigma_bar.is_empty() || run.radius.is_empty() {
        return Err(CliError::Config("profile needs run.sigma_bar and run.radius".into()));
    }
    let mut csv = CsvOut::create(&out.join("profile.csv"), &["r", "sigma", "regime", "rho", "sigma_bar", "R"])?;
    let mut summary = Vec::new();
    for &sb in &run.sigma_bar {
        for &radius in &run.radius {
            info!("profile σ̄ = {sb}, R = {radius}");
            let p = solve_profile(&sc.model, sb, radius, &sc.solver.shooting)?;
            for (r, v) in p.grid.iter().zip(&p.values) {
                csv.row([num(*r), num(*v), p.regime.as_str().into(), num(p.rho), num(sb), num(radius)])?;
            }
            summary.push(json!({
                "sigma_bar": sb,
                "R": radius,
                "regime": p.regime,
                "center_value": p.center_value,
                "rho": p.rho,
                "robin_residual": p.robin_residual,
            }));
        }
    }
    csv.finish()?;
    write_json(&out.join("profile.json"), &summary)
}

pub fn gmap(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let grids = sc.run.sigma_bar_grid.as_ref().zip(sc.run.radius_grid.as_ref());
    let (sg, rg) = grids.ok_or_else(|| CliError::Config("gmap needs run.sigma_bar_grid and run.radius_grid".into()))?;
    let (sbs, radii) = (sg.points()?, rg.points()?);
    info!("gmap {} × {} cells", sbs.len(), radii.len());
    let table = tabulate_g(&sc.model, &sbs, &radii, &sc.solver.shooting)?;
    let mut csv = CsvOut::create(&out.join("gmap.csv"), &["sigma_bar", "R", "G", "regime", "quad_err"])?;
    let mut errors = Vec::new();
    for (i, sb) in sbs.iter().enumerate() {
        for (j, r) in radii.iter().enumerate() {
            match &table.cells[i][j] {
                Ok(g) => csv.row([num(*sb), num(*r), num(g.value), g.regime.as_str().into(), num(g.quadrature_error)])?,
                Err(e) => {
                    csv.row([num(*sb), num(*r), num(f64::NAN), "Error".to_string(), num(f64::NAN)])?;
                    errors.push(json!({ "sigma_bar": sb, "R": r, "error": e.to_string() }));
                }
            }
        }
    }
    csv.finish()?;
    if !errors.is_empty() {
        write_json(&out.join("gmap_errors.json"), &errors)?;
    }
    Ok(())
}

pub fn simulate(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let horizon = sc.horizon();
    info!("simulate R0 = {}, horizon = {horizon}", sc.run.r0);
    let tr = integrate_from(&sc.model, &sc.supply, 0.0, sc.run.r0, horizon, &sc.solver.integrator, &sc.solver.shooting)?;
    let stats = supply_stats(&sc.model, &sc.supply, &sc.solver.quadrature())?;
    let envelope = envelope_bound_check(&tr, &stats, sc.supply.omega, sc.solver.integrator.envelope_tol);

    let mut csv = CsvOut::create(&out.join("trajectory.csv"), &["t", "R", "G_value", "phi", "regime", "event"])?;
    let mut ev = tr.events.iter().peekable();
    for i in 0..tr.times.len() {
        let t = tr.times[i];
        let mut names = Vec::new();
        while let Some(e) = ev.next_if(|e| e.time <= t) {
            names.push(e.kind.as_str());
        }
        csv.row([
            num(t),
            num(tr.radii[i]),
            num(tr.g_values[i]),
            num(tr.phi[i]),
            tr.regimes[i].as_str().into(),
            names.join(";"),
        ])?;
    }
    csv.finish()?;

    let floor_time = tr.events_of(EventKind::ExtinctionFloor).next().map(|e| e.time);
    write_json(
        &out.join("diagnostics.json"),
        &json!({
            "r0": sc.run.r0,
            "horizon": horizon,
            "end_time": tr.end(),
            "final_radius": tr.final_radius(),
            "samples": tr.times.len(),
            "lower_envelope_ok": tr.lower_envelope_ok,
            "lower_envelope_margin": tr.lower_envelope_margin,
            "envelope": envelope,
            "supply": stats,
            "extinction_floor_time": floor_time,
            "events": tr.events,
        }),
    )
}

#[derive(Serialize)]
struct ClassifyReport {
    s_bar: f64,
    s_star: f64,
    s_lower: f64,
    s_abs_mean: f64,
    quad_error: f64,
    verdict: &'static str,
    fixed_point: Option<f64>,
    upper_bound: Option<f64>,
}

pub fn classify_cmd(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let stats = supply_stats(&sc.model, &sc.supply, &sc.solver.quadrature())?;
    let mut report = ClassifyReport {
        s_bar: stats.s_bar,
        s_star: stats.s_star,
        s_lower: stats.s_lower,
        s_abs_mean: stats.s_abs_mean,
        quad_error: stats.quad_error,
        verdict: "Ambiguous",
        fixed_point: None,
        upper_bound: None,
    };
    let path = out.join("classify.json");
    if let Err(e) = verdict_from_stats(&stats, sc.solver.periodic.zero_tol) {
        write_json(&path, &report)?;
        return Err(e.into());
    }
    let c = classify(&sc.model, &sc.supply, &sc.solver)?;
    report.verdict = match c.verdict {
        Verdict::Extinction => "Extinction",
        Verdict::PersistentPeriodic => "PersistentPeriodic",
    };
    if let Some(o) = &c.orbit {
        report.fixed_point = Some(o.fixed_point);
        report.upper_bound = Some(o.upper_bound);
    }
    info!("classify: S̄ = {} → {}", c.s_bar, report.verdict);
    write_json(&path, &report)
}

pub fn periodic(sc: &Scenario, out: &Path) -> Result<(), CliError> {
    let orbit = find_periodic_orbit_from(&sc.model, &sc.supply, sc.run.start, &sc.solver)?;
    info!("periodic: R# = {} after {} iterates", orbit.fixed_point, orbit.iteration_log.len());
    let mut csv = CsvOut::create(&out.join("orbit.csv"), &["t", "R_per"])?;
    for (t, r) in &orbit.samples {
        csv.row([num(*t), num(*r)])?;
    }
    csv.finish()?;
    let mut csv = CsvOut::create(&out.join("iterates.csv"), &["n", "R_n", "residual", "kind"])?;
    for it in &orbit.iteration_log {
        let kind = match it.kind {
            crate::periodic::IterateKind::Plain => "Plain",
            crate::periodic::IterateKind::Secant => "Secant",
        };
        csv.row([it.n.to_string(), num(it.radius), num(it.residual), kind.into()])?;
    }
    csv.finish()?;

    let mut convergence = None;
    if !sc.run.convergence_factors.is_empty() {
        let r0s: Vec<f64> = sc.run.convergence_factors.iter().map(|f| f * orbit.fixed_point).collect();
        let rep = convergence_study(&sc.model, &sc.supply, &orbit, &r0s, sc.run.periods, sc.run.burn_in, &sc.solver)?;
        let mut csv = CsvOut::create(&out.join("convergence.csv"), &["r0", "period", "sup_deviation"])?;
        for run in &rep.runs {
            for (n, d) in run.per_period_sup.iter().enumerate() {
                csv.row([num(run.r0), n.to_string(), num(*d)])?;
            }
        }
        csv.finish()?;
        convergence = Some(rep);
    }
    write_json(
        &out.join("orbit.json"),
        &json!({
            "fixed_point": orbit.fixed_point,
            "upper_bound": orbit.upper_bound,
            "closure": orbit.closure,
            "iterations": orbit.iteration_log.len(),
            "monotone_iterates": orbit.iterates_monotone(),
            "fp_tol": sc.solver.periodic.fp_tol,
            "convergence": convergence,
        }),
    )
}

//! Dispatch from configs to library pipelines.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use cyclelab::asymptotic::{
    balanced_cluster_check, cluster_scan, route_estimate, schwartzman_class, unparametrized_cluster, AsymptoticEstimate,
    ClusterEstimate, ClusterGrid, Route, RoutePayload, WindowSchedule,
};
use cyclelab::curve::{
    arc_length_reparametrize, axes_oscillator_curve, counterexample_curve, integrate_flow, linear_flow_curve,
    perturb_bounded, polyline_curve, reparametrize, CounterexampleSpec,
};
use cyclelab::homology::{cone_from_samples_above, HomologyVector, IntegralClass, PointSet};
use cyclelab::ksolenoid::{
    adjacency_is_path, exhaustion_control_check, k_schwartzman_class, t3_trapping_solenoid, ExhaustionWindow,
    TrappingSolenoid,
};
use cyclelab::ode::VectorField;
use cyclelab::solenoid::{
    controlled_growth_ratio, empirical_transversal_measure, measured_class_report, realize_as_torus_flow,
    realized_leaf_comparison, seed_grid, BaseMap, SuspensionSolenoid,
};
use cyclelab::stable_norm::{grid_loop_length, stable_norm, subadditivity_audit};
use cyclelab::torus::GeometryDescriptor;
use cyclelab::{LiftedCurve, TorusGeometry};

use crate::config::*;
use crate::report::{Checks, Report};
use crate::ConfigError;

/// Cell width for tabulated arc-length reparametrizations.
const ARC_CELL: f64 = 0.01;

/// Results, assertions and CSV artifacts of one pipeline.
struct Outcome {
    results: Value,
    checks: Checks,
    artifacts: Vec<(String, Vec<u8>)>,
}

/// Runs `cfg`, writing `report.json` and the CSV artifacts into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let outcome = match cfg {
        ExperimentConfig::Asymptotic(c) => asymptotic(c)?,
        ExperimentConfig::Cluster(c) => cluster(c)?,
        ExperimentConfig::Counterexample(c) => counterexample(c)?,
        ExperimentConfig::Solenoid(c) => solenoid(c)?,
        ExperimentConfig::Ksolenoid(c) => ksolenoid(c)?,
        ExperimentConfig::Stablenorm(c) => stablenorm(c)?,
    };
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut artifacts = Vec::new();
    for (name, bytes) in &outcome.artifacts {
        let path = out.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        artifacts.push(name.clone());
    }
    let assertions = outcome.checks.into_inner();
    let report = Report {
        schema_version: SCHEMA_VERSION,
        subcommand: cfg.subcommand().to_string(),
        config: serde_json::to_value(cfg)?,
        results: outcome.results,
        passed: assertions.iter().all(|a| a.passed),
        assertions,
        artifacts,
        wall_time: start.elapsed().as_secs_f64(),
    };
    report.write(out)?;
    Ok(report)
}

/// Loads, checks the subcommand against the config, and runs.
pub fn run_file(subcommand: &str, config: &Path, out: &Path) -> anyhow::Result<Report> {
    let cfg = ExperimentConfig::load(config)?;
    if cfg.subcommand() != subcommand {
        return Err(ConfigError::new("subcommand", format!("config is for {:?}, not {subcommand:?}", cfg.subcommand())).into());
    }
    run(&cfg, out)
}

// ---------------------------------------------------------------------------
// helpers

fn geometry(d: &GeometryDescriptor) -> anyhow::Result<TorusGeometry> {
    Ok(TorusGeometry::from_descriptor(d)?)
}

fn build_curve(c: &CurveConfig, geom: &TorusGeometry) -> anyhow::Result<LiftedCurve> {
    Ok(match c {
        CurveConfig::Linear { velocity, start, arc_length } => {
            let x0 = start.clone().unwrap_or_else(|| vec![0.0; velocity.len()]);
            let curve = linear_flow_curve(velocity, &x0)?;
            if *arc_length {
                arc_length_reparametrize(&curve, geom, None, ARC_CELL)?
            } else {
                curve
            }
        }
        CurveConfig::Ode { field, start, t_back, t_forward, tol } => {
            integrate_flow(&VectorField::new(field.clone())?, start, *t_back, *t_forward, *tol)?
        }
        CurveConfig::Polyline { times, points } => polyline_curve(times.clone(), points.clone())?,
        CurveConfig::Oscillator(spec) => axes_oscillator_curve(spec)?,
        CurveConfig::Counterexample(spec) => counterexample_curve(spec)?.0,
        CurveConfig::Perturbed { base, terms, bound } => perturb_bounded(&build_curve(base, geom)?, terms, *bound)?,
        CurveConfig::Reparametrized { base, speed } => reparametrize(&build_curve(base, geom)?, speed)?,
    })
}

fn schedule(s: &ScheduleConfig) -> anyhow::Result<WindowSchedule> {
    Ok(match s {
        ScheduleConfig::Symmetric { span, count } => WindowSchedule::symmetric_to(*span, *count)?,
        ScheduleConfig::Geometric { s0, t0, ratio, count } => WindowSchedule::geometric(*s0, *t0, *ratio, *count)?,
        ScheduleConfig::Explicit { windows } => WindowSchedule::explicit(windows.clone())?,
    })
}

fn payload(route: Route, p: &PayloadConfig, dim: usize) -> anyhow::Result<RoutePayload> {
    let custom = match route {
        Route::Loop => p.closing.map(RoutePayload::Closing),
        Route::Calib => p.calibrator.as_ref().map(|d| d.build(dim).map(RoutePayload::Calibrator)).transpose()?,
        Route::Form => p.forms.clone().map(RoutePayload::Forms),
        Route::Circle => p.circles.clone().map(RoutePayload::Circles),
        Route::Cross => p.hypersurfaces.clone().map(RoutePayload::Hypersurfaces),
        Route::Birkhoff => None,
    };
    match custom.or_else(|| RoutePayload::standard(route, dim)) {
        Some(p) => Ok(p),
        None => bail!(ConfigError::new("routes", format!("route {route:?} has no curve payload"))),
    }
}

fn csv_bytes(set: &PointSet) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    Ok(buf)
}

fn csv_table(header: &[String], rows: &[Vec<String>]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(w.into_inner()?)
}

fn coord_header(prefix: &[&str], rank: usize, suffix: &[&str]) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((0..rank).map(|i| format!("coord_{i}")))
        .chain(suffix.iter().map(|s| s.to_string()))
        .collect()
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Compact summary of an estimate; the full history goes to CSV.
fn estimate_json(e: &AsymptoticEstimate) -> Value {
    json!({
        "route": e.route,
        "value": e.value,
        "residual": finite(e.residual),
        "converged": e.converged,
        "windowsUsed": e.windows_used,
        "rejected": e.rejected.iter().map(|(w, why)| json!({"window": w, "reason": why})).collect::<Vec<_>>(),
    })
}

/// JSON has no infinities; unset residuals are reported as null.
fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn history_rows(e: &AsymptoticEstimate, label: &str, rows: &mut Vec<Vec<String>>) {
    for (w, v) in &e.history {
        let mut r = vec![label.to_string(), num(w.s), num(w.t)];
        r.extend(v.coords().iter().map(|&c| num(c)));
        rows.push(r);
    }
}

fn max_spread(values: &[&HomologyVector]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in values.iter().enumerate() {
        for b in &values[i + 1..] {
            d = d.max(a.distance(b));
        }
    }
    d
}

fn cluster_artifacts(est: &ClusterEstimate) -> anyhow::Result<Vec<(String, Vec<u8>)>> {
    Ok(vec![
        ("full.csv".into(), csv_bytes(&est.full)?),
        ("positive.csv".into(), csv_bytes(&est.positive)?),
        ("negative.csv".into(), csv_bytes(&est.negative)?),
        ("balanced.csv".into(), csv_bytes(&est.balanced)?),
    ])
}

fn cluster_summary(est: &ClusterEstimate) -> Value {
    json!({
        "full": est.full.len(),
        "positive": est.positive.len(),
        "negative": est.negative.len(),
        "balanced": est.balanced.len(),
        "stablePositive": est.stable_positive().count(),
        "stableNegative": est.stable_negative().count(),
    })
}

fn seeds(s: &SeedConfig) -> Vec<f64> {
    match s {
        SeedConfig::Grid { count } => seed_grid(*count),
        SeedConfig::List(v) => v.clone(),
    }
}

// ---------------------------------------------------------------------------
// pipelines

fn asymptotic(c: &AsymptoticConfig) -> anyhow::Result<Outcome> {
    let geom = geometry(&c.geometry)?;
    let curve = build_curve(&c.curve, &geom)?;
    let sched = schedule(&c.schedule)?;
    let mut estimates = Vec::with_capacity(c.routes.len());
    for &r in &c.routes {
        let p = payload(r, &c.payload, geom.dim())?;
        estimates.push(route_estimate(&curve, &geom, &p, &sched, c.tol, &c.options)?);
    }
    let values: Vec<&HomologyVector> = estimates.iter().map(|e| &e.value).collect();
    let spread = max_spread(&values);
    let converged = estimates.iter().all(|e| e.converged);

    let mut rows = Vec::new();
    for e in &estimates {
        history_rows(e, &format!("{:?}", e.route).to_lowercase(), &mut rows);
    }
    let sz = if c.schwartzman { Some(schwartzman_class(&curve, &geom, c.tol, &sched)?) } else { None };
    if let Some(o) = &sz {
        let r = o.report();
        for (label, e) in [("positive", &r.positive), ("negative", &r.negative), ("joint", &r.joint)] {
            history_rows(e, label, &mut rows);
        }
    }
    let artifacts = vec![("routes.csv".to_string(), csv_table(&coord_header(&["series", "s", "t"], geom.dim(), &[]), &rows)?)];

    let schwartzman = sz.as_ref().map(|o| {
        let r = o.report();
        json!({
            "converged": o.class().is_some(),
            "class": o.class(),
            "positive": estimate_json(&r.positive),
            "negative": estimate_json(&r.negative),
            "joint": estimate_json(&r.joint),
            "clusterDiameter": r.cluster_diameter,
            "rays": r.rays.rays,
            "rayMembers": r.rays.members,
        })
    });
    let results = json!({
        "routes": estimates.iter().map(estimate_json).collect::<Vec<_>>(),
        "converged": converged,
        "routeSpread": spread,
        "schwartzman": schwartzman,
    });

    let mut checks = Checks::default();
    let x = &c.expect;
    if x.converged {
        let bad: Vec<String> = estimates.iter().filter(|e| !e.converged).map(|e| format!("{:?}", e.route)).collect();
        checks.check("converged", bad.is_empty(), if bad.is_empty() { "all routes".into() } else { format!("not converged: {}", bad.join(", ")) });
    }
    if let (Some(target), Some(tol)) = (&x.class, x.class_tol) {
        let target = HomologyVector::new(target.clone())?;
        let worst = values.iter().map(|v| if v.rank() == target.rank() { v.distance(&target) } else { f64::INFINITY }).fold(0.0, f64::max);
        checks.at_most("class", worst, tol);
    }
    if let Some(tol) = x.routes_agree {
        checks.at_most("routesAgree", spread, tol);
    }
    if let (Some(want), Some(o)) = (x.schwartzman_converged, &sz) {
        let got = o.class().is_some();
        checks.check("schwartzmanConverged", got == want, format!("converged = {got}"));
    }
    if let (Some(want), Some(o)) = (x.rays, &sz) {
        let got = o.report().rays.rays.len();
        checks.check("rays", got == want, format!("{got} rays"));
    }
    Ok(Outcome { results, checks, artifacts })
}

fn cluster_grid(g: &GridConfig, stability_tol: f64) -> anyhow::Result<ClusterGrid> {
    let grid = match g {
        GridConfig::Geometric { t_min, t_max, per_decade } => ClusterGrid::geometric(*t_min, *t_max, *per_decade, stability_tol)?,
        GridConfig::Explicit { t_values, s_values } => {
            ClusterGrid { t_values: t_values.clone(), s_values: s_values.clone(), stability_tol, probes: 16 }
        }
    };
    grid.validate()?;
    Ok(grid)
}

fn cluster(c: &ClusterConfig) -> anyhow::Result<Outcome> {
    let geom = geometry(&c.geometry)?;
    let curve = build_curve(&c.curve, &geom)?;
    let grid = cluster_grid(&c.grid, c.stability_tol)?;
    let est = cluster_scan(&curve, &geom, &grid)?;
    let balanced = balanced_cluster_check(&est, c.balanced_tol)?;
    let cone = cone_from_samples_above(&est.full, c.angular_tol, c.min_norm)?;
    let unparam = if c.speeds.is_empty() {
        None
    } else {
        Some(unparametrized_cluster(&curve, &geom, &c.speeds, &grid, c.angular_tol, c.min_norm)?)
    };
    let mut artifacts = cluster_artifacts(&est)?;
    if let Some(u) = &unparam {
        artifacts.push(("unparametrized.csv".into(), csv_bytes(&u.samples)?));
    }
    let results = json!({
        "samples": cluster_summary(&est),
        "balanced": {
            "passed": balanced.passed,
            "worstHullDistance": balanced.worst_hull_distance,
            "pairsChecked": balanced.pairs_checked,
            "pairsMissing": balanced.pairs_missing.len(),
        },
        "cone": cone,
        "unparametrizedCone": unparam.as_ref().map(|u| &u.cone),
    });
    let mut checks = Checks::default();
    let x = &c.expect;
    if x.balanced_in_hull {
        checks.check(
            "balancedInHull",
            balanced.passed,
            format!("worst hull distance {:.3e}, {} of {} pairs missing", balanced.worst_hull_distance, balanced.pairs_missing.len(), balanced.pairs_checked),
        );
    }
    if let Some(want) = x.rays {
        let rays = unparam.as_ref().map_or(&cone, |u| &u.cone).rays.len();
        checks.check("rays", rays == want, format!("{rays} rays"));
    }
    if let Some(p) = &x.full_near {
        let target = HomologyVector::new(p.point.clone())?;
        checks.at_most("fullNear", est.full.nearest_distance(&target), p.tol);
    }
    Ok(Outcome { results, checks, artifacts })
}

fn counterexample(c: &CounterexampleConfig) -> anyhow::Result<Outcome> {
    let spec = match (&c.spec, c.depth) {
        (Some(s), _) => s.clone(),
        (None, Some(d)) => CounterexampleSpec::standard(d),
        (None, None) => unreachable!("validated"),
    };
    let (curve, sched) = counterexample_curve(&spec)?;
    let geom = TorusGeometry::flat(2);
    // every epoch boundary and origin time, mirrored to negative s
    let mut t: Vec<f64> = sched.epochs.iter().flat_map(|e| [e.1, e.2]).chain(sched.origin_times.iter().copied()).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let grid = ClusterGrid { s_values: t.iter().map(|x| -x).collect(), t_values: t, stability_tol: c.stability_tol, probes: 16 };
    let est = cluster_scan(&curve, &geom, &grid)?;

    let depth = spec.targets.len();
    let (a, b) = spec.targets[depth - 1];
    let target = HomologyVector::new(vec![(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])?;
    let deep = sched.visit_times(depth);
    let mut deep_worst: f64 = 0.0;
    let mut deep_count = 0;
    for (p, w) in est.balanced.iter() {
        if let Some(w) = w {
            if deep.contains(&w.t) && deep.contains(&-w.s) {
                deep_worst = deep_worst.max(p.distance(&target));
                deep_count += 1;
            }
        }
    }
    let full_min = est.full.points().iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    let bal_min = est.balanced.points().iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);

    let results = json!({
        "depth": depth,
        "finalTime": sched.final_time,
        "epochs": sched.epochs.len(),
        "originTimes": sched.origin_times,
        "samples": cluster_summary(&est),
        "deepTarget": target,
        "deepBalancedSamples": deep_count,
        "deepBalancedWorst": if deep_count > 0 { json!(deep_worst) } else { Value::Null },
        "minFullNorm": full_min,
        "minBalancedNorm": finite(bal_min),
    });
    let mut checks = Checks::default();
    let x = &c.expect;
    if let Some(tol) = x.deep_balanced_tol {
        if deep_count == 0 {
            checks.check("deepBalanced", false, "no balanced sample at the deepest target".into());
        } else {
            checks.at_most("deepBalanced", deep_worst, tol);
        }
    }
    if let Some(tol) = x.full_reaches_zero {
        checks.at_most("fullReachesZero", full_min, tol);
    }
    if let Some(sep) = x.balanced_separation {
        checks.at_least("balancedSeparation", bal_min, sep);
    }
    Ok(Outcome { results, checks, artifacts: cluster_artifacts(&est)? })
}

fn solenoid(c: &SolenoidConfig) -> anyhow::Result<Outcome> {
    let sol = SuspensionSolenoid::new(c.base.clone(), c.roof.clone(), c.phi.clone())?;
    let xs = seeds(&c.seeds);
    let rep = measured_class_report(&sol, &xs, c.n, c.tol)?;
    let rank = sol.rank();
    let leaf_rows: Vec<Vec<String>> = rep
        .leaf_classes
        .iter()
        .map(|(x, e)| {
            let mut r = vec![num(*x)];
            r.extend(e.value.coords().iter().map(|&v| num(v)));
            r.push(num(e.value.distance(&rep.rs_class)));
            r.push(e.converged.to_string());
            r
        })
        .collect();
    let mut artifacts =
        vec![("leaf_classes.csv".to_string(), csv_table(&coord_header(&["seed"], rank, &["deviation", "converged"]), &leaf_rows)?)];

    let empirical = match c.empirical_n {
        Some(n) => {
            let mut rows = Vec::with_capacity(xs.len());
            for &x in &xs {
                rows.push((x, empirical_transversal_measure(&sol, x, n)?.distance));
            }
            Some(rows)
        }
        None => None,
    };
    let growth = if c.growth_radii.is_empty() { None } else { Some(controlled_growth_ratio(&sol, xs[0], &c.growth_radii)?) };
    let realized = match &c.realize {
        Some(r) => {
            let BaseMap::Rotation { alpha } = c.base.map else {
                bail!(ConfigError::new("realize", "only rotation bases are realized as torus flows"));
            };
            let real = realize_as_torus_flow(alpha, xs[0], r.parametrization)?;
            let cmp = realized_leaf_comparison(&real, r.t_max, &r.routes, c.tol, &r.options)?;
            let mut rows = Vec::new();
            history_rows(&cmp.symbolic, "birkhoff", &mut rows);
            for g in &cmp.geometric {
                history_rows(g, &format!("{:?}", g.route).to_lowercase(), &mut rows);
            }
            artifacts.push(("realized.csv".into(), csv_table(&coord_header(&["series", "s", "t"], 2, &[]), &rows)?));
            Some((real.warning.clone(), cmp))
        }
        None => None,
    };

    let max_dev = rep.max_deviation();
    let results = json!({
        "uniquelyErgodic": sol.base.uniquely_ergodic(),
        "normalization": rep.normalization,
        "rsClass": rep.rs_class,
        "maxDeviation": max_dev,
        "leaves": rep.leaf_classes.iter().map(|(x, e)| json!({"seed": x, "estimate": estimate_json(e)})).collect::<Vec<_>>(),
        "empirical": empirical.as_ref().map(|rows| rows.iter().map(|(x, d)| json!({"seed": x, "distance": d})).collect::<Vec<_>>()),
        "growthRatios": growth.as_ref().map(|g| g.iter().map(|&r| finite(r)).collect::<Vec<_>>()),
        "realized": realized.as_ref().map(|(warning, cmp)| json!({
            "warning": warning,
            "symbolic": estimate_json(&cmp.symbolic),
            "geometric": cmp.geometric.iter().map(estimate_json).collect::<Vec<_>>(),
            "maxDisagreement": cmp.max_disagreement(),
        })),
    });

    let mut checks = Checks::default();
    let x = &c.expect;
    if let Some(tol) = x.max_deviation {
        match x.pass_fraction {
            Some(f) if f < 1.0 => {
                let got = rep.pass_fraction(tol);
                checks.check("maxDeviation", got >= f, format!("{got:.3} of seeds within {tol:.1e} (need {f:.3})"));
            }
            _ => checks.at_most("maxDeviation", max_dev, tol),
        }
    }
    if let Some(tol) = x.empirical_distance {
        match &empirical {
            Some(rows) => checks.at_most("empiricalDistance", rows.iter().map(|r| r.1).fold(0.0, f64::max), tol),
            None => checks.check("empiricalDistance", false, "no empiricalN given".into()),
        }
    }
    if let Some(tol) = x.realized_agreement {
        match &realized {
            Some((_, cmp)) => checks.at_most("realizedAgreement", cmp.max_disagreement(), tol),
            None => checks.check("realizedAgreement", false, "no realize block given".into()),
        }
    }
    Ok(Outcome { results, checks, artifacts })
}

fn trapping(c: &KSolenoidConfig) -> anyhow::Result<(TrappingSolenoid, Option<usize>)> {
    let (base, geometric) = match &c.solenoid {
        TrappingConfig::T3 { alpha, wrap_cell, area_roof } => (t3_trapping_solenoid(*alpha, *wrap_cell, *area_roof)?.solenoid, Some(1000)),
        TrappingConfig::Roof { base, roof, class } => (TrappingSolenoid::from_roof(base.clone(), roof.clone(), class.clone())?, None),
        TrappingConfig::Slabs { base, volume, class, separation, diameter } => (
            TrappingSolenoid::new(c.k, base.clone(), volume.clone(), class.clone(), separation.clone(), diameter.clone(), c.constants, c.epsilon0)?,
            None,
        ),
    };
    // explicit constants and ε0 override the built-in ones
    let sol = TrappingSolenoid::new(
        base.k,
        base.base,
        base.volume,
        base.class,
        base.separation,
        base.diameter,
        Some(c.constants.unwrap_or(base.constants)),
        c.epsilon0,
    )?;
    Ok((sol, geometric))
}

fn ksolenoid(c: &KSolenoidConfig) -> anyhow::Result<Outcome> {
    let (sol, geometric_samples) = trapping(c)?;
    let rs = sol.ruelle_sullivan_class()?;
    let windows = ExhaustionWindow::dyadic(c.windows.j0, c.windows.j1, c.windows.symmetric);
    let xs = seeds(&c.seeds);
    let rank = sol.rank();
    let mut leaves = Vec::with_capacity(xs.len());
    let mut rows = Vec::new();
    for &x in &xs {
        let est = k_schwartzman_class(&sol, x, &windows, c.cap_volume, c.tol)?;
        let path = adjacency_is_path(&sol, x, *windows.last().unwrap());
        let mut r = vec![num(x)];
        r.extend(est.value.coords().iter().map(|&v| num(v)));
        r.push(num(est.value.distance(&rs)));
        r.push(est.converged.to_string());
        rows.push(r);
        leaves.push((x, est, path));
    }
    let mut artifacts = vec![("leaf_classes.csv".to_string(), csv_table(&coord_header(&["seed"], rank, &["deviation", "converged"]), &rows)?)];

    // deterministic exhaustion from each seed over the configured radii
    let mut exhaustion = Vec::new();
    let mut violations = Vec::new();
    let mut monotone = true;
    let mut ex_rows = Vec::new();
    if !c.radii.is_empty() {
        for &x in &xs {
            let rep = exhaustion_control_check(&sol, x, &c.radii)?;
            let ratios: Vec<f64> = rep.rows.iter().map(|r| r.defect_ratio).collect();
            monotone &= ratios.windows(2).all(|w| w[1] <= w[0]);
            for r in &rep.rows {
                ex_rows.push(vec![
                    num(x),
                    num(r.radius),
                    r.forward_gap.to_string(),
                    r.backward_gap.to_string(),
                    num(r.volume_defect),
                    num(r.defect_bound),
                    num(r.defect_ratio),
                    num(r.decay_bound),
                ]);
            }
            violations.extend(rep.violations.iter().map(|v| format!("seed {x}: {v}")));
            exhaustion.push(json!({"seed": x, "gapBound": rep.gap_bound, "maxGap": rep.max_gap(), "finalDefectRatio": ratios.last()}));
        }
        let header: Vec<String> =
            ["seed", "radius", "forward_gap", "backward_gap", "volume_defect", "defect_bound", "defect_ratio", "decay_bound"].map(String::from).to_vec();
        artifacts.push(("exhaustion.csv".into(), csv_table(&header, &ex_rows)?));
    }
    // random seeds and radius offsets, fixed by the config seed
    let mut random_gap = 0;
    if c.random_exhaustions > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        for _ in 0..c.random_exhaustions {
            let x0 = rng.gen::<f64>();
            let r0 = rng.gen_range(1.0..50.0);
            let radii: Vec<f64> = (0..6).map(|j| r0 * 2f64.powi(j)).collect();
            let rep = exhaustion_control_check(&sol, x0, &radii)?;
            random_gap = random_gap.max(rep.max_gap());
            violations.extend(rep.violations.iter().map(|v| format!("random seed {x0}: {v}")));
        }
    }

    let max_dev = leaves.iter().map(|(_, e, _)| e.value.distance(&rs)).fold(0.0, f64::max);
    let results = json!({
        "k": sol.k,
        "constants": sol.constants,
        "gapBound": sol.constants.c1 / sol.constants.c0 + 2.0,
        "rsClass": rs,
        "geometricCheck": geometric_samples.map(|n| json!({"samples": n, "passed": true})),
        "maxDeviation": max_dev,
        "leaves": leaves.iter().map(|(x, e, path)| json!({"seed": x, "adjacencyPath": path, "estimate": estimate_json(e)})).collect::<Vec<_>>(),
        "exhaustion": exhaustion,
        "randomExhaustions": c.random_exhaustions,
        "randomMaxGap": random_gap,
        "violations": violations,
        "defectMonotone": monotone,
    });

    let mut checks = Checks::default();
    let x = &c.expect;
    if let Some(tol) = x.max_deviation {
        checks.at_most("maxDeviation", max_dev, tol);
    }
    if x.exhaustion_bound {
        let detail = match violations.first() {
            None => format!("no violations, max random gap {random_gap}"),
            Some(v) => format!("{} violations, first: {v}", violations.len()),
        };
        checks.check("exhaustionBound", violations.is_empty(), detail);
    }
    if x.defect_monotone {
        checks.check("defectMonotone", monotone && !c.radii.is_empty(), format!("over {} radii", c.radii.len()));
    }
    Ok(Outcome { results, checks, artifacts })
}

fn stablenorm(c: &StableNormConfig) -> anyhow::Result<Outcome> {
    let geom = geometry(&c.geometry)?;
    let dim = geom.dim();
    for (i, cl) in c.classes.iter().enumerate() {
        if cl.len() != dim {
            bail!(ConfigError::new(format!("classes[{i}]"), format!("expected {dim} entries")));
        }
    }
    let classes: Vec<IntegralClass> = c.classes.iter().map(|v| IntegralClass::new(v.clone())).collect();
    let mut estimates = Vec::with_capacity(classes.len());
    let mut rows = Vec::new();
    for a in &classes {
        let e = stable_norm(&geom, a, c.n_max, c.resolution)?;
        for r in &e.rows {
            let mut row: Vec<String> = a.coords().iter().map(|k| k.to_string()).collect();
            row.extend([r.n.to_string(), num(r.length), num(r.upper_bound), num(r.running_min)]);
            rows.push(row);
        }
        estimates.push(e);
    }
    let mut header: Vec<String> = (0..dim).map(|i| format!("class_{i}")).collect();
    header.extend(["n", "length", "upper_bound", "running_min"].map(String::from));
    let artifacts = vec![("stable_norm.csv".to_string(), csv_table(&header, &rows)?)];

    let x = &c.expect;
    let homogeneity = match x.homogeneity {
        Some(_) => {
            let mut worst: f64 = 0.0;
            for (a, e) in classes.iter().zip(&estimates) {
                if a.is_zero() {
                    continue;
                }
                let e2 = stable_norm(&geom, &a.scaled(2), c.n_max, c.resolution)?;
                worst = worst.max((e2.value - 2.0 * e.value).abs() / (2.0 * e.value));
            }
            Some(worst)
        }
        None => None,
    };
    let refinement = match x.refinement {
        Some(_) => {
            let mut worst: f64 = 0.0;
            for a in classes.iter().filter(|a| !a.is_zero()) {
                let coarse = grid_loop_length(&geom, a, c.resolution)?.value;
                let fine = grid_loop_length(&geom, a, 2 * c.resolution)?.value;
                worst = worst.max((coarse - fine).abs() / fine);
            }
            Some(worst)
        }
        None => None,
    };
    let audit = if c.audit_pairs > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let mut class = || IntegralClass::new((0..dim).map(|_| rng.gen_range(-c.pair_range..=c.pair_range)).collect());
        let pairs: Vec<(IntegralClass, IntegralClass)> = (0..c.audit_pairs).map(|_| (class(), class())).collect();
        let multiples: Vec<(IntegralClass, usize)> = classes.iter().flat_map(|a| [(a.clone(), 2), (a.clone(), 3)]).collect();
        Some(subadditivity_audit(&geom, &pairs, &multiples, c.resolution)?)
    } else {
        None
    };

    let results = json!({
        "flat": geom.is_flat(),
        "norms": estimates.iter().map(|e| json!({
            "class": e.class,
            "value": e.value,
            "lowerBound": e.lower_bound,
            "c0": e.c0,
            "nUsed": e.n_used,
            "finalUpperBound": e.rows.last().map(|r| r.running_min),
            "consistent": e.is_consistent(),
        })).collect::<Vec<_>>(),
        "homogeneity": homogeneity,
        "refinement": refinement,
        "audit": audit.as_ref().map(|a| json!({
            "c0": a.c0,
            "slack": a.slack,
            "rows": a.rows.len(),
            "failures": a.failures().map(|r| json!({"kind": r.kind, "classes": r.classes, "lhs": r.lhs, "rhs": r.rhs})).collect::<Vec<_>>(),
        })),
    });

    let mut checks = Checks::default();
    if let (Some(want), Some(tol)) = (&x.norms, x.norm_tol) {
        let worst = estimates.iter().zip(want).map(|(e, w)| (e.value - w).abs()).fold(0.0, f64::max);
        checks.at_most("norms", worst, tol);
    }
    if let (Some(tol), Some(h)) = (x.homogeneity, homogeneity) {
        checks.at_most("homogeneity", h, tol);
    }
    if x.audit_clean {
        match &audit {
            Some(a) => checks.check("auditClean", a.passed(), format!("{} of {} rows violate", a.failures().count(), a.rows.len())),
            None => checks.check("auditClean", false, "auditPairs is 0".into()),
        }
    }
    if let (Some(tol), Some(r)) = (x.refinement, refinement) {
        checks.at_most("refinement", r, tol);
    }
    Ok(Outcome { results, checks, artifacts })
}

/// Re-parses the config echo of a report.
pub fn echo_revalidates(report: &Report) -> Result<ExperimentConfig, ConfigError> {
    ExperimentConfig::from_json(&report.config.to_string())
}

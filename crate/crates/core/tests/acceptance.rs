//! Acceptance suite: one PASS/FAIL line per criterion; exits non-zero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cyclelab::asymptotic::{
    cluster_scan, compare_closings, route_estimate, schwartzman_class, window_class, ClusterGrid, Route, RouteOptions,
    RoutePayload, SchwartzmanOutcome, WindowSchedule,
};
use cyclelab::calibration::{identity_calibrator, partition_calibrator, BumpShape};
use cyclelab::curve::{
    arc_length_reparametrize, axes_oscillator_curve, counterexample_curve, linear_flow_curve, perturb_bounded,
    CounterexampleSpec, DisplacementTerm, OscillatorSpec,
};
use cyclelab::ksolenoid::{exhaustion_control_check, k_schwartzman_class, t3_trapping_solenoid, ExhaustionWindow, TrappingSolenoid};
use cyclelab::solenoid::{
    empirical_transversal_measure, measured_class_report, realize_as_torus_flow, realized_leaf_comparison, seed_grid,
    ClassWeight, Parametrization, ScalarWeight, SuspensionSolenoid, TransversalSystem, GOLDEN,
};
use cyclelab::stable_norm::{minimal_loop_length, stable_norm, subadditivity_audit};
use cyclelab::trig::TrigPoly;
use cyclelab::{HomologyVector, IntegralClass, TorusGeometry};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn route_equivalence() -> Outcome {
    let start = Instant::now();
    let g = TorusGeometry::flat(2);
    let r3 = 3f64.sqrt();
    let target = HomologyVector::new(vec![1.0 / r3, 2f64.sqrt() / r3]).map_err(err)?;
    let c = linear_flow_curve(target.coords(), &[0.13, 0.71]).map_err(err)?;
    let sched = WindowSchedule::symmetric_to(1e4, 5).map_err(err)?;
    let mut values = Vec::new();
    for route in Route::ALL {
        let payload = RoutePayload::standard(route, 2).ok_or("missing payload")?;
        let est = route_estimate(&c, &g, &payload, &sched, 1e-3, &RouteOptions::default()).map_err(err)?;
        ensure(est.converged, format!("{route:?} did not converge (residual {:.2e})", est.residual))?;
        let d = est.value.distance(&target);
        ensure(d <= 1e-3, format!("{route:?} is {d:.2e} from the target"))?;
        values.push(est.value);
    }
    let mut spread: f64 = 0.0;
    for a in &values {
        for b in &values {
            spread = spread.max(a.distance(b));
        }
    }
    ensure(spread <= 1e-3, format!("routes disagree by {spread:.2e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1} s"))?;
    Ok(format!("5 routes, spread {spread:.1e}, {secs:.2} s"))
}

fn loop_normalization() -> Outcome {
    let g = TorusGeometry::flat(2);
    let len = 13f64.sqrt();
    let c = arc_length_reparametrize(&linear_flow_curve(&[2.0, 3.0], &[0.25, 0.5]).map_err(err)?, &g, None, 0.01).map_err(err)?;
    let mut worst: f64 = 0.0;
    for k in 1..=5 {
        let t = k as f64 * len;
        let class = window_class(&c, &g, 0.0, t).map_err(err)?;
        ensure(class == IntegralClass::new(vec![2 * k, 3 * k]), format!("loop {k}: class {class:?}"))?;
        let v = class.to_real().scale(1.0 / t);
        worst = worst.max((v.coords()[0] - 2.0 / len).abs().max((v.coords()[1] - 3.0 / len).abs()));
    }
    ensure(worst <= 1e-9, format!("normalized class off by {worst:.2e}"))?;
    Ok(format!("(2,3)/√13 to {worst:.1e}"))
}

fn closing_independence() -> Outcome {
    let g = TorusGeometry::flat(2);
    let c = linear_flow_curve(&[0.3, 0.7], &[0.5, 0.5]).map_err(err)?;
    let sched = WindowSchedule::symmetric_to(1e4, 8).map_err(err)?;
    let cmp = compare_closings(&c, &g, &sched).map_err(err)?;
    for (w, d) in &cmp.differences {
        ensure(d / (w.t - w.s) <= cmp.fitted_c / (w.t - w.s) + 1e-15, "difference above C/(t-s)")?;
    }
    let gap = cmp.shortest_limit.distance(&cmp.chart_limit);
    ensure(gap <= cmp.fitted_c / 1e4 + 1e-15, format!("limits differ by {gap:.2e}"))?;
    ensure(cmp.fitted_c.is_finite(), "no finite C")?;
    Ok(format!("fitted C = {:.3}, limit gap {gap:.1e}", cmp.fitted_c))
}

fn calibrating_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for n in [1usize, 2] {
        let base: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let tent = partition_calibrator(BumpShape::Tent, 1.0, &base).map_err(err)?;
        let id = identity_calibrator(n).map_err(err)?;
        // the partition calibrator is normalized to vanish at its basepoint,
        // so compare increments
        for _ in 0..500 {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
            let inc_t = tent.increment(&x, &y).map_err(err)?;
            let inc_i = id.increment(&x, &y).map_err(err)?;
            worst = worst.max(inc_t.distance(&inc_i));
        }
    }
    ensure(worst <= 1e-12, format!("tent and identity differ by {worst:.2e}"))?;
    let tent = partition_calibrator(BumpShape::Tent, 1.0, &[0.3, 0.6]).map_err(err)?;
    for i in 0..100 {
        let g = [rng.gen_range(-4i64..=4), rng.gen_range(-4i64..=4)];
        let p0 = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let mut pts = vec![p0.to_vec()];
        for _ in 0..rng.gen_range(1..12) {
            pts.push(vec![rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]);
        }
        pts.push(vec![p0[0] + g[0] as f64, p0[1] + g[1] as f64]);
        let class = tent.loop_class(&pts).map_err(err)?;
        ensure(class.coords() == g, format!("loop {i}: class {class:?}, expected {g:?}"))?;
    }
    Ok(format!("max deviation {worst:.1e}; 100 loops integral"))
}

fn counterexample_structure() -> Outcome {
    let depth = 10;
    let (curve, sched) = counterexample_curve(&CounterexampleSpec::standard(depth)).map_err(err)?;
    let g = TorusGeometry::flat(2);
    let mut t: Vec<f64> = sched.epochs.iter().flat_map(|e| [e.1, e.2]).chain(sched.origin_times.iter().copied()).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let grid = ClusterGrid { s_values: t.iter().map(|x| -x).collect(), t_values: t, stability_tol: 1e-2, probes: 16 };
    let est = cluster_scan(&curve, &g, &grid).map_err(err)?;
    let target = HomologyVector::new(vec![0.0, -1.0 / depth as f64]).map_err(err)?;
    let deep = sched.visit_times(depth);
    let mut checked = 0;
    for (p, w) in est.balanced.iter() {
        let w = w.ok_or("missing window")?;
        if deep.contains(&w.t) && deep.contains(&-w.s) {
            ensure(p.distance(&target) <= 1e-2, format!("depth-{depth} balanced sample {p:?}"))?;
            checked += 1;
        }
    }
    ensure(checked > 0, "no balanced sample at the deepest target")?;
    let full_min = est.full.points().iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    ensure(full_min <= 1e-2, format!("full cluster stays {full_min:.2e} from 0"))?;
    let bal_min = est.balanced.points().iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
    ensure(bal_min >= 0.04, format!("balanced sample at distance {bal_min:.3} from 0"))?;
    Ok(format!("{} balanced samples, min |full| {full_min:.1e}, min |balanced| {bal_min:.3}", est.balanced.len()))
}

fn oscillator_cone() -> Outcome {
    let g = TorusGeometry::flat(2);
    let osc = axes_oscillator_curve(&OscillatorSpec::default()).map_err(err)?;
    let sched = WindowSchedule::geometric(10.0, 10.0, 2.0, 14).map_err(err)?;
    let report = match schwartzman_class(&osc, &g, 1e-2, &sched).map_err(err)? {
        SchwartzmanOutcome::NotConvergent(r) => r,
        SchwartzmanOutcome::Converged { .. } => return Err("oscillator reported a single class".into()),
    };
    let rays = &report.rays.rays;
    ensure(rays.len() == 2, format!("{} rays", rays.len()))?;
    let mut worst: f64 = 0.0;
    for axis in [[1.0, 0.0], [0.0, 1.0]] {
        let best = rays.iter().map(|r| (r.coords()[0] * axis[0] + r.coords()[1] * axis[1]).clamp(-1.0, 1.0).acos()).fold(f64::INFINITY, f64::min);
        worst = worst.max(best);
    }
    ensure(worst <= 0.05, format!("angular error {worst:.3} rad"))?;
    Ok(format!("2 rays, angular error {worst:.1e} rad"))
}

fn golden_solenoid() -> Result<SuspensionSolenoid, String> {
    SuspensionSolenoid::new(
        TransversalSystem::rotation(GOLDEN).map_err(err)?,
        ScalarWeight::constant(1.0),
        ClassWeight::constant(vec![1, 0]).with_cell(1.0 - GOLDEN, 1.0, vec![1, 1]),
    )
    .map_err(err)
}

fn ergodic_representation() -> Outcome {
    let start = Instant::now();
    let sol = golden_solenoid()?;
    let rep = measured_class_report(&sol, &seed_grid(32), 100_000, 1e-3).map_err(err)?;
    let target = HomologyVector::new(vec![1.0, GOLDEN]).map_err(err)?;
    let worst = rep.leaf_classes.iter().map(|(_, e)| e.value.distance(&target)).fold(0.0, f64::max);
    ensure(worst <= 1e-3, format!("leaf class {worst:.2e} from (1, α)"))?;
    let real = realize_as_torus_flow(GOLDEN, 0.3, Parametrization::Time).map_err(err)?;
    let opts = RouteOptions { sample_step: 0.2, ..RouteOptions::default() };
    let cmp = realized_leaf_comparison(&real, 1e4, &[Route::Cross], 3e-3, &opts).map_err(err)?;
    let geo = cmp.max_disagreement();
    ensure(geo <= 3e-3, format!("crossing route disagrees by {geo:.2e}"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, format!("took {secs:.1} s"))?;
    Ok(format!("32 seeds within {worst:.1e}, crossing route {geo:.1e}, {secs:.2} s"))
}

fn trapping_k2() -> Outcome {
    let real = t3_trapping_solenoid(GOLDEN, Some([1.0 - GOLDEN, 1.0]), true).map_err(err)?;
    real.check_classes(1000).map_err(err)?;
    let rs = real.solenoid.ruelle_sullivan_class().map_err(err)?;
    let norm = rs.coords()[0];
    ensure((rs.coords()[1] / norm - GOLDEN).abs() < 1e-12 && rs.coords()[2] == 0.0, format!("RS class {rs:?}"))?;
    let windows = ExhaustionWindow::dyadic(11, 17, false);
    let mut worst: f64 = 0.0;
    for x0 in seed_grid(8) {
        let est = k_schwartzman_class(&real.solenoid, x0, &windows, 0.0, 1e-3).map_err(err)?;
        ensure(est.converged, format!("seed {x0} did not converge"))?;
        worst = worst.max(est.value.distance(&rs));
    }
    ensure(worst <= 1e-3, format!("k-leaf class {worst:.2e} from RS"))?;
    Ok(format!("1000 slabs match; 8 seeds within {worst:.1e}"))
}

fn exhaustion_bound() -> Outcome {
    let roof = ScalarWeight::Trig { poly: TrigPoly::constant(1.0).with_term(vec![1], 0.3, 0.0) };
    let sol = TrappingSolenoid::from_roof(TransversalSystem::rotation(GOLDEN).map_err(err)?, roof, ClassWeight::constant(vec![1])).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut max_gap = 0;
    for _ in 0..100 {
        let x0 = rng.gen::<f64>();
        let r0 = rng.gen_range(1.0..50.0);
        let radii: Vec<f64> = (0..6).map(|j| r0 * 2f64.powi(j)).collect();
        let rep = exhaustion_control_check(&sol, x0, &radii).map_err(err)?;
        ensure(rep.passed(), format!("{:?}", rep.violations))?;
        max_gap = max_gap.max(rep.max_gap());
    }
    let radii: Vec<f64> = (1..=12).map(|j| 2f64.powi(j)).collect();
    let rep = exhaustion_control_check(&sol, 0.5, &radii).map_err(err)?;
    ensure(rep.passed(), format!("{:?}", rep.violations))?;
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.defect_ratio).collect();
    ensure(ratios.windows(2).all(|w| w[1] <= w[0]), format!("defect ratios not monotone: {ratios:?}"))?;
    ensure(*ratios.last().unwrap() < 1e-3, "defect ratio does not vanish")?;
    Ok(format!("bound {:.3}, max gap {max_gap}, final defect ratio {:.1e}", rep.gap_bound, ratios.last().unwrap()))
}

fn stable_norm_checks() -> Outcome {
    let flat = TorusGeometry::flat(2);
    let v = stable_norm(&flat, &IntegralClass::new(vec![3, 4]), 6, 8).map_err(err)?.value;
    ensure(v == 5.0, format!("flat ‖(3,4)‖ = {v}"))?;
    let bumpy = TorusGeometry::flat(2)
        .with_conformal(TrigPoly::default().with_term(vec![1, 0], 0.3, 0.0).with_term(vec![1, 1], 0.0, 0.2).with_term(vec![0, 2], 0.15, 0.0))
        .map_err(err)?;
    let a = IntegralClass::new(vec![1, 1]);
    let (e1, e2) = (stable_norm(&bumpy, &a, 4, 8).map_err(err)?, stable_norm(&bumpy, &a.scaled(2), 4, 8).map_err(err)?);
    ensure(e1.is_consistent() && e2.is_consistent(), "inconsistent Fekete bounds")?;
    let hom = (e2.value - 2.0 * e1.value).abs() / (2.0 * e1.value);
    ensure(hom <= 0.02, format!("‖2a‖ vs 2‖a‖ differ by {:.2}%", 100.0 * hom))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<(IntegralClass, IntegralClass)> = (0..50)
        .map(|_| {
            let mut c = || IntegralClass::new(vec![rng.gen_range(-5..=5), rng.gen_range(-5..=5)]);
            (c(), c())
        })
        .collect();
    let audit = subadditivity_audit(&bumpy, &pairs, &[], 4).map_err(err)?;
    ensure(audit.passed(), format!("{} violations", audit.failures().count()))?;
    let mut change: f64 = 0.0;
    for b in [IntegralClass::new(vec![1, 0]), IntegralClass::new(vec![1, 1]), IntegralClass::new(vec![2, -1])] {
        let (l16, l32) = (minimal_loop_length(&bumpy, &b, 16).map_err(err)?.value, minimal_loop_length(&bumpy, &b, 32).map_err(err)?.value);
        change = change.max((l16 - l32).abs() / l32);
    }
    ensure(change < 0.01, format!("doubling resolution changes l(a) by {:.2}%", 100.0 * change))?;
    Ok(format!("homogeneity {:.2}%, 50 pairs clean, refinement {:.2}%", 100.0 * hom, 100.0 * change))
}

fn homotopy_invariance() -> Outcome {
    let g = TorusGeometry::flat(2);
    let v = [1.0 / 3f64.sqrt(), (2.0f64 / 3.0).sqrt()];
    let c = linear_flow_curve(&v, &[0.1, 0.2]).map_err(err)?;
    let terms = vec![
        DisplacementTerm { amplitude: vec![0.4, -0.3], omega: 0.7, phase: 0.1 },
        DisplacementTerm { amplitude: vec![0.2, 0.25], omega: 2.3, phase: 1.0 },
    ];
    let p = perturb_bounded(&c, &terms, 1.0).map_err(err)?;
    let sched = WindowSchedule::geometric(1e3, 1e3, 2.0, 6).map_err(err)?;
    let (a, b) = (schwartzman_class(&c, &g, 1e-3, &sched).map_err(err)?, schwartzman_class(&p, &g, 1e-3, &sched).map_err(err)?);
    let (Some(a), Some(b)) = (a.class(), b.class()) else {
        return Err("a Schwartzman class did not converge".into());
    };
    let d = a.distance(b);
    ensure(d < 1e-3, format!("classes differ by {d:.2e}"))?;
    Ok(format!("class change {d:.1e}"))
}

fn unique_measure() -> Outcome {
    let sol = golden_solenoid()?;
    let mut worst: f64 = 0.0;
    for seed in seed_grid(8) {
        worst = worst.max(empirical_transversal_measure(&sol, seed, 10_000).map_err(err)?.distance);
    }
    ensure(worst <= 1e-2, format!("empirical measure {worst:.2e} from Lebesgue"))?;
    Ok(format!("8 seeds within {worst:.1e}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("route equivalence", route_equivalence),
        ("loop normalization", loop_normalization),
        ("closing independence", closing_independence),
        ("calibrating identity", calibrating_identity),
        ("counterexample structure", counterexample_structure),
        ("oscillator cone", oscillator_cone),
        ("leaf classes, k = 1", ergodic_representation),
        ("leaf classes, k = 2", trapping_k2),
        ("controlled exhaustion", exhaustion_bound),
        ("stable norm", stable_norm_checks),
        ("homotopy invariance", homotopy_invariance),
        ("unique transversal measure", unique_measure),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

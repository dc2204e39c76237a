//! Windowed homology classes `[c_{s,t}]`, the five routes to the asymptotic
//! cycle, convergence detection and cluster scans.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibratingFunction;
use crate::curve::{integrate_pieces, reparametrize, LiftedCurve, SpeedFunction};
use crate::error::{check_rank, Error, Result};
use crate::homology::{cone_from_samples_above, segment_distance, ConeReport, HomologyVector, IntegralClass, PointSet, Window};
use crate::torus::{project, reduce, TorusGeometry};
use crate::trig::TrigPoly;

/// Minimal `|<k, c~'>|` accepted at a hypersurface crossing.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClosingScheme {
    /// Segment to the nearest of the `3^n` lattice translates.
    Shortest,
    /// Segment inside the fixed chart `[0,1)^n`.
    Chart,
}

fn closing_tolerance(x: &[f64], y: &[f64]) -> f64 {
    let scale = x.iter().chain(y).fold(1.0f64, |m, v| m.max(v.abs()));
    1e-6 + 1e-11 * scale
}

/// Class of the loop `c|[s,t]` closed up by the shortest closing segment.
pub fn window_class(curve: &LiftedCurve, geom: &TorusGeometry, s: f64, t: f64) -> Result<IntegralClass> {
    window_class_with(curve, geom, s, t, ClosingScheme::Shortest)
}

pub fn window_class_with(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    s: f64,
    t: f64,
    scheme: ClosingScheme,
) -> Result<IntegralClass> {
    check_rank(geom.dim(), curve.dim())?;
    curve.check_window(s, t)?;
    if s == t {
        return Ok(IntegralClass::zeros(geom.dim()));
    }
    let (a, b) = (curve.eval(s), curve.eval(t));
    closed_class(geom, &a, &b, scheme)
}

/// Class of the path from lift `a` to lift `b` closed by `scheme`.
pub(crate) fn closed_class(geom: &TorusGeometry, a: &[f64], b: &[f64], scheme: ClosingScheme) -> Result<IntegralClass> {
    let closing = match scheme {
        ClosingScheme::Shortest => geom.shortest_closing(b, a),
        ClosingScheme::Chart => geom.chart_closing(b, a),
    };
    let disp = closing.displacement();
    let raw: Vec<f64> = (0..a.len()).map(|i| (b[i] - a[i]) + disp[i]).collect();
    IntegralClass::round_from(&raw, closing_tolerance(a, b))
}

// ---------------------------------------------------------------------------
// schedules

/// Windows `(s_j, t_j)` with strictly increasing length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WindowSchedule {
    windows: Vec<Window>,
}

impl WindowSchedule {
    pub fn explicit(windows: Vec<Window>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::Domain("empty window schedule".into()));
        }
        for w in &windows {
            if !(w.s.is_finite() && w.t.is_finite() && w.s < w.t) {
                return Err(Error::Domain(format!("invalid window ({}, {})", w.s, w.t)));
            }
        }
        if windows.windows(2).any(|p| !(p[1].t - p[1].s > p[0].t - p[0].s)) {
            return Err(Error::Domain("window lengths must increase strictly".into()));
        }
        Ok(Self { windows })
    }

    /// `t_j = t0 r^j`, `s_j = -s0 r^j` for `j < count`.
    pub fn geometric(s0: f64, t0: f64, ratio: f64, count: usize) -> Result<Self> {
        if !(ratio > 1.0) || !(s0 >= 0.0) || !(t0 >= 0.0) || s0 + t0 <= 0.0 {
            return Err(Error::Domain("geometric schedule needs ratio > 1 and s0 + t0 > 0".into()));
        }
        Self::explicit(
            (0..count)
                .map(|j| {
                    let r = ratio.powi(j as i32);
                    Window { s: -s0 * r, t: t0 * r }
                })
                .collect(),
        )
    }

    /// Symmetric windows of lengths `span / 2^(count-1-j)`, ending at `span`.
    pub fn symmetric_to(span: f64, count: usize) -> Result<Self> {
        let first = span / 2f64.powi(count.saturating_sub(1) as i32);
        Self::geometric(first / 2.0, first / 2.0, 2.0, count)
    }

    /// Windows `(s, t_j)` with the start fixed.
    pub fn forward(s: f64, t0: f64, ratio: f64, count: usize) -> Result<Self> {
        Self::explicit((0..count).map(|j| Window { s, t: s + t0 * ratio.powi(j as i32) }).collect())
    }

    /// Windows `(s_j, t)` with the end fixed.
    pub fn backward(t: f64, s0: f64, ratio: f64, count: usize) -> Result<Self> {
        Self::explicit((0..count).map(|j| Window { s: t - s0 * ratio.powi(j as i32), t }).collect())
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

// ---------------------------------------------------------------------------
// route payloads

/// Closed 1-form `a·dx + dφ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneForm {
    pub a: Vec<f64>,
    #[serde(default)]
    pub potential: TrigPoly,
}

impl OneForm {
    pub fn new(a: Vec<f64>, potential: TrigPoly) -> Result<Self> {
        potential.validate(a.len())?;
        if a.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("form coefficients must be finite".into()));
        }
        Ok(Self { a, potential })
    }

    pub fn exact(potential: TrigPoly, dim: usize) -> Result<Self> {
        Self::new(vec![0.0; dim], potential)
    }

    fn pair(&self, x: &[f64], v: &[f64]) -> f64 {
        let g = self.potential.gradient(x);
        self.a.iter().zip(&g).zip(v).map(|((a, g), v)| (a + g) * v).sum()
    }
}

/// Circle map `x ↦ <k, x> + c mod 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleMap {
    pub k: Vec<i64>,
    #[serde(default)]
    pub c: f64,
}

/// Oriented hypersurface `{<k, x> ≡ c mod 1}` with primitive `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypersurface {
    pub normal: Vec<i64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default = "plus_one")]
    pub orientation: i8,
}

fn plus_one() -> i8 {
    1
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Hypersurface {
    pub fn new(normal: Vec<i64>, offset: f64, orientation: i8) -> Result<Self> {
        let h = Self { normal, offset, orientation };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if self.normal.iter().fold(0, |g, &k| gcd(g, k)) != 1 {
            return Err(Error::Domain(format!("hypersurface normal {:?} is not primitive", self.normal)));
        }
        if !(0.0..1.0).contains(&self.offset) {
            return Err(Error::Domain("hypersurface offset must lie in [0, 1)".into()));
        }
        if self.orientation != 1 && self.orientation != -1 {
            return Err(Error::Domain("orientation must be +1 or -1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Loop,
    Calib,
    Form,
    Circle,
    Cross,
    /// Birkhoff sums of slab weights along a transversal orbit.
    Birkhoff,
}

impl Route {
    pub const ALL: [Route; 5] = [Route::Loop, Route::Calib, Route::Form, Route::Circle, Route::Cross];
}

#[derive(Debug, Clone)]
pub enum RoutePayload {
    Closing(ClosingScheme),
    Calibrator(CalibratingFunction),
    Forms(Vec<OneForm>),
    Circles(Vec<CircleMap>),
    Hypersurfaces(Vec<Hypersurface>),
}

impl RoutePayload {
    pub fn route(&self) -> Route {
        match self {
            RoutePayload::Closing(_) => Route::Loop,
            RoutePayload::Calibrator(_) => Route::Calib,
            RoutePayload::Forms(_) => Route::Form,
            RoutePayload::Circles(_) => Route::Circle,
            RoutePayload::Hypersurfaces(_) => Route::Cross,
        }
    }

    /// The coordinate payload for `route` on `T^n`: identity calibrator,
    /// `dx_i`, the coordinate circle maps, and the walls `{x_i = 1/2}`.
    /// Birkhoff sums live on solenoids and have no curve payload.
    pub fn standard(route: Route, n: usize) -> Option<Self> {
        let unit = |i: usize| (0..n).map(|j| i64::from(i == j)).collect::<Vec<_>>();
        Some(match route {
            Route::Loop => RoutePayload::Closing(ClosingScheme::Shortest),
            Route::Calib => RoutePayload::Calibrator(CalibratingFunction::Identity { dim: n }),
            Route::Form => RoutePayload::Forms(
                (0..n)
                    .map(|i| OneForm { a: unit(i).iter().map(|&k| k as f64).collect(), potential: TrigPoly::default() })
                    .collect(),
            ),
            Route::Circle => RoutePayload::Circles((0..n).map(|i| CircleMap { k: unit(i), c: 0.0 }).collect()),
            Route::Cross => RoutePayload::Hypersurfaces(
                (0..n).map(|i| Hypersurface { normal: unit(i), offset: 0.5, orientation: 1 }).collect(),
            ),
            Route::Birkhoff => return None,
        })
    }
}

/// Numerical knobs shared by the quadrature- and sampling-based routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RouteOptions {
    /// Panel width for 1-form quadrature.
    #[serde(default = "default_step")]
    pub quadrature_step: f64,
    /// Sampling step for circle-map unwrapping and crossing detection; it is
    /// shrunk further when the curve's speed bound requires it.
    #[serde(default = "default_step")]
    pub sample_step: f64,
    #[serde(default = "default_transversality")]
    pub transversality_tol: f64,
}

fn default_step() -> f64 {
    0.05
}

fn default_transversality() -> f64 {
    TRANSVERSALITY_TOL
}

impl Default for RouteOptions {
    fn default() -> Self {
        Self { quadrature_step: default_step(), sample_step: default_step(), transversality_tol: TRANSVERSALITY_TOL }
    }
}

// ---------------------------------------------------------------------------
// per-window route values

/// Row matrix of the payload's linear functionals.
fn payload_matrix(payload: &RoutePayload, n: usize) -> Result<Option<DMatrix<f64>>> {
    let rows: Vec<Vec<f64>> = match payload {
        RoutePayload::Closing(_) | RoutePayload::Calibrator(_) => return Ok(None),
        RoutePayload::Forms(f) => f.iter().map(|f| f.a.clone()).collect(),
        RoutePayload::Circles(c) => c.iter().map(|c| c.k.iter().map(|&k| k as f64).collect()).collect(),
        RoutePayload::Hypersurfaces(h) => {
            for x in h {
                x.validate()?;
            }
            h.iter().map(|h| h.normal.iter().map(|&k| (k * h.orientation as i64) as f64).collect()).collect()
        }
    };
    if rows.len() != n {
        return Err(Error::Domain(format!("route needs {n} payload items, got {}", rows.len())));
    }
    for r in &rows {
        check_rank(n, r.len())?;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    if m.determinant().abs() < 1e-12 {
        return Err(Error::Domain("payload items are not independent".into()));
    }
    Ok(Some(m))
}

/// `∫_{c[s,t]} α` by Gauss–Legendre quadrature along the curve.
pub fn form_integral(curve: &LiftedCurve, form: &OneForm, s: f64, t: f64, step: f64) -> Result<f64> {
    check_rank(curve.dim(), form.a.len())?;
    curve.check_window(s, t)?;
    Ok(integrate_pieces(curve, s, t, step, |x, v| form.pair(x, v)))
}

fn sampling_step(curve: &LiftedCurve, k: &[i64], requested: f64) -> f64 {
    let k1: f64 = k.iter().map(|&x| x.unsigned_abs() as f64).sum();
    match curve.speed_bound() {
        Some(v) if v > 0.0 && k1 > 0.0 => requested.min(0.25 / (v * k1)),
        _ => requested,
    }
}

fn sample_times(s: f64, t: f64, step: f64) -> impl Iterator<Item = f64> {
    let m = ((t - s) / step).ceil().max(1.0) as usize;
    (0..=m).map(move |i| if i == m { t } else { s + (t - s) * i as f64 / m as f64 })
}

/// Lift displacement of `f ∘ c` for the circle map `f`, by unwrapping the
/// phase of sampled torus points.
pub fn circle_lift_displacement(curve: &LiftedCurve, map: &CircleMap, s: f64, t: f64, step: f64) -> Result<f64> {
    check_rank(curve.dim(), map.k.len())?;
    curve.check_window(s, t)?;
    let h = sampling_step(curve, &map.k, step);
    let phase = |tau: f64| {
        let x = project(&curve.eval(tau));
        reduce(map.k.iter().zip(&x).map(|(&k, x)| k as f64 * x).sum::<f64>() + map.c)
    };
    let mut prev = phase(s);
    let mut total = 0.0;
    let mut prev_tau = s;
    for tau in sample_times(s, t, h).skip(1) {
        let cur = phase(tau);
        let raw = cur - prev;
        let d = raw - raw.round();
        if d.abs() >= 0.5 - 1e-9 {
            return Err(Error::Resolution(format!(
                "circle phase jumps by {d} between {prev_tau} and {tau}; sampling too coarse"
            )));
        }
        total += d;
        prev = cur;
        prev_tau = tau;
    }
    Ok(total)
}

/// Signed number of crossings of the hypersurface along `c|[s,t]`.
pub fn signed_crossings(
    curve: &LiftedCurve,
    surface: &Hypersurface,
    s: f64,
    t: f64,
    opts: &RouteOptions,
) -> Result<i64> {
    check_rank(curve.dim(), surface.normal.len())?;
    surface.validate()?;
    curve.check_window(s, t)?;
    let k: Vec<f64> = surface.normal.iter().map(|&k| k as f64).collect();
    let level = |tau: f64| curve.eval(tau).iter().zip(&k).map(|(x, k)| x * k).sum::<f64>() - surface.offset;
    let normal_speed = |tau: f64| curve.velocity(tau).iter().zip(&k).map(|(v, k)| v * k).sum::<f64>();
    let h = sampling_step(curve, &surface.normal, opts.sample_step);
    let mut count: i64 = 0;
    let mut prev_tau = s;
    let mut prev = level(s);
    for tau in sample_times(s, t, h).skip(1) {
        let cur = level(tau);
        let (fa, fb) = (prev.floor(), cur.floor());
        if fa != fb {
            // every integer level m in between is crossed
            let (lo, hi) = if fb > fa { (fa + 1.0, fb) } else { (fb + 1.0, fa) };
            let mut m = lo;
            while m <= hi {
                let (mut a, mut b) = (prev_tau, tau);
                let up = fb > fa;
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if (level(mid) >= m) == up {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                let at = 0.5 * (a + b);
                let vn = normal_speed(at);
                if vn.abs() < opts.transversality_tol {
                    return Err(Error::NonTransverse { time: at, normal_velocity: vn });
                }
                count += if up { 1 } else { -1 } * surface.orientation as i64;
                m += 1.0;
            }
        }
        prev = cur;
        prev_tau = tau;
    }
    Ok(count)
}

/// Unnormalized route value over one window, in homology coordinates.
pub fn route_window_value(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    payload: &RoutePayload,
    s: f64,
    t: f64,
    opts: &RouteOptions,
) -> Result<HomologyVector> {
    let n = geom.dim();
    check_rank(n, curve.dim())?;
    let matrix = payload_matrix(payload, n)?;
    raw_window_value(curve, geom, payload, matrix.as_ref(), s, t, opts)
}

fn raw_window_value(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    payload: &RoutePayload,
    matrix: Option<&DMatrix<f64>>,
    s: f64,
    t: f64,
    opts: &RouteOptions,
) -> Result<HomologyVector> {
    let values: Vec<f64> = match payload {
        RoutePayload::Closing(scheme) => {
            return Ok(window_class_with(curve, geom, s, t, *scheme)?.to_real());
        }
        RoutePayload::Calibrator(phi) => return phi.curve_increment(curve, s, t),
        RoutePayload::Forms(forms) => forms
            .iter()
            .map(|f| form_integral(curve, f, s, t, opts.quadrature_step))
            .collect::<Result<_>>()?,
        RoutePayload::Circles(maps) => maps
            .iter()
            .map(|m| circle_lift_displacement(curve, m, s, t, opts.sample_step))
            .collect::<Result<_>>()?,
        RoutePayload::Hypersurfaces(hs) => hs
            .iter()
            .map(|h| signed_crossings(curve, h, s, t, opts).map(|c| c as f64))
            .collect::<Result<_>>()?,
    };
    let m = matrix.expect("functional payloads carry a matrix");
    let x = m
        .clone()
        .lu()
        .solve(&DVector::from_vec(values))
        .ok_or_else(|| Error::Domain("payload items are not independent".into()))?;
    HomologyVector::new(x.iter().copied().collect())
}

// ---------------------------------------------------------------------------
// estimates

/// Per-window normalized values and the convergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    pub route: Route,
    pub value: HomologyVector,
    /// Largest pairwise distance among the last three accepted windows.
    pub residual: f64,
    pub converged: bool,
    pub windows_used: usize,
    pub history: Vec<(Window, HomologyVector)>,
    /// Windows rejected with a diagnostic (non-transverse crossings).
    pub rejected: Vec<(Window, String)>,
}

pub(crate) fn assemble(route: Route, n: usize, history: Vec<(Window, HomologyVector)>, rejected: Vec<(Window, String)>, tol: f64) -> AsymptoticEstimate {
    let k = history.len();
    let (residual, converged) = if k >= 3 {
        let last = &history[k - 3..];
        let mut r: f64 = 0.0;
        for i in 0..3 {
            for j in i + 1..3 {
                r = r.max(last[i].1.distance(&last[j].1));
            }
        }
        (r, r <= tol)
    } else {
        (f64::INFINITY, false)
    };
    let value = history.last().map(|h| h.1.clone()).unwrap_or_else(|| HomologyVector::zeros(n));
    AsymptoticEstimate { route, value, residual, converged, windows_used: k, history, rejected }
}

/// Normalized route values `value/(t - s)` over the schedule, evaluated in
/// parallel and reduced in schedule order.
pub fn route_estimate(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    payload: &RoutePayload,
    schedule: &WindowSchedule,
    tol: f64,
    opts: &RouteOptions,
) -> Result<AsymptoticEstimate> {
    let n = geom.dim();
    check_rank(n, curve.dim())?;
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let matrix = payload_matrix(payload, n)?;
    let results: Vec<Result<HomologyVector>> = schedule
        .windows()
        .par_iter()
        .map(|w| raw_window_value(curve, geom, payload, matrix.as_ref(), w.s, w.t, opts).map(|v| v.scale(1.0 / (w.t - w.s))))
        .collect();
    let mut history = Vec::new();
    let mut rejected = Vec::new();
    for (w, r) in schedule.windows().iter().zip(results) {
        match r {
            Ok(v) => history.push((*w, v)),
            Err(e @ Error::NonTransverse { .. }) => rejected.push((*w, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(assemble(payload.route(), n, history, rejected, tol))
}

/// Normalized windowed classes `[c_{s,t}]/(t - s)` over a schedule.
pub fn loop_estimate(curve: &LiftedCurve, geom: &TorusGeometry, schedule: &WindowSchedule, tol: f64) -> Result<AsymptoticEstimate> {
    route_estimate(curve, geom, &RoutePayload::Closing(ClosingScheme::Shortest), schedule, tol, &RouteOptions::default())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchwartzmanReport {
    /// `s` fixed at 0, `t -> ∞`.
    pub positive: AsymptoticEstimate,
    /// `t` fixed at 0, `s -> -∞`.
    pub negative: AsymptoticEstimate,
    pub joint: AsymptoticEstimate,
    /// Diameter of the normalized classes of the last three windows of all
    /// three sequences.
    pub cluster_diameter: f64,
    /// Directions of the nonzero normalized classes (angular tolerance 0.05).
    pub rays: ConeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "report", rename_all = "camelCase")]
pub enum SchwartzmanOutcome {
    Converged { class: HomologyVector, report: SchwartzmanReport },
    NotConvergent(SchwartzmanReport),
}

impl SchwartzmanOutcome {
    pub fn class(&self) -> Option<&HomologyVector> {
        match self {
            SchwartzmanOutcome::Converged { class, .. } => Some(class),
            SchwartzmanOutcome::NotConvergent(_) => None,
        }
    }

    pub fn report(&self) -> &SchwartzmanReport {
        match self {
            SchwartzmanOutcome::Converged { report, .. } | SchwartzmanOutcome::NotConvergent(report) => report,
        }
    }
}

/// Positive, negative and joint asymptotic cycles along a two-sided schedule.
pub fn schwartzman_class(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    tol: f64,
    schedule: &WindowSchedule,
) -> Result<SchwartzmanOutcome> {
    let ws = schedule.windows();
    if ws.iter().any(|w| !(w.s < 0.0 && w.t > 0.0)) {
        return Err(Error::Domain("two-sided schedule needs s < 0 < t in every window".into()));
    }
    let pos = WindowSchedule::explicit(ws.iter().map(|w| Window { s: 0.0, t: w.t }).collect())?;
    let neg = WindowSchedule::explicit(ws.iter().map(|w| Window { s: w.s, t: 0.0 }).collect())?;
    let positive = loop_estimate(curve, geom, &pos, tol)?;
    let negative = loop_estimate(curve, geom, &neg, tol)?;
    let joint = loop_estimate(curve, geom, schedule, tol)?;

    let mut tail = PointSet::new();
    let mut all = PointSet::new();
    for est in [&positive, &negative, &joint] {
        let k = est.history.len();
        for (i, (w, v)) in est.history.iter().enumerate() {
            all.push(v.clone(), Some(*w))?;
            if i + 3 >= k {
                tail.push(v.clone(), Some(*w))?;
            }
        }
    }
    let cluster_diameter = tail.diameter();
    let rays = cone_from_samples_above(&all, 0.05, 1e-12)?;
    let report = SchwartzmanReport { positive, negative, joint, cluster_diameter, rays };
    let agree = report.positive.value.distance(&report.negative.value) <= tol
        && report.joint.value.distance(&report.positive.value) <= tol;
    if report.positive.converged && report.negative.converged && report.joint.converged && agree {
        Ok(SchwartzmanOutcome::Converged { class: report.joint.value.clone(), report })
    } else {
        Ok(SchwartzmanOutcome::NotConvergent(report))
    }
}

// ---------------------------------------------------------------------------
// closing independence

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosingComparison {
    /// `(window, ‖[c]_shortest - [c]_chart‖)`.
    pub differences: Vec<(Window, f64)>,
    /// Smallest `C` with `‖difference‖/(t - s) <= C/(t - s)` on every window.
    pub fitted_c: f64,
    pub shortest_limit: HomologyVector,
    pub chart_limit: HomologyVector,
}

/// Compares the two closing schemes along a schedule.
pub fn compare_closings(curve: &LiftedCurve, geom: &TorusGeometry, schedule: &WindowSchedule) -> Result<ClosingComparison> {
    let rows: Vec<Result<(Window, IntegralClass, IntegralClass)>> = schedule
        .windows()
        .par_iter()
        .map(|w| {
            let a = window_class_with(curve, geom, w.s, w.t, ClosingScheme::Shortest)?;
            let b = window_class_with(curve, geom, w.s, w.t, ClosingScheme::Chart)?;
            Ok((*w, a, b))
        })
        .collect();
    let mut differences = Vec::new();
    let mut last = None;
    for r in rows {
        let (w, a, b) = r?;
        let d = a.to_real().distance(&b.to_real());
        differences.push((w, d));
        last = Some((w, a, b));
    }
    let (w, a, b) = last.ok_or_else(|| Error::Domain("empty schedule".into()))?;
    let fitted_c = differences.iter().map(|d| d.1).fold(0.0, f64::max);
    let len = w.t - w.s;
    Ok(ClosingComparison {
        differences,
        fitted_c,
        shortest_limit: a.to_real().scale(1.0 / len),
        chart_limit: b.to_real().scale(1.0 / len),
    })
}

// ---------------------------------------------------------------------------
// clusters

/// Grid for cluster scans: positive `t` values and negative `s` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ClusterGrid {
    pub t_values: Vec<f64>,
    pub s_values: Vec<f64>,
    /// One-sided samples count as stable when they moved less than this over
    /// the last decade.
    pub stability_tol: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_probes() -> usize {
    16
}

impl ClusterGrid {
    /// `per_decade` geometric values per decade in `[t_min, t_max]` on both sides.
    pub fn geometric(t_min: f64, t_max: f64, per_decade: usize, stability_tol: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || per_decade == 0 {
            return Err(Error::Domain("geometric grid needs 0 < t_min < t_max".into()));
        }
        let decades = (t_max / t_min).log10();
        let count = (decades * per_decade as f64).ceil() as usize + 1;
        let t: Vec<f64> = (0..count)
            .map(|i| if i + 1 == count { t_max } else { t_min * 10f64.powf(i as f64 / per_decade as f64) })
            .collect();
        let s = t.iter().map(|x| -x).collect();
        Ok(Self { t_values: t, s_values: s, stability_tol, probes: default_probes() })
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_values.iter().any(|&t| !(t > 0.0 && t.is_finite())) || self.s_values.iter().any(|&s| !(s < 0.0 && s.is_finite())) {
            return Err(Error::Domain("cluster grid needs t > 0 and s < 0".into()));
        }
        let span = |v: &[f64]| {
            let lo = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
            let hi = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            hi / lo
        };
        if self.t_values.is_empty() || self.s_values.is_empty() || span(&self.t_values) < 1e3 * (1.0 - 1e-12) || span(&self.s_values) < 1e3 * (1.0 - 1e-12) {
            return Err(Error::Domain("cluster grid must span at least three decades on each side".into()));
        }
        if !(self.stability_tol > 0.0) || self.probes < 2 {
            return Err(Error::Domain("cluster grid needs stability_tol > 0 and at least two probes".into()));
        }
        Ok(())
    }
}

/// Sampled `𝒞`, `𝒞₊`, `𝒞₋`, `𝒞_b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterEstimate {
    pub full: PointSet,
    pub positive: PointSet,
    pub negative: PointSet,
    pub balanced: PointSet,
    /// Whether each positive sample was stable over its last decade.
    pub positive_stable: Vec<bool>,
    pub negative_stable: Vec<bool>,
}

impl ClusterEstimate {
    pub fn stable_positive(&self) -> impl Iterator<Item = &HomologyVector> {
        self.positive.points().iter().zip(&self.positive_stable).filter(|p| *p.1).map(|p| p.0)
    }

    pub fn stable_negative(&self) -> impl Iterator<Item = &HomologyVector> {
        self.negative.points().iter().zip(&self.negative_stable).filter(|p| *p.1).map(|p| p.0)
    }
}

fn normalized(curve: &LiftedCurve, geom: &TorusGeometry, s: f64, t: f64) -> Result<HomologyVector> {
    Ok(window_class(curve, geom, s, t)?.to_real().scale(1.0 / (t - s)))
}

/// One-sided normalized class and its stability over `[x/10, x]`.
fn one_sided(curve: &LiftedCurve, geom: &TorusGeometry, x: f64, grid: &ClusterGrid) -> Result<(HomologyVector, bool)> {
    let value = |y: f64| if y > 0.0 { normalized(curve, geom, 0.0, y) } else { normalized(curve, geom, y, 0.0) };
    let v = value(x)?;
    let mut stable = true;
    for i in 0..grid.probes {
        let y = x * 10f64.powf(-(i as f64) / (grid.probes - 1) as f64);
        if value(y)?.distance(&v) >= grid.stability_tol {
            stable = false;
            break;
        }
    }
    Ok((v, stable))
}

/// Samples `[c_{s,t}]/(t - s)` over the grid and the one-sided classes at
/// `(0, t)` and `(s, 0)`; a pair is balanced when both sides are stable.
pub fn cluster_scan(curve: &LiftedCurve, geom: &TorusGeometry, grid: &ClusterGrid) -> Result<ClusterEstimate> {
    grid.validate()?;
    check_rank(geom.dim(), curve.dim())?;
    let mut ts = grid.t_values.clone();
    let mut ss = grid.s_values.clone();
    ts.sort_by(f64::total_cmp);
    ss.sort_by(|a, b| b.total_cmp(a));
    curve.check_window(*ss.last().unwrap(), *ts.last().unwrap())?;

    let pos: Vec<Result<(HomologyVector, bool)>> = ts.par_iter().map(|&t| one_sided(curve, geom, t, grid)).collect();
    let neg: Vec<Result<(HomologyVector, bool)>> = ss.par_iter().map(|&s| one_sided(curve, geom, s, grid)).collect();
    let pairs: Vec<(f64, f64)> = ss.iter().flat_map(|&s| ts.iter().map(move |&t| (s, t))).collect();
    let full: Vec<Result<HomologyVector>> = pairs.par_iter().map(|&(s, t)| normalized(curve, geom, s, t)).collect();

    let mut est = ClusterEstimate {
        full: PointSet::new(),
        positive: PointSet::new(),
        negative: PointSet::new(),
        balanced: PointSet::new(),
        positive_stable: Vec::new(),
        negative_stable: Vec::new(),
    };
    for (t, r) in ts.iter().zip(pos) {
        let (v, st) = r?;
        est.positive.push(v, Some(Window { s: 0.0, t: *t }))?;
        est.positive_stable.push(st);
    }
    for (s, r) in ss.iter().zip(neg) {
        let (v, st) = r?;
        est.negative.push(v, Some(Window { s: *s, t: 0.0 }))?;
        est.negative_stable.push(st);
    }
    for (k, (&(s, t), r)) in pairs.iter().zip(full).enumerate() {
        let v = r?;
        let (i, j) = (k / ts.len(), k % ts.len());
        if est.negative_stable[i] && est.positive_stable[j] {
            est.balanced.push(v.clone(), Some(Window { s, t }))?;
        }
        est.full.push(v, Some(Window { s, t }))?;
    }
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedReport {
    /// Largest distance from a balanced sample to the additive hull of the
    /// one-sided samples.
    pub worst_hull_distance: f64,
    pub worst_point: Option<(HomologyVector, Window)>,
    pub pairs_checked: usize,
    /// Stable pairs `(a, b)` with no balanced sample within tol of `[a, b]`.
    pub pairs_missing: Vec<(HomologyVector, HomologyVector)>,
    pub passed: bool,
}

/// Checks that balanced samples lie in the additive hull of `𝒞₊` and `𝒞₋`
/// (exact segment distances), and that each segment between stable one-sided
/// samples carries a balanced sample.
pub fn balanced_cluster_check(est: &ClusterEstimate, tol: f64) -> Result<BalancedReport> {
    if est.positive.is_empty() || est.negative.is_empty() {
        return Err(Error::Domain("balanced check needs non-empty one-sided sets".into()));
    }
    let mut worst = 0.0;
    let mut worst_point = None;
    for (p, w) in est.balanced.iter() {
        let mut best = f64::INFINITY;
        for a in est.negative.points() {
            for b in est.positive.points() {
                best = best.min(segment_distance(p, a, b));
            }
        }
        if best > worst {
            worst = best;
            worst_point = Some((p.clone(), w.unwrap_or(Window { s: 0.0, t: 0.0 })));
        }
    }
    let mut pairs_checked = 0;
    let mut pairs_missing = Vec::new();
    let dedup = |it: Vec<&HomologyVector>| {
        let mut out: Vec<HomologyVector> = Vec::new();
        for p in it {
            if !out.iter().any(|q| q.distance(p) <= tol) {
                out.push(p.clone());
            }
        }
        out
    };
    let stable_a = dedup(est.stable_negative().collect());
    let stable_b = dedup(est.stable_positive().collect());
    for a in &stable_a {
        for b in &stable_b {
            pairs_checked += 1;
            if !est.balanced.points().iter().any(|p| segment_distance(p, a, b) <= tol) {
                pairs_missing.push((a.clone(), b.clone()));
            }
        }
    }
    let passed = worst <= tol && pairs_missing.is_empty();
    Ok(BalancedReport { worst_hull_distance: worst, worst_point, pairs_checked, pairs_missing, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnparametrizedCluster {
    pub samples: PointSet,
    pub cone: ConeReport,
}

/// Union of full cluster samples over the reparametrizations `speeds`, and
/// the rays they span. Grid values outside a reparametrized domain are dropped.
pub fn unparametrized_cluster(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    speeds: &[SpeedFunction],
    grid: &ClusterGrid,
    angular_tol: f64,
    min_norm: f64,
) -> Result<UnparametrizedCluster> {
    if speeds.is_empty() {
        return Err(Error::Domain("speed family is empty".into()));
    }
    let mut samples = PointSet::new();
    for speed in speeds {
        let c = reparametrize(curve, speed)?;
        let (lo, hi) = c.domain();
        let mut g = grid.clone();
        g.t_values.retain(|&t| t <= hi);
        g.s_values.retain(|&s| s >= lo);
        let est = cluster_scan(&c, geom, &g)?;
        samples.extend(&est.full)?;
    }
    let cone = cone_from_samples_above(&samples, angular_tol, min_norm)?;
    Ok(UnparametrizedCluster { samples, cone })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{axes_oscillator_curve, linear_flow_curve, OscillatorSpec};

    fn flat2() -> TorusGeometry {
        TorusGeometry::flat(2)
    }

    #[test]
    fn window_class_examples() {
        let g = flat2();
        let c = linear_flow_curve(&[1.0, 2f64.sqrt()], &[0.0, 0.0]).unwrap();
        assert_eq!(window_class(&c, &g, 0.0, 10.0).unwrap(), IntegralClass::new(vec![10, 14]));
        assert!(window_class(&c, &g, 5.0, 5.0 + 1e-3).unwrap().is_zero());
        let loop7 = linear_flow_curve(&[1.0, 0.0], &[0.3, 0.6]).unwrap();
        assert_eq!(window_class(&loop7, &g, 0.0, 7.0).unwrap(), IntegralClass::new(vec![7, 0]));
    }

    #[test]
    fn crossing_rate_is_one() {
        let c = linear_flow_curve(&[1.0, 0.0], &[0.0, 0.25]).unwrap();
        let h = Hypersurface::new(vec![1, 0], 0.5, 1).unwrap();
        let n = signed_crossings(&c, &h, 0.0, 100.0, &RouteOptions::default()).unwrap();
        assert_eq!(n, 100);
        let back = Hypersurface::new(vec![1, 0], 0.5, -1).unwrap();
        assert_eq!(signed_crossings(&c, &back, 0.0, 100.0, &RouteOptions::default()).unwrap(), -100);
    }

    #[test]
    fn near_tangent_crossing_rejected() {
        // crosses x_2 = 1/2 at t = 5 with normal velocity 1e-9
        let c = linear_flow_curve(&[1.0, 1e-9], &[0.0, 0.5 - 5e-9]).unwrap();
        let h = Hypersurface::new(vec![0, 1], 0.5, 1).unwrap();
        match signed_crossings(&c, &h, 0.0, 10.0, &RouteOptions::default()) {
            Err(Error::NonTransverse { time, normal_velocity }) => {
                assert!((time - 5.0).abs() < 1e-3 && normal_velocity.abs() < 1e-8);
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        let est = route_estimate(
            &c,
            &flat2(),
            &RoutePayload::Hypersurfaces(vec![Hypersurface::new(vec![1, 0], 0.5, 1).unwrap(), h]),
            &WindowSchedule::forward(0.0, 2.0, 2.0, 4).unwrap(),
            1e-2,
            &RouteOptions::default(),
        )
        .unwrap();
        assert_eq!(est.rejected.len(), 2);
        assert!(Hypersurface::new(vec![2, 4], 0.0, 1).is_err());
    }

    #[test]
    fn exact_form_averages_to_zero() {
        let c = linear_flow_curve(&[1.0, 2f64.sqrt()], &[0.1, 0.0]).unwrap();
        let phi = TrigPoly::cosine(vec![1, 1], 0.7).with_term(vec![0, 2], 0.0, 0.3);
        let form = OneForm::exact(phi.clone(), 2).unwrap();
        let (s, t) = (-500.0, 1500.0);
        let v = form_integral(&c, &form, s, t, 0.05).unwrap();
        let exact = phi.eval(&c.eval(t)) - phi.eval(&c.eval(s));
        assert!((v - exact).abs() < 1e-9);
        assert!((v / (t - s)).abs() < 1e-3);
    }

    #[test]
    fn routes_agree_on_linear_flow() {
        let g = flat2();
        let r3 = 3f64.sqrt();
        let v = [1.0 / r3, 2f64.sqrt() / r3];
        let c = linear_flow_curve(&v, &[0.13, 0.71]).unwrap();
        let sched = WindowSchedule::symmetric_to(2000.0, 4).unwrap();
        for route in Route::ALL {
            let est = route_estimate(&c, &g, &RoutePayload::standard(route, 2).unwrap(), &sched, 5e-3, &RouteOptions::default()).unwrap();
            assert!(est.converged, "{route:?}: residual {}", est.residual);
            assert!((est.value.coords()[0] - v[0]).abs() < 2e-3 && (est.value.coords()[1] - v[1]).abs() < 2e-3, "{route:?} {:?}", est.value);
        }
    }

    #[test]
    fn schwartzman_linear_and_oscillator() {
        let g = flat2();
        let c = linear_flow_curve(&[2.0 / 13f64.sqrt(), 3.0 / 13f64.sqrt()], &[0.0, 0.0]).unwrap();
        let sched = WindowSchedule::geometric(100.0, 100.0, 2.0, 6).unwrap();
        let out = schwartzman_class(&c, &g, 1e-2, &sched).unwrap();
        let cl = out.class().expect("converged");
        assert!((cl.coords()[0] - 2.0 / 13f64.sqrt()).abs() < 1e-2);

        let osc = axes_oscillator_curve(&OscillatorSpec::default()).unwrap();
        let sched = WindowSchedule::geometric(10.0, 10.0, 2.0, 14).unwrap();
        match schwartzman_class(&osc, &g, 1e-2, &sched).unwrap() {
            SchwartzmanOutcome::NotConvergent(r) => {
                assert_eq!(r.rays.rays.len(), 2, "{:?}", r.rays);
                assert!(r.cluster_diameter > 0.0);
            }
            other => panic!("oscillator converged: {other:?}"),
        }
    }

    #[test]
    fn closing_schemes_differ_by_bounded_amount() {
        let g = flat2();
        let c = linear_flow_curve(&[0.3, 0.7], &[0.5, 0.5]).unwrap();
        let sched = WindowSchedule::symmetric_to(1e4, 8).unwrap();
        let cmp = compare_closings(&c, &g, &sched).unwrap();
        assert!(cmp.fitted_c <= 2f64.sqrt() + 1e-12);
        assert!(cmp.shortest_limit.distance(&cmp.chart_limit) <= cmp.fitted_c / 1e4 + 1e-15);
    }

    #[test]
    fn cluster_scan_linear_collapses() {
        let g = flat2();
        let c = linear_flow_curve(&[0.6, 0.8], &[0.2, 0.3]).unwrap();
        let grid = ClusterGrid::geometric(100.0, 1e5, 2, 2e-2).unwrap();
        let est = cluster_scan(&c, &g, &grid).unwrap();
        let target = HomologyVector::new(vec![0.6, 0.8]).unwrap();
        for p in est.full.points() {
            assert!(p.distance(&target) < 2e-2);
            // arc-length curve: normalized classes in the unit ball up to closing
            assert!(p.norm() <= 1.0 + 2e-2);
        }
        assert!(!est.balanced.is_empty());
        assert!(balanced_cluster_check(&est, 2e-2).unwrap().passed);
    }

    #[test]
    fn grid_must_span_three_decades() {
        let g = ClusterGrid::geometric(1.0, 100.0, 2, 1e-2).unwrap();
        assert!(g.validate().is_err());
    }

    #[test]
    fn unparametrized_linear_single_ray() {
        let g = flat2();
        let c = linear_flow_curve(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let speeds: Vec<SpeedFunction> = [0.5, 1.0, 2.0].iter().map(|&k| SpeedFunction::Constant { speed: k }).collect();
        let grid = ClusterGrid::geometric(10.0, 1e4, 2, 1e-2).unwrap();
        let u = unparametrized_cluster(&c, &g, &speeds, &grid, 0.05, 1e-12).unwrap();
        assert_eq!(u.cone.rays.len(), 1);
        let r = u.cone.rays[0].coords();
        assert!((r[0] - r[1]).abs() < 1e-2);
    }
}

//! Lifted curves `c~: R -> R^n`: linear flows, ODE trajectories, piecewise
//! constructions, and the operations that derive new curves from old ones.

use std::f64::consts::TAU;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeTrajectory, VectorField};
use crate::torus::TorusGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Analytic,
    Ode,
    Piecewise,
}

/// Anything that can evaluate a lift and its velocity.
pub trait CurveSource: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64) -> Vec<f64>;
    fn velocity(&self, t: f64) -> Vec<f64>;
    fn kind(&self) -> CurveKind;

    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    /// Times in `(s, t)` where the velocity may jump.
    fn breakpoints(&self, _s: f64, _t: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Bound on the Euclidean speed, when known.
    fn speed_bound(&self) -> Option<f64> {
        None
    }
}

/// A shared, immutable parametrized curve given by its lift.
#[derive(Debug, Clone)]
pub struct LiftedCurve {
    source: Arc<dyn CurveSource>,
}

impl LiftedCurve {
    pub fn from_source<S: CurveSource + 'static>(source: S) -> Self {
        Self { source: Arc::new(source) }
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn kind(&self) -> CurveKind {
        self.source.kind()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.source.domain()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.source.eval(t)
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.source.velocity(t)
    }

    pub fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        self.source.breakpoints(s, t)
    }

    pub fn speed_bound(&self) -> Option<f64> {
        self.source.speed_bound()
    }

    pub fn check_window(&self, s: f64, t: f64) -> Result<()> {
        if !(s.is_finite() && t.is_finite()) || s > t {
            return Err(Error::Domain(format!("invalid window ({s}, {t})")));
        }
        let (lo, hi) = self.domain();
        if s < lo || t > hi {
            return Err(Error::Domain(format!("window ({s}, {t}) outside curve domain ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Riemannian length of `c|[s,t]` by Gauss–Legendre quadrature of the speed
    /// on panels of width at most `step`, split at breakpoints.
    pub fn length(&self, geom: &TorusGeometry, s: f64, t: f64, step: f64) -> f64 {
        integrate_pieces(self, s, t, step, |x, v| geom.speed(x, v))
    }
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Integrates `f(c~(τ), c~'(τ))` over `[s, t]` with 5-point Gauss–Legendre on
/// panels no wider than `step`, splitting at the curve's breakpoints.
pub(crate) fn integrate_pieces<F>(curve: &LiftedCurve, s: f64, t: f64, step: f64, f: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if t <= s {
        return 0.0;
    }
    let mut cuts = vec![s];
    cuts.extend(curve.breakpoints(s, t).into_iter().filter(|&b| b > s && b < t));
    cuts.push(t);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let panels = ((b - a) / step).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            let mut acc = 0.0;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                let tau = mid + 0.5 * h * x;
                acc += w * f(&curve.eval(tau), &curve.velocity(tau));
            }
            total += 0.5 * h * acc;
        }
    }
    total
}

// ---------------------------------------------------------------------------
// linear flows

#[derive(Debug, Clone)]
struct Linear {
    x0: Vec<f64>,
    v: Vec<f64>,
}

impl CurveSource for Linear {
    fn dim(&self) -> usize {
        self.v.len()
    }
    fn eval(&self, t: f64) -> Vec<f64> {
        self.x0.iter().zip(&self.v).map(|(x, v)| x + t * v).collect()
    }
    fn velocity(&self, _t: f64) -> Vec<f64> {
        self.v.clone()
    }
    fn kind(&self) -> CurveKind {
        CurveKind::Analytic
    }
    fn speed_bound(&self) -> Option<f64> {
        Some(self.v.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// `c~(t) = x0 + t v`.
pub fn linear_flow_curve(v: &[f64], x0: &[f64]) -> Result<LiftedCurve> {
    if v.len() != x0.len() || v.is_empty() {
        return Err(Error::RankMismatch { expected: v.len(), found: x0.len() });
    }
    if v.iter().chain(x0).any(|c| !c.is_finite()) {
        return Err(Error::Domain("linear flow data must be finite".into()));
    }
    if v.iter().all(|&c| c == 0.0) {
        return Err(Error::Domain("linear flow needs a nonzero direction".into()));
    }
    Ok(LiftedCurve::from_source(Linear { x0: x0.to_vec(), v: v.to_vec() }))
}

// ---------------------------------------------------------------------------
// ODE trajectories

#[derive(Debug)]
struct OdeSource {
    traj: OdeTrajectory,
    vmax: f64,
}

impl CurveSource for OdeSource {
    fn dim(&self) -> usize {
        self.traj.field().dim()
    }
    fn eval(&self, t: f64) -> Vec<f64> {
        self.traj.eval(t)
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        self.traj.velocity(t)
    }
    fn kind(&self) -> CurveKind {
        CurveKind::Ode
    }
    fn domain(&self) -> (f64, f64) {
        self.traj.span()
    }
    fn speed_bound(&self) -> Option<f64> {
        Some(self.vmax)
    }
}

/// Integrates the lift of `x' = field(x)` over `[-t_back, t_forward]` from `x0`
/// at time 0. On failure the error carries the time reached.
pub fn integrate_flow(field: &VectorField, x0: &[f64], t_back: f64, t_forward: f64, tol: f64) -> Result<LiftedCurve> {
    let (curve, failure) = integrate_flow_partial(field, x0, t_back, t_forward, tol)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(curve),
    }
}

/// Like [`integrate_flow`], but returns the partial trajectory alongside any
/// integration failure.
pub fn integrate_flow_partial(
    field: &VectorField,
    x0: &[f64],
    t_back: f64,
    t_forward: f64,
    tol: f64,
) -> Result<(LiftedCurve, Option<Error>)> {
    if x0.len() != field.dim() {
        return Err(Error::RankMismatch { expected: field.dim(), found: x0.len() });
    }
    if !(tol > 0.0) || !(t_back >= 0.0) || !(t_forward >= 0.0) || !t_back.is_finite() || !t_forward.is_finite() {
        return Err(Error::Domain("integration needs tol > 0 and finite non-negative spans".into()));
    }
    let (traj, failure) = ode::integrate(field, x0, -t_back, t_forward, tol);
    let vmax = field.norm_bound();
    Ok((LiftedCurve::from_source(OdeSource { traj, vmax }), failure))
}

// ---------------------------------------------------------------------------
// polylines

/// Piecewise-linear lift through `(time, point)` knots.
#[derive(Debug, Clone)]
pub struct Polyline {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
}

impl Polyline {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != points.len() {
            return Err(Error::Construction("polyline needs at least two matching knots".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Construction("polyline knot times must increase strictly".into()));
        }
        let n = points[0].len();
        if points.iter().any(|p| p.len() != n) {
            return Err(Error::RankMismatch { expected: n, found: points.iter().map(Vec::len).find(|&l| l != n).unwrap() });
        }
        Ok(Self { times, points })
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}

impl CurveSource for Polyline {
    fn dim(&self) -> usize {
        self.points[0].len()
    }
    fn eval(&self, t: f64) -> Vec<f64> {
        let i = self.segment(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let lam = (t - t0) / (t1 - t0);
        self.points[i].iter().zip(&self.points[i + 1]).map(|(a, b)| a + lam * (b - a)).collect()
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        let i = self.segment(t);
        let dt = self.times[i + 1] - self.times[i];
        self.points[i].iter().zip(&self.points[i + 1]).map(|(a, b)| (b - a) / dt).collect()
    }
    fn kind(&self) -> CurveKind {
        CurveKind::Piecewise
    }
    fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        let lo = self.times.partition_point(|&x| x <= s);
        let hi = self.times.partition_point(|&x| x < t);
        self.times[lo..hi].to_vec()
    }
    fn speed_bound(&self) -> Option<f64> {
        let mut vmax: f64 = 0.0;
        for i in 0..self.times.len() - 1 {
            let dt = self.times[i + 1] - self.times[i];
            let d: f64 = self.points[i].iter().zip(&self.points[i + 1]).map(|(a, b)| (b - a) * (b - a)).sum();
            vmax = vmax.max(d.sqrt() / dt);
        }
        Some(vmax)
    }
}

pub fn polyline_curve(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<LiftedCurve> {
    Ok(LiftedCurve::from_source(Polyline::new(times, points)?))
}

// ---------------------------------------------------------------------------
// the counterexample with a non-closed balanced cluster

/// Parameters of the planar curve whose full cluster contains 0 while its
/// balanced cluster accumulates on `(a_n + b_n)/2 -> 0` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct CounterexampleSpec {
    /// Slope `m` of the line `y = m x` bounding the admissible half-plane.
    pub slope: f64,
    /// Target pairs `(a_n, b_n)`, both strictly below the line.
    pub targets: Vec<([f64; 2], [f64; 2])>,
    /// Time of the first visit.
    #[serde(default = "defaults::first_time")]
    pub first_time: f64,
    /// Each target is followed exactly over `[T, epoch_factor * T]`.
    #[serde(default = "defaults::epoch_factor")]
    pub epoch_factor: f64,
    /// Transit legs last `(transit_factor - 1)` times the current time.
    #[serde(default = "defaults::transit_factor")]
    pub transit_factor: f64,
    /// Cap on the Euclidean speed of every leg.
    #[serde(default = "defaults::speed_cap")]
    pub speed_cap: f64,
    /// Number of passes through the whole target list.
    #[serde(default = "defaults::cycles")]
    pub cycles: usize,
}

mod defaults {
    pub fn first_time() -> f64 {
        1.0
    }
    pub fn epoch_factor() -> f64 {
        12.0
    }
    pub fn transit_factor() -> f64 {
        1.5
    }
    pub fn speed_cap() -> f64 {
        100.0
    }
    pub fn cycles() -> usize {
        1
    }
}

impl CounterexampleSpec {
    /// Slope `√2`, `a_n = (-n, -n√2 - 1/n)`, `b_n = (n, n√2 - 1/n)` for `n = 1..=depth`.
    pub fn standard(depth: usize) -> Self {
        let m = 2f64.sqrt();
        let targets = (1..=depth)
            .map(|n| {
                let n = n as f64;
                ([-n, -n * m - 1.0 / n], [n, n * m - 1.0 / n])
            })
            .collect();
        Self {
            slope: m,
            targets,
            first_time: defaults::first_time(),
            epoch_factor: defaults::epoch_factor(),
            transit_factor: defaults::transit_factor(),
            speed_cap: defaults::speed_cap(),
            cycles: defaults::cycles(),
        }
    }

    /// `h(v) = m v_x - v_y`, positive strictly below the line.
    pub fn height(&self, v: [f64; 2]) -> f64 {
        self.slope * v[0] - v[1]
    }

    pub fn validate(&self) -> Result<()> {
        if !self.slope.is_finite() {
            return Err(Error::Construction("slope must be finite".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::Construction("counterexample needs at least one target pair".into()));
        }
        if !(self.first_time > 0.0) || !(self.epoch_factor > 1.0) || !(self.transit_factor > 1.0) {
            return Err(Error::Construction("need first_time > 0, epoch_factor > 1, transit_factor > 1".into()));
        }
        if !(self.speed_cap > 0.0) || self.cycles == 0 {
            return Err(Error::Construction("need speed_cap > 0 and cycles >= 1".into()));
        }
        let mut prev = f64::INFINITY;
        for (i, (a, b)) in self.targets.iter().enumerate() {
            if a.iter().chain(b).any(|c| !c.is_finite()) {
                return Err(Error::Construction(format!("target {} is not finite", i + 1)));
            }
            if !(self.height(*a) > 0.0 && self.height(*b) > 0.0) {
                return Err(Error::Construction(format!("target {} is not strictly below the line", i + 1)));
            }
            let mid = ((a[0] + b[0]) / 2.0).hypot((a[1] + b[1]) / 2.0);
            if !(mid < prev) {
                return Err(Error::Construction(format!("midpoint norms must decrease strictly (target {})", i + 1)));
            }
            prev = mid;
        }
        Ok(())
    }
}

/// Timing produced by [`counterexample_curve`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterexampleSchedule {
    /// `(target index n (1-based), start, end)` of each ray-following epoch.
    /// Over `[start, end]`, `c~(t) = b_n t` and `c~(-t) = a_n t`.
    pub epochs: Vec<(usize, f64, f64)>,
    /// Times `t > 0` with `c~(t) = 0 = c~(-t)`, after each full cycle.
    pub origin_times: Vec<f64>,
    pub final_time: f64,
}

impl CounterexampleSchedule {
    /// Visit times `t_{n,i}` for target `n` (ends of its epochs).
    pub fn visit_times(&self, n: usize) -> Vec<f64> {
        self.epochs.iter().filter(|e| e.0 == n).map(|e| e.2).collect()
    }
}

const MAX_LIFT: f64 = 1.125_899_906_842_624e15; // 2^50

/// Builds the piecewise-linear lift. Positive times follow the rays `b_n t`,
/// negative times the rays `-a_n |s|`, on identical schedules, so the one-sided
/// limits at `t_{n,i}` and `s_{n,i} = -t_{n,i}` are exactly `b_n` and `a_n`.
/// `c~(t)` and `-c~(-t)` stay in the closed region below the line, so every
/// window displacement `c~(t) - c~(s)` with `s <= 0 <= t` does too.
pub fn counterexample_curve(spec: &CounterexampleSpec) -> Result<(LiftedCurve, CounterexampleSchedule)> {
    spec.validate()?;
    // knots: (time, position at +t, position q with c~(-t) = -q)
    let mut knots: Vec<(f64, [f64; 2], [f64; 2])> = vec![(0.0, [0.0; 2], [0.0; 2])];
    let mut epochs = Vec::new();
    let mut origin_times = Vec::new();
    let leg = |from: &(f64, [f64; 2], [f64; 2]), to: &(f64, [f64; 2], [f64; 2]), what: String| -> Result<()> {
        for (p0, p1) in [(from.1, to.1), (from.2, to.2)] {
            let speed = (p1[0] - p0[0]).hypot(p1[1] - p0[1]) / (to.0 - from.0);
            if speed > spec.speed_cap * (1.0 + 1e-12) {
                return Err(Error::Construction(format!(
                    "{what}: required speed {speed:.3} exceeds cap {}",
                    spec.speed_cap
                )));
            }
            if p1[0].abs().max(p1[1].abs()) > MAX_LIFT {
                return Err(Error::Construction(format!("{what}: lift exceeds 2^50")));
            }
        }
        Ok(())
    };
    let scaled = |v: [f64; 2], t: f64| [v[0] * t, v[1] * t];
    for cycle in 1..=spec.cycles {
        for (i, (a, b)) in spec.targets.iter().enumerate() {
            let prev = *knots.last().unwrap();
            let start = if prev.0 == 0.0 { spec.first_time } else { prev.0 * spec.transit_factor };
            let k0 = (start, scaled(*b, start), scaled(*a, start));
            leg(&prev, &k0, format!("cycle {cycle} target {} transit", i + 1))?;
            let end = start * spec.epoch_factor;
            let k1 = (end, scaled(*b, end), scaled(*a, end));
            leg(&k0, &k1, format!("cycle {cycle} target {} epoch", i + 1))?;
            knots.push(k0);
            knots.push(k1);
            epochs.push((i + 1, start, end));
        }
        // return through the origin at half the cap
        let prev = *knots.last().unwrap();
        let dist = prev.1[0].hypot(prev.1[1]).max(prev.2[0].hypot(prev.2[1]));
        let back = prev.0 + dist / (0.5 * spec.speed_cap);
        knots.push((back, [0.0; 2], [0.0; 2]));
        origin_times.push(back);
    }
    let mut times: Vec<f64> = knots.iter().rev().map(|k| -k.0).collect();
    let mut points: Vec<Vec<f64>> = knots.iter().rev().map(|k| vec![-k.2[0], -k.2[1]]).collect();
    times.pop();
    points.pop();
    times.extend(knots.iter().map(|k| k.0));
    points.extend(knots.iter().map(|k| k.1.to_vec()));
    let final_time = knots.last().unwrap().0;
    let curve = polyline_curve(times, points)?;
    Ok((curve, CounterexampleSchedule { epochs, origin_times, final_time }))
}

// ---------------------------------------------------------------------------
// the axes oscillator

/// Alternating excursions along the `+x` and `+y` axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct OscillatorSpec {
    /// Length of the first excursion.
    pub first_excursion: f64,
    /// Ratio between consecutive excursion lengths.
    pub growth: f64,
    /// Number of excursions; the curve is defined up to the end of the last.
    pub epochs: usize,
    /// Corridor width around the axes.
    pub corridor: f64,
}

impl Default for OscillatorSpec {
    fn default() -> Self {
        Self { first_excursion: 10.0, growth: 10.0, epochs: 6, corridor: 0.1 }
    }
}

impl OscillatorSpec {
    /// `(start time, excursion length, axis)` per epoch.
    pub fn dwell_schedule(&self) -> Vec<(f64, f64, usize)> {
        let mut out = Vec::with_capacity(self.epochs);
        let mut t = 0.0;
        let mut d = self.first_excursion;
        for j in 0..self.epochs {
            out.push((t, d, j % 2));
            t += 2.0 * d;
            d *= self.growth;
        }
        out
    }
}

#[derive(Debug)]
struct Oscillator {
    schedule: Vec<(f64, f64, usize)>,
    end: f64,
    half_width: f64,
}

impl Oscillator {
    /// Axial coordinate, its time derivative, and the axis at `t >= 0`.
    fn locate(&self, t: f64) -> (f64, f64, usize) {
        let j = self.schedule.partition_point(|e| e.0 <= t).saturating_sub(1);
        let (start, d, axis) = self.schedule[j];
        let tau = t - start;
        if tau <= d {
            (tau, 1.0, axis)
        } else {
            (2.0 * d - tau, -1.0, axis)
        }
    }
}

impl CurveSource for Oscillator {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, t: f64) -> Vec<f64> {
        let w = self.half_width;
        if t < 0.0 {
            let (s, c) = (TAU * t).sin_cos();
            return vec![w * s, w * (1.0 - c)];
        }
        let (r, _, axis) = self.locate(t);
        let mut p = vec![0.0; 2];
        p[axis] = r;
        p[1 - axis] = w * (TAU * r).sin();
        p
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        let w = self.half_width;
        if t < 0.0 {
            let (s, c) = (TAU * t).sin_cos();
            return vec![w * TAU * c, w * TAU * s];
        }
        let (r, dr, axis) = self.locate(t);
        let mut v = vec![0.0; 2];
        v[axis] = dr;
        v[1 - axis] = w * TAU * (TAU * r).cos() * dr;
        v
    }
    fn kind(&self) -> CurveKind {
        CurveKind::Piecewise
    }
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, self.end)
    }
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if s < 0.0 && t > 0.0 {
            out.push(0.0);
        }
        for &(start, d, _) in &self.schedule {
            for b in [start, start + d] {
                if b > s && b < t && b != 0.0 {
                    out.push(b);
                }
            }
        }
        out
    }
    fn speed_bound(&self) -> Option<f64> {
        Some((1.0 + (TAU * self.half_width).powi(2)).sqrt())
    }
}

/// Curve oscillating between the half axes; bounded as `t -> -∞`.
pub fn axes_oscillator_curve(spec: &OscillatorSpec) -> Result<LiftedCurve> {
    if !(spec.first_excursion > 0.0) || !(spec.growth > 1.0) || spec.epochs == 0 || !(spec.corridor > 0.0) {
        return Err(Error::Construction(
            "oscillator needs first_excursion > 0, growth > 1, epochs >= 1, corridor > 0".into(),
        ));
    }
    let schedule = spec.dwell_schedule();
    let (start, d, _) = *schedule.last().unwrap();
    Ok(LiftedCurve::from_source(Oscillator { schedule, end: start + 2.0 * d, half_width: spec.corridor / 2.0 }))
}

// ---------------------------------------------------------------------------
// bounded perturbations

/// One term `amplitude * sin(omega t + phase)` of a displacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisplacementTerm {
    pub amplitude: Vec<f64>,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug)]
struct Perturbed {
    base: LiftedCurve,
    terms: Vec<DisplacementTerm>,
}

impl CurveSource for Perturbed {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, t: f64) -> Vec<f64> {
        let mut x = self.base.eval(t);
        for term in &self.terms {
            let s = (term.omega * t + term.phase).sin();
            x.iter_mut().zip(&term.amplitude).for_each(|(x, a)| *x += a * s);
        }
        x
    }
    fn velocity(&self, t: f64) -> Vec<f64> {
        let mut v = self.base.velocity(t);
        for term in &self.terms {
            let c = term.omega * (term.omega * t + term.phase).cos();
            v.iter_mut().zip(&term.amplitude).for_each(|(v, a)| *v += a * c);
        }
        v
    }
    fn kind(&self) -> CurveKind {
        self.base.kind()
    }
    fn domain(&self) -> (f64, f64) {
        self.base.domain()
    }
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        self.base.breakpoints(s, t)
    }
    fn speed_bound(&self) -> Option<f64> {
        let extra: f64 = self
            .terms
            .iter()
            .map(|t| t.omega.abs() * t.amplitude.iter().map(|a| a * a).sum::<f64>().sqrt())
            .sum();
        self.base.speed_bound().map(|b| b + extra)
    }
}

/// `c1(t) = c0(t) + δ(t)` with `δ` a finite sum of sinusoids whose amplitude
/// norms sum to at most `bound`.
pub fn perturb_bounded(curve: &LiftedCurve, terms: &[DisplacementTerm], bound: f64) -> Result<LiftedCurve> {
    let mut total = 0.0;
    for term in terms {
        if term.amplitude.len() != curve.dim() {
            return Err(Error::RankMismatch { expected: curve.dim(), found: term.amplitude.len() });
        }
        if term.amplitude.iter().any(|a| !a.is_finite()) || !term.omega.is_finite() || !term.phase.is_finite() {
            return Err(Error::Domain("displacement terms must be finite".into()));
        }
        total += term.amplitude.iter().map(|a| a * a).sum::<f64>().sqrt();
    }
    if total > bound * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("displacement bound {total} exceeds declared {bound}")));
    }
    if terms.iter().all(|t| t.amplitude.iter().all(|&a| a == 0.0)) {
        return Ok(curve.clone());
    }
    Ok(LiftedCurve::from_source(Perturbed { base: curve.clone(), terms: terms.to_vec() }))
}

// ---------------------------------------------------------------------------
// reparametrizations

/// Positive speed functions `σ(τ)`; the new curve is `c(ψ(τ))` with `ψ' = σ`,
/// `ψ(0) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum SpeedFunction {
    Constant { speed: f64 },
    /// `σ(τ) = base (1 + amplitude sin ln(1 + |τ|))`: oscillates forever on a
    /// logarithmic time scale, so normalized classes keep moving.
    LogOscillating { base: f64, amplitude: f64 },
}

impl SpeedFunction {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpeedFunction::Constant { speed } if speed > 0.0 && speed.is_finite() => Ok(()),
            SpeedFunction::LogOscillating { base, amplitude }
                if base > 0.0 && base.is_finite() && (0.0..1.0).contains(&amplitude) =>
            {
                Ok(())
            }
            _ => Err(Error::Domain(format!("speed function {self:?} is not positive"))),
        }
    }

    pub fn speed(&self, tau: f64) -> f64 {
        match *self {
            SpeedFunction::Constant { speed } => speed,
            SpeedFunction::LogOscillating { base, amplitude } => base * (1.0 + amplitude * (1.0 + tau.abs()).ln().sin()),
        }
    }

    /// `ψ(τ) = ∫_0^τ σ`.
    pub fn time(&self, tau: f64) -> f64 {
        match *self {
            SpeedFunction::Constant { speed } => speed * tau,
            SpeedFunction::LogOscillating { base, amplitude } => {
                let x = tau.abs();
                let l = (1.0 + x).ln();
                let f = (1.0 + x) * (l.sin() - l.cos()) / 2.0 + 0.5;
                tau.signum() * base * (x + amplitude * f)
            }
        }
    }
}

#[derive(Debug)]
struct Reparametrized {
    base: LiftedCurve,
    speed: SpeedFunction,
    domain: (f64, f64),
}

impl CurveSource for Reparametrized {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, tau: f64) -> Vec<f64> {
        self.base.eval(self.speed.time(tau))
    }
    fn velocity(&self, tau: f64) -> Vec<f64> {
        let k = self.speed.speed(tau);
        self.base.velocity(self.speed.time(tau)).into_iter().map(|v| v * k).collect()
    }
    fn kind(&self) -> CurveKind {
        self.base.kind()
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .base
            .breakpoints(self.speed.time(s), self.speed.time(t))
            .into_iter()
            .map(|b| invert_monotone(|x| self.speed.time(x), b, s, t))
            .collect();
        if matches!(self.speed, SpeedFunction::LogOscillating { .. }) && s < 0.0 && t > 0.0 {
            out.push(0.0);
            out.sort_by(f64::total_cmp);
        }
        out
    }
}

fn invert_monotone<F: Fn(f64) -> f64>(f: F, y: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Orientation-preserving reparametrization `τ ↦ c(ψ(τ))`.
pub fn reparametrize(curve: &LiftedCurve, speed: &SpeedFunction) -> Result<LiftedCurve> {
    speed.validate()?;
    if let SpeedFunction::Constant { speed: k } = speed {
        if *k == 1.0 {
            return Ok(curve.clone());
        }
    }
    let (lo, hi) = curve.domain();
    let inv = |y: f64| {
        if y.is_infinite() {
            return y;
        }
        let mut span = 1.0;
        while speed.time(span) < y.abs() {
            span *= 2.0;
        }
        invert_monotone(|x| speed.time(x), y, -span, span)
    };
    let domain = (inv(lo), inv(hi));
    Ok(LiftedCurve::from_source(Reparametrized { base: curve.clone(), speed: speed.clone(), domain }))
}

#[derive(Debug)]
struct ArcLength {
    base: LiftedCurve,
    geom: TorusGeometry,
    /// Original times and cumulative arc length from time 0, increasing.
    times: Vec<f64>,
    arcs: Vec<f64>,
}

impl ArcLength {
    fn original_time(&self, s: f64) -> f64 {
        let n = self.arcs.len();
        let i = match self.arcs.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => return self.times[i],
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let a0 = self.arcs[i];
        // Newton iterations with a bisection safeguard inside the cell
        let (mut lo, mut hi) = (t0, t1);
        let mut t = t0 + (s - a0) / (self.arcs[i + 1] - a0) * (t1 - t0);
        for _ in 0..60 {
            let arc = a0 + integrate_pieces(&self.base, t0, t, f64::INFINITY, |x, v| self.geom.speed(x, v));
            let r = arc - s;
            if r.abs() <= 1e-14 * (1.0 + s.abs()) {
                break;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let x = self.base.eval(t);
            let sp = self.geom.speed(&x, &self.base.velocity(t));
            let mut next = t - r / sp;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if next == t {
                break;
            }
            t = next;
        }
        t
    }
}

impl CurveSource for ArcLength {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn eval(&self, s: f64) -> Vec<f64> {
        self.base.eval(self.original_time(s))
    }
    fn velocity(&self, s: f64) -> Vec<f64> {
        let t = self.original_time(s);
        let x = self.base.eval(t);
        let v = self.base.velocity(t);
        let sp = self.geom.speed(&x, &v);
        v.into_iter().map(|c| c / sp).collect()
    }
    fn kind(&self) -> CurveKind {
        self.base.kind()
    }
    fn domain(&self) -> (f64, f64) {
        (self.arcs[0], *self.arcs.last().unwrap())
    }
    fn breakpoints(&self, s: f64, t: f64) -> Vec<f64> {
        // cell boundaries of the table double as breakpoints of the base
        let lo = self.arcs.partition_point(|&x| x <= s);
        let hi = self.arcs.partition_point(|&x| x < t);
        self.arcs[lo..hi].to_vec()
    }
}

/// Reparametrizes by arc length for `geom`, with arc length 0 at time 0.
///
/// Linear flows on flat tori are rescaled analytically. Other curves need a
/// finite domain (unless `window` bounds the original times) and are
/// tabulated on cells of width at most `cell`, split at breakpoints.
pub fn arc_length_reparametrize(
    curve: &LiftedCurve,
    geom: &TorusGeometry,
    window: Option<(f64, f64)>,
    cell: f64,
) -> Result<LiftedCurve> {
    if geom.dim() != curve.dim() {
        return Err(Error::RankMismatch { expected: geom.dim(), found: curve.dim() });
    }
    if curve.kind() == CurveKind::Analytic && geom.is_flat() {
        let v0 = curve.velocity(0.0);
        let v1 = curve.velocity(1.0);
        if v0 == v1 && curve.domain() == (f64::NEG_INFINITY, f64::INFINITY) {
            let speed = geom.gram_norm(&v0);
            if speed == 0.0 {
                return Err(Error::Domain("curve is stationary".into()));
            }
            return reparametrize(curve, &SpeedFunction::Constant { speed: 1.0 / speed });
        }
    }
    let (lo, hi) = match window {
        Some((a, b)) => {
            curve.check_window(a, b)?;
            (a, b)
        }
        None => curve.domain(),
    };
    if !(lo.is_finite() && hi.is_finite()) || !(lo <= 0.0 && 0.0 <= hi) || !(cell > 0.0) {
        return Err(Error::Domain("arc-length tabulation needs a finite window containing 0 and cell > 0".into()));
    }
    let mut knots = vec![lo, 0.0, hi];
    knots.extend(curve.breakpoints(lo, hi));
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let mut times = Vec::new();
    for w in knots.windows(2) {
        let k = ((w[1] - w[0]) / cell).ceil().max(1.0) as usize;
        for j in 0..k {
            times.push(w[0] + (w[1] - w[0]) * j as f64 / k as f64);
        }
    }
    times.push(hi);
    times.dedup();
    let mut arcs = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    arcs.push(0.0);
    for w in times.windows(2) {
        let inc = integrate_pieces(curve, w[0], w[1], f64::INFINITY, |x, v| geom.speed(x, v));
        if !(inc > 1e-14 * (w[1] - w[0])) {
            return Err(Error::Domain(format!("zero speed on [{}, {}]", w[0], w[1])));
        }
        acc += inc;
        arcs.push(acc);
    }
    let zero = times.iter().position(|&t| t == 0.0).expect("0 is a knot");
    let shift = arcs[zero];
    arcs.iter_mut().for_each(|a| *a -= shift);
    Ok(LiftedCurve::from_source(ArcLength { base: curve.clone(), geom: geom.clone(), times, arcs }))
}

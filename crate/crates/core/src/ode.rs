//! Adaptive Dormand–Prince 5(4) integration of autonomous periodic vector
//! fields, with cubic Hermite dense output between accepted steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::TrigPoly;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (fifth minus embedded fourth order weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension evaluated at the step midpoint
const M1: f64 = 6025192743.0 / 30085553152.0;
const M3: f64 = 51252292925.0 / 65400821598.0;
const M4: f64 = -2691868925.0 / 45128329728.0;
const M5: f64 = 187940372067.0 / 1594534317056.0;
const M6: f64 = -1776094331.0 / 19743644256.0;
const M7: f64 = 11237099.0 / 235043384.0;

const MAX_STEPS: usize = 20_000_000;

/// A vector field on `T^n` whose components are trigonometric polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VectorField {
    components: Vec<TrigPoly>,
}

impl VectorField {
    pub fn new(components: Vec<TrigPoly>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::Domain("vector field needs at least one component".into()));
        }
        for c in &components {
            c.validate(n)?;
        }
        Ok(Self { components })
    }

    pub fn constant(v: &[f64]) -> Self {
        Self { components: v.iter().map(|&c| TrigPoly::constant(c)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }

    /// Certified bound on the Euclidean norm of the field.
    pub fn norm_bound(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.upper_bound().abs().max(c.lower_bound().abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Accepted integration nodes, sorted by time.
#[derive(Debug, Clone)]
pub struct OdeTrajectory {
    pub(crate) field: VectorField,
    pub(crate) times: Vec<f64>,
    pub(crate) states: Vec<Vec<f64>>,
    pub(crate) derivs: Vec<Vec<f64>>,
}

impl OdeTrajectory {
    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// Cubic Hermite interpolation between the bracketing nodes.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let i = self.bracket(t);
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let (x0, x1) = (&self.states[i], &self.states[i + 1]);
        let (f0, f1) = (&self.derivs[i], &self.derivs[i + 1]);
        (0..x0.len())
            .map(|k| h00 * x0[k] + h10 * h * f0[k] + h01 * x1[k] + h11 * h * f1[k])
            .collect()
    }

    /// Velocity from the field at the interpolated state.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.field.eval(&self.eval(t))
    }

    fn bracket(&self, t: f64) -> usize {
        let n = self.times.len();
        match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }
}

struct Stepper<'a> {
    field: &'a VectorField,
    sign: f64,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(field: &'a VectorField, sign: f64) -> Self {
        let n = field.dim();
        Self { field, sign, k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    fn f(&mut self, slot: usize) {
        let mut out = std::mem::take(&mut self.k[slot]);
        self.field.eval_into(&self.tmp, &mut out);
        if self.sign < 0.0 {
            out.iter_mut().for_each(|v| *v = -*v);
        }
        self.k[slot] = out;
    }

    /// One trial step from `x` with `k[0] = f(x)` precomputed. Writes the
    /// fifth-order solution into `next` and returns the max-norm error
    /// estimate, which includes the gap between the cubic Hermite midpoint and
    /// the Runge–Kutta continuous extension so that dense output is as
    /// accurate as the nodes.
    fn step(&mut self, x: &[f64], h: f64, next: &mut [f64]) -> f64 {
        let n = x.len();
        let stages: [(&[f64], usize); 5] = [
            (&[A21], 1),
            (&[A31, A32], 2),
            (&[A41, A42, A43], 3),
            (&[A51, A52, A53, A54], 4),
            (&[A61, A62, A63, A64, A65], 5),
        ];
        for (coeffs, slot) in stages {
            for i in 0..n {
                let mut acc = x[i];
                for (j, a) in coeffs.iter().enumerate() {
                    acc += h * a * self.k[j][i];
                }
                self.tmp[i] = acc;
            }
            self.f(slot);
        }
        for i in 0..n {
            next[i] = x[i]
                + h * (B1 * self.k[0][i] + B3 * self.k[2][i] + B4 * self.k[3][i] + B5 * self.k[4][i] + B6 * self.k[5][i]);
        }
        self.tmp.copy_from_slice(next);
        self.f(6);
        let mut err: f64 = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * self.k[0][i] + E3 * self.k[2][i] + E4 * self.k[3][i] + E5 * self.k[4][i] + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
            err = err.max(e.abs());
            let mid = x[i]
                + 0.5 * h * (M1 * self.k[0][i] + M3 * self.k[2][i] + M4 * self.k[3][i] + M5 * self.k[4][i]
                    + M6 * self.k[5][i]
                    + M7 * self.k[6][i]);
            let herm = 0.5 * (x[i] + next[i]) + h * (self.k[0][i] - self.k[6][i]) / 8.0;
            err = err.max((mid - herm).abs());
        }
        err
    }
}

/// Integrates `x' = field(x)` from `x0` at time 0 over `[t_min, t_max]` (with
/// `t_min <= 0 <= t_max`). Steps are accepted when the local error estimate is
/// at most `tol * h` (error per unit time). On step-size underflow the nodes
/// accepted so far are returned together with the failure.
pub fn integrate(
    field: &VectorField,
    x0: &[f64],
    t_min: f64,
    t_max: f64,
    tol: f64,
) -> (OdeTrajectory, Option<Error>) {
    let mut fwd = sweep(field, x0, t_max, tol, 1.0);
    let mut back = sweep(field, x0, -t_min, tol, -1.0);
    let failure = back.3.take().or(fwd.3.take());

    let mut times: Vec<f64> = back.0.iter().rev().map(|t| -t).collect();
    let mut states: Vec<Vec<f64>> = back.1.into_iter().rev().collect();
    let mut derivs: Vec<Vec<f64>> = back.2.into_iter().rev().map(|d| d.iter().map(|v| -v).collect()).collect();
    // drop the duplicated t = 0 node
    times.pop();
    states.pop();
    derivs.pop();
    times.extend(fwd.0);
    states.extend(fwd.1);
    derivs.extend(fwd.2);
    if times.len() == 1 {
        // degenerate span: duplicate the only node so interpolation is defined
        times.push(times[0] + f64::EPSILON);
        states.push(states[0].clone());
        derivs.push(derivs[0].clone());
    }
    (OdeTrajectory { field: field.clone(), times, states, derivs }, failure)
}

type Sweep = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Option<Error>);

/// Integrates in one direction; times are reported as positive offsets.
fn sweep(field: &VectorField, x0: &[f64], span: f64, tol: f64, sign: f64) -> Sweep {
    let n = x0.len();
    let mut stepper = Stepper::new(field, sign);
    let mut x = x0.to_vec();
    stepper.tmp.copy_from_slice(&x);
    stepper.f(0);
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut derivs = vec![stepper.k[0].clone()];
    if span <= 0.0 {
        return (times, states, derivs, None);
    }
    let scale = stepper.k[0].iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-3);
    let mut h = (0.01 / scale).min(span);
    let mut t = 0.0;
    let mut next = vec![0.0; n];
    let mut steps = 0;
    while t < span {
        if steps >= MAX_STEPS {
            return (times, states, derivs, Some(Error::Integration { reached: sign * t, reason: "step budget exhausted".into() }));
        }
        steps += 1;
        h = h.min(span - t);
        let err = stepper.step(&x, h, &mut next);
        let allowed = tol * h;
        if err <= allowed || h <= 1e-13 * (1.0 + t) {
            if err > allowed {
                return (
                    times,
                    states,
                    derivs,
                    Some(Error::Integration { reached: sign * t, reason: "step size underflow".into() }),
                );
            }
            t = if span - t <= h { span } else { t + h };
            x.copy_from_slice(&next);
            let fsal = std::mem::take(&mut stepper.k[6]);
            stepper.k[0] = fsal;
            stepper.k[6] = vec![0.0; n];
            times.push(t);
            states.push(x.clone());
            derivs.push(stepper.k[0].clone());
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * (allowed / err).powf(0.25)).clamp(0.2, 5.0) };
        h *= factor;
    }
    (times, states, derivs, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_is_exact() {
        let f = VectorField::constant(&[1.0, 2f64.sqrt()]);
        let (traj, fail) = integrate(&f, &[0.1, 0.2], -5.0, 10.0, 1e-8);
        assert!(fail.is_none());
        let x = traj.eval(7.3);
        assert!((x[0] - 7.4).abs() < 1e-9);
        assert!((x[1] - (0.2 + 7.3 * 2f64.sqrt())).abs() < 1e-9);
        let x = traj.eval(-4.0);
        assert!((x[0] + 3.9).abs() < 1e-9);
    }

    #[test]
    fn pendulum_like_field_matches_fine_reference() {
        // x' = 1, y' = sin(2πx): y(t) = y0 + (1 - cos 2π t)/(2π) for x0 = 0.
        let f = VectorField::new(vec![
            TrigPoly::constant(1.0),
            TrigPoly::default().with_term(vec![1, 0], 0.0, 1.0),
        ])
        .unwrap();
        let (traj, _) = integrate(&f, &[0.0, 0.0], 0.0, 20.0, 1e-10);
        for &t in &[0.3, 5.77, 19.9] {
            let y = traj.eval(t)[1];
            let exact = (1.0 - (std::f64::consts::TAU * t).cos()) / std::f64::consts::TAU;
            assert!((y - exact).abs() < 1e-7, "t={t}: {y} vs {exact}");
        }
    }
}

//! Flat tori `R^n / Z^n` with a Gram-matrix metric, optionally multiplied by
//! a periodic conformal factor `e^{2u}`. The deck group is `Z^n` and acts by
//! integer translations, which is also the identity on `H_1(T^n, Z) = Z^n`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trig::{TrigPoly, TrigTerm};

/// Default quadrature step for conformal lengths.
pub const DEFAULT_QUADRATURE_STEP: f64 = 1e-3;

/// JSON geometry descriptor: `{ "dim": n, "gram": [[...]], "conformal": [{"k": [...], "amp": a}] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryDescriptor {
    pub dim: usize,
    #[serde(default)]
    pub gram: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub conformal: Vec<TrigTerm>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusGeometry {
    dim: usize,
    gram: DMatrix<f64>,
    conformal: Option<TrigPoly>,
}

impl TorusGeometry {
    pub fn new(gram: DMatrix<f64>, conformal: Option<TrigPoly>) -> Result<Self> {
        let dim = gram.nrows();
        if dim == 0 || gram.ncols() != dim {
            return Err(Error::Construction("gram matrix must be square and non-empty".into()));
        }
        if gram.iter().any(|g| !g.is_finite()) {
            return Err(Error::Construction("gram matrix has non-finite entries".into()));
        }
        if (&gram - gram.transpose()).amax() > 1e-12 * gram.amax().max(1.0) {
            return Err(Error::Construction("gram matrix is not symmetric".into()));
        }
        if gram.clone().cholesky().is_none() {
            return Err(Error::Construction("gram matrix is not positive definite".into()));
        }
        let conformal = match conformal {
            Some(u) if u.is_zero() => None,
            Some(u) => {
                u.validate(dim)?;
                Some(u)
            }
            None => None,
        };
        Ok(Self { dim, gram, conformal })
    }

    /// The unit flat torus `R^n / Z^n`.
    pub fn flat(dim: usize) -> Self {
        Self { dim, gram: DMatrix::identity(dim, dim), conformal: None }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)), None)
    }

    pub fn with_conformal(self, u: TrigPoly) -> Result<Self> {
        Self::new(self.gram, Some(u))
    }

    pub fn from_descriptor(d: &GeometryDescriptor) -> Result<Self> {
        let gram = match &d.gram {
            None => DMatrix::identity(d.dim, d.dim),
            Some(rows) => {
                if rows.len() != d.dim || rows.iter().any(|r| r.len() != d.dim) {
                    return Err(Error::Construction(format!("gram must be {0}x{0}", d.dim)));
                }
                DMatrix::from_fn(d.dim, d.dim, |i, j| rows[i][j])
            }
        };
        let conformal = (!d.conformal.is_empty())
            .then(|| TrigPoly { constant: 0.0, terms: d.conformal.clone() });
        Self::new(gram, conformal)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn conformal(&self) -> Option<&TrigPoly> {
        self.conformal.as_ref()
    }

    pub fn is_flat(&self) -> bool {
        self.conformal.is_none()
    }

    /// The flat metric with the conformal factor dropped.
    pub fn flat_part(&self) -> Self {
        Self { dim: self.dim, gram: self.gram.clone(), conformal: None }
    }

    /// `sqrt(v^T G v)`.
    pub fn gram_norm(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += v[i] * self.gram[(i, j)] * v[j];
            }
        }
        acc.max(0.0).sqrt()
    }

    /// Length scale `e^{u(x)}` of the conformal metric at `x`.
    pub fn conformal_factor(&self, x: &[f64]) -> f64 {
        self.conformal.as_ref().map_or(1.0, |u| u.eval(x).exp())
    }

    /// Certified bounds `(min, max)` of `e^{u}`.
    pub fn conformal_factor_bounds(&self) -> (f64, f64) {
        self.conformal
            .as_ref()
            .map_or((1.0, 1.0), |u| (u.lower_bound().exp(), u.upper_bound().exp()))
    }

    /// Speed of a lifted curve with velocity `v` at `x`.
    pub fn speed(&self, x: &[f64], v: &[f64]) -> f64 {
        self.conformal_factor(x) * self.gram_norm(v)
    }

    /// Length of the straight segment `a -> b` (composite midpoint rule for
    /// conformal metrics, exact when flat).
    pub fn segment_length(&self, a: &[f64], b: &[f64], quadrature_step: f64) -> f64 {
        let d: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
        let flat = self.gram_norm(&d);
        let Some(u) = &self.conformal else {
            return flat;
        };
        let euclid = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let panels = ((euclid / quadrature_step).ceil() as usize).max(1);
        let mut mid = vec![0.0; self.dim];
        let mut sum = 0.0;
        for k in 0..panels {
            let lambda = (k as f64 + 0.5) / panels as f64;
            for i in 0..self.dim {
                mid[i] = a[i] + lambda * d[i];
            }
            sum += u.eval(&mid).exp();
        }
        sum * flat / panels as f64
    }

    /// Total length of a lifted polyline.
    pub fn path_length(&self, polyline: &[Vec<f64>], quadrature_step: f64) -> Result<f64> {
        if polyline.len() < 2 {
            return Err(Error::Domain("a path needs at least two points".into()));
        }
        if !(quadrature_step > 0.0) {
            return Err(Error::Domain("quadrature step must be positive".into()));
        }
        Ok(polyline
            .windows(2)
            .map(|w| self.segment_length(&w[0], &w[1], quadrature_step))
            .sum())
    }

    /// Straight segment from `p` to the nearest of the `3^n` lattice translates
    /// of `q` around it.
    pub fn shortest_closing(&self, p: &[f64], q: &[f64]) -> ClosingPath {
        let p = project(p);
        let q = project(q);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for g in unit_box(self.dim) {
            let cand: Vec<f64> = q.iter().zip(&g).map(|(x, &k)| x + k as f64).collect();
            let d: Vec<f64> = cand.iter().zip(&p).map(|(x, y)| x - y).collect();
            let len = self.gram_norm(&d);
            if best.as_ref().is_none_or(|(l, _)| len < *l) {
                best = Some((len, cand));
            }
        }
        let (flat_length, end) = best.expect("3^n candidates");
        let length = if self.is_flat() {
            flat_length
        } else {
            self.segment_length(&p, &end, DEFAULT_QUADRATURE_STEP)
        };
        ClosingPath { start: p, end, length }
    }

    /// Straight segment between `p` and `q` inside the fundamental chart `[0,1)^n`.
    pub fn chart_closing(&self, p: &[f64], q: &[f64]) -> ClosingPath {
        let p = project(p);
        let q = project(q);
        let length = self.segment_length(&p, &q, DEFAULT_QUADRATURE_STEP);
        ClosingPath { start: p, end: q, length }
    }

    /// Diameter of the torus and `C0 = 2 * diameter`.
    ///
    /// Flat metrics use the covering radius of the lattice `(Z^n, G)`, found as
    /// the largest empty circumsphere of the simplices `{0, g_1, .., g_n}` with
    /// `g_i` in `{-1,0,1}^n`. Conformal metrics report the flat value times
    /// `max e^u`, a certified upper bound.
    pub fn diameter(&self) -> DiameterBound {
        let flat = self.flat_covering_radius();
        let (_, max_factor) = self.conformal_factor_bounds();
        let diameter = flat * max_factor;
        DiameterBound { diameter, c0: 2.0 * diameter, exact: self.is_flat() }
    }

    fn flat_covering_radius(&self) -> f64 {
        let n = self.dim;
        if n == 1 {
            return 0.5 * self.gram[(0, 0)].sqrt();
        }
        let nbrs: Vec<Vec<i64>> = unit_box(n).filter(|g| g.iter().any(|&k| k != 0)).collect();
        let mut best: f64 = 0.0;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            if let Some(c) = self.circumcenter(&idx.iter().map(|&i| &nbrs[i]).collect::<Vec<_>>()) {
                let r = self.gram_norm(&c);
                if r > best && self.is_empty_sphere(&c, r) {
                    best = r;
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < nbrs.len() - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn circumcenter(&self, gs: &[&Vec<i64>]) -> Option<Vec<f64>> {
        let n = self.dim;
        let gf: Vec<DVector<f64>> = gs
            .iter()
            .map(|g| DVector::from_iterator(n, g.iter().map(|&k| k as f64)))
            .collect();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (row, g) in gf.iter().enumerate() {
            let gg = &self.gram * g;
            for j in 0..n {
                a[(row, j)] = 2.0 * gg[j];
            }
            b[row] = g.dot(&gg);
        }
        if a.determinant().abs() < 1e-12 {
            return None;
        }
        a.lu().solve(&b).map(|c| c.iter().copied().collect())
    }

    fn is_empty_sphere(&self, c: &[f64], r: f64) -> bool {
        let base: Vec<i64> = c.iter().map(|x| x.round() as i64).collect();
        let mut d = vec![0.0; self.dim];
        for off in offsets(self.dim, 2) {
            for i in 0..self.dim {
                d[i] = c[i] - (base[i] + off[i]) as f64;
            }
            if self.gram_norm(&d) < r - 1e-10 {
                return false;
            }
        }
        true
    }
}

/// Diameter (or certified upper bound) with the subadditivity constant `C0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiameterBound {
    pub diameter: f64,
    pub c0: f64,
    /// `true` for the exact flat value, `false` for the conformal upper bound.
    pub exact: bool,
}

/// A lifted segment closing a curve piece, from a lift of `p` to a lift of `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosingPath {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub length: f64,
}

impl ClosingPath {
    pub fn displacement(&self) -> Vec<f64> {
        self.end.iter().zip(&self.start).map(|(a, b)| a - b).collect()
    }

    pub fn polyline(&self) -> Vec<Vec<f64>> {
        vec![self.start.clone(), self.end.clone()]
    }
}

/// Coordinatewise reduction mod 1 into `[0, 1)`.
pub fn project(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| reduce(v)).collect()
}

pub(crate) fn reduce(v: f64) -> f64 {
    let r = v - v.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// All vectors of `{-1, 0, 1}^n` in lexicographic order.
pub(crate) fn unit_box(n: usize) -> impl Iterator<Item = Vec<i64>> {
    offsets(n, 1).into_iter()
}

/// All vectors of `{-r..=r}^n`.
pub(crate) fn offsets(n: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-r..=r).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn project_examples() {
        assert_eq!(project(&[1.25, -0.5]), vec![0.25, 0.5]);
        assert_eq!(project(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(project(&[3.0, 2.0]), vec![0.0, 0.0]);
        assert_eq!(project(&[-1e-18]), vec![0.0]);
    }

    #[test]
    fn closing_examples() {
        let g = TorusGeometry::flat(2);
        let c = g.shortest_closing(&[0.3, 0.4], &[0.3, 0.4]);
        assert_eq!(c.length, 0.0);
        let c = g.shortest_closing(&[0.9, 0.0], &[0.1, 0.0]);
        assert!((c.length - 0.2).abs() < 1e-12);
        assert!((c.end[0] - 1.1).abs() < 1e-12);
    }

    #[test]
    fn path_length_examples() {
        let g = TorusGeometry::flat(2);
        let l = g.path_length(&[vec![0.0, 0.0], vec![3.0, 4.0]], 1e-3).unwrap();
        assert_eq!(l, 5.0);
        let g = TorusGeometry::diagonal(&[4.0, 1.0]).unwrap();
        let l = g.path_length(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1e-3).unwrap();
        assert_eq!(l, 2.0);
        assert!(g.path_length(&[vec![0.0, 0.0]], 1e-3).is_err());
    }

    /// Modified Bessel I0 by its power series; `∫_0^1 e^{a cos 2πx} dx = I0(a)`.
    fn bessel_i0(a: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= (a / 2.0) * (a / 2.0) / (k as f64 * k as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn conformal_length_matches_series_oracle() {
        let g = TorusGeometry::flat(2)
            .with_conformal(TrigPoly::cosine(vec![1, 0], 0.1))
            .unwrap();
        let l = g.path_length(&[vec![0.0, 0.0], vec![1.0, 0.0]], 1e-2).unwrap();
        assert!((l - bessel_i0(0.1)).abs() < 1e-6, "{l} vs {}", bessel_i0(0.1));
    }

    #[test]
    fn conformal_length_half_period_refines() {
        // Off-period segment: compare with a Richardson-refined midpoint oracle.
        let g = TorusGeometry::flat(2)
            .with_conformal(TrigPoly::cosine(vec![1, 1], 0.1))
            .unwrap();
        let poly = [vec![0.1, 0.0], vec![0.45, 0.2]];
        let fine = g.path_length(&poly, 1e-4).unwrap();
        let finer = g.path_length(&poly, 5e-5).unwrap();
        let richardson = (4.0 * finer - fine) / 3.0;
        let l = g.path_length(&poly, 1e-3).unwrap();
        assert!((l - richardson).abs() < 1e-6);
    }

    #[test]
    fn diameter_examples() {
        let d = TorusGeometry::flat(2).diameter();
        assert!((d.diameter - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((d.c0 - 2f64.sqrt()).abs() < 1e-12);
        let d = TorusGeometry::flat(1).diameter();
        assert_eq!((d.diameter, d.c0), (0.5, 1.0));
        let d = TorusGeometry::diagonal(&[1.0, 9.0]).unwrap().diameter();
        assert!((d.diameter - 2.5f64.sqrt()).abs() < 1e-12);
    }

    /// Brute force: max over a grid of points of the distance to the nearest
    /// lattice translate.
    fn brute_diameter(g: &TorusGeometry, grid: usize) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..=grid {
            for j in 0..=grid {
                let x = [i as f64 / grid as f64, j as f64 / grid as f64];
                let mut near = f64::INFINITY;
                for a in -2..=2 {
                    for b in -2..=2 {
                        near = near.min(g.gram_norm(&[x[0] - a as f64, x[1] - b as f64]));
                    }
                }
                best = best.max(near);
            }
        }
        best
    }

    #[test]
    fn diameter_matches_brute_force() {
        for gram in [
            vec![1.0, 0.0, 0.0, 9.0],
            vec![1.0, 0.4, 0.4, 1.0],
            vec![2.0, -0.7, -0.7, 1.5],
        ] {
            let g = TorusGeometry::new(DMatrix::from_row_slice(2, 2, &gram), None).unwrap();
            let brute = brute_diameter(&g, 400);
            let d = g.diameter().diameter;
            assert!(d >= brute - 1e-12 && d - brute < 5e-3, "{gram:?}: {d} vs {brute}");
        }
    }

    #[test]
    fn diameter_three_dim() {
        let d = TorusGeometry::flat(3).diameter();
        assert!((d.diameter - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn conformal_diameter_is_upper_bound() {
        let g = TorusGeometry::flat(2)
            .with_conformal(TrigPoly::cosine(vec![0, 1], 0.2))
            .unwrap();
        let d = g.diameter();
        assert!(!d.exact);
        assert!((d.diameter - 0.5f64.sqrt() * 0.2f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn closing_bounded_by_diameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = TorusGeometry::flat(2);
        let diam = g.diameter().diameter;
        for _ in 0..10_000 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            let q = [rng.gen::<f64>(), rng.gen::<f64>()];
            let c = g.shortest_closing(&p, &q);
            assert!(c.length <= diam + 1e-12);
            // brute force over a wider set of translates
            let mut brute = f64::INFINITY;
            for a in -3..=3 {
                for b in -3..=3 {
                    brute = brute.min(g.gram_norm(&[q[0] + a as f64 - p[0], q[1] + b as f64 - p[1]]));
                }
            }
            assert!((c.length - brute).abs() < 1e-12);
            let back = g.shortest_closing(&q, &p);
            assert!((back.length - c.length).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_gram() {
        assert!(TorusGeometry::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), None).is_err());
        assert!(TorusGeometry::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]), None).is_err());
    }
}

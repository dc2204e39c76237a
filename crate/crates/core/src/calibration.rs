//! Calibrating functions `Φ: R^n -> H_1(T^n, R)` with `Φ(x + g) = Φ(x) + g`.
//!
//! The partition construction sums lattice vectors against a partition of
//! unity made of translates of a compactly supported bump.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::curve::LiftedCurve;
use crate::error::{Error, Result};
use crate::homology::{HomologyVector, IntegralClass};
use crate::torus::{offsets, TorusGeometry};

/// Smallest admissible partition denominator.
pub const MIN_DENOMINATOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpShape {
    /// Product of `max(0, 1 - |x_i| / ρ)`.
    Tent,
    /// Product of `cos^2(π x_i / 2ρ)` on `|x_i| < ρ`.
    Cosine,
}

/// Config form of a calibrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CalibratorDescriptor {
    Identity,
    Partition {
        #[serde(default = "default_bump")]
        bump: BumpShape,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        basepoint: Option<Vec<f64>>,
    },
}

fn default_bump() -> BumpShape {
    BumpShape::Tent
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum CalibratingFunction {
    Identity { dim: usize },
    Partition(PartitionCalibrator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionCalibrator {
    dim: usize,
    shape: BumpShape,
    radius: f64,
    basepoint: Vec<f64>,
    /// Lattice vectors `g` whose bump can be positive on `[0,1)^n`.
    support: Vec<Vec<i64>>,
    /// `Φ` before the basepoint normalization, at the basepoint.
    offset: Vec<f64>,
}

/// `Φ(x) = x`.
pub fn identity_calibrator(n: usize) -> Result<CalibratingFunction> {
    if n == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    Ok(CalibratingFunction::Identity { dim: n })
}

/// Partition-of-unity calibrator with bumps centred at the lattice translates
/// of `basepoint`. The radius must make the bumps cover the torus (checked on
/// a grid) while vanishing at the other translates of the basepoint.
pub fn partition_calibrator(shape: BumpShape, radius: f64, basepoint: &[f64]) -> Result<CalibratingFunction> {
    let dim = basepoint.len();
    if dim == 0 {
        return Err(Error::Domain("basepoint must have at least one coordinate".into()));
    }
    if !radius.is_finite() || !(radius > 0.0) || basepoint.iter().any(|x| !x.is_finite()) {
        return Err(Error::Construction("bump radius and basepoint must be finite, radius > 0".into()));
    }
    if radius > 1.0 {
        return Err(Error::Construction(format!(
            "bump radius {radius} > 1 reaches other translates of the basepoint"
        )));
    }
    let support: Vec<Vec<i64>> = offsets(dim, 1).into_iter().filter(|g| g.iter().all(|&k| k == 0 || k == 1)).collect();
    let mut cal = PartitionCalibrator { dim, shape, radius, basepoint: basepoint.to_vec(), support, offset: vec![0.0; dim] };
    cal.check_cover()?;
    cal.offset = cal.raw(basepoint)?;
    Ok(CalibratingFunction::Partition(cal))
}

impl CalibratorDescriptor {
    pub fn build(&self, dim: usize) -> Result<CalibratingFunction> {
        match self {
            CalibratorDescriptor::Identity => identity_calibrator(dim),
            CalibratorDescriptor::Partition { bump, radius, basepoint } => {
                let base = basepoint.clone().unwrap_or_else(|| vec![0.0; dim]);
                if base.len() != dim {
                    return Err(Error::RankMismatch { expected: dim, found: base.len() });
                }
                partition_calibrator(*bump, *radius, &base)
            }
        }
    }
}

impl PartitionCalibrator {
    fn bump(&self, y: &[f64]) -> f64 {
        let mut v = 1.0;
        for &c in y {
            let r = c.abs() / self.radius;
            if r >= 1.0 {
                return 0.0;
            }
            v *= match self.shape {
                BumpShape::Tent => 1.0 - r,
                BumpShape::Cosine => (FRAC_PI_2 * r).cos().powi(2),
            };
        }
        v
    }

    /// Weighted lattice sum on the unit cell: `(Σ φ(f - g) g, Σ φ(f - g))`.
    fn cell_sum(&self, f: &[f64]) -> (Vec<f64>, f64) {
        let mut num = vec![0.0; self.dim];
        let mut den = 0.0;
        let mut y = vec![0.0; self.dim];
        // with radius <= 1 only g in {0,1}^n can be positive on [0,1)^n
        for g in &self.support {
            for i in 0..self.dim {
                y[i] = f[i] - g[i] as f64;
            }
            let w = self.bump(&y);
            if w > 0.0 {
                den += w;
                for i in 0..self.dim {
                    num[i] += w * g[i] as f64;
                }
            }
        }
        (num, den)
    }

    fn raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut floor = vec![0.0; self.dim];
        let mut frac = vec![0.0; self.dim];
        for i in 0..self.dim {
            let y = x[i] - self.basepoint[i];
            floor[i] = y.floor();
            frac[i] = y - floor[i];
        }
        let (num, den) = self.cell_sum(&frac);
        if !(den >= MIN_DENOMINATOR) {
            return Err(Error::NumericalCover { point: x.to_vec(), denominator: den });
        }
        Ok((0..self.dim).map(|i| floor[i] + num[i] / den).collect())
    }

    fn check_cover(&self) -> Result<()> {
        let per_axis = match self.dim {
            1 => 1024,
            2 => 96,
            3 => 24,
            _ => 6,
        };
        let mut f = vec![0.0; self.dim];
        let total = (per_axis as u64).pow(self.dim as u32);
        for mut k in 0..total {
            for c in f.iter_mut() {
                *c = (k % per_axis as u64) as f64 / per_axis as f64;
                k /= per_axis as u64;
            }
            let (_, den) = self.cell_sum(&f);
            if !(den >= MIN_DENOMINATOR) {
                return Err(Error::Construction(format!(
                    "bumps of radius {} do not cover the torus near {:?}",
                    self.radius, f
                )));
            }
        }
        // the cell centre is the worst point for small radii
        let centre = vec![0.5; self.dim];
        if !(self.cell_sum(&centre).1 >= MIN_DENOMINATOR) {
            return Err(Error::Construction(format!("bumps of radius {} do not cover the torus", self.radius)));
        }
        Ok(())
    }
}

impl CalibratingFunction {
    pub fn dim(&self) -> usize {
        match self {
            CalibratingFunction::Identity { dim } => *dim,
            CalibratingFunction::Partition(p) => p.dim,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, CalibratingFunction::Identity { .. })
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::RankMismatch { expected: self.dim(), found: x.len() });
        }
        match self {
            CalibratingFunction::Identity { .. } => Ok(x.to_vec()),
            CalibratingFunction::Partition(p) => {
                let mut v = p.raw(x)?;
                v.iter_mut().zip(&p.offset).for_each(|(a, b)| *a -= b);
                Ok(v)
            }
        }
    }

    /// Sampled Lipschitz constant for `‖Φ(x) - Φ(y)‖ <= C d_g(x, y)`, inflated
    /// by 10%. Not certified.
    pub fn lipschitz(&self, geom: &TorusGeometry) -> Result<f64> {
        let n = self.dim();
        if geom.dim() != n {
            return Err(Error::RankMismatch { expected: n, found: geom.dim() });
        }
        let euclid = match self {
            CalibratingFunction::Identity { .. } => 1.0,
            CalibratingFunction::Partition(_) => {
                let per_axis: u64 = match n {
                    1 => 512,
                    2 => 48,
                    3 => 12,
                    _ => 4,
                };
                let h = 1e-6;
                let mut best: f64 = 0.0;
                let mut x = vec![0.0; n];
                for mut k in 0..per_axis.pow(n as u32) {
                    for c in x.iter_mut() {
                        *c = ((k % per_axis) as f64 + 0.37) / per_axis as f64;
                        k /= per_axis;
                    }
                    // Frobenius norm of the difference-quotient Jacobian
                    let mut fro = 0.0;
                    for j in 0..n {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[j] += h;
                        xm[j] -= h;
                        let (a, b) = (self.eval(&xp)?, self.eval(&xm)?);
                        fro += a.iter().zip(&b).map(|(p, q)| ((p - q) / (2.0 * h)).powi(2)).sum::<f64>();
                    }
                    best = best.max(fro.sqrt());
                }
                best
            }
        };
        // ‖v‖ <= ‖v‖_G / sqrt(λ_min) and the conformal factor is >= e^{min u}
        let lambda_min = geom.gram().symmetric_eigenvalues().min();
        let (min_factor, _) = geom.conformal_factor_bounds();
        Ok(1.1 * euclid / (lambda_min.sqrt() * min_factor))
    }

    /// `Φ(c~(t)) - Φ(c~(s))`.
    pub fn curve_increment(&self, curve: &LiftedCurve, s: f64, t: f64) -> Result<HomologyVector> {
        if curve.dim() != self.dim() {
            return Err(Error::RankMismatch { expected: self.dim(), found: curve.dim() });
        }
        curve.check_window(s, t)?;
        if s == t {
            return Ok(HomologyVector::zeros(self.dim()));
        }
        self.increment(&curve.eval(s), &curve.eval(t))
    }

    pub fn increment(&self, from: &[f64], to: &[f64]) -> Result<HomologyVector> {
        let (a, b) = (self.eval(from)?, self.eval(to)?);
        HomologyVector::new(b.iter().zip(&a).map(|(p, q)| p - q).collect())
    }

    /// Class of a sampled loop: its increment, required integral within 1e-6.
    pub fn loop_class(&self, samples: &[Vec<f64>]) -> Result<IntegralClass> {
        let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
            return Err(Error::Domain("loop has no samples".into()));
        };
        if first.len() != self.dim() || last.len() != self.dim() {
            return Err(Error::RankMismatch { expected: self.dim(), found: first.len() });
        }
        let gap = first
            .iter()
            .zip(last)
            .map(|(a, b)| {
                let d = b - a;
                (d - d.round()).abs()
            })
            .fold(0.0, f64::max);
        if gap > 1e-9 {
            return Err(Error::Domain(format!("loop endpoints project to different points (gap {gap:e})")));
        }
        let inc = self.increment(first, last)?;
        IntegralClass::round_from(inc.coords(), 1e-6)
    }
}

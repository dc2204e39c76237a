//! Measured 1-solenoids as suspensions over a transversal dynamical system
//! `(X, R, μ)` on `X = [0, 1)`, with roof `l_T` and homology weight `φ_T`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotic::{assemble, route_estimate, AsymptoticEstimate, Route, RouteOptions, RoutePayload, WindowSchedule};
use crate::curve::{linear_flow_curve, LiftedCurve};
use crate::error::{Error, Result};
use crate::homology::{HomologyVector, Window};
use crate::torus::{reduce, TorusGeometry};
use crate::trig::TrigPoly;

/// `(√5 - 1)/2`.
pub const GOLDEN: f64 = 0.618_033_988_749_894_8;

const ODOMETER_BITS: u32 = 53;

/// The return map `R` of a transversal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum BaseMap {
    /// `x ↦ x + α mod 1`; `α` may be given as `"golden"`.
    Rotation {
        #[serde(deserialize_with = "angle")]
        alpha: f64,
    },
    /// Interval exchange: interval `i` (left to right, lengths normalized to
    /// sum 1) is moved to slot `permutation[i]` of the image.
    Iet { lengths: Vec<f64>, permutation: Vec<usize> },
    /// Dyadic adding machine on the binary digits of `x` (first digit least
    /// significant), truncated to 53 digits.
    Odometer,
    /// Permutation of the atoms `(i + 1/2)/p` with invariant weights.
    Finite { permutation: Vec<usize>, weights: Vec<f64> },
    Identity,
}

/// `(X, R, μ)`; `μ` is Lebesgue on `[0, 1)` (which is also the Bernoulli
/// measure of the odometer) or the weighted atoms of a finite base, times
/// `measure_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TransversalSystem {
    pub map: BaseMap,
    #[serde(default = "one")]
    pub measure_scale: f64,
}

fn one() -> f64 {
    1.0
}

fn angle<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Angle {
        Number(f64),
        Name(String),
    }
    match Angle::deserialize(d)? {
        Angle::Number(x) => Ok(x),
        Angle::Name(n) if n == "golden" => Ok(GOLDEN),
        Angle::Name(n) => Err(serde::de::Error::custom(format!("unknown angle {n:?}"))),
    }
}

impl TransversalSystem {
    pub fn new(map: BaseMap) -> Result<Self> {
        let sys = Self { map, measure_scale: 1.0 };
        sys.validate()?;
        Ok(sys)
    }

    pub fn rotation(alpha: f64) -> Result<Self> {
        Self::new(BaseMap::Rotation { alpha })
    }

    pub fn with_scale(mut self, c: f64) -> Result<Self> {
        self.measure_scale = c;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.measure_scale > 0.0 && self.measure_scale.is_finite()) {
            return Err(Error::Domain("measure scale must be positive".into()));
        }
        match &self.map {
            BaseMap::Rotation { alpha } => {
                if !alpha.is_finite() {
                    return Err(Error::Domain("rotation angle must be finite".into()));
                }
            }
            BaseMap::Iet { lengths, permutation } => {
                if lengths.len() < 2 || lengths.len() != permutation.len() {
                    return Err(Error::Domain("IET needs >= 2 intervals and a matching permutation".into()));
                }
                if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return Err(Error::Domain("IET lengths must be positive".into()));
                }
                check_permutation(permutation)?;
            }
            BaseMap::Finite { permutation, weights } => {
                if permutation.is_empty() || permutation.len() != weights.len() {
                    return Err(Error::Domain("finite base needs matching permutation and weights".into()));
                }
                check_permutation(permutation)?;
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(Error::Domain("finite weights must be non-negative with positive total".into()));
                }
                for (i, &j) in permutation.iter().enumerate() {
                    if weights[i] != weights[j] {
                        return Err(Error::Domain(format!("weights are not invariant: atom {i} -> {j}")));
                    }
                }
            }
            BaseMap::Odometer | BaseMap::Identity => {}
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.map, BaseMap::Finite { .. })
    }

    /// Number of cycles of a finite base's permutation.
    fn cycles(permutation: &[usize]) -> usize {
        let mut seen = vec![false; permutation.len()];
        let mut count = 0;
        for i in 0..permutation.len() {
            if !seen[i] {
                count += 1;
                let mut j = i;
                while !seen[j] {
                    seen[j] = true;
                    j = permutation[j];
                }
            }
        }
        count
    }

    /// Whether `μ` is ergodic (rotations and IETs are assumed irrational and
    /// Keane respectively).
    pub fn ergodic(&self) -> bool {
        match &self.map {
            BaseMap::Rotation { .. } | BaseMap::Iet { .. } | BaseMap::Odometer => true,
            BaseMap::Finite { permutation, weights } => {
                let support: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
                // ergodic iff the support is a single cycle
                let sub: Vec<usize> = support.iter().map(|&i| support.iter().position(|&j| j == permutation[i]).unwrap()).collect();
                Self::cycles(&sub) == 1
            }
            BaseMap::Identity => false,
        }
    }

    /// Whether `R` has a unique invariant probability measure.
    pub fn uniquely_ergodic(&self) -> bool {
        match &self.map {
            BaseMap::Finite { permutation, .. } => Self::cycles(permutation) == 1,
            BaseMap::Identity => false,
            _ => true,
        }
    }

    /// Atom positions of a finite base.
    pub fn atoms(&self) -> Option<Vec<f64>> {
        match &self.map {
            BaseMap::Finite { permutation, .. } => {
                let p = permutation.len() as f64;
                Some((0..permutation.len()).map(|i| (i as f64 + 0.5) / p).collect())
            }
            _ => None,
        }
    }

    fn atom_index(p: usize, x: f64) -> usize {
        ((x * p as f64).floor() as usize).min(p - 1)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match &self.map {
            BaseMap::Rotation { alpha } => reduce(x + alpha),
            BaseMap::Iet { lengths, permutation } => iet_apply(lengths, permutation, x, false),
            BaseMap::Odometer => odometer_step(x, true),
            BaseMap::Finite { permutation, .. } => {
                let p = permutation.len();
                (permutation[Self::atom_index(p, x)] as f64 + 0.5) / p as f64
            }
            BaseMap::Identity => x,
        }
    }

    pub fn inverse(&self, x: f64) -> f64 {
        match &self.map {
            BaseMap::Rotation { alpha } => reduce(x - alpha),
            BaseMap::Iet { lengths, permutation } => iet_apply(lengths, permutation, x, true),
            BaseMap::Odometer => odometer_step(x, false),
            BaseMap::Finite { permutation, .. } => {
                let p = permutation.len();
                let i = Self::atom_index(p, x);
                (permutation.iter().position(|&j| j == i).unwrap() as f64 + 0.5) / p as f64
            }
            BaseMap::Identity => x,
        }
    }

    /// `x_0, R x_0, ..., R^{n-1} x_0`.
    pub fn orbit(&self, x0: f64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut x = x0;
        for _ in 0..n {
            out.push(x);
            x = self.apply(x);
        }
        out
    }

    /// `μ([lo, hi))`.
    pub fn measure_of(&self, lo: f64, hi: f64) -> f64 {
        let base = match &self.map {
            BaseMap::Finite { weights, .. } => {
                let atoms = self.atoms().unwrap();
                atoms.iter().zip(weights).filter(|(a, _)| **a >= lo && **a < hi).map(|(_, w)| w).sum()
            }
            _ => (hi.min(1.0) - lo.max(0.0)).max(0.0),
        };
        base * self.measure_scale
    }

    pub fn total_measure(&self) -> f64 {
        self.measure_of(0.0, 1.0)
    }

    /// `∫ f dμ` for weights that are exact on cells.
    fn integrate_scalar(&self, w: &ScalarWeight) -> f64 {
        match &self.map {
            BaseMap::Finite { weights, .. } => {
                let atoms = self.atoms().unwrap();
                atoms.iter().zip(weights).map(|(a, m)| m * w.eval(*a)).sum::<f64>() * self.measure_scale
            }
            _ => w.lebesgue_integral() * self.measure_scale,
        }
    }

    fn integrate_class(&self, w: &ClassWeight) -> Vec<f64> {
        match &self.map {
            BaseMap::Finite { weights, .. } => {
                let atoms = self.atoms().unwrap();
                let mut acc = vec![0.0; w.rank()];
                for (a, m) in atoms.iter().zip(weights) {
                    for (x, c) in acc.iter_mut().zip(w.eval(*a)) {
                        *x += m * *c as f64;
                    }
                }
                acc.iter().map(|x| x * self.measure_scale).collect()
            }
            _ => w.lebesgue_integral().iter().map(|x| x * self.measure_scale).collect(),
        }
    }
}

fn check_permutation(p: &[usize]) -> Result<()> {
    let mut seen = vec![false; p.len()];
    for &j in p {
        if j >= p.len() || seen[j] {
            return Err(Error::Domain(format!("{p:?} is not a permutation")));
        }
        seen[j] = true;
    }
    Ok(())
}

fn iet_apply(lengths: &[f64], permutation: &[usize], x: f64, inverse: bool) -> f64 {
    let total: f64 = lengths.iter().sum();
    let n = lengths.len();
    let mut top = vec![0.0; n + 1];
    for i in 0..n {
        top[i + 1] = top[i] + lengths[i] / total;
    }
    // left end of interval i in the image
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| permutation[i]);
    let mut bottom = vec![0.0; n];
    let mut acc = 0.0;
    for &i in &order {
        bottom[i] = acc;
        acc += lengths[i] / total;
    }
    let x = reduce(x);
    if !inverse {
        let i = (0..n).rev().find(|&i| x >= top[i]).unwrap_or(0);
        reduce(x - top[i] + bottom[i])
    } else {
        let i = order.iter().rev().copied().find(|&i| x >= bottom[i]).unwrap_or(order[0]);
        reduce(x - bottom[i] + top[i])
    }
}

fn bit_reverse(u: u64) -> u64 {
    u.reverse_bits() >> (64 - ODOMETER_BITS)
}

fn odometer_step(x: f64, forward: bool) -> f64 {
    let scale = (1u64 << ODOMETER_BITS) as f64;
    let u = ((reduce(x) * scale) as u64) & ((1u64 << ODOMETER_BITS) - 1);
    let r = bit_reverse(u);
    let mask = (1u64 << ODOMETER_BITS) - 1;
    let next = if forward { r.wrapping_add(1) & mask } else { r.wrapping_sub(1) & mask };
    bit_reverse(next) as f64 / scale
}

// ---------------------------------------------------------------------------
// weights

/// Real weight on `X` (roofs, slab volumes, test functions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum ScalarWeight {
    Constant { value: f64 },
    /// Piecewise constant on disjoint cells `[lo, hi)` covering `[0, 1)`.
    Cells { cells: Vec<ScalarCell> },
    /// One-dimensional trigonometric polynomial.
    Trig { poly: TrigPoly },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarCell {
    pub cell: [f64; 2],
    pub value: f64,
}

impl ScalarWeight {
    pub fn constant(value: f64) -> Self {
        ScalarWeight::Constant { value }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarWeight::Constant { value } => *value,
            ScalarWeight::Cells { cells } => cells
                .iter()
                .find(|c| x >= c.cell[0] && x < c.cell[1])
                .map(|c| c.value)
                .unwrap_or(f64::NAN),
            ScalarWeight::Trig { poly } => poly.eval(&[x]),
        }
    }

    /// Certified `(inf, sup)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ScalarWeight::Constant { value } => (*value, *value),
            ScalarWeight::Cells { cells } => cells
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c.value), hi.max(c.value))),
            ScalarWeight::Trig { poly } => (poly.lower_bound(), poly.upper_bound()),
        }
    }

    pub fn lebesgue_integral(&self) -> f64 {
        match self {
            ScalarWeight::Constant { value } => *value,
            ScalarWeight::Cells { cells } => cells.iter().map(|c| c.value * (c.cell[1] - c.cell[0])).sum(),
            ScalarWeight::Trig { poly } => poly.mean(),
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        match self {
            ScalarWeight::Constant { value } => ScalarWeight::Constant { value: value * k },
            ScalarWeight::Cells { cells } => ScalarWeight::Cells {
                cells: cells.iter().map(|c| ScalarCell { cell: c.cell, value: c.value * k }).collect(),
            },
            ScalarWeight::Trig { poly } => ScalarWeight::Trig {
                poly: TrigPoly {
                    constant: poly.constant * k,
                    terms: poly
                        .terms
                        .iter()
                        .map(|t| crate::trig::TrigTerm { k: t.k.clone(), cos: t.cos * k, sin: t.sin * k })
                        .collect(),
                },
            },
        }
    }

    /// Checks finiteness, cell coverage and `inf > 0` when `positive`.
    pub fn validate(&self, positive: bool) -> Result<()> {
        match self {
            ScalarWeight::Cells { cells } => check_cells(cells.iter().map(|c| c.cell), true)?,
            ScalarWeight::Trig { poly } => poly.validate(1)?,
            ScalarWeight::Constant { .. } => {}
        }
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Domain("weight is not bounded".into()));
        }
        if positive && !(lo > 0.0) {
            return Err(Error::Domain(format!("weight must be bounded below by a positive constant (inf = {lo})")));
        }
        Ok(())
    }
}

fn check_cells(cells: impl Iterator<Item = [f64; 2]>, cover: bool) -> Result<()> {
    let mut cs: Vec<[f64; 2]> = cells.collect();
    for c in &cs {
        if !(0.0 <= c[0] && c[0] < c[1] && c[1] <= 1.0) {
            return Err(Error::Domain(format!("cell {c:?} is not a subinterval of [0, 1)")));
        }
    }
    cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    for w in cs.windows(2) {
        if w[1][0] < w[0][1] {
            return Err(Error::Domain(format!("cells {:?} and {:?} overlap", w[0], w[1])));
        }
    }
    if cover {
        let mut end = 0.0;
        for c in &cs {
            if c[0] != end {
                return Err(Error::Domain(format!("cells leave a gap at {end}")));
            }
            end = c[1];
        }
        if end != 1.0 {
            return Err(Error::Domain(format!("cells leave a gap at {end}")));
        }
    }
    Ok(())
}

/// Piecewise-constant integral class on finitely many cells, with a value for
/// the complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassWeight {
    pub cells: Vec<ClassCell>,
    pub otherwise: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCell {
    pub cell: [f64; 2],
    pub class: Vec<i64>,
}

impl ClassWeight {
    pub fn constant(class: Vec<i64>) -> Self {
        Self { cells: Vec::new(), otherwise: class }
    }

    pub fn with_cell(mut self, lo: f64, hi: f64, class: Vec<i64>) -> Self {
        self.cells.push(ClassCell { cell: [lo, hi], class });
        self
    }

    pub fn rank(&self) -> usize {
        self.otherwise.len()
    }

    pub fn eval(&self, x: f64) -> &[i64] {
        self.cells
            .iter()
            .find(|c| x >= c.cell[0] && x < c.cell[1])
            .map(|c| c.class.as_slice())
            .unwrap_or(&self.otherwise)
    }

    pub fn lebesgue_integral(&self) -> Vec<f64> {
        let mut rest = 1.0;
        let mut acc = vec![0.0; self.rank()];
        for c in &self.cells {
            let len = c.cell[1] - c.cell[0];
            rest -= len;
            for (a, &k) in acc.iter_mut().zip(&c.class) {
                *a += len * k as f64;
            }
        }
        for (a, &k) in acc.iter_mut().zip(&self.otherwise) {
            *a += rest * k as f64;
        }
        acc
    }

    pub fn validate(&self) -> Result<()> {
        if self.otherwise.is_empty() {
            return Err(Error::Domain("class weight needs rank >= 1".into()));
        }
        for c in &self.cells {
            if c.class.len() != self.rank() {
                return Err(Error::RankMismatch { expected: self.rank(), found: c.class.len() });
            }
        }
        check_cells(self.cells.iter().map(|c| c.cell), false)
    }
}

// ---------------------------------------------------------------------------
// suspensions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuspensionSolenoid {
    pub base: TransversalSystem,
    pub roof: ScalarWeight,
    pub phi: ClassWeight,
}

impl SuspensionSolenoid {
    pub fn new(base: TransversalSystem, roof: ScalarWeight, phi: ClassWeight) -> Result<Self> {
        base.validate()?;
        roof.validate(true)?;
        phi.validate()?;
        Ok(Self { base, roof, phi })
    }

    pub fn rank(&self) -> usize {
        self.phi.rank()
    }

    /// `∫ l_T dμ_T`.
    pub fn normalization(&self) -> f64 {
        self.base.integrate_scalar(&self.roof)
    }

    /// `∫ φ_T dμ_T`, linear in `μ`.
    pub fn phi_integral(&self) -> Vec<f64> {
        self.base.integrate_class(&self.phi)
    }
}

/// Running Birkhoff average and the change over its last dyadic block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BirkhoffAverage {
    pub value: f64,
    /// `|A_N - A_{N/2}|`.
    pub tail: f64,
}

/// `(1/N) Σ_{i<N} w(R^i x0)`.
pub fn birkhoff_average<F: Fn(f64) -> f64>(sys: &TransversalSystem, w: F, x0: f64, n: usize) -> Result<BirkhoffAverage> {
    if n == 0 {
        return Err(Error::Domain("Birkhoff average needs N >= 1".into()));
    }
    let half = n / 2;
    let mut sum = 0.0;
    let mut half_avg = f64::NAN;
    let mut x = x0;
    for i in 0..n {
        if i == half && half > 0 {
            half_avg = sum / half as f64;
        }
        sum += w(x);
        x = sys.apply(x);
    }
    let value = sum / n as f64;
    let tail = if half > 0 { (value - half_avg).abs() } else { 0.0 };
    Ok(BirkhoffAverage { value, tail })
}

/// `(∫ φ_T dμ_T) / (∫ l_T dμ_T)`.
pub fn ruelle_sullivan_class(sol: &SuspensionSolenoid) -> Result<HomologyVector> {
    let norm = sol.normalization();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Domain("roof is not integrable".into()));
    }
    HomologyVector::new(sol.phi_integral().iter().map(|x| x / norm).collect())
}

/// Leaf class `Σφ / Σl` along the orbit of `x0`, stabilized over dyadic
/// blocks `N/2^k`.
pub fn leaf_schwartzman_class(sol: &SuspensionSolenoid, x0: f64, n: usize, tol: f64) -> Result<AsymptoticEstimate> {
    if n < 8 {
        return Err(Error::Domain("leaf class needs N >= 8".into()));
    }
    let mut checkpoints: Vec<usize> = Vec::new();
    let mut m = n;
    while m >= 8 && checkpoints.len() < 12 {
        checkpoints.push(m);
        m /= 2;
    }
    checkpoints.reverse();
    let rank = sol.rank();
    let mut phi = vec![0i64; rank];
    let mut vol = 0.0;
    let mut history = Vec::new();
    let mut x = x0;
    let mut next = 0;
    for i in 1..=n {
        for (a, &c) in phi.iter_mut().zip(sol.phi.eval(x)) {
            *a += c;
        }
        vol += sol.roof.eval(x);
        x = sol.base.apply(x);
        if next < checkpoints.len() && i == checkpoints[next] {
            let v = HomologyVector::new(phi.iter().map(|&p| p as f64 / vol).collect())?;
            history.push((Window { s: 0.0, t: vol }, v));
            next += 1;
        }
    }
    Ok(assemble(Route::Birkhoff, rank, history, Vec::new(), tol))
}

/// Ruelle–Sullivan class and per-seed leaf classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeasuredClassReport {
    pub rs_class: HomologyVector,
    pub leaf_classes: Vec<(f64, AsymptoticEstimate)>,
    pub normalization: f64,
}

impl MeasuredClassReport {
    pub fn max_deviation(&self) -> f64 {
        self.leaf_classes.iter().map(|(_, e)| e.value.distance(&self.rs_class)).fold(0.0, f64::max)
    }

    /// Fraction of seeds whose leaf class is within `tol` of the RS class.
    /// Uniquely ergodic bases should give 1; merely ergodic ones may have
    /// exceptional seeds.
    pub fn pass_fraction(&self, tol: f64) -> f64 {
        if self.leaf_classes.is_empty() {
            return 0.0;
        }
        let ok = self.leaf_classes.iter().filter(|(_, e)| e.value.distance(&self.rs_class) <= tol).count();
        ok as f64 / self.leaf_classes.len() as f64
    }
}

/// Leaf classes for all seeds (in parallel, reported in seed order).
pub fn measured_class_report(sol: &SuspensionSolenoid, seeds: &[f64], n: usize, tol: f64) -> Result<MeasuredClassReport> {
    let rs_class = ruelle_sullivan_class(sol)?;
    let leaves: Vec<Result<AsymptoticEstimate>> = seeds.par_iter().map(|&x| leaf_schwartzman_class(sol, x, n, tol)).collect();
    let mut leaf_classes = Vec::with_capacity(seeds.len());
    for (x, r) in seeds.iter().zip(leaves) {
        leaf_classes.push((*x, r?));
    }
    Ok(MeasuredClassReport { rs_class, leaf_classes, normalization: sol.normalization() })
}

/// Seeds `(i + 1/2)/count`.
pub fn seed_grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| (i as f64 + 0.5) / count as f64).collect()
}

// ---------------------------------------------------------------------------
// empirical measures

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMeasure {
    /// `(x_i, 1/Σl)` for the orbit points.
    pub atoms: Vec<(f64, f64)>,
    /// Max deviation from `μ/∫l` over the sets `[0, j/64)`.
    pub distance: f64,
}

/// Number of test sets in the empirical-measure metric.
pub const TEST_SETS: usize = 64;

/// Transversal part of the normalized leaf measure along `N` returns: each
/// orbit point carries `1/Σ l_T`, so that the leaf volume is 1. Compared with
/// `μ_T/∫ l_T dμ_T`, which has the same normalization.
pub fn empirical_transversal_measure(sol: &SuspensionSolenoid, seed: f64, n: usize) -> Result<EmpiricalMeasure> {
    if n == 0 {
        return Err(Error::Domain("empirical measure needs N >= 1".into()));
    }
    let orbit = sol.base.orbit(seed, n);
    let total: f64 = orbit.iter().map(|&x| sol.roof.eval(x)).sum();
    let w = 1.0 / total;
    let norm = sol.normalization();
    let mut sorted = orbit.clone();
    sorted.sort_by(f64::total_cmp);
    let mut distance: f64 = 0.0;
    for j in 1..=TEST_SETS {
        let hi = j as f64 / TEST_SETS as f64;
        let count = sorted.partition_point(|&x| x < hi);
        let emp = count as f64 * w;
        let target = sol.base.measure_of(0.0, hi) / norm;
        distance = distance.max((emp - target).abs());
    }
    Ok(EmpiricalMeasure { atoms: orbit.into_iter().map(|x| (x, w)).collect(), distance })
}

// ---------------------------------------------------------------------------
// controlled growth

/// `Vol(B_r \ A_r) / Vol(A_r)` for leaf balls `B_r = [-r, r]` around the
/// transversal point of `seed`, with `A_r` the union of the full slabs inside
/// `B_r`. Compact leaves covered by the ball give 0.
pub fn controlled_growth_ratio(sol: &SuspensionSolenoid, seed: f64, radii: &[f64]) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("radii must be positive and increasing".into()));
    }
    // a finite base has compact leaves of length Σ l over the period
    let period = if sol.base.is_finite() {
        let mut x = sol.base.apply(seed);
        let mut len = sol.roof.eval(seed);
        let mut p = 1;
        while x != seed {
            len += sol.roof.eval(x);
            x = sol.base.apply(x);
            p += 1;
        }
        Some((p, len))
    } else {
        None
    };
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        if let Some((_, len)) = period {
            if 2.0 * r >= len {
                out.push(0.0);
                continue;
            }
        }
        let full = |forward: bool| {
            // total length of the full slabs within distance r on one side
            let mut x = if forward { seed } else { sol.base.inverse(seed) };
            let mut acc = 0.0;
            loop {
                let l = sol.roof.eval(x);
                if acc + l > r {
                    return acc;
                }
                acc += l;
                x = if forward { sol.base.apply(x) } else { sol.base.inverse(x) };
            }
        };
        let inner = full(true) + full(false);
        out.push(if inner > 0.0 { (2.0 * r - inner) / inner } else { f64::INFINITY });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// geometric realization

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Parametrization {
    Time,
    ArcLength,
}

/// A rotation suspension realized as the linear flow `(1, α)` on `T^2` with
/// transversal `{x_1 = 0}`.
#[derive(Debug, Clone)]
pub struct TorusRealization {
    pub curve: LiftedCurve,
    pub solenoid: SuspensionSolenoid,
    pub parametrization: Parametrization,
    pub warning: Option<String>,
}

/// Realizes the rotation by `alpha` with the leaf through `(0, seed)`.
///
/// The leaf segment from `(0, x)` to `(1, x + α)` closed along the transversal
/// has class `(1, ⌊x + α⌋)`, so `φ_T = (1, 1)` on `[1 - α, 1)` and `(1, 0)`
/// elsewhere; `l_T` is 1 in time and `√(1 + α²)` in arc length.
pub fn realize_as_torus_flow(alpha: f64, seed: f64, param: Parametrization) -> Result<TorusRealization> {
    let a = reduce(alpha);
    if a == 0.0 {
        return Err(Error::Domain("rotation angle must not be an integer".into()));
    }
    let warning = (1..=100_000u32)
        .find(|&q| {
            let x = q as f64 * a;
            (x - x.round()).abs() < 1e-9
        })
        .map(|q| format!("alpha is within 1e-9/{q} of a rational with denominator {q}"));
    let speed = (1.0 + a * a).sqrt();
    let (v, roof) = match param {
        Parametrization::Time => (vec![1.0, a], 1.0),
        Parametrization::ArcLength => (vec![1.0 / speed, a / speed], speed),
    };
    let curve = linear_flow_curve(&v, &[0.0, reduce(seed)])?;
    let phi = ClassWeight::constant(vec![1, 0]).with_cell(1.0 - a, 1.0, vec![1, 1]);
    let solenoid = SuspensionSolenoid::new(TransversalSystem::rotation(a)?, ScalarWeight::constant(roof), phi)?;
    Ok(TorusRealization { curve, solenoid, parametrization: param, warning })
}

/// The Birkhoff-sum leaf class next to route estimates on the realized
/// curve over the windows `(0, T/2^j)`, `T = t_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizedLeafComparison {
    pub symbolic: AsymptoticEstimate,
    pub geometric: Vec<AsymptoticEstimate>,
}

impl RealizedLeafComparison {
    pub fn max_disagreement(&self) -> f64 {
        self.geometric.iter().map(|g| g.value.distance(&self.symbolic.value)).fold(0.0, f64::max)
    }
}

pub fn realized_leaf_comparison(
    real: &TorusRealization,
    t_max: f64,
    routes: &[Route],
    tol: f64,
    opts: &RouteOptions,
) -> Result<RealizedLeafComparison> {
    let seed = real.curve.eval(0.0)[1];
    let roof = real.solenoid.roof.eval(seed);
    // returns to the transversal happen every `roof` units of parameter
    let n = ((t_max / roof).floor() as usize).max(8);
    let symbolic = leaf_schwartzman_class(&real.solenoid, seed, n, tol)?;
    let geom = TorusGeometry::flat(2);
    let schedule = WindowSchedule::forward(0.0, t_max / 16.0, 2.0, 5)?;
    let geometric = routes
        .iter()
        .map(|&r| {
            let payload = RoutePayload::standard(r, 2)
                .ok_or_else(|| Error::Domain(format!("route {r:?} has no curve payload")))?;
            route_estimate(&real.curve, &geom, &payload, &schedule, tol, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RealizedLeafComparison { symbolic, geometric })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden_solenoid() -> SuspensionSolenoid {
        SuspensionSolenoid::new(
            TransversalSystem::rotation(GOLDEN).unwrap(),
            ScalarWeight::constant(1.0),
            ClassWeight::constant(vec![1, 0]).with_cell(1.0 - GOLDEN, 1.0, vec![1, 1]),
        )
        .unwrap()
    }

    #[test]
    fn birkhoff_examples() {
        let sys = TransversalSystem::rotation(GOLDEN).unwrap();
        for n in [10, 100, 1000, 12345] {
            let avg = birkhoff_average(&sys, |x| if x >= 1.0 - GOLDEN { 1.0 } else { 0.0 }, 0.1, n).unwrap();
            assert!((avg.value - GOLDEN).abs() <= 3.0 / n as f64, "N={n}");
        }
        let c = birkhoff_average(&sys, |_| 2.5, 0.3, 17).unwrap();
        assert_eq!(c.value, 2.5);
        let id = TransversalSystem::new(BaseMap::Identity).unwrap();
        let d = birkhoff_average(&id, |x| x * x, 0.3, 50).unwrap();
        assert!((d.value - 0.09).abs() < 1e-15);
    }

    #[test]
    fn rs_class_examples() {
        let rs = ruelle_sullivan_class(&golden_solenoid()).unwrap();
        assert!((rs.coords()[0] - 1.0).abs() < 1e-15 && (rs.coords()[1] - GOLDEN).abs() < 1e-15);

        let fixed = SuspensionSolenoid::new(
            TransversalSystem::new(BaseMap::Finite { permutation: vec![0], weights: vec![1.0] }).unwrap(),
            ScalarWeight::constant(2.5),
            ClassWeight::constant(vec![3, -1]),
        )
        .unwrap();
        assert_eq!(ruelle_sullivan_class(&fixed).unwrap().coords(), &[1.2, -0.4]);
    }

    #[test]
    fn linear_in_the_measure() {
        let phi = ClassWeight::constant(vec![1, 0]).with_cell(0.5, 1.0, vec![0, 3]);
        let make = |w: Vec<f64>| {
            SuspensionSolenoid::new(
                TransversalSystem::new(BaseMap::Finite { permutation: vec![0, 1], weights: w }).unwrap(),
                ScalarWeight::constant(1.0),
                phi.clone(),
            )
            .unwrap()
        };
        let lam = 0.3;
        let mix = make(vec![lam, 1.0 - lam]).phi_integral();
        let (a, b) = (make(vec![1.0, 0.0]).phi_integral(), make(vec![0.0, 1.0]).phi_integral());
        for i in 0..2 {
            assert_eq!(mix[i], lam * a[i] + (1.0 - lam) * b[i]);
        }
        assert!(!make(vec![0.5, 0.5]).base.ergodic());
        assert!(make(vec![1.0, 0.0]).base.ergodic());
    }

    #[test]
    fn normalization_is_scale_invariant() {
        let mut s = golden_solenoid();
        let a = ruelle_sullivan_class(&s).unwrap();
        s.base = s.base.with_scale(7.3).unwrap();
        let b = ruelle_sullivan_class(&s).unwrap();
        assert!(a.distance(&b) < 1e-15);
    }

    #[test]
    fn maps_invert() {
        let systems = [
            TransversalSystem::rotation(GOLDEN).unwrap(),
            TransversalSystem::new(BaseMap::Iet { lengths: vec![0.2, 0.5, 0.3], permutation: vec![2, 1, 0] }).unwrap(),
            TransversalSystem::new(BaseMap::Odometer).unwrap(),
            TransversalSystem::new(BaseMap::Finite { permutation: vec![2, 0, 1], weights: vec![1.0; 3] }).unwrap(),
        ];
        for sys in &systems {
            for i in 0..50 {
                let x = sys.atoms().map(|a| a[i % a.len()]).unwrap_or((i as f64 * 0.0731) % 1.0);
                let y = sys.apply(x);
                assert!((sys.inverse(y) - x).abs() < 1e-12, "{sys:?} at {x}");
            }
        }
        let odo = TransversalSystem::new(BaseMap::Odometer).unwrap();
        assert_eq!(odo.apply(0.0), 0.5);
        assert_eq!(odo.apply(0.5), 0.25);
        assert_eq!(odo.apply(0.25), 0.75);
    }

    #[test]
    fn invariance_of_lebesgue_under_iet_and_odometer() {
        for sys in [
            TransversalSystem::new(BaseMap::Iet { lengths: vec![0.2, 0.5, 0.3], permutation: vec![2, 1, 0] }).unwrap(),
            TransversalSystem::new(BaseMap::Odometer).unwrap(),
        ] {
            let n = 100_000;
            let h = |x: f64| (std::f64::consts::TAU * x).cos() + x;
            let direct: f64 = (0..n).map(|i| h((i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
            let pushed: f64 = (0..n).map(|i| h(sys.apply((i as f64 + 0.5) / n as f64))).sum::<f64>() / n as f64;
            assert!((direct - pushed).abs() < 1e-4);
        }
    }

    #[test]
    fn leaf_classes_match_rs() {
        let sol = golden_solenoid();
        let rep = measured_class_report(&sol, &seed_grid(4), 100_000, 1e-3).unwrap();
        assert!(rep.max_deviation() < 1e-4);
        assert!(rep.leaf_classes.iter().all(|(_, e)| e.converged));

        let periodic = SuspensionSolenoid::new(
            TransversalSystem::new(BaseMap::Finite { permutation: vec![1, 2, 0], weights: vec![1.0; 3] }).unwrap(),
            ScalarWeight::Cells {
                cells: vec![
                    ScalarCell { cell: [0.0, 0.5], value: 1.0 },
                    ScalarCell { cell: [0.5, 1.0], value: 2.0 },
                ],
            },
            ClassWeight::constant(vec![1]).with_cell(0.6, 1.0, vec![4]),
        )
        .unwrap();
        let rs = ruelle_sullivan_class(&periodic).unwrap();
        let leaf = leaf_schwartzman_class(&periodic, 1.0 / 6.0, 3 * 64, 1e-12).unwrap();
        assert!(leaf.value.distance(&rs) < 1e-15);
        // (1 + 1 + 4) / (1 + 2 + 2)
        assert!((rs.coords()[0] - 6.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn iet_leaf_matches_cell_integral() {
        let r5 = 5f64.sqrt();
        let lengths = vec![1.0 / r5, 1.0 / (r5 * r5), 1.0 - 1.0 / r5 - 0.2];
        let sys = TransversalSystem::new(BaseMap::Iet { lengths: lengths.clone(), permutation: vec![2, 1, 0] }).unwrap();
        let total: f64 = lengths.iter().sum();
        let b1 = lengths[0] / total;
        let b2 = b1 + lengths[1] / total;
        let phi = ClassWeight::constant(vec![0, 0, 1]).with_cell(0.0, b1, vec![1, 0, 0]).with_cell(b1, b2, vec![0, 1, 0]);
        let sol = SuspensionSolenoid::new(sys, ScalarWeight::constant(1.0), phi).unwrap();
        let rs = ruelle_sullivan_class(&sol).unwrap();
        let leaf = leaf_schwartzman_class(&sol, 0.123, 100_000, 1e-3).unwrap();
        assert!(leaf.value.distance(&rs) < 1e-3);
    }

    #[test]
    fn empirical_measures() {
        let sol = golden_solenoid();
        let d: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| empirical_transversal_measure(&sol, 0.2, n).unwrap().distance).collect();
        assert!(d[2] <= 1e-2 && d[1] < d[0] && d[2] < d[1], "{d:?}");

        let periodic = SuspensionSolenoid::new(
            TransversalSystem::new(BaseMap::Finite { permutation: vec![1, 2, 3, 0], weights: vec![0.25; 4] }).unwrap(),
            ScalarWeight::constant(1.5),
            ClassWeight::constant(vec![1]),
        )
        .unwrap();
        let e = empirical_transversal_measure(&periodic, 0.125, 4).unwrap();
        assert_eq!(e.distance, 0.0);
        assert!(e.atoms.iter().all(|a| a.1 == 1.0 / 6.0));
    }

    #[test]
    fn controlled_growth() {
        let sol = golden_solenoid();
        let radii: Vec<f64> = (1..=12).map(|j| 2f64.powi(j)).collect();
        let r = controlled_growth_ratio(&sol, 0.3, &radii).unwrap();
        for (ratio, radius) in r.iter().zip(&radii) {
            assert!(*ratio <= 2.0 / (2.0 * radius - 2.0) + 1e-15);
        }
        assert!(r.windows(2).all(|w| w[1] <= w[0]));

        let periodic = SuspensionSolenoid::new(
            TransversalSystem::new(BaseMap::Finite { permutation: vec![1, 2, 0], weights: vec![1.0; 3] }).unwrap(),
            ScalarWeight::constant(1.3),
            ClassWeight::constant(vec![1]),
        )
        .unwrap();
        let r = controlled_growth_ratio(&periodic, 0.5, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(r[2] == 0.0 && r[3] == 0.0);
    }

    #[test]
    fn realization_classes() {
        let t = realize_as_torus_flow(GOLDEN, 0.3, Parametrization::Time).unwrap();
        assert!(t.warning.is_none());
        let x = t.curve.eval(1000.0);
        assert!((x[0] - 1000.0).abs() < 1e-12 && (x[1] - 0.3 - 1000.0 * GOLDEN).abs() < 1e-9);
        let a = realize_as_torus_flow(GOLDEN, 0.3, Parametrization::ArcLength).unwrap();
        let rs = ruelle_sullivan_class(&a.solenoid).unwrap();
        let s = (1.0 + GOLDEN * GOLDEN).sqrt();
        assert!((rs.coords()[0] - 1.0 / s).abs() < 1e-15);
        assert!(realize_as_torus_flow(0.5, 0.0, Parametrization::Time).unwrap().warning.is_some());
    }

    #[test]
    fn realized_routes_agree() {
        let real = realize_as_torus_flow(GOLDEN, 0.3, Parametrization::Time).unwrap();
        let opts = RouteOptions { sample_step: 0.2, ..RouteOptions::default() };
        let cmp = realized_leaf_comparison(&real, 1e4, &[Route::Loop, Route::Cross], 1e-3, &opts).unwrap();
        assert!(cmp.max_disagreement() < 1e-3, "{}", cmp.max_disagreement());
        assert!((cmp.geometric[1].value.coords()[1] - GOLDEN).abs() < 1e-3);
    }

    #[test]
    fn golden_alias() {
        let m: BaseMap = serde_json::from_str(r#"{"type":"rotation","alpha":"golden"}"#).unwrap();
        assert_eq!(m, BaseMap::Rotation { alpha: GOLDEN });
        assert!(serde_json::from_str::<BaseMap>(r#"{"type":"rotation","alpha":"silver"}"#).is_err());
    }

    #[test]
    fn invalid_weights_rejected() {
        let base = TransversalSystem::rotation(GOLDEN).unwrap();
        assert!(SuspensionSolenoid::new(base.clone(), ScalarWeight::constant(0.0), ClassWeight::constant(vec![1])).is_err());
        let gap = ScalarWeight::Cells { cells: vec![ScalarCell { cell: [0.0, 0.4], value: 1.0 }] };
        assert!(SuspensionSolenoid::new(base.clone(), gap, ClassWeight::constant(vec![1])).is_err());
        let trig = ScalarWeight::Trig { poly: TrigPoly::constant(0.2).with_term(vec![1], 0.5, 0.0) };
        assert!(SuspensionSolenoid::new(base, trig, ClassWeight::constant(vec![1])).is_err());
    }
}

//! Schwartzman k-cycles of solenoids with a trapping region, represented by
//! their slabs `L̄_x` (closure of the leaf piece between `C_x` and `C_{R(x)}`):
//! volume, closed-up class and the metric constants `c0, c1, c2`.

use serde::{Deserialize, Serialize};

use crate::asymptotic::{assemble, AsymptoticEstimate, Route};
use crate::error::{Error, Result};
use crate::homology::{HomologyVector, IntegralClass, Window};
use crate::solenoid::{ClassWeight, ScalarCell, ScalarWeight, TransversalSystem};
use crate::torus::reduce;

/// `c0`: lower bound for the leaf distance between `C_x` and `C_{R(x)}`;
/// `c1`: upper bound for slab diameters; `c2`: upper bound for slab volumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrappingConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct TrappingSolenoid {
    pub k: usize,
    pub base: TransversalSystem,
    /// `l_T(x) = Vol_k(L̄_x)`.
    pub volume: ScalarWeight,
    /// Class of the closed-up slab in `H_k(M, Z)` coordinates.
    pub class: ClassWeight,
    /// Leaf distance from `C_x` to `C_{R(x)}` through the slab.
    pub separation: ScalarWeight,
    pub diameter: ScalarWeight,
    pub constants: TrappingConstants,
    pub epsilon0: f64,
}

impl TrappingSolenoid {
    /// Builds the solenoid, measuring the constants from the weight bounds
    /// when none are given.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k: usize,
        base: TransversalSystem,
        volume: ScalarWeight,
        class: ClassWeight,
        separation: ScalarWeight,
        diameter: ScalarWeight,
        constants: Option<TrappingConstants>,
        epsilon0: f64,
    ) -> Result<Self> {
        let constants = constants.unwrap_or(TrappingConstants {
            c0: separation.bounds().0,
            c1: diameter.bounds().1,
            c2: volume.bounds().1,
        });
        let sol = Self { k, base, volume, class, separation, diameter, constants, epsilon0 };
        sol.validate()?;
        Ok(sol)
    }

    /// Slabs that are segments of length `l_T`: separation = diameter = volume.
    pub fn from_roof(base: TransversalSystem, roof: ScalarWeight, class: ClassWeight) -> Result<Self> {
        Self::new(1, base, roof.clone(), class, roof.clone(), roof, None, 0.25)
    }

    pub fn rank(&self) -> usize {
        self.class.rank()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Domain("slab dimension k must be >= 1".into()));
        }
        self.base.validate()?;
        self.volume.validate(true)?;
        self.separation.validate(true)?;
        self.diameter.validate(true)?;
        self.class.validate()?;
        if !(self.epsilon0 > 0.0 && self.epsilon0 < 0.5) {
            return Err(Error::Domain(format!("epsilon0 = {} is not in (0, 1/2)", self.epsilon0)));
        }
        let TrappingConstants { c0, c1, c2 } = self.constants;
        if !(c0 > 0.0 && c1.is_finite() && c2.is_finite() && c0 <= c1) {
            return Err(Error::Domain(format!("invalid trapping constants c0={c0}, c1={c1}, c2={c2}")));
        }
        let (sep_lo, sep_hi) = self.separation.bounds();
        let (_, diam_hi) = self.diameter.bounds();
        let (_, vol_hi) = self.volume.bounds();
        if sep_lo < c0 || diam_hi > c1 || vol_hi > c2 {
            return Err(Error::Consistency(format!(
                "slab weights violate the constants: separation >= {sep_lo} (c0 = {c0}), diameter <= {diam_hi} (c1 = {c1}), volume <= {vol_hi} (c2 = {c2})"
            )));
        }
        if sep_hi > diam_hi {
            return Err(Error::Consistency("slab separation exceeds its diameter".into()));
        }
        Ok(())
    }

    /// Checks `c0 <= separation(x) <= diameter(x) <= c1` and `volume(x) <= c2`
    /// on the given sample points.
    pub fn constants_consistent(&self, samples: &[f64]) -> bool {
        let TrappingConstants { c0, c1, c2 } = self.constants;
        samples.iter().all(|&x| {
            let (s, d, v) = (self.separation.eval(x), self.diameter.eval(x), self.volume.eval(x));
            c0 <= s && s <= d && d <= c1 && v <= c2
        })
    }

    /// `(∫ φ dμ) / (∫ l dμ)`.
    pub fn ruelle_sullivan_class(&self) -> Result<HomologyVector> {
        let sus = crate::solenoid::SuspensionSolenoid::new(self.base.clone(), self.volume.clone(), self.class.clone())?;
        crate::solenoid::ruelle_sullivan_class(&sus)
    }
}

/// Slab union `Û_{a,b} = ∪_{a <= i < b} L̄_{R^i x0}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExhaustionWindow {
    pub a: i64,
    pub b: i64,
}

impl ExhaustionWindow {
    pub fn new(a: i64, b: i64) -> Result<Self> {
        if a > 0 || b <= 0 {
            return Err(Error::Domain(format!("exhaustion window ({a}, {b}) needs a <= 0 < b")));
        }
        Ok(Self { a, b })
    }

    pub fn slabs(&self) -> u64 {
        (self.b - self.a) as u64
    }

    /// `(-2^j, 2^j)` for `j = j0..=j1`, or `(0, 2^j)` when one-sided.
    pub fn dyadic(j0: u32, j1: u32, symmetric: bool) -> Vec<Self> {
        (j0..=j1)
            .map(|j| {
                let n = 1i64 << j;
                Self { a: if symmetric { -n } else { 0 }, b: n }
            })
            .collect()
    }
}

/// Orbit points `R^i x0` for `a <= i < b`, negative indices by the inverse.
fn orbit_window(base: &TransversalSystem, x0: f64, a: i64, b: i64) -> Vec<f64> {
    let mut back = Vec::with_capacity((-a) as usize);
    let mut x = x0;
    for _ in a..0 {
        x = base.inverse(x);
        back.push(x);
    }
    back.reverse();
    back.extend(base.orbit(x0, b.max(0) as usize));
    back
}

/// `Σ_{a <= i < b} φ_T(R^i x0)`, exact in integers.
pub fn slab_sum_class(sol: &TrappingSolenoid, x0: f64, w: ExhaustionWindow) -> Result<IntegralClass> {
    ExhaustionWindow::new(w.a, w.b)?;
    let mut acc = vec![0i64; sol.rank()];
    for x in orbit_window(&sol.base, x0, w.a, w.b) {
        for (s, c) in acc.iter_mut().zip(sol.class.eval(x)) {
            *s += c;
        }
    }
    Ok(IntegralClass::new(acc))
}

/// `[N_{a,b}] / Vol_k(N_{a,b})` over the windows, where `N_{a,b}` is the
/// slab union closed up by a cap of volume `cap_volume`. The cap only enters
/// the volume: its class is absorbed by the integral closing.
pub fn k_schwartzman_class(
    sol: &TrappingSolenoid,
    x0: f64,
    windows: &[ExhaustionWindow],
    cap_volume: f64,
    tol: f64,
) -> Result<AsymptoticEstimate> {
    if windows.is_empty() {
        return Err(Error::Domain("empty exhaustion schedule".into()));
    }
    if !(cap_volume >= 0.0) || !(tol > 0.0) {
        return Err(Error::Domain("cap volume must be >= 0 and tolerance > 0".into()));
    }
    for w in windows {
        ExhaustionWindow::new(w.a, w.b)?;
    }
    if windows.windows(2).any(|p| p[1].slabs() <= p[0].slabs()) {
        return Err(Error::Domain("exhaustion windows must grow".into()));
    }
    let a_min = windows.iter().map(|w| w.a).min().unwrap();
    let b_max = windows.iter().map(|w| w.b).max().unwrap();
    let orbit = orbit_window(&sol.base, x0, a_min, b_max);
    // prefix sums indexed by i - a_min
    let rank = sol.rank();
    let mut class_prefix = vec![vec![0i64; rank]];
    let mut vol_prefix = vec![0.0];
    for &x in &orbit {
        let mut c = class_prefix.last().unwrap().clone();
        for (s, v) in c.iter_mut().zip(sol.class.eval(x)) {
            *s += v;
        }
        class_prefix.push(c);
        vol_prefix.push(vol_prefix.last().unwrap() + sol.volume.eval(x));
    }
    let mut history = Vec::with_capacity(windows.len());
    for w in windows {
        let (i, j) = ((w.a - a_min) as usize, (w.b - a_min) as usize);
        let (neg, pos) = (vol_prefix[(-a_min) as usize] - vol_prefix[i], vol_prefix[j] - vol_prefix[(-a_min) as usize]);
        let vol = neg + pos + cap_volume;
        let class: Vec<f64> = (0..rank).map(|r| (class_prefix[j][r] - class_prefix[i][r]) as f64 / vol).collect();
        history.push((Window { s: -neg, t: pos }, HomologyVector::new(class)?));
    }
    Ok(assemble(Route::Birkhoff, rank, history, Vec::new(), tol))
}

/// Consecutive slabs of a window share exactly one boundary circle and no
/// slab repeats unless the leaf is compact, i.e. the adjacency graph is a
/// path (or a cycle traversed once per period).
pub fn adjacency_is_path(sol: &TrappingSolenoid, x0: f64, w: ExhaustionWindow) -> bool {
    let orbit = orbit_window(&sol.base, x0, w.a, w.b);
    let consecutive = orbit.windows(2).all(|p| {
        let next = sol.base.apply(p[0]);
        (next - p[1]).abs() < 1e-9 || (reduce(next - p[1] + 0.5) - 0.5).abs() < 1e-9
    });
    let mut sorted = orbit.clone();
    sorted.sort_by(f64::total_cmp);
    let repeats = sorted.windows(2).any(|p| p[0] == p[1]);
    consecutive && (!repeats || sol.base.is_finite())
}

/// Inner and outer slab windows of one leaf ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionRow {
    pub radius: f64,
    /// Largest `Û_{a,b}` inside the ball.
    pub inner: ExhaustionWindow,
    /// Smallest `Û_{a',b'}` containing the ball.
    pub outer: ExhaustionWindow,
    pub forward_gap: i64,
    pub backward_gap: i64,
    pub volume_defect: f64,
    pub defect_bound: f64,
    /// `Vol(Û_{a',b'} \ Û_{a,b}) / Vol(Û_{a,b})`.
    pub defect_ratio: f64,
    /// `O(1/R)` envelope the ratio must stay under.
    pub decay_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionReport {
    /// `c1/c0 + 2`.
    pub gap_bound: f64,
    pub rows: Vec<ExhaustionRow>,
    pub violations: Vec<String>,
}

impl ExhaustionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_gap(&self) -> i64 {
        self.rows.iter().map(|r| r.forward_gap.max(r.backward_gap)).max().unwrap_or(0)
    }
}

/// Slab-chain model of leaf balls around `C_{x0}`: slab `i >= 0` starts at
/// distance `Σ_{0<=j<i} sep_j` and reaches `diam_i` further; slab `-i`
/// starts at `Σ_{1<=j<i} sep_{-j}`. Checks the gaps `b' - b`, `a - a'`
/// against `c1/c0 + 2`, the volume defect against `gaps · c2`, and the decay
/// of the defect ratio.
pub fn exhaustion_control_check(sol: &TrappingSolenoid, x0: f64, radii: &[f64]) -> Result<ExhaustionReport> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(Error::Domain("radii must be positive and increasing".into()));
    }
    let TrappingConstants { c0, c1, c2 } = sol.constants;
    let gap_bound = c1 / c0 + 2.0;
    let r_max = *radii.last().unwrap();
    // enough slabs on each side to leave the largest ball
    let depth = (r_max / sol.separation.bounds().0).ceil() as usize + 4;
    let side = |forward: bool| -> Vec<(f64, f64, f64)> {
        // (near, far, volume) per slab
        let mut out = Vec::with_capacity(depth);
        let mut x = if forward { x0 } else { sol.base.inverse(x0) };
        let mut near = 0.0;
        for _ in 0..depth {
            out.push((near, near + sol.diameter.eval(x), sol.volume.eval(x)));
            near += sol.separation.eval(x);
            x = if forward { sol.base.apply(x) } else { sol.base.inverse(x) };
        }
        out
    };
    let (fwd, bwd) = (side(true), side(false));
    let v_min = sol.volume.bounds().0;
    let mut rows = Vec::with_capacity(radii.len());
    let mut violations = Vec::new();
    for &r in radii {
        let inside = |s: &[(f64, f64, f64)]| s.iter().take_while(|sl| sl.1 <= r).count();
        let touching = |s: &[(f64, f64, f64)]| s.iter().take_while(|sl| sl.0 < r).count();
        let (b, b2) = (inside(&fwd), touching(&fwd));
        let (na, na2) = (inside(&bwd), touching(&bwd));
        let inner = ExhaustionWindow { a: -(na as i64), b: b as i64 };
        let outer = ExhaustionWindow { a: -(na2 as i64), b: b2 as i64 };
        let forward_gap = (b2 - b) as i64;
        let backward_gap = (na2 - na) as i64;
        let inner_vol: f64 = fwd[..b].iter().chain(&bwd[..na]).map(|s| s.2).sum();
        let volume_defect: f64 = fwd[b..b2].iter().chain(&bwd[na..na2]).map(|s| s.2).sum();
        let defect_bound = (forward_gap + backward_gap) as f64 * c2;
        let defect_ratio = if inner_vol > 0.0 { volume_defect / inner_vol } else { f64::INFINITY };
        let guaranteed = 2.0 * (r / c1).floor() * v_min;
        let decay_bound = if guaranteed > 0.0 { 2.0 * gap_bound * c2 / guaranteed } else { f64::INFINITY };
        if forward_gap as f64 >= gap_bound {
            violations.push(format!("radius {r}: b' - b = {forward_gap} >= {gap_bound}"));
        }
        if backward_gap as f64 >= gap_bound {
            violations.push(format!("radius {r}: a - a' = {backward_gap} >= {gap_bound}"));
        }
        if volume_defect > defect_bound * (1.0 + 1e-12) {
            violations.push(format!("radius {r}: volume defect {volume_defect} > {defect_bound}"));
        }
        if defect_ratio > decay_bound {
            violations.push(format!("radius {r}: defect ratio {defect_ratio} above the 1/R envelope {decay_bound}"));
        }
        rows.push(ExhaustionRow { radius: r, inner, outer, forward_gap, backward_gap, volume_defect, defect_bound, defect_ratio, decay_bound });
    }
    Ok(ExhaustionReport { gap_bound, rows, violations })
}

// ---------------------------------------------------------------------------
// a 2-solenoid in T^3

/// Slabs `S^1 × [0, 1]` in `T^3` over the rotation by `α`: the slab over `x`
/// is `(t, θ) ↦ (x + t d(x), t, θ)`, where `d(x) = R(x) - x` (taken in
/// `(-1, 1)`) plus one extra turn of the first coordinate when `x` lies in
/// the wrap cell. Closed up inside the transversal `{x_2 = 0}`.
#[derive(Debug, Clone)]
pub struct T3Realization {
    pub alpha: f64,
    pub wrap_cell: Option<[f64; 2]>,
    pub solenoid: TrappingSolenoid,
}

pub type Triangle = [[f64; 3]; 3];

impl T3Realization {
    pub fn in_wrap(&self, x: f64) -> bool {
        self.wrap_cell.is_some_and(|c| x >= c[0] && x < c[1])
    }

    /// First-coordinate displacement of the slab over `x`.
    pub fn displacement(&self, x: f64) -> f64 {
        let step = reduce(x + self.alpha) - x;
        step + if self.in_wrap(x) { 1.0 } else { 0.0 }
    }

    /// Oriented triangles of the closed-up slab: the slab with orientation
    /// `(∂t, ∂θ)` and the cap in `{x_2 = 1}` running back to `C_x` without
    /// crossing the transversal chart boundary.
    pub fn closed_slab_mesh(&self, x: f64) -> Vec<Triangle> {
        let d = self.displacement(x);
        let w = if self.in_wrap(x) { 1.0 } else { 0.0 };
        let quad = |p00: [f64; 3], p10: [f64; 3], p11: [f64; 3], p01: [f64; 3]| [[p00, p10, p11], [p00, p11, p01]];
        let slab = quad([x, 0.0, 0.0], [x + d, 1.0, 0.0], [x + d, 1.0, 1.0], [x, 0.0, 1.0]);
        let cap = quad([x + d, 1.0, 0.0], [x + w, 1.0, 0.0], [x + w, 1.0, 1.0], [x + d, 1.0, 1.0]);
        slab.into_iter().chain(cap).collect()
    }

    /// Class of the closed-up slab from signed intersections with the three
    /// coordinate circles, in the basis `(Σ·C_1, -Σ·C_2, Σ·C_3)`.
    pub fn geometric_class(&self, x: f64) -> Result<IntegralClass> {
        let mesh = self.closed_slab_mesh(x);
        let mut out = Vec::with_capacity(3);
        for (axis, sign) in [(0, 1), (1, -1), (2, 1)] {
            out.push(sign * intersection_number(&mesh, axis)?);
        }
        Ok(IntegralClass::new(out))
    }

    /// Compares the geometric classes with the declared ones at
    /// `(i + 1/2)/samples`.
    pub fn check_classes(&self, samples: usize) -> Result<()> {
        for i in 0..samples {
            let x = (i as f64 + 0.5) / samples as f64;
            let geometric = self.geometric_class(x)?;
            let declared = self.solenoid.class.eval(x);
            if geometric.coords() != declared {
                return Err(Error::Construction(format!(
                    "slab over x = {x}: intersection counts {:?} disagree with declared class {declared:?}",
                    geometric.coords()
                )));
            }
        }
        Ok(())
    }
}

/// Signed intersection number of a closed triangulated surface in `T^3`
/// (given by lifted triangles) with the coordinate circle along `axis`
/// through a generic point.
pub fn intersection_number(mesh: &[Triangle], axis: usize) -> Result<i64> {
    let (j, k) = ((axis + 1) % 3, (axis + 2) % 3);
    let tris: Vec<[[f64; 2]; 3]> = mesh.iter().map(|t| [[t[0][j], t[0][k]], [t[1][j], t[1][k]], [t[2][j], t[2][k]]]).collect();
    const CANDIDATES: [[f64; 2]; 6] =
        [[0.271_828, 0.314_159], [0.577_215, 0.161_803], [0.414_213, 0.732_050], [0.693_419, 0.869_604], [0.123_456, 0.540_302], [0.918_938, 0.045_6]];
    'candidate: for q in CANDIDATES {
        let mut count = 0i64;
        for t in &tris {
            let area = cross(sub(t[1], t[0]), sub(t[2], t[0]));
            let (lo, hi) = bbox(t);
            for m in (lo[0] - q[0]).floor() as i64..=(hi[0] - q[0]).ceil() as i64 {
                for n in (lo[1] - q[1]).floor() as i64..=(hi[1] - q[1]).ceil() as i64 {
                    let p = [q[0] + m as f64, q[1] + n as f64];
                    let near_edge = (0..3).any(|e| point_segment_distance(p, t[e], t[(e + 1) % 3]) < 1e-7);
                    if near_edge {
                        continue 'candidate;
                    }
                    if area.abs() < 1e-14 {
                        continue;
                    }
                    let inside = (0..3).all(|e| cross(sub(t[(e + 1) % 3], t[e]), sub(p, t[e])) * area > 0.0);
                    if inside {
                        count += area.signum() as i64;
                    }
                }
            }
        }
        return Ok(count);
    }
    Err(Error::Construction("no generic circle position found for intersection counting".into()))
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn bbox(t: &[[f64; 2]; 3]) -> ([f64; 2], [f64; 2]) {
    let mut lo = t[0];
    let mut hi = t[0];
    for p in &t[1..] {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (lo, hi)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = sub(b, a);
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2 } else { 0.0 };
    let s = s.clamp(0.0, 1.0);
    let d = [p[0] - a[0] - s * ab[0], p[1] - a[1] - s * ab[1]];
    d[0].hypot(d[1])
}

/// The T^3 realization over the rotation by `alpha`. With `area_roof` the
/// slab volume is its flat area `√(1 + d²)`, otherwise 1. The declared
/// classes are `(1, 1, 0)` on the wrap cell and `(1, 0, 0)` elsewhere and are
/// cross-checked by intersection counting on 1000 slabs.
pub fn t3_trapping_solenoid(alpha: f64, wrap_cell: Option<[f64; 2]>, area_roof: bool) -> Result<T3Realization> {
    let a = reduce(alpha);
    if a == 0.0 {
        return Err(Error::Domain("rotation angle must not be an integer".into()));
    }
    if let Some(c) = wrap_cell {
        if !(0.0 <= c[0] && c[0] < c[1] && c[1] <= 1.0) {
            return Err(Error::Domain(format!("wrap cell {c:?} is not an interval in [0, 1)")));
        }
    }
    // cells on which d is constant
    let mut cuts = vec![0.0, 1.0 - a, 1.0];
    if let Some(c) = wrap_cell {
        cuts.extend(c);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let probe = T3Realization {
        alpha: a,
        wrap_cell,
        solenoid: TrappingSolenoid::from_roof(TransversalSystem::rotation(a)?, ScalarWeight::constant(1.0), ClassWeight::constant(vec![1, 0, 0]))?,
    };
    let area_cells: Vec<ScalarCell> = cuts
        .windows(2)
        .map(|c| {
            let d = probe.displacement(0.5 * (c[0] + c[1]));
            ScalarCell { cell: [c[0], c[1]], value: (1.0 + d * d).sqrt() }
        })
        .collect();
    let area = ScalarWeight::Cells { cells: area_cells };
    let volume = if area_roof { area.clone() } else { ScalarWeight::constant(1.0) };
    let mut class = ClassWeight::constant(vec![1, 0, 0]);
    if let Some(c) = wrap_cell {
        class = class.with_cell(c[0], c[1], vec![1, 1, 0]);
    }
    // the circle factor adds at most half a unit to the diameter
    let diameter = match &area {
        ScalarWeight::Cells { cells } => ScalarWeight::Cells {
            cells: cells.iter().map(|c| ScalarCell { cell: c.cell, value: c.value + 0.5 }).collect(),
        },
        _ => unreachable!(),
    };
    let solenoid = TrappingSolenoid::new(2, TransversalSystem::rotation(a)?, volume, class, area, diameter, None, 0.25)?;
    let real = T3Realization { alpha: a, wrap_cell, solenoid };
    real.check_classes(1000)?;
    Ok(real)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solenoid::GOLDEN;
    use crate::trig::TrigPoly;

    fn golden_3() -> TrappingSolenoid {
        TrappingSolenoid::from_roof(
            TransversalSystem::rotation(GOLDEN).unwrap(),
            ScalarWeight::constant(1.0),
            ClassWeight::constant(vec![1, 0, 0]).with_cell(1.0 - GOLDEN, 1.0, vec![1, 1, 0]),
        )
        .unwrap()
    }

    #[test]
    fn slab_sums() {
        let sol = golden_3();
        let n = 1000;
        let c = slab_sum_class(&sol, 0.1, ExhaustionWindow::new(0, n).unwrap()).unwrap();
        let visits = TransversalSystem::rotation(GOLDEN).unwrap().orbit(0.1, n as usize).iter().filter(|&&x| x >= 1.0 - GOLDEN).count();
        assert_eq!(c.coords(), &[n, visits as i64, 0]);
        let one = slab_sum_class(&sol, 0.9, ExhaustionWindow::new(0, 1).unwrap()).unwrap();
        assert_eq!(one.coords(), &[1, 1, 0]);
        let constant = TrappingSolenoid::from_roof(TransversalSystem::rotation(0.3).unwrap(), ScalarWeight::constant(2.0), ClassWeight::constant(vec![2, -1])).unwrap();
        assert_eq!(slab_sum_class(&constant, 0.0, ExhaustionWindow::new(-3, 4).unwrap()).unwrap().coords(), &[14, -7]);
        assert!(ExhaustionWindow::new(1, 4).is_err());
    }

    #[test]
    fn k_class_converges() {
        let sol = golden_3();
        let est = k_schwartzman_class(&sol, 0.2, &ExhaustionWindow::dyadic(10, 16, false), 0.0, 1e-3).unwrap();
        assert!(est.converged);
        let target = sol.ruelle_sullivan_class().unwrap();
        assert!(est.value.distance(&target) < 1e-3);
        assert!((target.coords()[1] - GOLDEN).abs() < 1e-15);

        let mut doubled = sol.clone();
        doubled.volume = ScalarWeight::constant(2.0);
        let w = ExhaustionWindow::dyadic(4, 8, true);
        let (e1, e2) = (k_schwartzman_class(&sol, 0.2, &w, 0.0, 1.0).unwrap(), k_schwartzman_class(&doubled, 0.2, &w, 0.0, 1.0).unwrap());
        for ((_, a), (_, b)) in e1.history.iter().zip(&e2.history) {
            assert_eq!(a.scale(0.5), *b);
        }
    }

    #[test]
    fn caps_do_not_move_the_limit() {
        let sol = golden_3();
        let w = ExhaustionWindow::dyadic(12, 17, true);
        let plain = k_schwartzman_class(&sol, 0.4, &w, 0.0, 1e-3).unwrap();
        let capped = k_schwartzman_class(&sol, 0.4, &w, 5.0, 1e-3).unwrap();
        assert!(plain.converged && capped.converged);
        let vol = (w.last().unwrap().slabs()) as f64;
        assert!(plain.value.distance(&capped.value) <= 5.0 * 2f64.sqrt() / vol);
    }

    #[test]
    fn periodic_base_is_exact() {
        let sol = TrappingSolenoid::from_roof(
            TransversalSystem::new(crate::solenoid::BaseMap::Finite { permutation: vec![1, 2, 0], weights: vec![1.0; 3] }).unwrap(),
            ScalarWeight::constant(0.5),
            ClassWeight::constant(vec![1, 0]).with_cell(0.5, 1.0, vec![0, 1]),
        )
        .unwrap();
        let est = k_schwartzman_class(&sol, 1.0 / 6.0, &[ExhaustionWindow { a: 0, b: 3 }], 0.0, 1.0).unwrap();
        assert_eq!(est.value, sol.ruelle_sullivan_class().unwrap());
    }

    #[test]
    fn uniform_slabs_gap() {
        let sol = golden_3();
        let radii: Vec<f64> = (1..=12).map(|j| 2f64.powi(j)).collect();
        let rep = exhaustion_control_check(&sol, 0.3, &radii).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        assert!(rep.max_gap() <= 2);
        assert_eq!(rep.gap_bound, 3.0);
    }

    #[test]
    fn oscillating_roof_gap() {
        let roof = ScalarWeight::Trig { poly: TrigPoly::constant(1.0).with_term(vec![1], 0.3, 0.0) };
        let sol = TrappingSolenoid::from_roof(TransversalSystem::rotation(GOLDEN).unwrap(), roof, ClassWeight::constant(vec![1])).unwrap();
        let bound = (1.3f64 / 0.7).ceil() as i64 + 2;
        for i in 0..100 {
            let radii: Vec<f64> = (0..8).map(|j| 3.0 * 2f64.powi(j) + i as f64 * 0.37).collect();
            let rep = exhaustion_control_check(&sol, (i as f64 + 0.5) / 100.0, &radii).unwrap();
            assert!(rep.passed(), "{:?}", rep.violations);
            assert!(rep.max_gap() <= bound);
        }
        let radii: Vec<f64> = (2..=14).map(|j| 2f64.powi(j)).collect();
        let rep = exhaustion_control_check(&sol, 0.1, &radii).unwrap();
        let ratios: Vec<f64> = rep.rows.iter().map(|r| r.defect_ratio).collect();
        assert!(ratios.last().unwrap() < &1e-3 && ratios[0] > *ratios.last().unwrap());
    }

    #[test]
    fn adjacency() {
        let sol = golden_3();
        assert!(adjacency_is_path(&sol, 0.3, ExhaustionWindow { a: -50, b: 50 }));
    }

    #[test]
    fn constants_checked() {
        let base = TransversalSystem::rotation(GOLDEN).unwrap();
        let bad = TrappingSolenoid::new(
            1,
            base,
            ScalarWeight::constant(1.0),
            ClassWeight::constant(vec![1]),
            ScalarWeight::constant(1.0),
            ScalarWeight::constant(1.0),
            Some(TrappingConstants { c0: 1.5, c1: 2.0, c2: 1.0 }),
            0.25,
        );
        assert!(matches!(bad, Err(Error::Consistency(_))));
        let sol = golden_3();
        assert!(sol.constants_consistent(&crate::solenoid::seed_grid(100)));
    }

    #[test]
    fn t3_classes() {
        let real = t3_trapping_solenoid(GOLDEN, Some([1.0 - GOLDEN, 1.0]), false).unwrap();
        assert_eq!(real.geometric_class(0.9).unwrap().coords(), &[1, 1, 0]);
        assert_eq!(real.geometric_class(0.1).unwrap().coords(), &[1, 0, 0]);
        let est = k_schwartzman_class(&real.solenoid, 0.3, &ExhaustionWindow::dyadic(12, 17, false), 0.0, 1e-3).unwrap();
        let rs = real.solenoid.ruelle_sullivan_class().unwrap();
        assert!(est.converged && est.value.distance(&rs) < 1e-3);
        assert!((rs.coords()[1] - GOLDEN).abs() < 1e-12);

        let product = t3_trapping_solenoid(GOLDEN, None, true).unwrap();
        let rs = product.solenoid.ruelle_sullivan_class().unwrap();
        assert!(rs.coords()[1] == 0.0 && rs.coords()[2] == 0.0 && rs.coords()[0] > 0.0);

        let other = t3_trapping_solenoid(0.3, Some([0.1, 0.2]), true).unwrap();
        assert_eq!(other.geometric_class(0.15).unwrap().coords(), &[1, 1, 0]);
        assert_eq!(other.geometric_class(0.8).unwrap().coords(), &[1, 0, 0]);
    }

    #[test]
    fn wrong_declaration_is_caught() {
        let mut real = t3_trapping_solenoid(GOLDEN, Some([0.5, 0.6]), true).unwrap();
        real.solenoid.class = ClassWeight::constant(vec![1, 0, 0]);
        assert!(matches!(real.check_classes(100), Err(Error::Construction(_))));
    }
}

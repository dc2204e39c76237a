//! Minimal loop lengths `l(a)` per integral class and the stable norm
//! `‖a‖ = lim l(n a)/n`, with certified two-sided bounds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_rank, Error, Result};
use crate::homology::IntegralClass;
use crate::torus::{offsets, TorusGeometry};

/// At most this many base points per shortest-path query.
const MAX_BASE_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LengthMethod {
    FlatExact,
    GridDijkstra,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopLengthResult {
    pub class: IntegralClass,
    /// Length of an actual loop in the class, hence an upper bound on `l(a)`.
    pub value: f64,
    pub method: LengthMethod,
    pub resolution: Option<usize>,
    /// `e^{min u} sqrt(a^T G a)`; equals `value` for flat metrics.
    pub lower_bound: f64,
    /// The minimizing loop, lifted, from the base point to base + `a`.
    pub path: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lifted grid graph on a box, cell size `1/r`, with `3^n - 1` neighbours and
/// edge weights `e^{u(midpoint)} |δ|_G`.
struct Grid<'a> {
    r: i64,
    lo: Vec<i64>,
    shape: Vec<usize>,
    steps: Vec<(Vec<i64>, f64)>,
    /// `e^u` on the half-grid, periodic with period `2r` per axis.
    factor: &'a [f64],
}

impl Grid<'_> {
    fn index(&self, p: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for i in 0..p.len() {
            let q = p[i] - self.lo[i];
            if q < 0 || q as usize >= self.shape[i] {
                return None;
            }
            idx = idx * self.shape[i] + q as usize;
        }
        Some(idx)
    }

    fn point(&self, mut idx: usize) -> Vec<i64> {
        let mut p = vec![0; self.shape.len()];
        for i in (0..self.shape.len()).rev() {
            p[i] = (idx % self.shape[i]) as i64 + self.lo[i];
            idx /= self.shape[i];
        }
        p
    }

    fn factor_at(&self, half: &[i64]) -> f64 {
        let m = 2 * self.r;
        let mut idx = 0;
        for &h in half {
            idx = idx * m as usize + h.rem_euclid(m) as usize;
        }
        self.factor[idx]
    }

    /// Shortest path from `start` to `goal`; `None` if unreachable.
    fn shortest(&self, start: &[i64], goal: &[i64]) -> Option<(f64, Vec<Vec<i64>>)> {
        let total: usize = self.shape.iter().product();
        let (s, g) = (self.index(start)?, self.index(goal)?);
        let mut dist = vec![f64::INFINITY; total];
        let mut prev = vec![usize::MAX; total];
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
        let mut half = vec![0; start.len()];
        let mut q = vec![0; start.len()];
        while let Some(Entry(d, v)) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if v == g {
                break;
            }
            let p = self.point(v);
            for (delta, len) in &self.steps {
                for i in 0..p.len() {
                    q[i] = p[i] + delta[i];
                    half[i] = 2 * p[i] + delta[i];
                }
                let Some(w) = self.index(&q) else { continue };
                let nd = d + len * self.factor_at(&half);
                if nd < dist[w] {
                    dist[w] = nd;
                    prev[w] = v;
                    heap.push(Entry(nd, w));
                }
            }
        }
        if !dist[g].is_finite() {
            return None;
        }
        let mut path = vec![goal.to_vec()];
        let mut v = g;
        while v != s {
            v = prev[v];
            path.push(self.point(v));
        }
        path.reverse();
        Some((dist[g], path))
    }
}

/// Greedy shortcutting: replace a run of vertices by a straight segment
/// whenever that is not longer. Only ever shortens the loop.
fn relax(geom: &TorusGeometry, path: Vec<Vec<f64>>, step: f64) -> Vec<Vec<f64>> {
    if path.len() <= 2 {
        return path;
    }
    let seg: Vec<f64> = path.windows(2).map(|w| geom.segment_length(&w[0], &w[1], step)).collect();
    let mut prefix = vec![0.0];
    for s in &seg {
        prefix.push(prefix.last().unwrap() + s);
    }
    let mut out = vec![path[0].clone()];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut best = i + 1;
        for j in i + 2..path.len() {
            let direct = geom.segment_length(&path[i], &path[j], step);
            if direct <= prefix[j] - prefix[i] + 1e-12 {
                best = j;
            } else if !geom.is_flat() && j > best + 4 {
                break;
            }
        }
        out.push(path[best].clone());
        i = best;
    }
    out
}

/// Minimal loop length of class `a`: closed form for flat metrics, otherwise
/// the best grid loop over base points on a coordinate hyperplane, relaxed and
/// measured by quadrature.
pub fn minimal_loop_length(geom: &TorusGeometry, a: &IntegralClass, resolution: usize) -> Result<LoopLengthResult> {
    let n = geom.dim();
    check_rank(n, a.rank())?;
    let real: Vec<f64> = a.coords().iter().map(|&k| k as f64).collect();
    let flat = geom.gram_norm(&real);
    if a.is_zero() || geom.is_flat() {
        return Ok(LoopLengthResult {
            class: a.clone(),
            value: flat,
            method: LengthMethod::FlatExact,
            resolution: None,
            lower_bound: flat,
            path: vec![vec![0.0; n], real],
        });
    }
    grid_loop_length(geom, a, resolution)
}

/// The grid method regardless of flatness.
pub fn grid_loop_length(geom: &TorusGeometry, a: &IntegralClass, resolution: usize) -> Result<LoopLengthResult> {
    let n = geom.dim();
    check_rank(n, a.rank())?;
    if a.is_zero() {
        return minimal_loop_length(geom, a, resolution);
    }
    let real: Vec<f64> = a.coords().iter().map(|&k| k as f64).collect();
    let lower_bound = geom.conformal_factor_bounds().0 * geom.gram_norm(&real);
    if resolution < 2 {
        return Err(Error::Resolution(format!("grid resolution {resolution} is too coarse (need >= 2)")));
    }
    let r = resolution as i64;
    let h = 1.0 / r as f64;
    // e^u on the half grid
    let m = 2 * resolution;
    let factor: Vec<f64> = (0..m.pow(n as u32))
        .map(|mut idx| {
            let mut x = vec![0.0; n];
            for i in (0..n).rev() {
                x[i] = (idx % m) as f64 / m as f64;
                idx /= m;
            }
            geom.conformal_factor(&x)
        })
        .collect();
    let steps: Vec<(Vec<i64>, f64)> = offsets(n, 1)
        .into_iter()
        .filter(|d| d.iter().any(|&k| k != 0))
        .map(|d| {
            let len = geom.gram_norm(&d.iter().map(|&k| k as f64 * h).collect::<Vec<_>>());
            (d, len)
        })
        .collect();
    let target: Vec<i64> = a.coords().iter().map(|&k| k * r).collect();
    let lo: Vec<i64> = target.iter().map(|&t| t.min(0) - 2 * r).collect();
    let shape: Vec<usize> = target.iter().map(|&t| (t.unsigned_abs() as i64 + 4 * r + 1) as usize).collect();
    let grid = Grid { r, lo, shape, steps, factor: &factor };

    // base points on {x_axis = 0} for an axis where a is non-zero
    let axis = (0..n).max_by_key(|&i| a.coords()[i].unsigned_abs()).unwrap();
    let free = n - 1;
    let per_axis = if free == 0 { 1 } else { (MAX_BASE_POINTS as f64).powf(1.0 / free as f64).floor().max(1.0) as usize };
    let stride = resolution.div_ceil(per_axis).max(1);
    let ticks: Vec<i64> = (0..resolution).step_by(stride).map(|k| k as i64).collect();
    let mut bases: Vec<Vec<i64>> = vec![Vec::new()];
    for i in 0..n {
        bases = bases
            .into_iter()
            .flat_map(|b| {
                let choices: Vec<i64> = if i == axis { vec![0] } else { ticks.clone() };
                choices.into_iter().map(move |k| {
                    let mut c = b.clone();
                    c.push(k);
                    c
                })
            })
            .collect();
    }
    let best = bases
        .par_iter()
        .filter_map(|b| {
            let goal: Vec<i64> = b.iter().zip(&target).map(|(x, t)| x + t).collect();
            grid.shortest(b, &goal)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0));
    let Some((_, nodes)) = best else {
        return Err(Error::Resolution("grid graph is disconnected within the search box".into()));
    };
    let quad = h / 4.0;
    let path: Vec<Vec<f64>> = nodes.iter().map(|p| p.iter().map(|&k| k as f64 * h).collect()).collect();
    let path = relax(geom, path, quad);
    let value = geom.path_length(&path, quad)?;
    Ok(LoopLengthResult { class: a.clone(), value, method: LengthMethod::GridDijkstra, resolution: Some(resolution), lower_bound, path })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableNormRow {
    pub n: usize,
    pub length: f64,
    /// `(l(n a) + C0)/n`.
    pub upper_bound: f64,
    pub running_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableNormEstimate {
    pub class: IntegralClass,
    /// `min_n l(n a)/n`.
    pub value: f64,
    pub lower_bound: f64,
    pub rows: Vec<StableNormRow>,
    pub n_used: usize,
    pub c0: f64,
}

impl StableNormEstimate {
    /// The running minimum of the upper bounds never increases and stays
    /// above the value.
    pub fn is_consistent(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].running_min <= w[0].running_min)
            && self.rows.iter().all(|r| self.value <= r.upper_bound && self.value <= r.running_min)
            && self.lower_bound <= self.value * (1.0 + 1e-12)
    }
}

/// `‖a‖` from `l(n a)` for `n = 1..=n_max`. Each `l(n a)/n` bounds `‖a‖` from
/// above because `‖n a‖ = n ‖a‖ <= l(n a)`; the subadditive sequence
/// `(l(n a) + C0)/n` and its running minimum are reported alongside.
pub fn stable_norm(geom: &TorusGeometry, a: &IntegralClass, n_max: usize, resolution: usize) -> Result<StableNormEstimate> {
    if n_max < 4 {
        return Err(Error::Domain(format!("n_max = {n_max} is below 4")));
    }
    let c0 = geom.diameter().c0;
    let lengths: Vec<Result<LoopLengthResult>> =
        (1..=n_max).into_par_iter().map(|k| minimal_loop_length(geom, &a.scaled(k as i64), resolution)).collect();
    let mut rows = Vec::with_capacity(n_max);
    let mut value = f64::INFINITY;
    let mut running = f64::INFINITY;
    let mut lower_bound = 0.0;
    for (k, r) in (1..=n_max).zip(lengths) {
        let r = r?;
        lower_bound = r.lower_bound / k as f64;
        let length = r.value;
        value = value.min(length / k as f64);
        let upper_bound = (length + c0) / k as f64;
        running = running.min(upper_bound);
        rows.push(StableNormRow { n: k, length, upper_bound, running_min: running });
    }
    if geom.is_flat() {
        let real: Vec<f64> = a.coords().iter().map(|&k| k as f64).collect();
        value = geom.gram_norm(&real);
    }
    Ok(StableNormEstimate { class: a.clone(), value, lower_bound, rows, n_used: n_max, c0 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub kind: String,
    pub classes: Vec<IntegralClass>,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubadditivityReport {
    pub c0: f64,
    pub slack: f64,
    pub rows: Vec<AuditRow>,
}

impl SubadditivityReport {
    pub fn failures(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Checks `l(a + b) <= l(a) + l(b) + C0` on the pairs and `l(n a) <= n l(a)`
/// on the multiples, with slack of two grid-cell diagonals.
pub fn subadditivity_audit(
    geom: &TorusGeometry,
    pairs: &[(IntegralClass, IntegralClass)],
    multiples: &[(IntegralClass, usize)],
    resolution: usize,
) -> Result<SubadditivityReport> {
    let n = geom.dim();
    let c0 = geom.diameter().c0;
    let slack = if geom.is_flat() {
        1e-9
    } else {
        let diag = geom.gram_norm(&vec![1.0 / resolution as f64; n]);
        2.0 * diag * geom.conformal_factor_bounds().1
    };
    let len = |c: &IntegralClass| minimal_loop_length(geom, c, resolution).map(|r| r.value);
    let mut rows: Vec<Result<AuditRow>> = pairs
        .par_iter()
        .map(|(a, b)| {
            let sum = a + b;
            let (la, lb, lab) = (len(a)?, len(b)?, len(&sum)?);
            let rhs = la + lb + c0;
            Ok(AuditRow { kind: "sum".into(), classes: vec![a.clone(), b.clone()], lhs: lab, rhs, passed: lab <= rhs + slack })
        })
        .collect();
    rows.extend(multiples.par_iter().map(|(a, k)| {
        let (la, lka) = (len(a)?, len(&a.scaled(*k as i64))?);
        let rhs = *k as f64 * la;
        Ok(AuditRow { kind: format!("multiple x{k}"), classes: vec![a.clone()], lhs: lka, rhs, passed: lka <= rhs + slack })
    }).collect::<Vec<_>>());
    Ok(SubadditivityReport { c0, slack, rows: rows.into_iter().collect::<Result<Vec<_>>>()? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trig::TrigPoly;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn valley() -> TorusGeometry {
        TorusGeometry::flat(2).with_conformal(TrigPoly::default().with_term(vec![0, 1], 0.2, 0.0)).unwrap()
    }

    fn bumpy() -> TorusGeometry {
        TorusGeometry::flat(2)
            .with_conformal(TrigPoly::default().with_term(vec![1, 0], 0.3, 0.0).with_term(vec![1, 1], 0.0, 0.2).with_term(vec![0, 2], 0.15, 0.0))
            .unwrap()
    }

    #[test]
    fn flat_exact() {
        let g = TorusGeometry::flat(2);
        let r = minimal_loop_length(&g, &IntegralClass::new(vec![3, 4]), 8).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.method, LengthMethod::FlatExact);
        for n_max in [4, 7] {
            assert_eq!(stable_norm(&g, &IntegralClass::new(vec![3, 4]), n_max, 8).unwrap().value, 5.0);
        }
        assert_eq!(minimal_loop_length(&g, &IntegralClass::zeros(2), 8).unwrap().value, 0.0);
    }

    #[test]
    fn zero_conformal_grid_is_near_flat() {
        let g = TorusGeometry::flat(2);
        for r in [4, 8, 16] {
            let v = grid_loop_length(&g, &IntegralClass::new(vec![1, 0]), r).unwrap();
            assert_eq!(v.method, LengthMethod::GridDijkstra);
            assert!(v.value >= 1.0 - 1e-12 && v.value <= 1.0 + 2.0 / r as f64);
            let w = grid_loop_length(&g, &IntegralClass::new(vec![3, 4]), r).unwrap();
            assert!(w.value - 5.0 <= 2f64.sqrt() / r as f64 * 7.0, "{}", w.value);
        }
    }

    #[test]
    fn valley_loop() {
        let g = valley();
        let a = IntegralClass::new(vec![1, 0]);
        let v16 = minimal_loop_length(&g, &a, 16).unwrap();
        let v32 = minimal_loop_length(&g, &a, 32).unwrap();
        assert!(v16.value < 0.2f64.exp());
        assert!((v16.value - v32.value).abs() <= 0.01 * v32.value);
        assert!((v32.value - (-0.2f64).exp()).abs() < 1e-3);
        assert!(v32.value <= v16.value + 1e-9);
        assert!(v16.lower_bound <= v16.value * (1.0 + 1e-12));
    }

    #[test]
    fn homogeneity_and_bounds() {
        let g = bumpy();
        let a = IntegralClass::new(vec![1, 1]);
        let e1 = stable_norm(&g, &a, 4, 8).unwrap();
        let e2 = stable_norm(&g, &a.scaled(2), 4, 8).unwrap();
        assert!(e1.is_consistent() && e2.is_consistent());
        assert!((e2.value - 2.0 * e1.value).abs() <= 0.05 * e2.value, "{} {}", e1.value, e2.value);
        let l = minimal_loop_length(&g, &a, 8).unwrap();
        assert!(e1.value <= l.value);
        assert!(e1.lower_bound > 0.0);
    }

    #[test]
    fn flat_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = TorusGeometry::new(nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]), None).unwrap();
        for _ in 0..50 {
            let a = IntegralClass::new(vec![rng.gen_range(-5..=5), rng.gen_range(-5..=5)]);
            let b = IntegralClass::new(vec![rng.gen_range(-5..=5), rng.gen_range(-5..=5)]);
            let s = &a + &b;
            let (na, nb, ns) = (stable_norm(&g, &a, 4, 4).unwrap().value, stable_norm(&g, &b, 4, 4).unwrap().value, stable_norm(&g, &s, 4, 4).unwrap().value);
            assert!(ns <= na + nb + 1e-12);
        }
    }

    #[test]
    fn audit_bumpy_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<(IntegralClass, IntegralClass)> = (0..12)
            .map(|_| {
                (
                    IntegralClass::new(vec![rng.gen_range(-3..=3), rng.gen_range(-3..=3)]),
                    IntegralClass::new(vec![rng.gen_range(-3..=3), rng.gen_range(-3..=3)]),
                )
            })
            .collect();
        let multiples: Vec<(IntegralClass, usize)> =
            (0..5).map(|_| (IntegralClass::new(vec![rng.gen_range(-2..=2), rng.gen_range(1..=2)]), 3)).collect();
        let rep = subadditivity_audit(&bumpy(), &pairs, &multiples, 6).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures().collect::<Vec<_>>());
        let flat = subadditivity_audit(&TorusGeometry::flat(2), &pairs, &[], 6).unwrap();
        assert!(flat.passed());
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(matches!(minimal_loop_length(&valley(), &IntegralClass::new(vec![1, 0]), 1), Err(Error::Resolution(_))));
    }
}

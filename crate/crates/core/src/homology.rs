//! Real homology classes in a fixed integral basis, and the set geometry
//! (additive hulls, convex hulls, cones) used on sampled cluster sets.
//!
//! On the torus `T^n` the basis of `H_1` is given by the coordinate loops, and
//! `H_2(T^3)` is ordered as `(e2^e3, e1^e3, e1^e2)`. Every class is therefore a
//! plain coordinate vector.

use std::io::{Read, Write};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_rank, Error, Result};

/// A point of `H_k(M, R)` in the fixed basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HomologyVector(Vec<f64>);

impl HomologyVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Domain("homology rank must be at least 1".into()));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    /// Builds a vector without the finiteness check. Callers guarantee the invariant.
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self(coords)
    }

    pub fn zeros(rank: usize) -> Self {
        Self(vec![0.0; rank.max(1)])
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self(self.0.iter().map(|c| c * k).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }
}

impl Add for &HomologyVector {
    type Output = HomologyVector;
    fn add(self, rhs: Self) -> HomologyVector {
        HomologyVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &HomologyVector {
    type Output = HomologyVector;
    fn sub(self, rhs: Self) -> HomologyVector {
        HomologyVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Mul<f64> for &HomologyVector {
    type Output = HomologyVector;
    fn mul(self, k: f64) -> HomologyVector {
        self.scale(k)
    }
}

impl Neg for &HomologyVector {
    type Output = HomologyVector;
    fn neg(self) -> HomologyVector {
        self.scale(-1.0)
    }
}

/// A point of the integer lattice `H_k(M, Z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegralClass(Vec<i64>);

impl IntegralClass {
    pub fn new(coords: Vec<i64>) -> Self {
        Self(coords)
    }

    pub fn zeros(rank: usize) -> Self {
        Self(vec![0; rank])
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0)
    }

    pub fn to_real(&self) -> HomologyVector {
        HomologyVector::from_raw(self.0.iter().map(|&c| c as f64).collect())
    }

    pub fn scaled(&self, n: i64) -> Self {
        Self(self.0.iter().map(|c| c * n).collect())
    }

    /// Rounds a real vector to the lattice, failing when any coordinate is
    /// further than `tol` from an integer.
    pub fn round_from(v: &[f64], tol: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(v.len());
        for (i, &c) in v.iter().enumerate() {
            let r = c.round();
            if !((c - r).abs() <= tol) {
                return Err(Error::Consistency(format!(
                    "coordinate {i} = {c} is not integral within {tol:e}"
                )));
            }
            out.push(r as i64);
        }
        Ok(Self(out))
    }
}

impl Add for &IntegralClass {
    type Output = IntegralClass;
    fn add(self, rhs: Self) -> IntegralClass {
        IntegralClass(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

/// Window parameters `(s, t)` a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub s: f64,
    pub t: f64,
}

/// A finite sample of a subset of `H_k(M, R)`, optionally tagged with the
/// window that produced each point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    points: Vec<HomologyVector>,
    provenance: Vec<Option<Window>>,
}

impl PointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<HomologyVector>) -> Result<Self> {
        let mut set = Self::new();
        for p in points {
            set.push(p, None)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, p: HomologyVector, window: Option<Window>) -> Result<()> {
        if let Some(r) = self.rank() {
            check_rank(r, p.rank())?;
        }
        self.points.push(p);
        self.provenance.push(window);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rank(&self) -> Option<usize> {
        self.points.first().map(HomologyVector::rank)
    }

    pub fn points(&self) -> &[HomologyVector] {
        &self.points
    }

    pub fn provenance(&self) -> &[Option<Window>] {
        &self.provenance
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HomologyVector, Option<Window>)> {
        self.points.iter().zip(self.provenance.iter().copied())
    }

    /// Indices of points that exactly repeat an earlier point.
    pub fn duplicate_indices(&self) -> Vec<usize> {
        let mut dups = Vec::new();
        for i in 1..self.points.len() {
            if self.points[..i].iter().any(|q| q == &self.points[i]) {
                dups.push(i);
            }
        }
        dups
    }

    /// Union with another set of the same rank.
    pub fn extend(&mut self, other: &PointSet) -> Result<()> {
        for (p, w) in other.iter() {
            self.push(p.clone(), w)?;
        }
        Ok(())
    }

    pub fn contains_exact(&self, p: &HomologyVector) -> bool {
        self.points.iter().any(|q| q == p)
    }

    /// Smallest distance from `p` to a sampled point.
    pub fn nearest_distance(&self, p: &HomologyVector) -> f64 {
        self.points
            .iter()
            .map(|q| q.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest pairwise distance.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.points.len() {
            for j in i + 1..self.points.len() {
                d = d.max(self.points[i].distance(&self.points[j]));
            }
        }
        d
    }

    /// CSV with columns `coord_0..coord_{r-1}, s, t`; provenance cells are
    /// empty when absent.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let rank = self.rank().unwrap_or(0);
        let mut wtr = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..rank).map(|i| format!("coord_{i}")).collect();
        header.push("s".into());
        header.push("t".into());
        wtr.write_record(&header).map_err(csv_err)?;
        for (p, w) in self.iter() {
            let mut row: Vec<String> = p.coords().iter().map(|c| format!("{c:?}")).collect();
            match w {
                Some(w) => {
                    row.push(format!("{:?}", w.s));
                    row.push(format!("{:?}", w.t));
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| Error::Domain(format!("csv write: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let rank = headers.iter().filter(|h| h.starts_with("coord_")).count();
        if headers.len() != rank + 2 {
            return Err(Error::Domain("expected coord_*, s, t columns".into()));
        }
        let mut set = Self::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Domain(format!("csv value {s:?}: {e}")))
            };
            let coords = (0..rank).map(|i| parse(&rec[i])).collect::<Result<Vec<_>>>()?;
            let window = match (&rec[rank], &rec[rank + 1]) {
                ("", "") => None,
                (s, t) => Some(Window { s: parse(s)?, t: parse(t)? }),
            };
            set.push(HomologyVector::new(coords)?, window)?;
        }
        Ok(set)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Domain(format!("csv: {e}"))
}

/// Linear combination `sum_i c_i v_i`, summed in term order.
pub fn combine(terms: &[(f64, HomologyVector)]) -> Result<HomologyVector> {
    let first = terms
        .first()
        .ok_or_else(|| Error::Domain("combine needs at least one term".into()))?;
    let rank = first.1.rank();
    let mut acc = vec![0.0; rank];
    for (c, v) in terms {
        check_rank(rank, v.rank())?;
        for (a, x) in acc.iter_mut().zip(v.coords()) {
            *a += c * x;
        }
    }
    HomologyVector::new(acc)
}

/// Evenly spaced points on every segment `[a, b]`, `a` in `A`, `b` in `B`.
/// The endpoints are copied verbatim, so the output contains `A ∪ B`.
/// Exact duplicates are dropped.
pub fn additive_hull_sample(a: &PointSet, b: &PointSet, samples_per_segment: usize) -> Result<PointSet> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("additive hull of an empty set".into()));
    }
    check_rank(a.rank().unwrap(), b.rank().unwrap())?;
    let m = samples_per_segment.max(2);
    let mut out = PointSet::new();
    let add = |p: HomologyVector, out: &mut PointSet| -> Result<()> {
        if !out.contains_exact(&p) {
            out.push(p, None)?;
        }
        Ok(())
    };
    for pa in a.points() {
        for pb in b.points() {
            add(pa.clone(), &mut out)?;
            for k in 1..m - 1 {
                let lambda = k as f64 / (m - 1) as f64;
                let p = HomologyVector::from_raw(
                    pa.coords()
                        .iter()
                        .zip(pb.coords())
                        .map(|(x, y)| (1.0 - lambda) * x + lambda * y)
                        .collect(),
                );
                add(p, &mut out)?;
            }
            add(pb.clone(), &mut out)?;
        }
    }
    Ok(out)
}

/// Distance from a point to the segment `[a, b]`.
pub fn segment_distance(p: &HomologyVector, a: &HomologyVector, b: &HomologyVector) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let lambda = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&(a + &ab.scale(lambda)))
}

/// Outcome of a convex-hull membership query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HullMembership {
    pub inside: bool,
    pub distance: f64,
}

/// Whether `p` lies within `tol` of the convex hull of `set`.
///
/// Rank 1 and 2 use the exact hull (interval, monotone-chain polygon); higher
/// ranks use the Wolfe minimum-norm-point algorithm on `set - p`.
pub fn hull_membership(p: &HomologyVector, set: &PointSet, tol: f64) -> Result<HullMembership> {
    if set.is_empty() {
        return Err(Error::Domain("convex hull of an empty set".into()));
    }
    check_rank(set.rank().unwrap(), p.rank())?;
    let distance = match p.rank() {
        1 => {
            let xs = set.points().iter().map(|q| q.coords()[0]);
            let lo = xs.clone().fold(f64::INFINITY, f64::min);
            let hi = xs.fold(f64::NEG_INFINITY, f64::max);
            let x = p.coords()[0];
            (lo - x).max(x - hi).max(0.0)
        }
        2 => polygon_distance(p, set.points()),
        _ => wolfe_distance(p, set.points()),
    };
    Ok(HullMembership { inside: distance <= tol, distance })
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Andrew's monotone chain; returns hull vertices counter-clockwise.
pub(crate) fn convex_hull_2d(points: &[HomologyVector]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|q| [q.coords()[0], q.coords()[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &pts {
        while lower.len() >= 2 && cross2(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in pts.iter().rev() {
        while upper.len() >= 2 && cross2(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn polygon_distance(p: &HomologyVector, points: &[HomologyVector]) -> f64 {
    let hull = convex_hull_2d(points);
    let q = [p.coords()[0], p.coords()[1]];
    let seg = |a: [f64; 2], b: [f64; 2]| {
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len2 = dx * dx + dy * dy;
        let lambda = if len2 == 0.0 {
            0.0
        } else {
            (((q[0] - a[0]) * dx + (q[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
        };
        let (ex, ey) = (a[0] + lambda * dx - q[0], a[1] + lambda * dy - q[1]);
        (ex * ex + ey * ey).sqrt()
    };
    match hull.len() {
        1 => seg(hull[0], hull[0]),
        2 => seg(hull[0], hull[1]),
        n => {
            let inside = (0..n).all(|i| cross2(hull[i], hull[(i + 1) % n], q) >= 0.0);
            if inside {
                0.0
            } else {
                (0..n)
                    .map(|i| seg(hull[i], hull[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Wolfe's minimum-norm-point algorithm on the translated set `points - p`.
fn wolfe_distance(p: &HomologyVector, points: &[HomologyVector]) -> f64 {
    let pts: Vec<DVector<f64>> = points
        .iter()
        .map(|q| DVector::from_iterator(p.rank(), q.coords().iter().zip(p.coords()).map(|(a, b)| a - b)))
        .collect();
    let scale = pts.iter().map(|v| v.norm_squared()).fold(0.0, f64::max).max(1e-300);
    let eps = 1e-12;

    let start = (0..pts.len())
        .min_by(|&i, &j| pts[i].norm_squared().total_cmp(&pts[j].norm_squared()))
        .unwrap();
    let mut active: Vec<usize> = vec![start];
    let mut weights: Vec<f64> = vec![1.0];
    let mut x = pts[start].clone();

    for _major in 0..10 * pts.len() + 50 {
        let (j, min_dot) = (0..pts.len())
            .map(|i| (i, x.dot(&pts[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if x.norm_squared() - min_dot <= eps * scale || active.contains(&j) {
            break;
        }
        active.push(j);
        weights.push(0.0);
        for _minor in 0..pts.len() + 10 {
            let alpha = match affine_min_norm(&pts, &active) {
                Some(a) => a,
                None => break,
            };
            if alpha.iter().all(|&a| a > eps) {
                weights = alpha;
                break;
            }
            let mut theta: f64 = 1.0;
            for (w, a) in weights.iter().zip(&alpha) {
                if *a <= eps {
                    let denom = w - a;
                    if denom > 0.0 {
                        theta = theta.min(w / denom);
                    }
                }
            }
            for (w, a) in weights.iter_mut().zip(&alpha) {
                *w = theta * a + (1.0 - theta) * *w;
            }
            let mut k = 0;
            while k < active.len() {
                if weights[k] <= eps {
                    active.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
        }
        x = active
            .iter()
            .zip(&weights)
            .fold(DVector::zeros(p.rank()), |acc, (&i, &w)| acc + &pts[i] * w);
    }
    x.norm()
}

fn affine_min_norm(pts: &[DVector<f64>], active: &[usize]) -> Option<Vec<f64>> {
    let k = active.len();
    let mut m = DMatrix::<f64>::zeros(k + 1, k + 1);
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            m[(a, b)] = pts[i].dot(&pts[j]);
        }
        m[(a, k)] = 1.0;
        m[(k, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let sol = m.lu().solve(&rhs)?;
    Some(sol.iter().take(k).copied().collect())
}

/// Rays of the cone spanned by a sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConeReport {
    /// Unit directions, sorted lexicographically.
    pub rays: Vec<HomologyVector>,
    /// Number of members per ray, aligned with `rays`.
    pub members: Vec<usize>,
    /// Points treated as zero.
    pub zero_count: usize,
}

impl ConeReport {
    pub fn has_zero(&self) -> bool {
        self.zero_count > 0
    }
}

/// Norm below which a point counts as the zero class.
pub const ZERO_NORM: f64 = 1e-12;

/// Clusters the projective directions of `set` into rays separated by more
/// than `angular_tol` radians.
pub fn cone_from_samples(set: &PointSet, angular_tol: f64) -> Result<ConeReport> {
    cone_from_samples_above(set, angular_tol, ZERO_NORM)
}

/// As [`cone_from_samples`], treating every point of norm `<= min_norm` as zero.
pub fn cone_from_samples_above(set: &PointSet, angular_tol: f64, min_norm: f64) -> Result<ConeReport> {
    if set.is_empty() {
        return Err(Error::Domain("cone of an empty set".into()));
    }
    if !(angular_tol > 0.0) {
        return Err(Error::Domain("angular tolerance must be positive".into()));
    }
    let angle = |a: &[f64], b: &[f64]| {
        let (na, nb) = (norm(a), norm(b));
        let c: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb);
        c.clamp(-1.0, 1.0).acos()
    };

    let mut zero_count = 0;
    // (sum of unit vectors, member count)
    let mut clusters: Vec<(Vec<f64>, usize)> = Vec::new();
    for p in set.points() {
        let n = p.norm();
        if n <= min_norm {
            zero_count += 1;
            continue;
        }
        let u: Vec<f64> = p.coords().iter().map(|c| c / n).collect();
        let hit = clusters
            .iter()
            .enumerate()
            .map(|(i, (sum, _))| (i, angle(sum, &u)))
            .filter(|(_, a)| *a <= angular_tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        match hit {
            Some(i) => {
                clusters[i].0.iter_mut().zip(&u).for_each(|(s, x)| *s += x);
                clusters[i].1 += 1;
            }
            None => clusters.push((u, 1)),
        }
    }

    // Merge clusters whose mean directions drifted within tolerance.
    loop {
        let mut merged = false;
        'outer: for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                if angle(&clusters[i].0, &clusters[j].0) <= angular_tol {
                    let (sum_j, n_j) = clusters.remove(j);
                    clusters[i].0.iter_mut().zip(&sum_j).for_each(|(s, x)| *s += x);
                    clusters[i].1 += n_j;
                    merged = true;
                    break 'outer;
                }
            }
        }
        if !merged {
            break;
        }
    }

    let mut rays: Vec<(HomologyVector, usize)> = clusters
        .into_iter()
        .map(|(sum, count)| {
            let n = norm(&sum);
            (HomologyVector::from_raw(sum.iter().map(|x| x / n).collect()), count)
        })
        .collect();
    rays.sort_by(|a, b| {
        a.0.coords()
            .iter()
            .zip(b.0.coords())
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let (rays, members) = rays.into_iter().unzip();
    Ok(ConeReport { rays, members, zero_count })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hv(c: &[f64]) -> HomologyVector {
        HomologyVector::new(c.to_vec()).unwrap()
    }

    fn set(points: &[&[f64]]) -> PointSet {
        PointSet::from_points(points.iter().map(|p| hv(p)).collect()).unwrap()
    }

    #[test]
    fn combine_examples() {
        let sum = combine(&[(1.0, hv(&[1.0, 0.0])), (1.0, hv(&[0.0, 1.0]))]).unwrap();
        assert_eq!(sum, hv(&[1.0, 1.0]));
        assert_eq!(combine(&[(0.5, hv(&[2.0, 4.0]))]).unwrap(), hv(&[1.0, 2.0]));
        let a = hv(&[0.3, -7.1]);
        assert!(combine(&[(1.0, a.clone()), (-1.0, a)]).unwrap().is_zero());
    }

    #[test]
    fn combine_rank_mismatch() {
        let err = combine(&[(1.0, hv(&[1.0])), (1.0, hv(&[1.0, 2.0]))]).unwrap_err();
        assert_eq!(err, Error::RankMismatch { expected: 1, found: 2 });
    }

    #[test]
    fn non_finite_rejected() {
        assert!(HomologyVector::new(vec![f64::NAN]).is_err());
        assert!(HomologyVector::new(vec![]).is_err());
    }

    #[test]
    fn additive_hull_examples() {
        let out = additive_hull_sample(&set(&[&[1.0, 0.0]]), &set(&[&[0.0, 1.0]]), 3).unwrap();
        assert_eq!(out.points(), &[hv(&[1.0, 0.0]), hv(&[0.5, 0.5]), hv(&[0.0, 1.0])]);
        let zero = set(&[&[0.0, 0.0]]);
        let out = additive_hull_sample(&zero, &zero, 5).unwrap();
        assert_eq!(out.points(), &[hv(&[0.0, 0.0])]);
        assert!(additive_hull_sample(&PointSet::new(), &zero, 3).is_err());
    }

    #[test]
    fn hull_examples() {
        let tri = set(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let m = hull_membership(&hv(&[0.5, 0.5]), &tri, 1e-12).unwrap();
        assert!(m.inside);
        assert_eq!(m.distance, 0.0);
        let m = hull_membership(&hv(&[2.0, 2.0]), &tri, 1e-12).unwrap();
        assert!(!m.inside);
        assert!((m.distance - 1.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hull_rank_three_matches_projection() {
        // unit cube corners; exterior point straight above a face center
        let mut pts = Vec::new();
        for i in 0..8 {
            pts.push(hv(&[(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]));
        }
        let cube = PointSet::from_points(pts).unwrap();
        let m = hull_membership(&hv(&[0.5, 0.5, 3.0]), &cube, 1e-9).unwrap();
        assert!((m.distance - 2.0).abs() < 1e-9);
        let m = hull_membership(&hv(&[2.0, 2.0, 2.0]), &cube, 1e-9).unwrap();
        assert!((m.distance - 3f64.sqrt()).abs() < 1e-9);
        let m = hull_membership(&hv(&[0.2, 0.7, 0.4]), &cube, 1e-9).unwrap();
        assert!(m.inside);
    }

    #[test]
    fn rank_one_hull() {
        let s = set(&[&[1.0], &[3.0]]);
        assert_eq!(hull_membership(&hv(&[2.0]), &s, 0.0).unwrap().distance, 0.0);
        assert_eq!(hull_membership(&hv(&[5.0]), &s, 0.0).unwrap().distance, 2.0);
    }

    #[test]
    fn cone_examples() {
        let c = cone_from_samples(&set(&[&[1.0, 0.0], &[2.0, 0.0], &[3.0, 0.0]]), 1e-6).unwrap();
        assert_eq!(c.rays, vec![hv(&[1.0, 0.0])]);
        let r2 = 2f64.sqrt();
        let c = cone_from_samples(&set(&[&[1.0, r2], &[2.0, 2.0 * r2]]), 1e-6).unwrap();
        assert_eq!(c.rays.len(), 1);
        assert!(c.rays[0].distance(&hv(&[1.0 / 3f64.sqrt(), r2 / 3f64.sqrt()])) < 1e-12);
        let c = cone_from_samples(&set(&[&[0.0, 0.0], &[0.0, 0.0]]), 0.1).unwrap();
        assert!(c.rays.is_empty());
        assert_eq!(c.zero_count, 2);
    }

    #[test]
    fn duplicates_flagged() {
        let s = set(&[&[1.0], &[2.0], &[1.0]]);
        assert_eq!(s.duplicate_indices(), vec![2]);
    }

    #[test]
    fn csv_round_trip() {
        let mut s = PointSet::new();
        s.push(hv(&[0.1, -2.5]), Some(Window { s: -3.0, t: 4.0 })).unwrap();
        s.push(hv(&[1.0 / 3.0, 7.0]), None).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("coord_0,coord_1,s,t\n"));
        assert!(text.lines().nth(2).unwrap().ends_with(",,"));
        assert_eq!(PointSet::read_csv(&buf[..]).unwrap(), s);
    }
}

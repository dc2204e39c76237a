use proptest::prelude::*;

use cyclelab::homology::{combine, cone_from_samples, hull_membership, HomologyVector, PointSet};
use cyclelab::torus::project;

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, n)
}

proptest! {
    #[test]
    fn projection_ignores_lattice_translates(x in vector(3), g in prop::collection::vec(-1000i64..1000, 3)) {
        let shifted: Vec<f64> = x.iter().zip(&g).map(|(a, k)| a + *k as f64).collect();
        let (p, q) = (project(&x), project(&shifted));
        for (a, b) in p.iter().zip(&q) {
            let d = (a - b).abs();
            prop_assert!(d < 1e-9 || (1.0 - d) < 1e-9);
            prop_assert!((0.0..1.0).contains(a));
        }
    }

    #[test]
    fn combine_is_linear(a in vector(2), b in vector(2), s in -5.0f64..5.0, t in -5.0f64..5.0) {
        let (va, vb) = (HomologyVector::new(a.clone()).unwrap(), HomologyVector::new(b.clone()).unwrap());
        let c = combine(&[(s, va), (t, vb)]).unwrap();
        for i in 0..2 {
            prop_assert!((c.coords()[i] - (s * a[i] + t * b[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn cone_is_scale_invariant(points in prop::collection::vec(vector(2), 1..12), k in 0.1f64..20.0) {
        let set = PointSet::from_points(points.iter().map(|p| HomologyVector::new(p.clone()).unwrap()).collect()).unwrap();
        let scaled = PointSet::from_points(points.iter().map(|p| HomologyVector::new(p.iter().map(|x| x * k).collect()).unwrap()).collect()).unwrap();
        let (c1, c2) = (cone_from_samples(&set, 0.05).unwrap(), cone_from_samples(&scaled, 0.05).unwrap());
        prop_assert_eq!(c1.rays.len(), c2.rays.len());
        for (r1, r2) in c1.rays.iter().zip(&c2.rays) {
            prop_assert!(r1.distance(r2) < 1e-9);
        }
    }

    #[test]
    fn members_are_inside_the_hull(points in prop::collection::vec(vector(2), 1..8), pick in 0usize..8) {
        let set = PointSet::from_points(points.iter().map(|p| HomologyVector::new(p.clone()).unwrap()).collect()).unwrap();
        let p = set.points()[pick % set.len()].clone();
        let m = hull_membership(&p, &set, 1e-9).unwrap();
        prop_assert!(m.inside);
    }
}

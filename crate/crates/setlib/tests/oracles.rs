//! Set operations checked against independent oracles: β-coefficient
//! feasibility for membership, vertex enumeration for containment, sampling
//! for sums and maps.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setlib::{constraint_normals, containment_margin, cross_nx, halfspace_rep, zonotope_in_polytope, Interval, Polytope, Zonotope};

fn random_zonotope(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Zonotope {
    let c = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
    let g = DMatrix::from_fn(n, p, |_, _| rng.gen_range(-1.0..1.0));
    let a = DVector::from_fn(p, |_, _| rng.gen_range(0.1..1.5));
    Zonotope::new(c, g, a).unwrap()
}

fn random_member(rng: &mut ChaCha8Rng, z: &Zonotope) -> DVector<f64> {
    let beta: Vec<f64> = (0..z.num_generators()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    z.point_at(&beta)
}

/// Every vertex of a planar zonotope is `c + G β` with `β ∈ {−1, 1}^p`.
fn sign_vertices(z: &Zonotope) -> Vec<DVector<f64>> {
    let p = z.num_generators();
    (0..1usize << p)
        .map(|mask| {
            let beta: Vec<f64> = (0..p).map(|h| if mask >> h & 1 == 1 { 1.0 } else { -1.0 }).collect();
            z.point_at(&beta)
        })
        .collect()
}

#[test]
fn halfspace_membership_agrees_with_beta_feasibility_in_2d() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut disagreements = 0;
    for _ in 0..40 {
        let p = rng.gen_range(1..=5);
        let z = random_zonotope(&mut rng, 2, p);
        let hull = z.interval_hull();
        let poly = halfspace_rep(&z).unwrap();
        for _ in 0..200 {
            let x = DVector::from_fn(2, |i, _| rng.gen_range(hull.lower()[i] - 0.3..hull.upper()[i] + 0.3));
            if poly.contains(&x, 1e-9) != z.contains_point_lp(&x, 1e-9) {
                disagreements += 1;
            }
        }
    }
    assert_eq!(disagreements, 0);
}

#[test]
fn membership_paths_agree_in_3d_and_4d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in [3, 4] {
        for _ in 0..10 {
            let z = random_zonotope(&mut rng, n, n + 2);
            let poly = halfspace_rep(&z).unwrap();
            let hull = z.interval_hull();
            for _ in 0..100 {
                let x = DVector::from_fn(n, |i, _| rng.gen_range(hull.lower()[i]..hull.upper()[i]));
                assert_eq!(poly.contains(&x, 1e-9), z.contains_point_lp(&x, 1e-9), "n={n} x={x}");
            }
        }
    }
}

#[test]
fn support_test_agrees_with_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..300 {
        let p = rng.gen_range(1..=5);
        let z = random_zonotope(&mut rng, 2, p);
        let rows = rng.gen_range(3..=6);
        let normals = DMatrix::from_fn(rows, 2, |_, _| rng.gen_range(-1.0..1.0));
        let offsets = DVector::from_fn(rows, |_, _| rng.gen_range(0.5..4.0));
        let poly = Polytope::new(normals, offsets).unwrap();
        let oracle = sign_vertices(&z).iter().all(|v| poly.contains(v, 1e-9));
        assert_eq!(zonotope_in_polytope(&z, &poly, 1e-9), oracle);
    }
}

#[test]
fn sampled_sums_and_maps_stay_inside() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (pa, pb) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let a = random_zonotope(&mut rng, 2, pa);
        let b = random_zonotope(&mut rng, 2, pb);
        let sum = a.minkowski_sum(&b).unwrap();
        let m = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-2.0..2.0));
        let mapped = a.linear_map(&m).unwrap();
        for _ in 0..20 {
            let x = random_member(&mut rng, &a);
            let y = random_member(&mut rng, &b);
            assert!(sum.contains_point(&(&x + &y), 1e-9));
            assert!(mapped.contains_point_lp(&(&m * &x), 1e-9));
            assert!(mapped.interval_hull().contains(&(&m * &x), 1e-12));
            assert!(a.interval_hull().contains(&x, 1e-12));
        }
    }
}

#[test]
fn cross_product_is_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 2..=5 {
        let h = DMatrix::from_fn(n, n - 1, |_, _| rng.gen_range(-1.0..1.0));
        let v = cross_nx(&h).unwrap();
        for col in h.column_iter() {
            assert!(v.dot(&col).abs() < 1e-12);
        }
    }
}

#[test]
fn degenerate_templates_yield_exact_normals() {
    // A flat 3-D zonotope: normals from constraint_normals must pin the flat
    // direction and bound it inside the plane.
    let g = DMatrix::from_column_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0]);
    let z = Zonotope::from_generators(DVector::zeros(3), g.clone()).unwrap();
    let normals = constraint_normals(&g).unwrap();
    let mut rows = DMatrix::zeros(2 * normals.len(), 3);
    let mut offs = DVector::zeros(2 * normals.len());
    for (j, v) in normals.iter().enumerate() {
        rows.row_mut(2 * j).copy_from(&v.transpose());
        rows.row_mut(2 * j + 1).copy_from(&(-v).transpose());
        offs[2 * j] = z.support(v);
        offs[2 * j + 1] = z.support(&-v);
    }
    let poly = Polytope::new(rows, offs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..500 {
        let x = DVector::from_fn(3, |_, _| rng.gen_range(-3.0..3.0));
        // Project half the samples onto the plane so both cases occur.
        let x = if rng.gen_bool(0.5) {
            let n = DVector::from_vec(vec![1.0, 1.0, -1.0]).normalize();
            &x - &n * n.dot(&x)
        } else {
            x
        };
        assert_eq!(poly.contains(&x, 1e-9), z.contains_point_lp(&x, 1e-9), "x={x}");
    }
}

fn zonotope_strategy(n: usize) -> impl Strategy<Value = Zonotope> {
    (1..=5usize).prop_flat_map(move |p| {
        (prop::collection::vec(-3.0..3.0f64, n), prop::collection::vec(-1.0..1.0f64, n * p), prop::collection::vec(0.0..2.0f64, p))
            .prop_map(move |(c, g, a)| Zonotope::new(DVector::from_vec(c), DMatrix::from_vec(n, p, g), DVector::from_vec(a)).unwrap())
    })
}

proptest! {
    #[test]
    fn znorm_is_additive(a in zonotope_strategy(2), b in zonotope_strategy(2)) {
        let s = a.minkowski_sum(&b).unwrap();
        prop_assert!((s.znorm() - a.znorm() - b.znorm()).abs() <= 1e-12 * (1.0 + s.znorm()));
    }

    #[test]
    fn sum_commutes_up_to_column_order(a in zonotope_strategy(2), b in zonotope_strategy(2)) {
        let ab = a.minkowski_sum(&b).unwrap();
        let ba = b.minkowski_sum(&a).unwrap();
        prop_assert_eq!(ab.center(), ba.center());
        let sorted_columns = |z: &Zonotope| {
            let mut cols: Vec<Vec<f64>> = z.generators().column_iter().map(|c| c.iter().copied().collect()).collect();
            cols.sort_by(|x, y| x.iter().zip(y).map(|(a, b)| a.total_cmp(b)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
            cols
        };
        prop_assert_eq!(sorted_columns(&ab), sorted_columns(&ba));
    }

    #[test]
    fn znorm_ignores_translation(a in zonotope_strategy(3), t in prop::collection::vec(-5.0..5.0f64, 3)) {
        let moved = a.translate(&DVector::from_vec(t)).unwrap();
        prop_assert_eq!(moved.znorm(), a.znorm());
    }

    #[test]
    fn zonotope_lies_in_its_own_halfspace_form(z in zonotope_strategy(2)) {
        let z = z.compact();
        prop_assume!(z.num_generators() >= 1);
        let poly = halfspace_rep(&z).unwrap();
        prop_assert!(zonotope_in_polytope(&z, &poly, 0.0), "margin {}", containment_margin(&z, &poly));
    }

    #[test]
    fn facet_normals_ignore_positive_rescaling(
        z in zonotope_strategy(3),
        factors in prop::collection::vec(0.1..10.0f64, 5),
    ) {
        let z = z.compact();
        prop_assume!(z.num_generators() >= 3 && z.generators().rank(1e-6) == 3);
        let rescaled = DVector::from_iterator(z.num_generators(), z.scales().iter().zip(&factors).map(|(a, f)| a * f));
        let z2 = z.with_scales(rescaled).unwrap();
        let n1 = halfspace_rep(&z).unwrap();
        let n2 = halfspace_rep(&z2).unwrap();
        prop_assert_eq!(n1.num_rows(), n2.num_rows());
        prop_assert!((n1.normals() - n2.normals()).amax() < 1e-9);
    }

    #[test]
    fn hull_contains_members(z in zonotope_strategy(2), beta in prop::collection::vec(-1.0..=1.0f64, 5)) {
        let x = z.point_at(&beta[..z.num_generators()]);
        prop_assert!(z.interval_hull().contains(&x, 1e-12));
    }

    #[test]
    fn erosion_is_the_largest_fitting_box(r in 1.0..30.0f64, s in 0.0..1.0f64) {
        let outer = Interval::symmetric(&[r]).unwrap();
        let inner = Interval::symmetric(&[r * s]).unwrap();
        let e = outer.erode(&inner).unwrap();
        prop_assert!(e.minkowski_sum(&inner).unwrap().is_subset_of(&outer, 1e-12));
        prop_assert!((e.upper()[0] - r * (1.0 - s)).abs() < 1e-12);
    }
}

//! Sampling oracles for the geometry kernel: erosion against its
//! definition, preimage membership equivalence, representation round trips,
//! and coverage margins. Random instances are seeded and 2-D.

use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setcert::geom::{
    boundary_segments, convex_hull, hrep, union_covers_with_margin, AxisBox, HPolytope, PolyUnion,
};

/// Random full-dimensional convex polygon: hull of `n` points in a box.
fn random_polygon(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> HPolytope {
    loop {
        let pts: Vec<DVector<f64>> = (0..n)
            .map(|_| {
                dvector![
                    rng.gen_range(-half_width..half_width),
                    rng.gen_range(-half_width..half_width)
                ]
            })
            .collect();
        let hull = convex_hull(&pts).unwrap();
        if hull.len() >= 3 {
            let poly = hrep(&hull).unwrap();
            if !poly.is_empty() {
                return poly;
            }
        }
    }
}

fn sample_in_bbox(rng: &mut ChaCha8Rng, bb: &AxisBox) -> DVector<f64> {
    dvector![
        rng.gen_range(bb.lower[0]..=bb.upper[0]),
        rng.gen_range(bb.lower[1]..=bb.upper[1])
    ]
}

#[test]
fn erosion_soundness_and_maximality() {
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    for _ in 0..40 {
        let p = random_polygon(&mut rng, 8, 3.0);
        let w = random_polygon(&mut rng, 5, 0.3);
        let e = match p.erode(&w) {
            Ok(e) if !e.is_empty() => e,
            _ => continue,
        };
        let w_verts = w.vertices().unwrap();
        let bbp = p.bbox().unwrap();
        let mut sound = 0;
        let mut maximal = 0;
        while sound < 250 || maximal < 50 {
            let x = sample_in_bbox(&mut rng, &bbp);
            if e.contains(&x, 0.0) && sound < 250 {
                sound += 1;
                for v in &w_verts {
                    assert!(p.contains(&(&x + v), 1e-7), "erosion unsound at {x:?} + {v:?}");
                }
            } else if p.contains(&x, 0.0) && e.violation(&x) > 1e-6 && maximal < 50 {
                maximal += 1;
                let worst = w_verts
                    .iter()
                    .map(|v| p.violation(&(&x + v)))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(
                    worst > 1e-7,
                    "point outside the erosion must have an escaping vertex: {x:?}"
                );
            }
        }
    }
}

#[test]
fn preimage_membership_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    for _ in 0..40 {
        let p = random_polygon(&mut rng, 8, 2.0);
        let m = loop {
            let cand: DMatrix<f64> = dmatrix![
                rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5);
                rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)
            ];
            if cand.determinant().abs() > 0.2 {
                break cand;
            }
        };
        let pre = p.linear_preimage(&m).unwrap();
        let bb = pre.bbox().unwrap_or_else(|_| AxisBox::new(vec![-4.0, -4.0], vec![4.0, 4.0]));
        let wide = AxisBox::new(
            vec![bb.lower[0] - 1.0, bb.lower[1] - 1.0],
            vec![bb.upper[0] + 1.0, bb.upper[1] + 1.0],
        );
        let mut checked = 0;
        while checked < 250 {
            let x = sample_in_bbox(&mut rng, &wide);
            let image = &m * &x;
            // Skip the tolerance band around either boundary.
            if pre.violation(&x).abs() < 1e-6 || p.violation(&image).abs() < 1e-6 {
                continue;
            }
            checked += 1;
            assert_eq!(
                pre.contains(&x, 1e-7),
                p.contains(&image, 1e-7),
                "preimage membership mismatch at {x:?}"
            );
        }
    }
}

#[test]
fn representation_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    for _ in 0..40 {
        let p = random_polygon(&mut rng, 10, 2.5);
        let v = p.vrep().unwrap();
        let back = hrep(&v).unwrap();
        let bb = p.bbox().unwrap();
        let mut checked = 0;
        while checked < 200 {
            let x = sample_in_bbox(&mut rng, &bb);
            if p.violation(&x).abs() < 1e-6 || back.violation(&x).abs() < 1e-6 {
                continue;
            }
            checked += 1;
            assert_eq!(p.contains(&x, 1e-7), back.contains(&x, 1e-7));
        }
        // Vertex set round trip: same extreme points up to tolerance.
        let v2 = back.vrep().unwrap();
        assert_eq!(v.len(), v2.len());
        for a in v.to_vectors() {
            assert!(
                v2.to_vectors().iter().any(|b| (&a - b).norm() < 1e-7),
                "vertex {a:?} lost in round trip"
            );
        }
    }
}

#[test]
fn hull_of_disc_samples_touches_the_rim() {
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    let pts: Vec<DVector<f64>> = (0..1000)
        .map(|_| {
            // Uniform in the unit disc by rejection.
            loop {
                let x = dvector![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                if x.norm() <= 1.0 {
                    break x;
                }
            }
        })
        .collect();
    let hull = convex_hull(&pts).unwrap();
    let max_norm = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    for v in hull.to_vectors() {
        assert!(v.norm() > 0.8 * max_norm, "hull vertex far from the rim: {v:?}");
    }
}

#[test]
fn coverage_margin_implies_boundary_clearance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let eps = 0.05;
    for _ in 0..10 {
        let inner = random_polygon(&mut rng, 7, 1.0);
        // Cover with two overlapping shifted copies of an inflated hull.
        let fat = inner.inflate(3.0 * eps);
        let union = PolyUnion::new(vec![fat.clone(), fat.inflate(eps)]);
        if !union_covers_with_margin(&inner, &union, eps) {
            continue;
        }
        let segs = boundary_segments(&union, 32).unwrap();
        let bb = inner.bbox().unwrap();
        let mut checked = 0;
        while checked < 100 {
            let x = sample_in_bbox(&mut rng, &bb);
            if !inner.contains(&x, 0.0) {
                continue;
            }
            checked += 1;
            let d = segs
                .iter()
                .map(|[p, q]| {
                    let diff = &x - setcert::geom::project_onto_segment(&x, p, q);
                    diff.norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!(d >= eps / 2.0, "inner point {x:?} is {d} from the union boundary");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Distance to a union is 1-Lipschitz in the query point.
    #[test]
    fn union_distance_is_lipschitz(
        ax in -2.0_f64..2.0, ay in -2.0_f64..2.0,
        bx in -2.0_f64..2.0, by in -2.0_f64..2.0,
    ) {
        let u = PolyUnion::new(vec![
            AxisBox::new(vec![-1.0, -1.0], vec![0.2, 0.5]).to_hpolytope(),
            AxisBox::new(vec![0.0, -0.5], vec![1.0, 1.0]).to_hpolytope(),
        ]);
        let a = dvector![ax, ay];
        let b = dvector![bx, by];
        let da = u.dist_point(&a);
        let db = u.dist_point(&b);
        prop_assert!((da - db).abs() <= (&a - &b).norm() + 1e-9);
    }

    /// Erosion then membership: x in P (-) W implies x + w in P for box corners.
    #[test]
    fn erosion_soundness_for_boxes(
        hx in 0.5_f64..3.0, hy in 0.5_f64..3.0,
        wx in 0.01_f64..0.4, wy in 0.01_f64..0.4,
        px in -1.0_f64..1.0, py in -1.0_f64..1.0,
    ) {
        let p = AxisBox::new(vec![-hx, -hy], vec![hx, hy]).to_hpolytope();
        let w = AxisBox::new(vec![-wx, -wy], vec![wx, wy]).to_hpolytope();
        let e = p.erode(&w).unwrap();
        prop_assume!(!e.is_empty());
        let x = dvector![px * (hx - wx).max(0.0), py * (hy - wy).max(0.0)];
        prop_assume!(e.contains(&x, 0.0));
        for v in w.vertices().unwrap() {
            prop_assert!(p.contains(&(&x + &v), 1e-9));
        }
    }
}

//! End-to-end checks of the controllable-set machinery on the two linear
//! benchmark systems: a two-mode system whose seed ball is not invariant
//! (an invariant union appears after three iterations) and a four-mode
//! system contractive after one.

use nalgebra::{dmatrix, dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use setcert::control::{batch_simulate, simulate, SwitchingLaw};
use setcert::geom::{regular_polygon, union_covers_with_margin, AxisBox, BallFit, PolyUnion};
use setcert::reach::{
    algorithm1, controllable_set_mode, domain_approximation, is_rcis, kappa, BoundaryConfig,
    Certificate, CertificateKind, LFunction, ReachLadder,
};
use setcert::sysmodel::{LinearSwitchedSystem, SystemModel};
use std::sync::OnceLock;

fn two_mode_system() -> LinearSwitchedSystem {
    LinearSwitchedSystem::new(
        vec![dmatrix![0.3, -1.01; -0.5, -0.8], dmatrix![-0.4, 1.2; 0.9, -0.5]],
        AxisBox::new(vec![-6.0, -6.0], vec![6.0, 6.0]),
        AxisBox::new(vec![-0.1, -0.1], vec![0.1, 0.1]).to_hpolytope(),
    )
    .unwrap()
}

fn four_mode_system() -> LinearSwitchedSystem {
    LinearSwitchedSystem::new(
        vec![
            dmatrix![-0.3912, 0.9743; -1.0409, 0.1366],
            dmatrix![0.0609, 1.0481; -0.8837, 0.5669],
            dmatrix![0.9743, 0.3912; 0.1366, 1.0409],
            dmatrix![-1.0481, 0.0609; -0.5668, -0.8837],
        ],
        AxisBox::new(vec![-3.0, -10.0], vec![4.0, 10.0]),
        regular_polygon(0.05, 16, BallFit::Circumscribed),
    )
    .unwrap()
}

fn seed_ball() -> setcert::geom::HPolytope {
    regular_polygon(1.0, 16, BallFit::Inscribed)
}

fn two_mode_ladder() -> &'static (Certificate, ReachLadder, LFunction) {
    static CELL: OnceLock<(Certificate, ReachLadder, LFunction)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (cert, mut ladder) = algorithm1(&two_mode_system(), &seed_ball(), 6, 1e-6).unwrap();
        let cfg = BoundaryConfig::default();
        ladder.compute_h(&cfg);
        let lf = LFunction::build(&ladder, &cfg).unwrap();
        (cert, ladder, lf)
    })
}

fn four_mode_ladder() -> &'static (Certificate, ReachLadder, LFunction) {
    static CELL: OnceLock<(Certificate, ReachLadder, LFunction)> = OnceLock::new();
    CELL.get_or_init(|| {
        let (cert, mut ladder) = algorithm1(&four_mode_system(), &seed_ball(), 3, 1e-6).unwrap();
        let cfg = BoundaryConfig::default();
        ladder.compute_h(&cfg);
        let lf = LFunction::build(&ladder, &cfg).unwrap();
        (cert, ladder, lf)
    })
}

#[test]
fn two_mode_counts_and_verdicts() {
    let (cert, ladder, _) = two_mode_ladder();
    assert_eq!(cert.kind, CertificateKind::Rcis);
    assert_eq!(cert.rcis_at, Some(3));
    assert_eq!(cert.rcis_polytope_count, Some(14));
    assert_eq!(cert.rccs_at, None, "no contractive certificate at this horizon");
    assert_eq!(cert.polytope_count, 126);
    let computed: Vec<usize> = ladder.meta.iter().map(|m| m.computed).collect();
    assert_eq!(computed, vec![1, 2, 4, 8, 16, 32, 64], "q^k recursion bookkeeping");
    // Through the invariant-set iteration no part has been dropped yet.
    for k in 1..=3 {
        assert_eq!(ladder.meta[k].stored, ladder.meta[k].computed);
    }
}

#[test]
fn two_mode_found_union_is_invariant_but_seed_is_not() {
    let (cert, ladder, _) = two_mode_ladder();
    let sys = two_mode_system();
    assert_eq!(ladder.cumulative(cert.rcis_at.unwrap()).len(), 14);
    let omega_hat = ladder.invariant_candidate(cert.rcis_at.unwrap());
    assert!(is_rcis(&sys, &omega_hat).unwrap());
    assert!(!is_rcis(&sys, &PolyUnion::singleton(seed_ball())).unwrap());
}

#[test]
fn controllable_set_definition_oracle() {
    // Membership in the mode-wise controllable set must mean: every vertex
    // uncertainty keeps the one-step successor in the target.
    let sys = two_mode_system();
    let target = PolyUnion::singleton(seed_ball());
    let corners = sys.uncertainty_vertices().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for sigma in 1..=2 {
        let c = controllable_set_mode(&sys, &target, sigma).unwrap();
        assert_eq!(c.len(), 1);
        let bb = c.parts[0].bbox().unwrap();
        let mut hits = 0;
        while hits < 2000 {
            let x = dvector![
                rng.gen_range(bb.lower[0]..=bb.upper[0]),
                rng.gen_range(bb.lower[1]..=bb.upper[1])
            ];
            if !c.parts[0].contains(&x, 0.0) {
                continue;
            }
            hits += 1;
            for w in &corners {
                let y = sys.step(&x, sigma, w).unwrap();
                assert!(
                    target.contains_point(&y, 1e-7),
                    "sigma={sigma} x={x:?} w={w:?} left the target"
                );
            }
        }
    }
}

#[test]
fn domain_approximation_joins_levels() {
    let (_, ladder, _) = two_mode_ladder();
    let d = domain_approximation(ladder);
    assert_eq!(d.len(), ladder.meta[1..].iter().map(|m| m.stored).sum::<usize>());
    assert!(d.contains_point(&dvector![-1.9, 0.0], 1e-9));
}

#[test]
fn kappa_minimality_on_random_domain_points() {
    let (_, ladder, _) = two_mode_ladder();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut found = 0;
    while found < 300 {
        let x = dvector![rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0)];
        let Some(k) = kappa(ladder, &x) else { continue };
        found += 1;
        assert!(ladder.levels[k].contains_point(&x, 1e-9));
        if k >= 1 {
            assert!(!ladder.levels[k - 1].contains_point(&x, 1e-9), "kappa not minimal at {x:?}");
        }
    }
}

#[test]
fn four_mode_contractive_after_one_iteration() {
    let (cert, ladder, _) = four_mode_ladder();
    assert_eq!(cert.kind, CertificateKind::Rccs);
    assert_eq!(cert.rccs_at, Some(1));
    assert_eq!(cert.rcis_at, Some(1));
    let stored: Vec<usize> = ladder.meta.iter().map(|m| m.stored).collect();
    assert_eq!(stored, vec![1, 4, 16, 64], "all q^k parts survive");
    // The first iterate sits strictly inside the second.
    for p in &ladder.levels[1].parts {
        assert!(union_covers_with_margin(p, &ladder.levels[2], 1e-6));
    }
}

#[test]
fn four_mode_strict_nesting_and_h_positive() {
    let (_, ladder, _) = four_mode_ladder();
    // Nesting on random samples of the previous level.
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 1..ladder.levels.len() {
        let mut checked = 0;
        while checked < 1000 {
            let x = dvector![rng.gen_range(-3.0..4.0), rng.gen_range(-4.0..4.0)];
            if !ladder.levels[k - 1].contains_point(&x, 1e-9) {
                continue;
            }
            checked += 1;
            assert!(
                ladder.levels[k].contains_point(&x, 1e-9),
                "level {k} does not contain a point of level {}",
                k - 1
            );
        }
        let h = ladder.h_values[k].expect("h computed for small levels");
        assert!(h > 0.0, "strict nesting gives positive h({k}), got {h}");
    }
}

#[test]
fn four_mode_level_values_increase_and_satisfy_decrease_chain() {
    let (_, ladder, lf) = four_mode_ladder();
    for k in 1..lf.level_values.len() {
        assert!(
            lf.level_values[k] > lf.level_values[k - 1],
            "shell values strictly increase under contractivity: {:?}",
            lf.level_values
        );
    }
    // Boundary-to-seed distances dominate the previous value plus the
    // boundary gap, up to discretization slack.
    let tol = 5e-3;
    for k in 1..ladder.levels.len() - 1 {
        let h_next = ladder.h_values[k + 1].unwrap();
        assert!(
            lf.level_values[k] <= lf.level_values[k + 1] - h_next + tol,
            "k={k}: {} vs {} - {h_next}",
            lf.level_values[k],
            lf.level_values[k + 1]
        );
    }
    assert!(lf.l_bar >= *lf.level_values.last().unwrap());
}

#[test]
fn switching_law_decreases_kappa_for_all_vertex_noises() {
    let (cert, ladder, _) = two_mode_ladder();
    let sys = SystemModel::Linear(two_mode_system());
    let target = ladder.cumulative(cert.rcis_at.unwrap());
    let law = SwitchingLaw::from_ladder(&sys, ladder, target);
    let points = sys.certification_points();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut checked = 0;
    while checked < 200 {
        let x = dvector![rng.gen_range(-4.0..4.0), rng.gen_range(-3.0..3.0)];
        let Some(k) = kappa(ladder, &x) else { continue };
        if k == 0 {
            continue;
        }
        checked += 1;
        let sigma = law.select_mode(&x).unwrap();
        for w in &points {
            let y = sys.step(&x, sigma, w).unwrap();
            let ky = kappa(ladder, &y).expect("vertex successor stays in the ladder");
            assert!(ky <= k - 1, "kappa rose from {k} to {ky} at {x:?}");
        }
    }
}

#[test]
fn closed_loop_converges_and_l_never_increases_outside_target() {
    let (cert, ladder, lf) = two_mode_ladder();
    let sys = SystemModel::Linear(two_mode_system());
    let target = ladder.cumulative(cert.rcis_at.unwrap());
    let law = SwitchingLaw::from_ladder(&sys, ladder, target);
    let x0 = dvector![-1.9, 0.0];
    let (runs, summary) = batch_simulate(&law, Some(lf), &x0, 50, 25, 999).unwrap();
    assert_eq!(summary.converged, 25, "{summary:?}");
    assert!(summary.max_l_increase_outside.unwrap() <= 1e-7);
    assert!(runs.iter().all(|t| t.constraint_violation_at.is_none()));
}

#[test]
fn degenerate_uncertainty_keeps_invariant_set() {
    // W = {0}-like (tiny box), seed invariant for the contraction mode:
    // trajectories starting inside stay inside.
    let sys = LinearSwitchedSystem::new(
        vec![dmatrix![0.5, 0.0; 0.0, 0.5], dmatrix![0.0, -1.0; 1.0, 0.0]],
        AxisBox::new(vec![-4.0, -4.0], vec![4.0, 4.0]),
        AxisBox::new(vec![-1e-9, -1e-9], vec![1e-9, 1e-9]).to_hpolytope(),
    )
    .unwrap();
    let seed = regular_polygon(1.0, 16, BallFit::Inscribed);
    let (cert, ladder) = algorithm1(&sys, &seed, 2, 1e-6).unwrap();
    assert_eq!(cert.rcis_at, Some(1));
    let model = SystemModel::Linear(sys);
    let target = ladder.cumulative(1);
    let law = SwitchingLaw::from_ladder(&model, &ladder, target);
    let traj = simulate(&law, None, &dvector![0.5, 0.0], 40, 4).unwrap();
    assert_eq!(traj.entered_target_at, Some(0));
    assert!(traj.remained);
    // Deterministic noise: two different seeds give identical states.
    let traj2 = simulate(&law, None, &dvector![0.5, 0.0], 40, 5).unwrap();
    let d: f64 = traj
        .states
        .iter()
        .zip(&traj2.states)
        .map(|(a, b)| (a[0] - b[0]).abs() + (a[1] - b[1]).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-6, "degenerate noise makes runs identical up to 1e-9 draws");
}

#[test]
fn l_value_is_constant_per_shell_and_capped_outside() {
    let (_, ladder, lf) = four_mode_ladder();
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let mut per_shell: Vec<Vec<f64>> = vec![Vec::new(); ladder.levels.len()];
    let mut outside = 0;
    for _ in 0..20000 {
        let x: DVector<f64> = dvector![rng.gen_range(-3.0..4.0), rng.gen_range(-5.0..5.0)];
        match kappa(ladder, &x) {
            Some(k) => per_shell[k].push(lf.value_levels(&ladder.levels, &x)),
            None => {
                assert_eq!(lf.value_levels(&ladder.levels, &x), lf.l_bar);
                outside += 1;
            }
        }
    }
    assert!(outside > 0);
    for (k, vals) in per_shell.iter().enumerate() {
        if let Some(first) = vals.first() {
            assert!(vals.iter().all(|v| v == first), "L constant on shell {k}");
        }
    }
}

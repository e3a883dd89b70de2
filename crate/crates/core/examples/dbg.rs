use nalgebra::{dmatrix, dvector};
use setcert::control::{batch_simulate, SwitchingLaw};
use setcert::geom::{regular_polygon, AxisBox, BallFit};
use setcert::reach::{algorithm1, kappa, BoundaryConfig, LFunction};
use setcert::sysmodel::{LinearSwitchedSystem, SystemModel};
use std::time::Instant;

fn main() {
    let sys = LinearSwitchedSystem::new(
        vec![dmatrix![0.3, -1.01; -0.5, -0.8], dmatrix![-0.4, 1.2; 0.9, -0.5]],
        AxisBox::new(vec![-6.0, -6.0], vec![6.0, 6.0]),
        AxisBox::new(vec![-0.1, -0.1], vec![0.1, 0.1]).to_hpolytope(),
    ).unwrap();
    let omega0 = regular_polygon(1.0, 16, BallFit::Inscribed);
    let (cert, mut ladder) = algorithm1(&sys, &omega0, 6, 1e-6).unwrap();
    ladder.compute_h(&BoundaryConfig::default());
    let lf = LFunction::build(&ladder, &BoundaryConfig::default()).unwrap();
    let target = ladder.cumulative(cert.rcis_at.unwrap());
    let model = SystemModel::Linear(sys);
    let law = SwitchingLaw::from_ladder(&model, &ladder, target);
    let x0 = dvector![-1.9, 0.0];
    let t = Instant::now();
    let (runs, summary) = batch_simulate(&law, Some(&lf), &x0, 50, 100, 2024).unwrap();
    println!("{summary:?} ({:.2}s)", t.elapsed().as_secs_f64());
    // kappa decrease along all runs for all realized transitions outside level 0
    let mut viol = 0;
    for tr in &runs {
        for i in 0..tr.modes.len() {
            let k0 = kappa(&ladder, &tr.state(i));
            let k1 = kappa(&ladder, &tr.state(i + 1));
            if let (Some(k0), Some(k1)) = (k0, k1) {
                if k0 >= 1 && k1 > k0 - 1 { viol += 1; }
            }
        }
    }
    println!("kappa-decrease violations (realized noises): {viol}");
    println!("first run entered at {:?}, remained {}", runs[0].entered_target_at, runs[0].remained);
}

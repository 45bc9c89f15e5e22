//! End-to-end run of the Timoshenko beam: validation, kappa, certificate,
//! simulation, and the soundness comparison.

use num_complex::Complex64;
use phstab::analysis::compare_certificate;
use phstab::certificates::decay_certificate;
use phstab::model::{boundary_dissipation_kappa, preset_timoshenko, validate, Endpoint};
use phstab::solver::{simulate, Grid, SimOptions};
use std::f64::consts::PI;

#[test]
fn certified_beam_decay_is_sound_against_simulation() {
    let sys = preset_timoshenko("1", "1", "1", "1", 1.0, 1.0).unwrap();
    let rep = validate(&sys, 5, 5, 12.0).unwrap();
    assert!(rep.generator_ok, "failing: {:?}", rep.failing());
    assert!(rep.contractive_ok);

    let kappa = boundary_dissipation_kappa(&sys, &rep.bounds, Endpoint::B).unwrap();
    assert!((kappa - 0.5).abs() < 1e-8, "kappa = {kappa}");

    let cert = decay_certificate(&sys, &rep.bounds, &rep, kappa, &[8.0, 10.0, 12.0]).unwrap();
    assert!(cert.omega < 0.0);
    // kappa_tau = 2 ||P0|| = 2 for the all-ones beam, so C_8 = e^2 / 6
    assert!((cert.kappa_tau - 2.0).abs() < 1e-10);

    // interior bumps in all four components satisfy both boundary rows
    let grid = Grid::new(sys.interval, 200).unwrap();
    let x0: Vec<Complex64> = grid
        .nodes()
        .iter()
        .flat_map(|&z| {
            let s = (PI * z).sin().powi(2);
            [
                Complex64::new(0.8 * s, 0.0),
                Complex64::new(0.3 * s, 0.0),
                Complex64::new(-0.5 * s, 0.0),
                Complex64::new(0.4 * s, 0.0),
            ]
        })
        .collect();
    let opts = SimOptions {
        t_end: cert.tau + 4.0,
        cells: 200,
        cfl: 0.5,
        record_stride: 32,
        record_states: false,
    };
    let traj = simulate(&sys, &rep.bounds, &x0, &opts).unwrap();
    assert!(traj.final_energy() < traj.initial_energy());

    let cmp = compare_certificate(&traj, &cert).unwrap();
    assert!(
        cmp.soundness.pass,
        "soundness worst ratio {:.6} over {} pairs",
        cmp.soundness.worst_ratio, cmp.soundness.pairs_checked
    );
    assert!(cmp.soundness.pairs_checked > 0);
}

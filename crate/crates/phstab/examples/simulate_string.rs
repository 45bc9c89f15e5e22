//! Simulate the vibrating string three ways: conservative, matched damper
//! (finite-time extinction), and half-matched damper.
//!
//! Run with: `cargo run --release --example simulate_string`

use phstab::model::{preset_string, validate};
use phstab::solver::{sample_initial, simulate, Grid, SimOptions};

fn run(k: f64, t_end: f64) {
    let sys = preset_string("1", "1", k).unwrap();
    let rep = validate(&sys, 5, 5, t_end.max(1.0)).unwrap();
    assert!(rep.generator_ok);

    let cells = 400;
    let grid = Grid::new(sys.interval, cells).unwrap();
    // momentum bump, zero strain; interior support keeps it compatible
    let x0 = sample_initial(
        &sys,
        &[
            phstab::expr::parse("sin(3.141592653589793*zeta)^2").unwrap(),
            phstab::expr::parse("0").unwrap(),
        ],
        &grid,
    )
    .unwrap();
    let opts = SimOptions {
        t_end,
        cells,
        cfl: 0.5,
        record_stride: 200,
        record_states: false,
    };
    let traj = simulate(&sys, &rep.bounds, &x0, &opts).unwrap();

    println!("damper k = {k}:");
    for (t, e) in traj.times.iter().zip(&traj.energies) {
        println!("  t = {t:6.3}   E = {e:.6e}");
    }
    println!(
        "  -> E(end)/E(0) = {:.3e}\n",
        traj.final_energy() / traj.initial_energy()
    );
}

fn main() {
    run(0.0, 5.0); // conservative: energy is flat to discretization error
    run(1.0, 2.5); // matched impedance: all waves exit through b by t = 2
    run(0.5, 5.0); // partial absorption: geometric decay per reflection
}

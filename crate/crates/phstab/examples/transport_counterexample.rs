//! Boundary dissipation alone does not force exponential decay: two coupled
//! transport lines with alternating speeds stay bounded (or grow) even
//! though every loop passes a damping-style gain.
//!
//! Speeds switch between (2, 1) and (1, 2) every half period; line 2 feeds
//! line 1 through a gain `alpha`. The exact characteristics solver measures
//! the per-period growth factor; the critical gain sits at the measured
//! value, and the idealized constant-profile shortcut would predict the
//! factor 2*alpha.
//!
//! Run with: `cargo run --release --example transport_counterexample`

use phstab::model::preset_counterexample;
use phstab::transportnet::{
    growth_sequence, l2_norm_cross_checked, measured_critical_alpha, GrowthVerdict, Tracer,
};

fn main() {
    let critical = measured_critical_alpha(30);
    println!("measured critical coupling gain: {critical:.12}\n");

    for alpha in [0.1, critical, 0.6] {
        let net = preset_counterexample(alpha).network();
        let seq = growth_sequence(&net, 40);
        let verdict = match seq.verdict {
            GrowthVerdict::Decaying => "decaying",
            GrowthVerdict::Bounded => "bounded",
            GrowthVerdict::Growing => "growing",
        };
        println!(
            "alpha = {alpha:<12.9} -> {verdict:8} measured factor {:.9} (idealized 2a = {:.3})",
            seq.measured_factor,
            2.0 * alpha
        );
        print!("  norms:");
        for k in [0, 1, 2, 5, 10, 20, 40] {
            print!(" |x({k})| = {:.4e}", seq.norms[k]);
        }
        println!("\n");
    }

    // the two independent evaluation routes agree to rational exactness
    let net = preset_counterexample(0.6).network();
    let check = l2_norm_cross_checked(&net, 3.0, 10_000).unwrap();
    println!(
        "dual-route norm at t = 3: forward splicer {:.12}, backward tracer {:.12}",
        check.exact, check.riemann
    );

    // profiles after one period are piecewise constant, not uniform: sample
    // line 1 across its three plateaus
    let tr = Tracer::new(&net);
    println!("\nline-1 profile at t = 1 (alpha = 0.6):");
    for z in [0.25, 0.625, 0.875] {
        println!("  x1(1, {z:5.3}) = {:.6}", tr.trace_value_f64(0, 1.0, z));
    }
    println!("(the idealized picture would make this constant; the exact one is not)");
}

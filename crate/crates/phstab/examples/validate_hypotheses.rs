//! Check the generator hypotheses and the contractivity conditions for a
//! damped vibrating string, then watch them fail on purpose.
//!
//! Run with: `cargo run --example validate_hypotheses`

use phstab::model::{preset_string, validate, Verdict};

fn print_report(title: &str, rep: &phstab::ValidationReport) {
    println!("== {title}");
    for r in &rep.records {
        let mark = match r.verdict {
            Verdict::Pass => "ok  ",
            Verdict::Fail => "FAIL",
            Verdict::Unknown => "??  ",
        };
        println!("  [{mark}] {}", r.name);
        if r.verdict == Verdict::Fail {
            println!("         {}", r.detail);
        }
    }
    println!(
        "  generator_ok = {}, contractive_ok = {}",
        rep.generator_ok, rep.contractive_ok
    );
    println!(
        "  resolved bounds: m = {:.4}, M = {:.4}, M_T = {:.4}, L_zeta = {:.4}, K_max = {:.4}\n",
        rep.bounds.m, rep.bounds.m_upper, rep.bounds.m_t, rep.bounds.l_zeta, rep.bounds.k_max
    );
}

fn main() {
    // the damped unit string: everything passes, evolution is contractive
    let sys = preset_string("1", "1", 1.0).unwrap();
    let rep = validate(&sys, 17, 9, 10.0).unwrap();
    print_report("unit string, damper k = 1", &rep);

    // slowly stiffening string: still well-posed, but the energy norm can
    // grow, so contractivity fails (with a witness sample)
    let sys = preset_string("1", "1 + 0.5*(1-exp(-t))", 1.0).unwrap();
    let rep = validate(&sys, 17, 9, 10.0).unwrap();
    print_report("string with increasing tension", &rep);
    if let Some(r) = rep.records.iter().find(|r| r.verdict == Verdict::Fail) {
        if let Some(w) = &r.witness {
            println!(
                "  witness: eigenvalue {:.4e} at (t, zeta) = ({:.3}, {:.3})\n",
                w.eigenvalue,
                w.t.unwrap_or(f64::NAN),
                w.zeta.unwrap_or(f64::NAN)
            );
        }
    }

    // a broken P0 fails hypothesis (i) outright
    let mut sys = preset_string("1", "1", 1.0).unwrap();
    sys.p0 = phstab::Mat::from_real_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
    let rep = validate(&sys, 5, 5, 1.0).unwrap();
    print_report("string with an anti-dissipative P0", &rep);
}

//! Tour of the coefficient expression language used in config files.
//!
//! Run with: `cargo run --example coefficient_expressions`

use phstab::expr::parse;

fn show(src: &str, t: f64, zeta: f64) {
    match parse(src) {
        Ok(ast) => match ast.eval(t, zeta) {
            Ok(v) => println!("  {src:<40} @ (t={t}, zeta={zeta})  =  {v}"),
            Err(e) => println!("  {src:<40} @ (t={t}, zeta={zeta})  !  {e}"),
        },
        Err(e) => println!("  {src:<40} parse error: {e}"),
    }
}

fn main() {
    println!("arithmetic and precedence (^ binds tightest, left-associative):");
    show("1 + 2*t", 3.0, 0.0);
    show("2^3^2", 0.0, 0.0);
    show("-2^2", 0.0, 0.0);
    show("8/4/2", 0.0, 0.0);

    println!("\nfunctions:");
    show("exp(-t)*sin(zeta)", 0.0, std::f64::consts::FRAC_PI_2);
    show("max(0.1, 1 - 0.5*t)", 4.0, 0.0);
    show("sqrt(abs(zeta - 0.5))", 0.0, 0.25);

    println!("\npiecewise schedules (first matching branch wins):");
    show("piecewise(t < 0.5 : 2 ; 1)", 0.25, 0.0);
    show("piecewise(t < 0.5 : 2 ; 1)", 0.5, 0.0);
    show("piecewise(zeta < 0.3 : 1 ; zeta < 0.7 : 2 ; 3)", 0.0, 0.5);

    println!("\nreported evaluation errors:");
    show("1/zeta", 1.0, 0.0);
    show("sqrt(t - 1)", 0.0, 0.0);

    println!("\nreported parse errors (byte offsets):");
    show("1 + * 2", 0.0, 0.0);
    show("foo(2)", 0.0, 0.0);
    show("min(1)", 0.0, 0.0);
}

//! Three-state quadratic system with a nonlinear output.
//!
//! Runs the built-in `experiment1` preset and prints the fitted error
//! rates of the Koopman observer and of the linearized Luenberger
//! observer. Pass a directory to also write the CSV/JSON outputs.
//!
//!     cargo run --release --example experiment1 -- out/experiment1

use koopman_observer::cli::{self, presets};
use koopman_observer::sim::run_experiment;

fn main() {
    let config = presets::load("experiment1").expect("preset parses");
    let result = match std::env::args().nth(1) {
        Some(dir) => cli::run(&config, dir.as_ref()).expect("run succeeds"),
        None => run_experiment(&config.to_experiment().unwrap()).expect("run succeeds"),
    };
    let s = &result.synthesis;
    println!("N_d = {}, N_beta = {}", s.n_d(), s.n_beta());
    println!("closed-loop poles of the unstable block:");
    for p in &s.achieved {
        println!("  {:.6}", p.re);
    }
    println!(
        "koopman rate  {:.4}  (residual {:.2e})",
        result.koopman_rate.rate, result.koopman_rate.residual
    );
    println!(
        "baseline rate {:.4}  (residual {:.2e})",
        result.baseline_rate.rate, result.baseline_rate.residual
    );
    let last = result.t.len() - 1;
    println!(
        "error at t = {}: koopman {:.3e}, baseline {:.3e}",
        result.t[last], result.err_koopman[last], result.err_baseline[last]
    );
}

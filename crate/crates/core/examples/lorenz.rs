//! Lorenz system near its stable origin, observed through `cos x1 + x2`
//! and `x1 + x3`, with a degree-6 observer.

use koopman_observer::cli::presets;
use koopman_observer::sim::run_experiment;

fn main() {
    let config = presets::load("lorenz").unwrap();
    let result = run_experiment(&config.to_experiment().unwrap()).unwrap();
    let s = &result.synthesis;
    println!("N_d = {}, N_beta = {}", s.n_d(), s.n_beta());
    println!("biorthonormality error {:.2e}", s.biorthonormality_error);
    println!("koopman rate  {:.4}", result.koopman_rate.rate);
    println!("baseline rate {:.4}", result.baseline_rate.rate);
    println!("max imaginary residue of the recovered state {:.2e}", result.max_imaginary_residue);

    // a coarse look at the two error curves
    for k in (0..result.t.len()).step_by(2000) {
        println!(
            "t = {:5.1}  |e_koopman| = {:.3e}  |e_baseline| = {:.3e}",
            result.t[k], result.err_koopman[k], result.err_baseline[k]
        );
    }
}

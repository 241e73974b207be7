//! The generator matrix against a finite-difference semigroup check: one
//! short complex RK4 step of the flow versus `M` applied to monomials.

use koopman_observer::basis::enumerate_basis;
use koopman_observer::cli::presets;
use koopman_observer::generator::{build_generator, semigroup_oracle_check};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let e = presets::load("experiment1").unwrap().to_experiment().unwrap();
    let ordering = enumerate_basis(3, 4).unwrap();
    let m = build_generator(&e.field, &ordering).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<Vec<Complex64>> = (0..10)
        .map(|_| {
            (0..3)
                .map(|_| Complex64::from_polar(rng.random_range(0.0..0.8), rng.random_range(0.0..6.3)))
                .collect()
        })
        .collect();
    let residual = semigroup_oracle_check(&e.field, &m, &points, 1e-6).unwrap();
    println!("N_d = {}, semigroup residual {residual:.3e}", ordering.len());
}

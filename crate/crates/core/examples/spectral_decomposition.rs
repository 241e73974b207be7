//! Eigenfunctions of the truncated generator for a small planar system,
//! checked against a dense eigensolve.

use koopman_observer::basis::enumerate_basis;
use koopman_observer::generator::{build_generator, equilibrium_spectrum, VectorField};
use koopman_observer::spectral::{decompose, numeric_spectrum_deviation};

fn main() {
    // x1' = -x1 + x2^2,  x2' = -2.3 x2 + x1 x2
    let field = VectorField::from_real_terms(
        2,
        vec![
            vec![(-1.0, vec![1, 0]), (1.0, vec![0, 2])],
            vec![(-2.3, vec![0, 1]), (1.0, vec![1, 1])],
        ],
    )
    .unwrap();
    let ordering = enumerate_basis(2, 4).unwrap();
    let m = build_generator(&field, &ordering).unwrap();
    let spec = equilibrium_spectrum(&field).unwrap();
    let d = decompose(&m, &spec).unwrap();

    println!("{} modes", d.len());
    for p in 0..d.len() {
        println!("  {}", d.label(p));
    }
    println!("max |M V - V Λ|          = {:.2e}", d.right_residual(&m));
    println!("max |W^H V - I|          = {:.2e}", d.biorthonormality_error());
    println!("lattice vs dense eigensolve {:.2e}", numeric_spectrum_deviation(&m, &d).unwrap());

    // the principal eigenfunction for λ = -1 picks up a z2^2 correction
    let phi = d.phi(0);
    for (alpha, c) in phi.terms() {
        if c.norm() > 1e-12 {
            println!("  φ_(1,0) coefficient of z^{alpha}: {:.6}", c.re);
        }
    }
}

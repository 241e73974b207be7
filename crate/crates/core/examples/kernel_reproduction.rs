//! The Hardy-space kernel on the polydisc reproduces point evaluation:
//! `⟨p, k_z⟩ = p(z)` for polynomials of degree at most `d`.

use koopman_observer::basis::{inner_product, kernel_coeffs, poly_eval, TaylorPoly};
use num_complex::Complex64;

fn main() {
    let d = 5;
    let p = TaylorPoly::from_terms(
        2,
        d,
        [
            (Complex64::new(0.5, 0.0), vec![0, 0]),
            (Complex64::new(1.0, -2.0), vec![1, 0]),
            (Complex64::new(-3.0, 0.5), vec![2, 3]),
            (Complex64::new(0.25, 0.0), vec![0, 5]),
        ],
    )
    .unwrap();
    let z = [Complex64::new(0.3, 0.4), Complex64::new(-0.6, 0.1)];
    let k = kernel_coeffs(&z, d).unwrap();
    let lhs = inner_product(&p, &k).unwrap();
    let rhs = poly_eval(&p, &z).unwrap();
    println!("<p, k_z> = {lhs:.12}");
    println!("p(z)     = {rhs:.12}");
    println!("|difference| = {:.2e}", (lhs - rhs).norm());
}

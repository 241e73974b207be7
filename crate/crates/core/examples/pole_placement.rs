//! Output-injection pole placement on a diagonal block, the way the
//! observer gain is computed, and on a linearization.

use koopman_observer::design::{place_poles, PlacementMethod, PlacementOptions};
use koopman_observer::linalg::{eigenvalues, CMatrix};
use num_complex::Complex64;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn main() {
    // three slow modes seen by two outputs
    let a = [c(-0.853), c(-1.706), c(-1.9796)];
    let cm = CMatrix::from_row_slice(2, 3, &[c(0.0), c(1.45), c(3.72), c(1.07), c(0.0), c(0.0)]);
    let targets = [c(-2.0), c(-2.1), c(-2.2)];

    for method in [PlacementMethod::Robust, PlacementMethod::RankOne] {
        let opts = PlacementOptions { method, seed: 7 };
        let l = place_poles(&a, &cm, &targets, &opts).unwrap();
        let mut closed = &l * &cm;
        for i in 0..3 {
            closed[(i, i)] += a[i];
        }
        let mut ev: Vec<f64> = eigenvalues(&closed).unwrap().iter().map(|z| z.re).collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        let norm = l.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        println!("{method:?}: |L|_F = {norm:.3}, closed-loop eigenvalues {ev:.6?}");
    }

    // an unobservable mode is refused by name
    let blind = CMatrix::from_row_slice(1, 2, &[c(1.0), c(0.0)]);
    match place_poles(&[c(-1.0), c(-2.0)], &blind, &[c(-3.0), c(-4.0)], &Default::default()) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("refused: {e}"),
    }
}

//! Assumption and criteria report without simulating, for both presets and
//! for a resonant system that must be rejected.

use koopman_observer::cli::{self, presets};

fn main() {
    for name in presets::names() {
        let c = presets::load(name).unwrap();
        let report = cli::check(&c);
        println!("--- {name}");
        print!("{}", report.text);
    }

    // eigenvalues -1 and -2 = 2·(-1) are resonant
    let mut c = presets::load("experiment1").unwrap();
    c.system.name = "resonant-toy".into();
    c.system.n = 2;
    c.system.vector_field = vec![
        vec![cli::config::Term { coeff: -1.0, alpha: vec![1, 0] }],
        vec![cli::config::Term { coeff: -2.0, alpha: vec![0, 1] }],
    ];
    c.output.components = vec![vec![cli::config::OutputTermConfig {
        kind: cli::config::OutputKind::Monomial,
        coeff: 1.0,
        alpha: Some(vec![1, 1]),
        variable: None,
    }]];
    c.observer.x0 = vec![0.1, 0.1];
    c.observer.xhat0 = vec![0.0, 0.0];
    c.baseline.targets = vec![-3.0, -4.0];
    let report = cli::check(&c);
    println!("--- resonant toy");
    print!("{}", report.text);
    println!("exit code would be {}", report.failure.map_or(0, |e| e.exit_code()));
}

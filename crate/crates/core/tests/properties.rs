use std::cmp::Ordering;

use koopman_observer::basis::{
    enumerate_basis, inner_product, kernel_coeffs, poly_eval, MultiIndex, TaylorPoly,
};
use koopman_observer::cli::presets;
use koopman_observer::design::{build_output_matrices, place_poles, OutputMap, OutputTerm, PlacementOptions};
use koopman_observer::generator::{
    build_generator, equilibrium_spectrum, semigroup_oracle_check, VectorField,
};
use koopman_observer::spectral::{check_observability_criteria, decompose, partition};
use num_complex::Complex64;
use proptest::prelude::*;

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

/// Graded, then the larger exponent at the first difference comes first.
fn reference_order(a: &[u32], b: &[u32]) -> Ordering {
    let (da, db): (u32, u32) = (a.iter().sum(), b.iter().sum());
    da.cmp(&db).then_with(|| {
        a.iter()
            .zip(b)
            .find(|(x, y)| x != y)
            .map_or(Ordering::Equal, |(x, y)| y.cmp(x))
    })
}

fn brute_force_count(n: usize, d: u32) -> usize {
    let mut count = 0;
    let mut e = vec![0u32; n];
    loop {
        let s: u32 = e.iter().sum();
        if s >= 1 && s <= d {
            count += 1;
        }
        let mut i = 0;
        loop {
            if i == n {
                return count;
            }
            e[i] += 1;
            if e[i] <= d {
                break;
            }
            e[i] = 0;
            i += 1;
        }
    }
}

fn field_from(n: usize, coeffs: &[(i8, Vec<u32>, usize)]) -> VectorField {
    let mut comps: Vec<Vec<(f64, Vec<u32>)>> = vec![Vec::new(); n];
    for (c, alpha, k) in coeffs {
        comps[k % n].push((*c as f64, alpha.clone()));
    }
    VectorField::from_real_terms(n, comps).unwrap()
}

fn term(n: usize) -> impl Strategy<Value = (i8, Vec<u32>, usize)> {
    (-5i8..=5, prop::collection::vec(0u32..=2, n), 0..n)
        .prop_filter("needs a non-constant monomial", |(_, a, _)| a.iter().sum::<u32>() >= 1)
}

fn disc_point(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((0.0..0.95f64, 0.0..std::f64::consts::TAU), n)
        .prop_map(|v| v.into_iter().map(|(r, t)| Complex64::from_polar(r, t)).collect())
}

fn separated(v: &[f64], gap: f64) -> bool {
    v.iter().enumerate().all(|(i, a)| v[i + 1..].iter().all(|b| (a - b).abs() >= gap))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ordering_is_total_and_counted(n in 1usize..=5, d in 1u32..=8) {
        let ord = enumerate_basis(n, d).unwrap();
        prop_assert_eq!(ord.len() as u64, binomial(n as u64 + d as u64, d as u64) - 1);
        prop_assert_eq!(ord.len(), brute_force_count(n, d));
        for w in ord.indices().windows(2) {
            prop_assert_eq!(reference_order(w[0].exponents(), w[1].exponents()), Ordering::Less);
            prop_assert_eq!(w[0].cmp(&w[1]), Ordering::Less);
            prop_assert_eq!(w[1].cmp(&w[0]), Ordering::Greater);
        }
    }

    #[test]
    fn kernel_reproduces_and_norm_is_positive(
        n in 1usize..=3,
        d in 1u32..=5,
        raw in prop::collection::vec((prop::collection::vec(0u32..=5, 3), -3.0..3.0f64, -3.0..3.0f64), 0..10),
        z in disc_point(3),
    ) {
        let terms: Vec<(Complex64, Vec<u32>)> = raw
            .iter()
            .map(|(a, re, im)| (Complex64::new(*re, *im), a[..n].to_vec()))
            .filter(|(_, a)| a.iter().sum::<u32>() <= d)
            .collect();
        let p = TaylorPoly::from_terms(n, d, terms.clone()).unwrap();
        let z = &z[..n];
        let lhs = inner_product(&p, &kernel_coeffs(z, d).unwrap()).unwrap();
        let rhs = poly_eval(&p, z).unwrap();
        let scale: f64 = terms.iter().map(|(c, a)| c.norm() * MultiIndex::new(a.clone()).monomial(z).norm()).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * scale.max(1e-300));

        let norm = inner_product(&p, &p).unwrap();
        prop_assert!(norm.re >= 0.0 && norm.im.abs() <= 1e-12 * norm.re.max(1.0));
        let all_zero = p.terms().all(|(_, c)| *c == Complex64::new(0.0, 0.0));
        prop_assert_eq!(norm.re == 0.0, all_zero);
    }

    #[test]
    fn generator_is_linear_and_triangular(
        f in prop::collection::vec(term(2), 1..6),
        g in prop::collection::vec(term(2), 1..6),
        d in 1u32..=4,
    ) {
        let ord = enumerate_basis(2, d).unwrap();
        let ff = field_from(2, &f);
        let gg = field_from(2, &g);
        let sum: Vec<_> = f.iter().chain(&g).cloned().collect();
        let mf = build_generator(&ff, &ord).unwrap();
        let mg = build_generator(&gg, &ord).unwrap();
        let ms = build_generator(&field_from(2, &sum), &ord).unwrap();
        prop_assert_eq!(ms.entries(), &(mf.entries() + mg.entries()));
        for (row, a) in ord.indices().iter().enumerate() {
            for (col, gam) in ord.indices().iter().enumerate() {
                if a.degree() < gam.degree() {
                    prop_assert_eq!(ms.entries()[(row, col)], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn lowering_beta_only_adds_modes(b1 in -7.0..-0.1f64, b2 in -7.0..-0.1f64) {
        let e = presets::load("experiment1").unwrap().to_experiment().unwrap();
        let ord = enumerate_basis(3, 4).unwrap();
        let d = decompose(&build_generator(&e.field, &ord).unwrap(), &equilibrium_spectrum(&e.field).unwrap()).unwrap();
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        if let (Ok(high), Ok(low)) = (partition(&d, hi), partition(&d, lo)) {
            prop_assert!(high.plus.iter().all(|p| low.plus.contains(p)));
            prop_assert_eq!(low.plus.len() + low.minus.len(), d.len());
        }
    }

    #[test]
    fn placement_succeeds_exactly_when_every_mode_is_seen(
        a in prop::collection::vec(-3.0..-0.1f64, 1..=4),
        targets_raw in prop::collection::vec(-6.0..-4.0f64, 4),
        c in prop::collection::vec(prop::collection::vec(-1.0..1.0f64, 4), 1..=3),
        blind in prop::collection::vec(prop::bool::weighted(0.25), 4),
        seed in any::<u64>(),
    ) {
        let n = a.len();
        let targets = &targets_raw[..n];
        prop_assume!(separated(&a, 0.3) && separated(targets, 0.3));
        let comps: Vec<Vec<(f64, Vec<u32>)>> = (0..n)
            .map(|i| {
                let mut e = vec![0; n];
                e[i] = 1;
                vec![(a[i], e)]
            })
            .collect();
        let field = VectorField::from_real_terms(n, comps).unwrap();
        let ord = enumerate_basis(n, 1).unwrap();
        let d = decompose(&build_generator(&field, &ord).unwrap(), &equilibrium_spectrum(&field).unwrap()).unwrap();
        let part = partition(&d, -3.5).unwrap();
        prop_assert_eq!(part.n_beta(), n);
        let outputs = OutputMap::new(
            n,
            c.iter()
                .map(|row| {
                    (0..n)
                        .filter(|&j| !blind[j])
                        .map(|j| OutputTerm::Monomial { coeff: row[j], alpha: MultiIndex::unit(n, j) })
                        .collect()
                })
                .collect(),
        )
        .unwrap()
        .taylor(1);
        let report = check_observability_criteria(&outputs, &d, &part, 0.0);
        let (cp, _) = build_output_matrices(&outputs, &d, &part);
        let a_plus: Vec<Complex64> = part.plus.iter().map(|&p| d.eigenvalue(p).conj()).collect();
        let t: Vec<Complex64> = targets.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let placed = place_poles(&a_plus, &cp, &t, &PlacementOptions { seed, ..Default::default() });
        prop_assert_eq!(placed.is_ok(), report.convergence.passed(), "{:?}", placed.err());
        if let Err(e) = placed {
            prop_assert_eq!(e.exit_code(), 4);
        }
    }
}

#[test]
fn semigroup_residual_is_first_order_in_delta() {
    let e = presets::load("experiment1").unwrap().to_experiment().unwrap();
    let m = build_generator(&e.field, &enumerate_basis(3, 4).unwrap()).unwrap();
    let pts = vec![
        vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4), Complex64::new(0.5, 0.0)],
        vec![Complex64::new(-0.6, 0.0), Complex64::new(0.1, -0.3), Complex64::new(0.2, 0.2)],
    ];
    let coarse = semigroup_oracle_check(&e.field, &m, &pts, 1e-3).unwrap();
    let fine = semigroup_oracle_check(&e.field, &m, &pts, 1e-4).unwrap();
    assert!(fine <= 0.2 * coarse, "{fine} vs {coarse}");
}

#[test]
fn eigenvector_matrices_are_block_triangular_in_degree() {
    for name in presets::names() {
        let e = presets::load(name).unwrap().to_experiment().unwrap();
        let ord = enumerate_basis(3, e.degree).unwrap();
        let d = decompose(&build_generator(&e.field, &ord).unwrap(), &equilibrium_spectrum(&e.field).unwrap()).unwrap();
        for i in 0..ord.len() {
            for j in 0..ord.len() {
                let (ri, cj) = (ord.index(i).degree(), ord.index(j).degree());
                if ri < cj {
                    assert_eq!(d.v()[(i, j)], Complex64::new(0.0, 0.0), "{name}: V[{i},{j}]");
                }
                if ri > cj {
                    assert_eq!(d.w()[(i, j)], Complex64::new(0.0, 0.0), "{name}: W[{i},{j}]");
                }
            }
        }
    }
}

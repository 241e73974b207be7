//! Spectral decomposition of the truncated generator.
//!
//! Column `p` of `V` holds the monomial coefficients of the eigenfunction
//! `φ_α` of `A_F` and column `p` of `W` those of the adjoint eigenfunction
//! `ψ_α`, where `α` is the multi-index at basis position `p`, read as
//! exponents over the principal eigenvalues (`λ_α = Σ α_j λ_j`, with `λ_j`
//! ordered as in [`EquilibriumSpectrum`]).
//!
//! `V` is block lower triangular and `W` block upper triangular in total
//! degree, so both are obtained by back-substitution through the diagonal
//! blocks of `M` seeded with products of the linear principal forms.

use std::fmt;

use log::warn;
use num_complex::Complex64;

use crate::basis::{BasisOrdering, MultiIndex, TaylorPoly};
use crate::error::{Error, Result};
use crate::generator::{EquilibriumSpectrum, GeneratorMatrix};
use crate::linalg::{eigenvalues, max_abs, multiset_distance, CMatrix, CVector, ONE};

#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    ordering: BasisOrdering,
    lattice: Vec<Complex64>,
    v: CMatrix,
    w: CMatrix,
}

impl SpectralDecomposition {
    pub fn ordering(&self) -> &BasisOrdering {
        &self.ordering
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    /// `λ_α` for the mode at position `pos`.
    pub fn eigenvalue(&self, pos: usize) -> Complex64 {
        self.lattice[pos]
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.lattice
    }

    /// Spectral multi-index of the mode at `pos`.
    pub fn mode(&self, pos: usize) -> &MultiIndex {
        self.ordering.index(pos)
    }

    /// Right eigenvectors of `M` (coefficients of `φ_α`), unit length.
    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// Eigenvectors of `M^H` (coefficients of `ψ_α`), scaled so `W^H V = I`.
    pub fn w(&self) -> &CMatrix {
        &self.w
    }

    pub fn phi(&self, pos: usize) -> TaylorPoly {
        let c: Vec<Complex64> = self.v.column(pos).iter().copied().collect();
        TaylorPoly::from_coefficient_vector(&self.ordering, &c)
    }

    pub fn psi(&self, pos: usize) -> TaylorPoly {
        let c: Vec<Complex64> = self.w.column(pos).iter().copied().collect();
        TaylorPoly::from_coefficient_vector(&self.ordering, &c)
    }

    /// `max |(M V − V Λ)_{ij}|`.
    pub fn right_residual(&self, m: &GeneratorMatrix) -> f64 {
        let mut r = m.entries() * &self.v;
        for (j, &l) in self.lattice.iter().enumerate() {
            let col = self.v.column(j) * l;
            let mut rc = r.column_mut(j);
            rc -= col;
        }
        max_abs(&r)
    }

    /// `max |(M^H W − W conj(Λ))_{ij}|`.
    pub fn left_residual(&self, m: &GeneratorMatrix) -> f64 {
        let mut r = m.entries().adjoint() * &self.w;
        for (j, &l) in self.lattice.iter().enumerate() {
            let col = self.w.column(j) * l.conj();
            let mut rc = r.column_mut(j);
            rc -= col;
        }
        max_abs(&r)
    }

    /// `max |(W^H V − I)_{ij}|`.
    pub fn biorthonormality_error(&self) -> f64 {
        let g = self.w.adjoint() * &self.v - CMatrix::identity(self.len(), self.len());
        max_abs(&g)
    }

    /// Label such as `ψ_(1,0,0) (λ = -0.853)`.
    pub fn label(&self, pos: usize) -> ModeLabel<'_> {
        ModeLabel { d: self, pos }
    }
}

pub struct ModeLabel<'a> {
    d: &'a SpectralDecomposition,
    pos: usize,
}

impl fmt::Display for ModeLabel<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = self.d.eigenvalue(self.pos);
        let short = |x: f64| {
            let s = format!("{x:.6}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".to_owned() } else { s.to_owned() }
        };
        if l.im == 0.0 {
            write!(f, "ψ_{} (λ = {})", self.d.mode(self.pos), short(l.re))
        } else {
            let sign = if l.im < 0.0 { '-' } else { '+' };
            write!(f, "ψ_{} (λ = {}{sign}{}i)", self.d.mode(self.pos), short(l.re), short(l.im.abs()))
        }
    }
}

/// Degree-`k` coefficients of `Π_j (c_jᵀ z)^{α_j}` for every `|α| = k`, as
/// the columns of a square matrix in basis order.
fn product_seeds(spec: &EquilibriumSpectrum, ordering: &BasisOrdering, k: u32) -> CMatrix {
    let n = ordering.dim();
    let range = ordering.degree_range(k);
    let forms: Vec<TaylorPoly> = spec
        .left_eigenvectors()
        .iter()
        .map(|c| {
            let mut p = TaylorPoly::zero(n, k);
            for (i, &ci) in c.iter().enumerate() {
                p.add_term(MultiIndex::unit(n, i), ci);
            }
            p
        })
        .collect();
    let mut seeds = CMatrix::zeros(range.len(), range.len());
    for (col, pos) in range.clone().enumerate() {
        let alpha = ordering.index(pos);
        let mut prod = TaylorPoly::constant(n, k, ONE);
        for (j, &a) in alpha.exponents().iter().enumerate() {
            for _ in 0..a {
                prod = prod.mul(&forms[j]);
            }
        }
        for (row, rpos) in range.clone().enumerate() {
            seeds[(row, col)] = prod.coeff(ordering.index(rpos));
        }
    }
    seeds
}

fn solve_shifted(block: &CMatrix, shift: Complex64, rhs: &CVector) -> Option<CVector> {
    let size = block.nrows();
    let shifted = block - CMatrix::identity(size, size) * shift;
    shifted.lu().solve(rhs)
}

/// Eigen-decomposition with eigenvalues assigned from the lattice and
/// eigenvectors computed by block back-substitution.
pub fn decompose(m: &GeneratorMatrix, spec: &EquilibriumSpectrum) -> Result<SpectralDecomposition> {
    let ordering = m.ordering().clone();
    if spec.dim() != ordering.dim() {
        return Err(Error::DimensionMismatch {
            expected: ordering.dim(),
            found: spec.dim(),
        });
    }
    let size = ordering.len();
    let d = ordering.degree();
    let lattice: Vec<Complex64> = ordering
        .indices()
        .iter()
        .map(|a| spec.lattice_value(a))
        .collect();

    // eigenvalues of different degrees must stay apart for the shifted
    // diagonal blocks to be invertible
    let norm = max_abs(m.entries()).max(1.0);
    let floor = 1e3 * f64::EPSILON * norm;
    let mut separation = f64::INFINITY;
    let mut worst = (0, 0);
    for p in 0..size {
        for q in p + 1..size {
            if ordering.index(p).degree() != ordering.index(q).degree() {
                let gap = (lattice[p] - lattice[q]).norm();
                if gap < separation {
                    separation = gap;
                    worst = (p, q);
                }
            }
        }
    }
    if separation < floor {
        return Err(Error::assumption(format!(
            "eigenvalue lattice is resonant at this truncation: λ_{} ≈ λ_{} (gap {separation:e}); eigenvectors are ill-conditioned",
            ordering.index(worst.0),
            ordering.index(worst.1)
        )));
    }
    if separation < 1e-6 * norm {
        warn!("eigenvalue lattice separation {separation:e} is small; eigenvectors may be inaccurate");
    }

    let blocks: Vec<Vec<CMatrix>> = (1..=d)
        .map(|r| (1..=d).map(|c| m.block(r, c)).collect())
        .collect();
    let block = |r: u32, c: u32| &blocks[(r - 1) as usize][(c - 1) as usize];

    let mut v = CMatrix::zeros(size, size);
    let mut w = CMatrix::zeros(size, size);
    for k in 1..=d {
        let seeds = product_seeds(spec, &ordering, k);
        let dual = seeds.clone().try_inverse().ok_or_else(|| {
            Error::synthesis(format!(
                "degree-{k} eigenvector seeds are linearly dependent (Jacobian not diagonalizable?)"
            ))
        })?;
        let dual = dual.adjoint();
        let range_k = ordering.degree_range(k);
        for (i, pos) in range_k.clone().enumerate() {
            let lambda = lattice[pos];

            // φ: degree k seeded, higher degrees solved
            let mut parts: Vec<CVector> = vec![CVector::zeros(0); (d + 1) as usize];
            parts[k as usize] = seeds.column(i).into_owned();
            for kk in k + 1..=d {
                let mut rhs = CVector::zeros(ordering.degree_range(kk).len());
                for j in k..kk {
                    rhs -= block(kk, j) * &parts[j as usize];
                }
                parts[kk as usize] = solve_shifted(block(kk, kk), lambda, &rhs).ok_or_else(|| {
                    Error::assumption(format!(
                        "λ_{} is an eigenvalue of the degree-{kk} block (lattice resonance)",
                        ordering.index(pos)
                    ))
                })?;
            }
            let mut col = CVector::zeros(size);
            for kk in k..=d {
                col.rows_mut(ordering.degree_range(kk).start, parts[kk as usize].len())
                    .copy_from(&parts[kk as usize]);
            }
            let nrm = col.norm();
            col.unscale_mut(nrm);

            // ψ: degree k seeded, lower degrees solved
            let mut wparts: Vec<CVector> = vec![CVector::zeros(0); (d + 1) as usize];
            wparts[k as usize] = dual.column(i).into_owned();
            for kk in (1..k).rev() {
                let mut rhs = CVector::zeros(ordering.degree_range(kk).len());
                for j in kk + 1..=k {
                    rhs -= block(j, kk).adjoint() * &wparts[j as usize];
                }
                wparts[kk as usize] = solve_shifted(&block(kk, kk).adjoint(), lambda.conj(), &rhs)
                    .ok_or_else(|| {
                        Error::assumption(format!(
                            "λ_{} is an eigenvalue of the degree-{kk} block (lattice resonance)",
                            ordering.index(pos)
                        ))
                    })?;
            }
            let mut wcol = CVector::zeros(size);
            for kk in 1..=k {
                wcol.rows_mut(ordering.degree_range(kk).start, wparts[kk as usize].len())
                    .copy_from(&wparts[kk as usize]);
            }
            let pairing = wcol.dotc(&col);
            if pairing.norm() <= 1e-12 * wcol.norm() {
                return Err(Error::synthesis(format!(
                    "⟨φ, ψ⟩ ≈ 0 for mode {}; cannot biorthonormalize",
                    ordering.index(pos)
                )));
            }
            let wcol = wcol / pairing.conj();

            v.set_column(pos, &col);
            w.set_column(pos, &wcol);
        }
    }
    Ok(SpectralDecomposition {
        ordering,
        lattice,
        v,
        w,
    })
}

/// Deviation between the lattice eigenvalues and a dense numerical
/// eigensolve of `M`.
pub fn numeric_spectrum_deviation(m: &GeneratorMatrix, d: &SpectralDecomposition) -> Result<f64> {
    let ev = eigenvalues(m.entries())?;
    multiset_distance(&ev, d.eigenvalues())
        .ok_or_else(|| Error::validation("spectrum size mismatch"))
}

/// `⟨g, ψ_α⟩ = w_α^H g`, constant term of `g` ignored.
pub fn inner_with_psi(g: &TaylorPoly, d: &SpectralDecomposition, pos: usize) -> Complex64 {
    let gv = CVector::from_vec(g.coefficient_vector(d.ordering()));
    d.w().column(pos).dotc(&gv)
}

/// `⟨g, φ_α⟩ = v_α^H g`, constant term of `g` ignored.
pub fn inner_with_phi(g: &TaylorPoly, d: &SpectralDecomposition, pos: usize) -> Complex64 {
    let gv = CVector::from_vec(g.coefficient_vector(d.ordering()));
    d.v().column(pos).dotc(&gv)
}

/// Split of the modes into `β`-unstable (`Re λ > β`) and the rest.
#[derive(Clone, Debug, PartialEq)]
pub struct ModePartition {
    pub beta: f64,
    /// Positions with `Re λ > β`, ordered by descending `Re λ` then position.
    pub plus: Vec<usize>,
    /// Remaining positions in basis order.
    pub minus: Vec<usize>,
}

impl ModePartition {
    pub fn n_beta(&self) -> usize {
        self.plus.len()
    }

    /// `plus` followed by `minus`: the observer coordinate order.
    pub fn order(&self) -> Vec<usize> {
        self.plus.iter().chain(&self.minus).copied().collect()
    }
}

/// Distance from `β` below which the partition is refused.
pub const BETA_TIE_TOLERANCE: f64 = 1e-9;

pub fn partition(d: &SpectralDecomposition, beta: f64) -> Result<ModePartition> {
    if beta.is_nan() || beta >= 0.0 {
        return Err(Error::validation(format!("β must be negative, got {beta}")));
    }
    if let Some(pos) = (0..d.len()).find(|&p| (d.eigenvalue(p).re - beta).abs() <= BETA_TIE_TOLERANCE) {
        return Err(Error::validation(format!(
            "β = {beta} lies on the spectrum (Re λ of {}); perturb β",
            d.label(pos)
        )));
    }
    let mut plus: Vec<usize> = (0..d.len()).filter(|&p| d.eigenvalue(p).re > beta).collect();
    plus.sort_by(|&a, &b| {
        d.eigenvalue(b)
            .re
            .total_cmp(&d.eigenvalue(a).re)
            .then(a.cmp(&b))
    });
    let minus = (0..d.len()).filter(|&p| d.eigenvalue(p).re <= beta).collect();
    Ok(ModePartition { beta, plus, minus })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionVerdict {
    /// Positions that had to be hit by some output.
    pub required: Vec<usize>,
    /// Required positions with `max_i |⟨h_i, ψ⟩| ≤ tol`.
    pub failing: Vec<usize>,
}

impl CriterionVerdict {
    pub fn passed(&self) -> bool {
        self.failing.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ObservabilityReport {
    pub tol: f64,
    /// `⟨h_i, ψ_p⟩`, one row per output, one column per basis position.
    pub inner: CMatrix,
    /// All principal modes hit: the dual system is observable.
    pub pao: CriterionVerdict,
    /// All `β`-unstable principal modes hit.
    pub detectability: CriterionVerdict,
    /// All `β`-unstable modes hit: an observer gain exists.
    pub convergence: CriterionVerdict,
}

pub fn check_observability_criteria(
    outputs: &[TaylorPoly],
    d: &SpectralDecomposition,
    part: &ModePartition,
    tol: f64,
) -> ObservabilityReport {
    let m = outputs.len();
    let mut inner = CMatrix::zeros(m, d.len());
    for (i, h) in outputs.iter().enumerate() {
        for p in 0..d.len() {
            inner[(i, p)] = inner_with_psi(h, d, p);
        }
    }
    let hit = |p: usize| (0..m).any(|i| inner[(i, p)].norm() > tol);
    let verdict = |required: Vec<usize>| {
        let failing = required.iter().copied().filter(|&p| !hit(p)).collect();
        CriterionVerdict { required, failing }
    };
    let principal: Vec<usize> = d.ordering().degree_range(1).collect();
    let unstable_principal = part
        .plus
        .iter()
        .copied()
        .filter(|p| principal.contains(p))
        .collect();
    ObservabilityReport {
        tol,
        pao: verdict(principal),
        detectability: verdict(unstable_principal),
        convergence: verdict(part.plus.clone()),
        inner,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_basis, inner_product};
    use crate::generator::{build_generator, equilibrium_spectrum, VectorField};

    fn setup(field: &VectorField, d: u32) -> (GeneratorMatrix, SpectralDecomposition) {
        let ordering = enumerate_basis(field.dim(), d).unwrap();
        let m = build_generator(field, &ordering).unwrap();
        let spec = equilibrium_spectrum(field).unwrap();
        let dec = decompose(&m, &spec).unwrap();
        (m, dec)
    }

    fn experiment_one() -> VectorField {
        VectorField::from_real_terms(
            3,
            vec![
                vec![(-1.9796, vec![1, 0, 0]), (1.9796, vec![0, 1, 1])],
                vec![(-2.95, vec![0, 1, 0]), (1.475, vec![0, 0, 2])],
                vec![(-0.853, vec![0, 0, 1]), (0.853, vec![2, 0, 0])],
            ],
        )
        .unwrap()
    }

    #[test]
    fn linear_scalar_decomposition_is_trivial() {
        let a = 0.8;
        let f = VectorField::from_real_terms(1, vec![vec![(-a, vec![1])]]).unwrap();
        let (_, dec) = setup(&f, 3);
        let eye = CMatrix::identity(3, 3);
        assert!(max_abs(&(dec.v() - &eye)) < 1e-15);
        assert!(max_abs(&(dec.w() - &eye)) < 1e-15);
        let ev: Vec<f64> = dec.eigenvalues().iter().map(|l| l.re).collect();
        assert_eq!(ev, vec![-a, -2.0 * a, -3.0 * a]);
        let z2 = TaylorPoly::from_real_terms(1, 3, [(1.0, vec![2])]).unwrap();
        assert_eq!(inner_with_psi(&z2, &dec, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn experiment_one_lattice_at_degree_two() {
        let (m, dec) = setup(&experiment_one(), 2);
        let mut got: Vec<f64> = dec.eigenvalues().iter().map(|l| l.re).collect();
        got.sort_by(|a, b| b.total_cmp(a));
        let mut want: Vec<f64> = vec![-0.853, -1.9796, -2.95, -1.706, -2.8326, -3.803, -3.9592, -4.9296, -5.9];
        want.sort_by(|a, b| b.total_cmp(a));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
        assert!(dec.right_residual(&m) < 1e-12);
        assert!(dec.left_residual(&m) < 1e-12);
        assert!(dec.biorthonormality_error() < 1e-12);
    }

    #[test]
    fn degree_one_columns_match_linear_eigenvectors() {
        // non-diagonal Jacobian so the comparison is not trivial
        let f = VectorField::from_real_terms(
            2,
            vec![
                vec![(-1.0, vec![1, 0]), (0.4, vec![0, 1]), (0.3, vec![0, 2])],
                vec![(0.2, vec![1, 0]), (-2.5, vec![0, 1]), (-0.5, vec![1, 1])],
            ],
        )
        .unwrap();
        let (m, dec) = setup(&f, 4);
        let spec = equilibrium_spectrum(&f).unwrap();
        for j in 0..2 {
            // φ_j at degree one is c_jᵀ z with c_j a left eigenvector of J
            let c = &spec.left_eigenvectors()[j];
            let v = dec.v().column(j).rows(0, 2).into_owned();
            let ratio = v[0] / c[0];
            assert!((v - c * ratio).norm() < 1e-12);
        }
        assert!(dec.right_residual(&m) < 1e-12);
        assert!(dec.left_residual(&m) < 1e-12);
        assert!(dec.biorthonormality_error() < 1e-12);
        assert!(numeric_spectrum_deviation(&m, &dec).unwrap() < 1e-8);
    }

    #[test]
    fn products_of_principal_eigenfunctions_are_eigenfunctions() {
        // independent route: φ_(1,1) ∝ φ_(1,0)·φ_(0,1) truncated
        let f = VectorField::from_real_terms(
            2,
            vec![
                vec![(-1.0, vec![1, 0]), (0.5, vec![0, 2])],
                vec![(-1.7, vec![0, 1]), (0.3, vec![1, 1])],
            ],
        )
        .unwrap();
        let (_, dec) = setup(&f, 4);
        let prod = dec.phi(0).mul(&dec.phi(1));
        let pos = dec.ordering().position(&MultiIndex::new(vec![1, 1])).unwrap();
        let target = dec.phi(pos);
        let scale = target.coeff(&MultiIndex::new(vec![1, 1])) / prod.coeff(&MultiIndex::new(vec![1, 1]));
        let diff = target.add(&prod.scale(-scale));
        assert!(diff.terms().all(|(_, c)| c.norm() < 1e-12));
    }

    #[test]
    fn triangular_support() {
        let (_, dec) = setup(&experiment_one(), 4);
        let o = dec.ordering();
        for p in 0..dec.len() {
            for q in 0..dec.len() {
                let (dp, dq) = (o.index(p).degree(), o.index(q).degree());
                if dp < dq {
                    assert_eq!(dec.v()[(p, q)].norm(), 0.0);
                }
                if dp > dq {
                    assert_eq!(dec.w()[(p, q)].norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn biorthogonality_through_polynomials() {
        let (_, dec) = setup(&experiment_one(), 3);
        for a in [0, 4, 12] {
            let psi = dec.psi(a);
            assert!(inner_product(&psi, &psi).unwrap().re > 0.0);
            for g in 0..dec.len() {
                let ip = inner_product(&dec.phi(g), &psi).unwrap();
                let want = if g == a { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(want, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn partitions() {
        let (_, dec) = setup(&experiment_one(), 4);
        let p = partition(&dec, -2.0).unwrap();
        assert_eq!(p.n_beta(), 3);
        let ev: Vec<f64> = p.plus.iter().map(|&q| dec.eigenvalue(q).re).collect();
        assert!((ev[0] + 0.853).abs() < 1e-12);
        assert!((ev[1] + 1.706).abs() < 1e-12);
        assert!((ev[2] + 1.9796).abs() < 1e-12);
        assert_eq!(p.n_beta() + p.minus.len(), 34);

        let all = partition(&dec, -100.0).unwrap();
        assert!(all.minus.is_empty());
        assert_eq!(all.n_beta(), 34);

        assert!(partition(&dec, -1.706).is_err());
        assert!(partition(&dec, 0.5).is_err());

        let wider = partition(&dec, -3.0).unwrap();
        assert!(p.plus.iter().all(|q| wider.plus.contains(q)));
    }

    #[test]
    fn criteria_on_scalar_examples() {
        let a = 1.0;
        let f = VectorField::from_real_terms(1, vec![vec![(-a, vec![1])]]).unwrap();
        let (_, dec) = setup(&f, 3);
        let part = partition(&dec, -1.5).unwrap();
        let x = TaylorPoly::from_real_terms(1, 3, [(1.0, vec![1])]).unwrap();
        let r = check_observability_criteria(&[x], &dec, &part, 1e-8);
        assert!(r.pao.passed() && r.detectability.passed() && r.convergence.passed());

        let x2 = TaylorPoly::from_real_terms(1, 3, [(1.0, vec![2])]).unwrap();
        let r = check_observability_criteria(&[x2], &dec, &part, 1e-8);
        assert_eq!(r.convergence.failing, vec![0]);
        assert_eq!(r.detectability.failing, vec![0]);
        assert!(!r.pao.passed());
        assert_eq!(dec.label(0).to_string(), "ψ_(1) (λ = -1)");
    }
}

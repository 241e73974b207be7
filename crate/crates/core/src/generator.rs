//! Truncated Koopman generator and the standing-assumption checks.
//!
//! The generator of the Koopman semigroup acts on observables as
//! `A_F f = F·∇f`. In the monomial basis its matrix `M[α,γ] = ⟨A_F e_γ, e_α⟩`
//! is block lower triangular by total degree whenever `F(0) = 0`.

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{indices_of_degree, poly_eval, BasisOrdering, MultiIndex, TaylorPoly};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, kernel_vector, CMatrix, CVector, ZERO};

/// Polynomial vector field `ẋ = F(x)` with real coefficients and `F(0) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<TaylorPoly>,
}

impl VectorField {
    pub fn new(components: Vec<TaylorPoly>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::validation("vector field needs at least one component"));
        }
        for (l, f) in components.iter().enumerate() {
            if f.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.dim(),
                });
            }
            if !f.is_real() {
                return Err(Error::assumption(format!(
                    "F_{} has complex coefficients; only real vector fields are supported",
                    l + 1
                )));
            }
            let c0 = f.constant_term();
            if c0.norm() != 0.0 {
                return Err(Error::assumption(format!(
                    "F_{}(0) = {} != 0: the origin is not an equilibrium",
                    l + 1,
                    c0.re
                )));
            }
        }
        Ok(VectorField { components })
    }

    /// Convenience constructor from `(coefficient, exponents)` lists, one per component.
    pub fn from_real_terms(n: usize, terms: Vec<Vec<(f64, Vec<u32>)>>) -> Result<Self> {
        let components = terms
            .into_iter()
            .map(|t| {
                let deg = t.iter().map(|(_, a)| a.iter().sum::<u32>()).max().unwrap_or(1);
                TaylorPoly::from_real_terms(n, deg.max(1), t)
            })
            .collect::<Result<Vec<_>>>()?;
        if components.len() != n {
            return Err(Error::validation(format!(
                "F must have n components (expected {n}, got {})",
                components.len()
            )));
        }
        Self::new(components)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[TaylorPoly] {
        &self.components
    }

    /// Largest total degree over all components.
    pub fn degree(&self) -> u32 {
        self.components.iter().map(|f| f.degree()).max().unwrap_or(0)
    }

    pub fn eval_real(&self, x: &[f64]) -> Vec<f64> {
        self.components.iter().map(|f| f.eval_real(x)).collect()
    }

    pub fn eval(&self, z: &[Complex64]) -> Result<Vec<Complex64>> {
        self.components.iter().map(|f| poly_eval(f, z)).collect()
    }

    /// `J_F(0)` with `J[l][k] = ∂F_l/∂x_k (0)`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |l, k| self.components[l].coeff(&MultiIndex::unit(n, k)).re)
    }
}

/// Dense truncation of the generator in the basis `ordering`.
#[derive(Clone, Debug)]
pub struct GeneratorMatrix {
    ordering: BasisOrdering,
    entries: CMatrix,
}

impl GeneratorMatrix {
    pub fn ordering(&self) -> &BasisOrdering {
        &self.ordering
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// Block mapping degree-`col` coefficients to degree-`row` coefficients.
    pub fn block(&self, row: u32, col: u32) -> CMatrix {
        let r = self.ordering.degree_range(row);
        let c = self.ordering.degree_range(col);
        self.entries
            .view((r.start, c.start), (r.len(), c.len()))
            .into_owned()
    }

    /// Column `γ` as a polynomial: the truncation of `A_F e_γ`.
    pub fn column_poly(&self, pos: usize) -> TaylorPoly {
        let col: Vec<Complex64> = self.entries.column(pos).iter().copied().collect();
        TaylorPoly::from_coefficient_vector(&self.ordering, &col)
    }
}

/// `M[α,γ] = Σ_l γ_l F_{l, α−γ+e_l}` for `1 ≤ |γ| ≤ |α| ≤ d`.
pub fn build_generator(field: &VectorField, ordering: &BasisOrdering) -> Result<GeneratorMatrix> {
    let n = ordering.dim();
    if field.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: field.dim(),
        });
    }
    let d = ordering.degree();
    if field.degree() > d + 1 {
        warn!(
            "vector field has degree {} > d + 1 = {}; terms above degree d cannot enter the truncated generator",
            field.degree(),
            d + 1
        );
    }
    let size = ordering.len();
    let mut entries = CMatrix::zeros(size, size);
    for (col, gamma) in ordering.indices().iter().enumerate() {
        let g = gamma.exponents();
        for (l, f) in field.components().iter().enumerate() {
            if g[l] == 0 {
                continue;
            }
            for (delta, &c) in f.terms() {
                if delta.degree() > d {
                    continue;
                }
                // γ − e_l + δ
                let alpha: Vec<u32> = g
                    .iter()
                    .zip(delta.exponents())
                    .enumerate()
                    .map(|(i, (&gi, &di))| gi + di - u32::from(i == l))
                    .collect();
                let alpha = MultiIndex::new(alpha);
                if let Some(row) = ordering.position(&alpha) {
                    entries[(row, col)] += c * g[l] as f64;
                }
            }
        }
    }
    Ok(GeneratorMatrix {
        ordering: ordering.clone(),
        entries,
    })
}

fn rk4_step_complex(field: &VectorField, z: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let add = |a: &[Complex64], b: &[Complex64], s: f64| -> Vec<Complex64> {
        a.iter().zip(b).map(|(x, y)| x + y * s).collect()
    };
    let k1 = field.eval(z)?;
    let k2 = field.eval(&add(z, &k1, h / 2.0))?;
    let k3 = field.eval(&add(z, &k2, h / 2.0))?;
    let k4 = field.eval(&add(z, &k3, h))?;
    Ok(z.iter()
        .enumerate()
        .map(|(i, zi)| zi + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

/// Finite-difference check of the generator against the flow.
///
/// For every monomial `e_γ` whose image `A_F e_γ` fits in the truncation,
/// compares `(e_γ(φ^δ(z)) − e_γ(z))/δ` with column `γ` of `M` evaluated at `z`.
/// Returns the largest absolute discrepancy.
pub fn semigroup_oracle_check(
    field: &VectorField,
    generator: &GeneratorMatrix,
    samples: &[Vec<Complex64>],
    delta: f64,
) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::validation("finite-difference step must be positive"));
    }
    let ordering = generator.ordering();
    let d = ordering.degree();
    let max_gamma = (d + 1).saturating_sub(field.degree().max(1));
    let mut worst: f64 = 0.0;
    for z in samples {
        if z.len() != field.dim() {
            return Err(Error::DimensionMismatch {
                expected: field.dim(),
                found: z.len(),
            });
        }
        let moved = rk4_step_complex(field, z, delta)?;
        if moved.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::simulation("flow step produced a non-finite state"));
        }
        for (pos, gamma) in ordering.indices().iter().enumerate() {
            if gamma.degree() > max_gamma {
                break;
            }
            let quotient = (gamma.monomial(&moved) - gamma.monomial(z)) / delta;
            let predicted = poly_eval(&generator.column_poly(pos), z)?;
            worst = worst.max((quotient - predicted).norm());
        }
    }
    Ok(worst)
}

/// Spectrum of `J_F(0)`, sorted by descending real part.
#[derive(Clone, Debug)]
pub struct EquilibriumSpectrum {
    jacobian: DMatrix<f64>,
    eigenvalues: Vec<Complex64>,
    left: Vec<CVector>,
    right: Vec<CVector>,
}

impl EquilibriumSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn jacobian(&self) -> &DMatrix<f64> {
        &self.jacobian
    }

    pub fn eigenvalues(&self) -> &[Complex64] {
        &self.eigenvalues
    }

    /// `c_j` with `c_jᵀ J = λ_j c_jᵀ`. The linear form `z ↦ c_jᵀ z` is the
    /// lowest-order part of the principal eigenfunction `φ_j`.
    pub fn left_eigenvectors(&self) -> &[CVector] {
        &self.left
    }

    /// `r_j` with `J r_j = λ_j r_j`.
    pub fn right_eigenvectors(&self) -> &[CVector] {
        &self.right
    }

    /// `λ_α = Σ_j α_j λ_j`.
    pub fn lattice_value(&self, alpha: &MultiIndex) -> Complex64 {
        alpha
            .exponents()
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&a, &l)| l * a as f64)
            .sum()
    }
}

fn normalize_phase(mut v: CVector) -> CVector {
    let nrm = v.norm();
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            v *= phase;
        }
    }
    v.unscale(nrm)
}

/// Eigen-structure of the linearization at the origin; rejects unstable or
/// repeated eigenvalues.
pub fn equilibrium_spectrum(field: &VectorField) -> Result<EquilibriumSpectrum> {
    let n = field.dim();
    let jacobian = field.jacobian();
    let jc = jacobian.map(|x| Complex64::new(x, 0.0));
    let mut ev = eigenvalues(&jc)?;
    // exact zeros for tiny imaginary parts of real eigenvalues
    for l in ev.iter_mut() {
        if l.im.abs() <= 1e-14 * l.norm().max(1.0) {
            l.im = 0.0;
        }
    }
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));

    let unstable: Vec<String> = ev
        .iter()
        .filter(|l| l.re >= 0.0)
        .map(|l| format!("{l}"))
        .collect();
    if !unstable.is_empty() {
        return Err(Error::assumption(format!(
            "equilibrium is not stable hyperbolic: eigenvalue(s) with Re >= 0: {}",
            unstable.join(", ")
        )));
    }
    let scale = ev.iter().map(|l| l.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= 1e-9 * scale {
                return Err(Error::assumption(format!(
                    "Jacobian eigenvalues are not simple: {} and {} coincide",
                    ev[i], ev[j]
                )));
            }
        }
    }
    let eye = CMatrix::identity(n, n);
    let jt = jc.transpose();
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for &l in &ev {
        right.push(normalize_phase(kernel_vector(&(&jc - &eye * l))));
        left.push(normalize_phase(kernel_vector(&(&jt - &eye * l))));
    }
    Ok(EquilibriumSpectrum {
        jacobian,
        eigenvalues: ev,
        left,
        right,
    })
}

/// One near-resonance `λ_j ≈ Σ m_l λ_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct Resonance {
    /// 0-based index of the eigenvalue on the left-hand side.
    pub j: usize,
    pub m: MultiIndex,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct NonresonanceVerdict {
    pub degree: u32,
    pub tol: f64,
    /// Smallest `|λ_j − Σ m_l λ_l|` over `2 ≤ |m| ≤ d`.
    pub margin: f64,
    pub resonances: Vec<Resonance>,
}

impl NonresonanceVerdict {
    pub fn passed(&self) -> bool {
        self.resonances.is_empty()
    }
}

/// Enumerates `2 ≤ |m| ≤ d` and flags every `j` with `|λ_j − Σ m_l λ_l| < tol`.
pub fn check_nonresonance(spec: &EquilibriumSpectrum, d: u32, tol: f64) -> NonresonanceVerdict {
    let n = spec.dim();
    let mut margin = f64::INFINITY;
    let mut resonances = Vec::new();
    for k in 2..=d {
        for m in indices_of_degree(n, k) {
            let combo = spec.lattice_value(&m);
            for (j, &l) in spec.eigenvalues().iter().enumerate() {
                let gap = (l - combo).norm();
                margin = margin.min(gap);
                if gap < tol {
                    resonances.push(Resonance {
                        j,
                        m: m.clone(),
                        gap,
                    });
                }
            }
        }
    }
    NonresonanceVerdict {
        degree: d,
        tol,
        margin,
        resonances,
    }
}

/// Field of the form `F_i = −a_i (z_i − u_i(ẑ_i))`, where `u_i` does not
/// depend on `z_i`.
#[derive(Clone, Debug)]
pub struct ParticularClass {
    pub rates: Vec<f64>,
    pub couplings: Vec<TaylorPoly>,
}

/// Recognize the particular class. `None` if some `a_i ≤ 0` or some
/// `F_i` depends on `z_i` beyond its linear term.
pub fn particular_class(field: &VectorField) -> Option<ParticularClass> {
    let n = field.dim();
    let mut rates = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    for (i, f) in field.components().iter().enumerate() {
        let ei = MultiIndex::unit(n, i);
        let a = -f.coeff(&ei).re;
        if a <= 0.0 {
            return None;
        }
        let mut u = TaylorPoly::zero(n, f.max_degree());
        for (alpha, &c) in f.terms() {
            if *alpha == ei {
                continue;
            }
            if alpha.exponents()[i] > 0 {
                return None;
            }
            u.add_term(alpha.clone(), c / a);
        }
        rates.push(a);
        couplings.push(u);
    }
    Some(ParticularClass { rates, couplings })
}

/// Default angular resolution for [`check_forward_invariance`].
pub const DEFAULT_INVARIANCE_RESOLUTION: usize = 64;
/// Shell radii sampled by [`check_forward_invariance`]; only radii below one
/// are held to the strict bound.
pub const INVARIANCE_RADII: [f64; 3] = [0.9, 0.99, 1.0];
const MAX_INVARIANCE_POINTS: usize = 1 << 20;

#[derive(Clone, Debug)]
pub struct InvarianceVerdict {
    /// `max |u_i|` over every sampled shell including the torus.
    pub max_abs: Vec<f64>,
    /// `max |u_i|` over the strict interior shells.
    pub max_interior: Vec<f64>,
    /// Angular points per variable actually used.
    pub resolution: usize,
    pub passed: bool,
}

/// Samples `|u_i|` on polydisc shells to check the sufficient condition
/// `|u_i(w)| < 1` on the open polydisc.
pub fn check_forward_invariance(
    couplings: &[TaylorPoly],
    grid_resolution: usize,
) -> Result<InvarianceVerdict> {
    let n = couplings.len();
    for (i, u) in couplings.iter().enumerate() {
        if u.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: u.dim(),
            });
        }
        if let Some((alpha, _)) = u
            .terms()
            .find(|(a, c)| a.exponents()[i] > 0 && c.norm() > 0.0)
        {
            return Err(Error::validation(format!(
                "u_{} depends on z_{} (term {alpha}); the coupling must only involve the other variables",
                i + 1,
                i + 1
            )));
        }
    }
    let free = n.saturating_sub(1);
    let mut resolution = grid_resolution.max(1);
    while free > 0 && resolution > 2 && resolution.saturating_pow(free as u32) > MAX_INVARIANCE_POINTS {
        resolution /= 2;
    }
    let total = if free == 0 { 1 } else { resolution.pow(free as u32) };
    let mut max_abs = vec![0.0f64; n];
    let mut max_interior = vec![0.0f64; n];
    let step = std::f64::consts::TAU / resolution as f64;
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    for (i, u) in couplings.iter().enumerate() {
        for &r in &INVARIANCE_RADII {
            for flat in 0..total {
                let mut rem = flat;
                for (k, zk) in z.iter_mut().enumerate() {
                    if k == i {
                        *zk = ZERO;
                        continue;
                    }
                    let theta = (rem % resolution) as f64 * step;
                    rem /= resolution;
                    *zk = Complex64::from_polar(r, theta);
                }
                let v = poly_eval(u, &z)?.norm();
                max_abs[i] = max_abs[i].max(v);
                if r < 1.0 {
                    max_interior[i] = max_interior[i].max(v);
                }
            }
        }
    }
    let passed = max_interior.iter().all(|&m| m < 1.0) && max_abs.iter().all(|&m| m <= 1.0 + 1e-12);
    Ok(InvarianceVerdict {
        max_abs,
        max_interior,
        resolution,
        passed,
    })
}

//! Observer synthesis: output matrices, gain, realization, lift and recovery.

mod placement;

pub use placement::{
    pbh_unobservable, place_poles, place_poles_linearized, PlacementMethod, PlacementOptions,
    PLACEMENT_TOLERANCE, TARGET_SEPARATION_WARNING,
};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{MultiIndex, TaylorPoly};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CMatrix, CVector};
use crate::spectral::{inner_with_psi, ModePartition, SpectralDecomposition};

/// Recovered states with a larger imaginary part are flagged.
pub const IMAGINARY_RESIDUE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub enum OutputTerm {
    Monomial { coeff: f64, alpha: MultiIndex },
    /// `coeff · cos x_k`, `variable` zero-based.
    Cos { coeff: f64, variable: usize },
    Sin { coeff: f64, variable: usize },
}

impl OutputTerm {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            OutputTerm::Monomial { coeff, alpha } => coeff * alpha.monomial_real(x),
            OutputTerm::Cos { coeff, variable } => coeff * x[*variable].cos(),
            OutputTerm::Sin { coeff, variable } => coeff * x[*variable].sin(),
        }
    }

    fn taylor(&self, n: usize, d: u32) -> TaylorPoly {
        let mut p = TaylorPoly::zero(n, d);
        match self {
            OutputTerm::Monomial { coeff, alpha } => {
                if alpha.degree() <= d {
                    p.add_term(alpha.clone(), Complex64::new(*coeff, 0.0));
                }
            }
            OutputTerm::Cos { coeff, variable } | OutputTerm::Sin { coeff, variable } => {
                let first = matches!(self, OutputTerm::Sin { .. }) as u32;
                let mut fact = 1.0;
                for k in 0..=d {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    if k % 2 == first {
                        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                        let mut e = vec![0; n];
                        e[*variable] = k;
                        p.add_term(MultiIndex::new(e), Complex64::new(coeff * sign / fact, 0.0));
                    }
                }
            }
        }
        p
    }

    fn derivative_at_zero(&self, k: usize) -> f64 {
        match self {
            OutputTerm::Monomial { coeff, alpha } => {
                if alpha.degree() == 1 && alpha.exponents()[k] == 1 {
                    *coeff
                } else {
                    0.0
                }
            }
            OutputTerm::Cos { .. } => 0.0,
            OutputTerm::Sin { coeff, variable } => {
                if *variable == k {
                    *coeff
                } else {
                    0.0
                }
            }
        }
    }
}

/// Output map `h : ℝⁿ → ℝᵐ`, each component a sum of primitive terms.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputMap {
    n: usize,
    components: Vec<Vec<OutputTerm>>,
}

impl OutputMap {
    pub fn new(n: usize, components: Vec<Vec<OutputTerm>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::validation("output map needs at least one component"));
        }
        for (i, comp) in components.iter().enumerate() {
            for term in comp {
                let ok = match term {
                    OutputTerm::Monomial { coeff, alpha } => alpha.dim() == n && coeff.is_finite(),
                    OutputTerm::Cos { coeff, variable } | OutputTerm::Sin { coeff, variable } => {
                        *variable < n && coeff.is_finite()
                    }
                };
                if !ok {
                    return Err(Error::validation(format!(
                        "output component {} has a term that does not fit dimension {n}",
                        i + 1
                    )));
                }
            }
        }
        Ok(OutputMap { n, components })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn n_outputs(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Vec<OutputTerm>] {
        &self.components
    }

    /// Exact evaluation.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().map(|t| t.eval(x)).sum())
            .collect()
    }

    pub fn h0(&self) -> Vec<f64> {
        self.eval(&vec![0.0; self.n])
    }

    /// Taylor truncation of each component to degree `d`, constants included.
    pub fn taylor(&self, d: u32) -> Vec<TaylorPoly> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .fold(TaylorPoly::zero(self.n, d), |acc, t| acc.add(&t.taylor(self.n, d)))
            })
            .collect()
    }

    /// `J_h(0)`, `m × n`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_outputs(), self.n, |i, k| {
            self.components[i].iter().map(|t| t.derivative_at_zero(k)).sum()
        })
    }
}

/// `(C⁺, C⁻)`: `C⁺` columns follow `partition.plus`, `C⁻` columns
/// `partition.minus`. Entries are `conj⟨h_i, ψ⟩`, which equals `⟨h_i, ψ⟩`
/// whenever `ψ` has real coefficients.
pub fn build_output_matrices(
    outputs: &[TaylorPoly],
    d: &SpectralDecomposition,
    part: &ModePartition,
) -> (CMatrix, CMatrix) {
    let build = |cols: &[usize]| {
        CMatrix::from_fn(outputs.len(), cols.len(), |i, j| {
            inner_with_psi(&outputs[i], d, cols[j]).conj()
        })
    };
    (build(&part.plus), build(&part.minus))
}

/// The observer `f̂' = A f̂ + L (C f̂ − (y − h(0)))` in ψ-coordinates.
///
/// State vectors are indexed by basis position; `partition` gives the
/// block order used by [`system_matrix`](Self::system_matrix).
#[derive(Clone, Debug)]
pub struct ObserverRealization {
    partition: ModePartition,
    /// `conj λ_α` per basis position.
    a: Vec<Complex64>,
    /// `m × N_d`, columns by basis position.
    c: CMatrix,
    l_plus: CMatrix,
    h0: Vec<f64>,
    w: CMatrix,
    spectral: SpectralDecomposition,
}

impl ObserverRealization {
    pub fn partition(&self) -> &ModePartition {
        &self.partition
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn n_states(&self) -> usize {
        self.a.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn h0(&self) -> &[f64] {
        &self.h0
    }

    /// Diagonal of `A`, by basis position.
    pub fn diagonal(&self) -> &[Complex64] {
        &self.a
    }

    /// `C`, columns by basis position.
    pub fn output_matrix(&self) -> &CMatrix {
        &self.c
    }

    pub fn a_plus(&self) -> Vec<Complex64> {
        self.partition.plus.iter().map(|&p| self.a[p]).collect()
    }

    pub fn a_minus(&self) -> Vec<Complex64> {
        self.partition.minus.iter().map(|&p| self.a[p]).collect()
    }

    pub fn c_plus(&self) -> CMatrix {
        self.c.select_columns(&self.partition.plus)
    }

    pub fn c_minus(&self) -> CMatrix {
        self.c.select_columns(&self.partition.minus)
    }

    pub fn l_plus(&self) -> &CMatrix {
        &self.l_plus
    }

    /// `[[A⁺ + L⁺C⁺, L⁺C⁻], [0, A⁻]]` in partition order.
    pub fn system_matrix(&self) -> CMatrix {
        let order = self.partition.order();
        let nb = self.partition.n_beta();
        let n = order.len();
        let lc = &self.l_plus * self.c.select_columns(&order);
        let mut m = CMatrix::zeros(n, n);
        m.view_mut((0, 0), (nb, n)).copy_from(&lc);
        for (i, &p) in order.iter().enumerate() {
            m[(i, i)] += self.a[p];
        }
        m
    }

    /// `−(L⁺; 0)` in partition order; multiplies `y − h(0)`.
    pub fn forcing_matrix(&self) -> CMatrix {
        let n = self.n_states();
        let nb = self.partition.n_beta();
        let mut f = CMatrix::zeros(n, self.n_outputs());
        f.view_mut((0, 0), (nb, self.n_outputs())).copy_from(&(-&self.l_plus));
        f
    }

    /// `f̂'` at state `f` (basis order) and output innovation `y − h(0)`.
    pub fn derivative(&self, f: &CVector, dy: &[f64], out: &mut CVector) {
        let mut innov = &self.c * f;
        for (i, v) in innov.iter_mut().enumerate() {
            *v -= dy[i];
        }
        let corr = &self.l_plus * innov;
        for (p, o) in out.iter_mut().enumerate() {
            *o = self.a[p] * f[p];
        }
        for (j, &p) in self.partition.plus.iter().enumerate() {
            out[p] += corr[j];
        }
    }

    /// `u_α` with `u_α[γ] = conj W[pos(α), γ]`.
    pub fn recovery_vector(&self, alpha: &MultiIndex) -> Result<CVector> {
        let ord = self.spectral.ordering();
        if alpha.dim() != ord.dim() || alpha.degree() == 0 || alpha.degree() > ord.degree() {
            return Err(Error::validation(format!(
                "moment index {alpha} is outside 1 ≤ |α| ≤ {}",
                ord.degree()
            )));
        }
        let pos = ord.position(alpha).expect("index in range");
        Ok(self.w.row(pos).transpose().map(|z| z.conj()))
    }
}

/// Assembles the realization from a gain for the unstable block.
pub fn assemble_observer(
    d: &SpectralDecomposition,
    part: &ModePartition,
    outputs: &[TaylorPoly],
    h0: &[f64],
    l_plus: &CMatrix,
) -> Result<ObserverRealization> {
    let nb = part.n_beta();
    if part.n_beta() + part.minus.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            found: part.n_beta() + part.minus.len(),
        });
    }
    if l_plus.nrows() != nb || l_plus.ncols() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: nb * outputs.len(),
            found: l_plus.nrows() * l_plus.ncols(),
        });
    }
    if h0.len() != outputs.len() {
        return Err(Error::DimensionMismatch {
            expected: outputs.len(),
            found: h0.len(),
        });
    }
    let c = CMatrix::from_fn(outputs.len(), d.len(), |i, p| inner_with_psi(&outputs[i], d, p).conj());
    if let Some(&p) = part.minus.iter().find(|&&p| d.eigenvalue(p).re > part.beta) {
        return Err(Error::synthesis(format!(
            "{} is in the stable block but has Re λ > β",
            d.label(p)
        )));
    }
    Ok(ObserverRealization {
        partition: part.clone(),
        a: d.eigenvalues().iter().map(|l| l.conj()).collect(),
        c,
        l_plus: l_plus.clone(),
        h0: h0.to_vec(),
        w: d.w().clone(),
        spectral: d.clone(),
    })
}

/// `V^H e(x̂₀)`: the truncated kernel at `x̂₀` in ψ-coordinates.
pub fn lift_initial(x: &[f64], d: &SpectralDecomposition) -> Result<CVector> {
    let ord = d.ordering();
    if x.len() != ord.dim() {
        return Err(Error::DimensionMismatch {
            expected: ord.dim(),
            found: x.len(),
        });
    }
    if let Some(k) = x.iter().position(|v| !(v.abs() < 1.0)) {
        return Err(Error::validation(format!(
            "initial guess component {} = {} is outside the unit polydisc",
            k + 1,
            x[k]
        )));
    }
    let e = CVector::from_iterator(
        ord.len(),
        ord.monomials_real(x).into_iter().map(|v| Complex64::new(v, 0.0)),
    );
    Ok(d.v().adjoint() * e)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimate {
    pub x: Vec<f64>,
    /// Largest `|Im f̂^H u_α|` over the degree-one indices.
    pub imaginary_residue: f64,
}

/// `x̂_k = Re(f̂^H u_{e_k})`.
pub fn recover_state(f: &CVector, r: &ObserverRealization) -> StateEstimate {
    let ord = r.spectral.ordering();
    let mut x = Vec::with_capacity(ord.dim());
    let mut imag: f64 = 0.0;
    for k in 0..ord.dim() {
        let pos = ord.linear_position(k);
        // f^H u = conj(W[pos, :] f)
        let z = r.w.row(pos).transpose().dot(f).conj();
        x.push(z.re);
        imag = imag.max(z.im.abs());
    }
    if imag > IMAGINARY_RESIDUE_TOLERANCE * max_abs(&r.w).max(1.0) {
        warn!("recovered state has imaginary residue {imag:e}");
    }
    StateEstimate {
        x,
        imaginary_residue: imag,
    }
}

/// `f̂^H u_α`, the estimate of `E[x^α]`.
pub fn recover_moment(f: &CVector, alpha: &MultiIndex, r: &ObserverRealization) -> Result<Complex64> {
    let u = r.recovery_vector(alpha)?;
    Ok(f.dotc(&u))
}

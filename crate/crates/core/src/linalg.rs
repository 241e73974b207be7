//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a small dense matrix. Real input goes through the real
/// Schur form, complex input through the complex one.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("matrix has non-finite entries"));
    }
    if m.iter().all(|z| z.im == 0.0) {
        let r: DMatrix<f64> = m.map(|z| z.re);
        Ok(r.complex_eigenvalues().iter().copied().collect())
    } else {
        m.eigenvalues()
            .map(|v| v.iter().copied().collect())
            .ok_or_else(|| Error::validation("complex Schur iteration failed"))
    }
}

/// Largest distance between paired elements after greedily pairing the
/// globally closest remaining elements. `None` when the lengths differ.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            pairs.push(((x - y).norm(), i, j));
        }
    }
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for (dist, i, j) in pairs {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            worst = worst.max(dist);
        }
    }
    Some(worst)
}

fn project_out(v: &mut CVector, basis: &[CVector]) {
    // two passes of classical Gram-Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = q.dotc(v);
            v.axpy(-c, q, ONE);
        }
    }
}

/// Orthonormal basis of `span(vectors)` (rank-revealing Gram-Schmidt).
pub fn orthonormalize(vectors: &[CVector], rel_tol: f64) -> Vec<CVector> {
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut basis: Vec<CVector> = Vec::new();
    if scale == 0.0 {
        return basis;
    }
    for v in vectors {
        let mut w = v.clone();
        project_out(&mut w, &basis);
        let nrm = w.norm();
        if nrm > rel_tol * scale {
            basis.push(w.unscale(nrm));
        }
    }
    basis
}

/// Orthonormal basis of the orthogonal complement of `span(basis)` in `ℂ^dim`.
/// `basis` must already be orthonormal.
pub fn orthogonal_complement(basis: &[CVector], dim: usize) -> Vec<CVector> {
    let mut all: Vec<CVector> = basis.to_vec();
    let mut out = Vec::new();
    for k in 0..dim {
        if all.len() == dim {
            break;
        }
        let mut e = CVector::zeros(dim);
        e[k] = ONE;
        project_out(&mut e, &all);
        let nrm = e.norm();
        if nrm > 1e-8 {
            let q = e.unscale(nrm);
            all.push(q.clone());
            out.push(q);
        }
    }
    out
}

/// Orthonormal basis of the null space of `m`.
pub fn null_space(m: &CMatrix, rel_tol: f64) -> Vec<CVector> {
    let rows: Vec<CVector> = (0..m.nrows())
        .map(|i| m.row(i).transpose().map(|z| z.conj()))
        .collect();
    let row_space = orthonormalize(&rows, rel_tol);
    orthogonal_complement(&row_space, m.ncols())
}

/// Unit vector spanning the (numerical) kernel of a square matrix that is
/// singular by construction, taken from the smallest singular value.
pub fn kernel_vector(m: &CMatrix) -> CVector {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty matrix");
    v_t.row(k).transpose().map(|z| z.conj())
}

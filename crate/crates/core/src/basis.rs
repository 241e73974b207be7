//! Monomial basis of the polydisc Hardy space.
//!
//! Multi-indices, the graded ordering used to lay out every matrix in the
//! crate, truncated Taylor polynomials, the coefficient inner product and the
//! reproducing-kernel coefficient vectors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Exponent vector `α ∈ ℕⁿ` addressing the monomial `z^α`.
///
/// Ordering is graded by total degree; within a degree the index with the
/// *larger* exponent at the first differing coordinate comes first, so
/// `(1,0) < (0,1)` and `(2,0) < (1,1) < (0,2)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The degree-one index selecting coordinate `k` (0-based).
    pub fn unit(n: usize, k: usize) -> Self {
        let mut e = vec![0; n];
        e[k] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    /// Componentwise sum.
    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `z^α` evaluated at a complex point.
    pub fn monomial(&self, z: &[Complex64]) -> Complex64 {
        self.0
            .iter()
            .zip(z)
            .fold(Complex64::new(1.0, 0.0), |acc, (&a, &zi)| acc * zi.powu(a))
    }

    /// `x^α` evaluated at a real point.
    pub fn monomial_real(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .fold(1.0, |acc, (&a, &xi)| acc * xi.powi(a as i32))
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            // reversed within a grade: larger leading exponent sorts first
            for (a, b) in self.0.iter().zip(&other.0) {
                if a != b {
                    return b.cmp(a);
                }
            }
            self.0.len().cmp(&other.0.len())
        })
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices in `n` variables with total degree exactly `k`.
pub fn indices_of_degree(n: usize, k: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == n {
            prefix.push(k);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=k).rev() {
            prefix.push(a);
            rec(n, k - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, k, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// Number of non-constant monomials of total degree at most `d` in `n`
/// variables, `C(n+d, d) − 1`.
pub fn basis_size(n: usize, d: u32) -> usize {
    let mut c: u128 = 1;
    for i in 1..=d as u128 {
        c = c * (n as u128 + i) / i;
    }
    (c - 1) as usize
}

/// The canonical layout of the truncated basis `{e_α : 1 ≤ |α| ≤ d}`.
#[derive(Clone, Debug)]
pub struct BasisOrdering {
    n: usize,
    d: u32,
    index_list: Vec<MultiIndex>,
    position: HashMap<MultiIndex, usize>,
    degree_ranges: Vec<std::ops::Range<usize>>,
}

impl BasisOrdering {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    /// `N_d`.
    pub fn len(&self) -> usize {
        self.index_list.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_list.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.index_list
    }

    pub fn index(&self, pos: usize) -> &MultiIndex {
        &self.index_list[pos]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.position.get(alpha).copied()
    }

    /// Positions holding the indices of total degree `k` (1 ≤ k ≤ d).
    pub fn degree_range(&self, k: u32) -> std::ops::Range<usize> {
        self.degree_ranges[(k - 1) as usize].clone()
    }

    /// Position of `z_k` (0-based coordinate).
    pub fn linear_position(&self, k: usize) -> usize {
        self.position[&MultiIndex::unit(self.n, k)]
    }

    /// Values `e_γ(z)` for every basis position.
    pub fn monomials(&self, z: &[Complex64]) -> Vec<Complex64> {
        self.index_list.iter().map(|a| a.monomial(z)).collect()
    }

    pub fn monomials_real(&self, x: &[f64]) -> Vec<f64> {
        self.index_list.iter().map(|a| a.monomial_real(x)).collect()
    }
}

/// Enumerate the non-constant monomials of degree ≤ `d` in the graded order.
pub fn enumerate_basis(n: usize, d: u32) -> Result<BasisOrdering> {
    if n == 0 {
        return Err(Error::validation("basis dimension n must be at least 1"));
    }
    if d == 0 {
        return Err(Error::validation("truncation degree d must be at least 1"));
    }
    let mut index_list = Vec::with_capacity(basis_size(n, d));
    let mut degree_ranges = Vec::with_capacity(d as usize);
    for k in 1..=d {
        let start = index_list.len();
        let mut block = indices_of_degree(n, k);
        block.sort();
        index_list.extend(block);
        degree_ranges.push(start..index_list.len());
    }
    let position = index_list
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();
    Ok(BasisOrdering {
        n,
        d,
        index_list,
        position,
        degree_ranges,
    })
}

/// Truncated Taylor polynomial `Σ_α c_α z^α`, constant term allowed.
///
/// Absent keys are zero coefficients. Keys are kept in [`MultiIndex`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorPoly {
    n: usize,
    max_degree: u32,
    coeffs: BTreeMap<MultiIndex, Complex64>,
}

impl TaylorPoly {
    pub fn zero(n: usize, max_degree: u32) -> Self {
        TaylorPoly {
            n,
            max_degree,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, max_degree: u32, c: Complex64) -> Self {
        let mut p = Self::zero(n, max_degree);
        p.add_term(MultiIndex::zero(n), c);
        p
    }

    /// Build from `(coefficient, exponents)` pairs; repeated exponents add up.
    /// Terms above `max_degree` are dropped.
    pub fn from_terms<I>(n: usize, max_degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex64, Vec<u32>)>,
    {
        let mut p = Self::zero(n, max_degree);
        for (c, alpha) in terms {
            if alpha.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: alpha.len(),
                });
            }
            p.add_term(MultiIndex::new(alpha), c);
        }
        Ok(p)
    }

    pub fn from_real_terms<I>(n: usize, max_degree: u32, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        Self::from_terms(
            n,
            max_degree,
            terms.into_iter().map(|(c, a)| (Complex64::new(c, 0.0), a)),
        )
    }

    /// Inverse of [`TaylorPoly::coefficient_vector`]; the constant term is zero.
    pub fn from_coefficient_vector(ordering: &BasisOrdering, v: &[Complex64]) -> Self {
        let mut p = Self::zero(ordering.dim(), ordering.degree());
        for (alpha, &c) in ordering.indices().iter().zip(v) {
            p.add_term(alpha.clone(), c);
        }
        p
    }

    /// Accumulate `c·z^α`. Terms above `max_degree` and exact zeros are skipped.
    pub fn add_term(&mut self, alpha: MultiIndex, c: Complex64) {
        if alpha.degree() > self.max_degree || c == Complex64::new(0.0, 0.0) {
            return;
        }
        let slot = self.coeffs.entry(alpha).or_insert(Complex64::new(0.0, 0.0));
        *slot += c;
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Complex64 {
        self.coeffs
            .get(alpha)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn constant_term(&self) -> Complex64 {
        self.coeff(&MultiIndex::zero(self.n))
    }

    /// Highest degree carrying a nonzero coefficient (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(a, _)| a.degree())
            .max()
            .unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.values().all(|c| c.im == 0.0)
    }

    /// Same polynomial with the constant coefficient removed.
    pub fn without_constant(&self) -> Self {
        let mut p = self.clone();
        p.coeffs.remove(&MultiIndex::zero(self.n));
        p
    }

    /// Copy truncated (or extended) to a new maximum degree.
    pub fn truncated(&self, max_degree: u32) -> Self {
        let mut p = Self::zero(self.n, max_degree);
        for (a, &c) in &self.coeffs {
            p.add_term(a.clone(), c);
        }
        p
    }

    /// Coefficients over the non-constant basis positions of `ordering`.
    pub fn coefficient_vector(&self, ordering: &BasisOrdering) -> Vec<Complex64> {
        ordering.indices().iter().map(|a| self.coeff(a)).collect()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.n, self.max_degree);
        for (a, &c) in &self.coeffs {
            p.add_term(a.clone(), c * s);
        }
        p
    }

    pub fn add(&self, other: &TaylorPoly) -> Self {
        let mut p = self.truncated(self.max_degree.max(other.max_degree));
        for (a, &c) in &other.coeffs {
            p.add_term(a.clone(), c);
        }
        p
    }

    /// Product truncated at `self.max_degree`.
    pub fn mul(&self, other: &TaylorPoly) -> Self {
        let mut p = Self::zero(self.n, self.max_degree);
        for (a, &ca) in &self.coeffs {
            for (b, &cb) in &other.coeffs {
                if a.degree() + b.degree() <= self.max_degree {
                    p.add_term(a.add(b), ca * cb);
                }
            }
        }
        p
    }

    /// `∂p/∂z_k`.
    pub fn derivative(&self, k: usize) -> Self {
        let mut p = Self::zero(self.n, self.max_degree);
        for (a, &c) in &self.coeffs {
            let e = a.exponents();
            if e[k] > 0 {
                let mut b = e.to_vec();
                b[k] -= 1;
                p.add_term(MultiIndex::new(b), c * e[k] as f64);
            }
        }
        p
    }

    /// Evaluate at a real point, using real parts of the coefficients.
    pub fn eval_real(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(a, c)| c.re * a.monomial_real(x))
            .sum()
    }
}

/// `Σ_α p_α z^α` by direct monomial evaluation.
pub fn poly_eval(p: &TaylorPoly, z: &[Complex64]) -> Result<Complex64> {
    if z.len() != p.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.dim(),
            found: z.len(),
        });
    }
    Ok(p.terms().map(|(a, &c)| c * a.monomial(z)).sum())
}

/// Hardy-space inner product in coefficient form, `⟨f,g⟩ = Σ f_α·conj(g_α)`.
pub fn inner_product(f: &TaylorPoly, g: &TaylorPoly) -> Result<Complex64> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: g.dim(),
        });
    }
    Ok(f.terms().map(|(a, &c)| c * g.coeff(a).conj()).sum())
}

/// Degree-`d` truncation of the reproducing kernel
/// `k_{z0}(z) = Π 1/(1 − conj(z0_i) z_i)`, whose α-coefficient is `conj(z0)^α`.
pub fn kernel_coeffs(z0: &[Complex64], d: u32) -> Result<TaylorPoly> {
    if let Some((i, zi)) = z0.iter().enumerate().find(|(_, z)| z.norm() >= 1.0) {
        return Err(Error::validation(format!(
            "kernel point outside the open polydisc: |z0[{i}]| = {} >= 1",
            zi.norm()
        )));
    }
    let n = z0.len();
    let conj: Vec<Complex64> = z0.iter().map(|z| z.conj()).collect();
    let mut p = TaylorPoly::constant(n, d, Complex64::new(1.0, 0.0));
    for k in 1..=d {
        for alpha in indices_of_degree(n, k) {
            let c = alpha.monomial(&conj);
            p.add_term(alpha, c);
        }
    }
    Ok(p)
}

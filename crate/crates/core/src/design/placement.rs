//! Output-injection pole placement `eig(A + L C) = targets` for a diagonal
//! `A`, plus a wrapper for a diagonalizable dense `A`.

use log::{debug, warn};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::generator::EquilibriumSpectrum;
use crate::linalg::{
    eigenvalues, max_abs, multiset_distance, null_space, orthogonal_complement, orthonormalize,
    CMatrix, CVector, ZERO,
};

/// Closed-loop spectra must match the targets to this distance.
pub const PLACEMENT_TOLERANCE: f64 = 1e-8;

/// Targets closer than this trigger a conditioning warning.
pub const TARGET_SEPARATION_WARNING: f64 = 0.05;

const RANK_ONE_ATTEMPTS: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PlacementMethod {
    /// Eigenvector-conditioning iteration on the dual state-feedback
    /// problem, with the rank-one method as fallback.
    #[default]
    Robust,
    /// Random output combination followed by single-output placement.
    RankOne,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlacementOptions {
    pub method: PlacementMethod,
    pub seed: u64,
}

fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{z}")
    }
}

/// PBH test for a diagonal `A`: every group of equal diagonal entries must
/// see a full-rank block of `C`. Returns the first unobservable eigenvalue.
pub fn pbh_unobservable(a: &[Complex64], c: &CMatrix) -> Option<Complex64> {
    let scale = max_abs(c).max(f64::MIN_POSITIVE);
    let mut seen = vec![false; a.len()];
    for i in 0..a.len() {
        if seen[i] {
            continue;
        }
        let group: Vec<usize> = (i..a.len()).filter(|&j| a[j] == a[i]).collect();
        for &j in &group {
            seen[j] = true;
        }
        let cols: Vec<CVector> = group.iter().map(|&j| c.column(j).into_owned()).collect();
        if cols.iter().flatten().all(|z| z.norm() <= 1e-14 * scale) {
            return Some(a[i]);
        }
        if orthonormalize(&cols, 1e-12).len() < group.len() {
            return Some(a[i]);
        }
    }
    None
}

fn check_targets(a_len: usize, targets: &[Complex64]) -> Result<()> {
    if targets.len() != a_len {
        return Err(Error::validation(format!(
            "{} targets given for a block of size {a_len}",
            targets.len()
        )));
    }
    if targets.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(Error::validation("targets must be finite"));
    }
    for i in 0..targets.len() {
        for j in i + 1..targets.len() {
            let gap = (targets[i] - targets[j]).norm();
            if gap == 0.0 {
                return Err(Error::validation(format!(
                    "target {} is repeated; targets must be distinct",
                    fmt_c(targets[i])
                )));
            }
            if gap < TARGET_SEPARATION_WARNING {
                warn!(
                    "targets {} and {} are within {TARGET_SEPARATION_WARNING}; the gain may be ill-conditioned",
                    fmt_c(targets[i]),
                    fmt_c(targets[j])
                );
            }
        }
    }
    Ok(())
}

fn closed_loop(a: &[Complex64], l: &CMatrix, c: &CMatrix) -> CMatrix {
    let mut m = l * c;
    for (i, &ai) in a.iter().enumerate() {
        m[(i, i)] += ai;
    }
    m
}

fn verify(a: &[Complex64], c: &CMatrix, l: &CMatrix, targets: &[Complex64]) -> Result<f64> {
    if l.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::synthesis("gain has non-finite entries"));
    }
    let achieved = eigenvalues(&closed_loop(a, l, c))?;
    let dist = multiset_distance(&achieved, targets).expect("sizes agree");
    if dist > PLACEMENT_TOLERANCE {
        let list: Vec<String> = achieved.iter().map(|&z| fmt_c(z)).collect();
        return Err(Error::synthesis(format!(
            "placement verification failed: achieved spectrum [{}] is {dist:e} from the targets",
            list.join(", ")
        )));
    }
    Ok(dist)
}

/// Gain `L` with `eig(diag(a) + L C) = targets`, verified before returning.
pub fn place_poles(
    a: &[Complex64],
    c: &CMatrix,
    targets: &[Complex64],
    opts: &PlacementOptions,
) -> Result<CMatrix> {
    let n = a.len();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.ncols(),
        });
    }
    check_targets(n, targets)?;
    if n == 0 {
        return Ok(CMatrix::zeros(0, c.nrows()));
    }
    if let Some(bad) = pbh_unobservable(a, c) {
        return Err(Error::synthesis(format!(
            "mode with eigenvalue {} is unobservable from the output (PBH test)",
            fmt_c(bad)
        )));
    }
    let real = a.iter().chain(targets).all(|z| z.im == 0.0) && c.iter().all(|z| z.im == 0.0);
    let finish = |l: CMatrix| if real { l.map(|z| Complex64::new(z.re, 0.0)) } else { l };

    if opts.method == PlacementMethod::Robust {
        match robust(a, c, targets).map(finish).and_then(|l| verify(a, c, &l, targets).map(|_| l)) {
            Ok(l) => return Ok(l),
            Err(e) => debug!("robust placement failed ({e}); trying rank-one placement"),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut last = Error::synthesis("rank-one placement was not attempted");
    for attempt in 0..RANK_ONE_ATTEMPTS {
        let r: Vec<f64> = (0..c.nrows()).map(|_| rng.random_range(-1.0..1.0)).collect();
        match rank_one(a, c, targets, &r)
            .map(finish)
            .and_then(|l| verify(a, c, &l, targets).map(|_| l))
        {
            Ok(l) => return Ok(l),
            Err(e) => {
                debug!("rank-one attempt {attempt} failed: {e}");
                last = e;
            }
        }
    }
    Err(last)
}

/// Single-output placement on `(diag(a), rᵀC)`, lifted back as `L = l rᵀ`.
fn rank_one(a: &[Complex64], c: &CMatrix, targets: &[Complex64], r: &[f64]) -> Result<CMatrix> {
    let n = a.len();
    let rv = CVector::from_iterator(r.len(), r.iter().map(|&x| Complex64::new(x, 0.0)));
    let cr = c.transpose() * &rv;
    let scale = max_abs(c) * rv.norm();
    let mut l = CVector::zeros(n);
    for j in 0..n {
        if cr[j].norm() <= 1e-10 * scale {
            return Err(Error::synthesis(format!(
                "combined output does not see eigenvalue {}",
                fmt_c(a[j])
            )));
        }
        let mut num = Complex64::new(1.0, 0.0);
        for &p in targets {
            num *= a[j] - p;
        }
        let mut den = cr[j];
        for (i, &ai) in a.iter().enumerate() {
            if i != j {
                if ai == a[j] {
                    return Err(Error::synthesis(
                        "rank-one placement needs distinct diagonal entries",
                    ));
                }
                den *= a[j] - ai;
            }
        }
        l[j] = -num / den;
    }
    Ok(&l * rv.transpose())
}

/// Eigenvector-conditioning placement on the dual pair `(Aᵀ, Cᵀ)` with
/// feedback `K = −Lᵀ`. Targets are taken in ascending order of real part,
/// so with a full-rank output the most negative target lands on the first
/// diagonal entry.
fn robust(a: &[Complex64], c: &CMatrix, targets: &[Complex64]) -> Result<CMatrix> {
    let n = a.len();
    let mut sorted = targets.to_vec();
    sorted.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.abs().total_cmp(&y.im.abs())).then(x.im.total_cmp(&y.im)));
    let targets = &sorted[..];
    let b = c.transpose();
    let mut ad = CMatrix::zeros(n, n);
    for (i, &ai) in a.iter().enumerate() {
        ad[(i, i)] = ai;
    }
    let cols: Vec<CVector> = (0..b.ncols()).map(|j| b.column(j).into_owned()).collect();
    let u0 = orthonormalize(&cols, 1e-12);
    let u1 = orthogonal_complement(&u0, n);
    let r = u0.len();
    let u0m = CMatrix::from_columns(&u0);
    let z = u0m.adjoint() * &b;

    let mut x = CMatrix::identity(n, n);
    if r < n {
        let u1m = CMatrix::from_columns(&u1);
        let mut bases: Vec<CMatrix> = Vec::with_capacity(n);
        for &p in targets {
            let shifted = u1m.adjoint() * (&ad - CMatrix::identity(n, n) * p);
            let s = null_space(&shifted, 1e-12);
            if s.is_empty() {
                return Err(Error::synthesis(format!("target {} cannot be assigned", fmt_c(p))));
            }
            bases.push(CMatrix::from_columns(&s));
        }
        // conjugate partner of each target, if the target is complex
        let partner: Vec<Option<usize>> = (0..n)
            .map(|j| {
                if targets[j].im == 0.0 {
                    return None;
                }
                (0..n).find(|&k| k != j && targets[k] == targets[j].conj())
            })
            .collect();
        for j in 0..n {
            let col = if let Some(k) = partner[j].filter(|&k| k < j) {
                x.column(k).map(|z| z.conj())
            } else {
                let s = &bases[j];
                let mut v: CVector = s.column(j % s.ncols()).into_owned();
                v.unscale_mut(v.norm());
                v
            };
            x.set_column(j, &col);
        }
        for _sweep in 0..50 {
            let mut moved: f64 = 0.0;
            for j in 0..n {
                if partner[j].is_some_and(|k| k < j) {
                    continue;
                }
                let others: Vec<CVector> = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| x.column(k).into_owned())
                    .collect();
                let basis = orthonormalize(&others, 1e-12);
                let Some(y) = orthogonal_complement(&basis, n).into_iter().next() else {
                    continue;
                };
                let s = &bases[j];
                let mut v = s * (s.adjoint() * y);
                let nrm = v.norm();
                if nrm < 1e-12 {
                    continue;
                }
                v.unscale_mut(nrm);
                // keep the phase of the previous column so real data stays real
                let phase = v.dotc(&x.column(j).into_owned());
                if phase.norm() > 0.0 {
                    v *= phase / phase.norm();
                }
                moved = moved.max((&v - x.column(j)).norm());
                x.set_column(j, &v);
                if let Some(k) = partner[j] {
                    x.set_column(k, &v.map(|z| z.conj()));
                }
            }
            if moved < 1e-12 {
                break;
            }
        }
    }
    let xinv = x
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::synthesis("closed-loop eigenvector matrix is singular"))?;
    let mut lam = CMatrix::from_element(n, n, ZERO);
    for (j, &p) in targets.iter().enumerate() {
        lam[(j, j)] = p;
    }
    let cl = &x * lam * xinv;
    let zpinv = z
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::synthesis(format!("output matrix pseudo-inverse failed: {e}")))?;
    let k = zpinv * u0m.adjoint() * (ad - cl);
    Ok(-k.transpose())
}

/// Gain for `eig(J + L C) = targets` with `J` given through its
/// eigen-decomposition. Returns a real `n × m` matrix.
pub fn place_poles_linearized(
    spec: &EquilibriumSpectrum,
    c: &DMatrix<f64>,
    targets: &[Complex64],
    opts: &PlacementOptions,
) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: c.ncols(),
        });
    }
    let p = CMatrix::from_columns(spec.right_eigenvectors());
    let cc: CMatrix = c.map(|x| Complex64::new(x, 0.0));
    let lp = place_poles(spec.eigenvalues(), &(&cc * &p), targets, opts)?;
    let l = &p * lp;
    let imag = l.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imag > 1e-8 * max_abs(&l).max(1.0) {
        return Err(Error::synthesis(format!(
            "linearized gain is not real (imaginary part {imag:e}); use conjugate-closed targets"
        )));
    }
    let lr = l.map(|z| z.re);
    let jl = spec.jacobian() + &lr * c;
    let achieved = eigenvalues(&jl.map(|x| Complex64::new(x, 0.0)))?;
    let dist = multiset_distance(&achieved, targets).expect("sizes agree");
    if dist > PLACEMENT_TOLERANCE {
        return Err(Error::synthesis(format!(
            "linearized placement verification failed ({dist:e})"
        )));
    }
    Ok(lr)
}

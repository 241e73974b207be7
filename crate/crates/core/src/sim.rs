//! Fixed-step simulation of the plant, the Koopman observer and the
//! linearized Luenberger baseline, and exponential-rate fitting.

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::basis::{enumerate_basis, MultiIndex};
use crate::design::{
    assemble_observer, build_output_matrices, lift_initial, place_poles, place_poles_linearized,
    recover_state, ObserverRealization, OutputMap, PlacementOptions,
};
use crate::error::{Error, Result};
use crate::generator::{
    build_generator, check_forward_invariance, check_nonresonance, equilibrium_spectrum,
    particular_class, InvarianceVerdict, NonresonanceVerdict, VectorField,
    DEFAULT_INVARIANCE_RESOLUTION,
};
use crate::linalg::{eigenvalues, max_abs, CVector};
use crate::spectral::{
    check_observability_criteria, decompose, partition, ObservabilityReport, SpectralDecomposition,
};

/// Outputs with every `|⟨h_i, ψ⟩|` at or below this are treated as blind to `ψ`.
pub const CRITERION_TOLERANCE: f64 = 1e-8;

/// Spectral gaps below this count as resonances.
pub const RESONANCE_TOLERANCE: f64 = 1e-8;

/// Default fraction of the horizon used by [`fit_rate`].
pub const DEFAULT_FIT_WINDOW: f64 = 0.4;

const MIN_FIT_SAMPLES: usize = 10;

#[derive(Clone, Debug)]
pub struct PlantModel {
    pub field: VectorField,
    pub output: OutputMap,
    pub x0: Vec<f64>,
}

/// Exact output samples on a grid of spacing `spacing`.
#[derive(Clone, Debug)]
pub struct OutputSamples {
    spacing: f64,
    values: Vec<Vec<f64>>,
}

impl OutputSamples {
    pub fn new(spacing: f64, values: Vec<Vec<f64>>) -> Self {
        OutputSamples { spacing, values }
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// Linear interpolation, clamped to the sampled range.
    pub fn at(&self, t: f64) -> Vec<f64> {
        let s = (t / self.spacing).max(0.0);
        let k = (s.floor() as usize).min(self.values.len() - 1);
        if k + 1 >= self.values.len() {
            return self.values[k].clone();
        }
        let w = s - k as f64;
        self.values[k]
            .iter()
            .zip(&self.values[k + 1])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct PlantTrajectory {
    pub dt: f64,
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    /// `y` at every half step, so RK4 stages of the observers see exact samples.
    pub y: OutputSamples,
}

impl PlantTrajectory {
    pub fn steps(&self) -> usize {
        self.t.len() - 1
    }

    /// `y` on the full-step grid.
    pub fn y_grid(&self) -> Vec<Vec<f64>> {
        (0..self.t.len()).map(|k| self.y.sample(2 * k).to_vec()).collect()
    }
}

fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::validation(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= dt) || !t_end.is_finite() {
        return Err(Error::validation(format!("t_end must be at least dt, got {t_end}")));
    }
    Ok((t_end / dt).round() as usize)
}

fn rk4<F>(x: &[f64], h: f64, f: F) -> Vec<f64>
where
    F: Fn(usize, &[f64]) -> Vec<f64>,
{
    let k1 = f(0, x);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(1, &x2);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(1, &x3);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(2, &x4);
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Classical RK4 with `y = h(x)` recorded at every half step.
pub fn integrate_plant(p: &PlantModel, dt: f64, t_end: f64) -> Result<PlantTrajectory> {
    let steps = step_count(dt, t_end)?;
    let n = p.field.dim();
    if p.x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: p.x0.len(),
        });
    }
    let h = 0.5 * dt;
    let mut x = p.x0.clone();
    let mut xs = Vec::with_capacity(steps + 1);
    let mut ys = Vec::with_capacity(2 * steps + 1);
    xs.push(x.clone());
    ys.push(p.output.eval(&x));
    for k in 1..=2 * steps {
        x = rk4(&x, h, |_, z| p.field.eval_real(z));
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::simulation(format!("plant state is not finite at t = {}", k as f64 * h)));
        }
        if let Some(i) = x.iter().position(|v| v.abs() >= 1.0) {
            return Err(Error::simulation(format!(
                "plant left the unit polydisc at t = {}: x{} = {}",
                k as f64 * h,
                i + 1,
                x[i]
            )));
        }
        ys.push(p.output.eval(&x));
        if k % 2 == 0 {
            xs.push(x.clone());
        }
    }
    Ok(PlantTrajectory {
        dt,
        t: (0..=steps).map(|k| k as f64 * dt).collect(),
        x: xs,
        y: OutputSamples::new(h, ys),
    })
}

/// RK4 for the observer in ψ-coordinates; stage outputs are the half-step
/// samples of `y`.
pub fn integrate_observer(
    r: &ObserverRealization,
    y: &OutputSamples,
    f0: &CVector,
    dt: f64,
    steps: usize,
) -> Result<Vec<CVector>> {
    if f0.len() != r.n_states() {
        return Err(Error::DimensionMismatch {
            expected: r.n_states(),
            found: f0.len(),
        });
    }
    let aligned = (y.spacing() - 0.5 * dt).abs() <= 1e-12 * dt && y.len() > 2 * steps;
    let h0 = r.h0();
    let innovation = |k2: usize, t: f64| -> Vec<f64> {
        let yk = if aligned { y.sample(k2).to_vec() } else { y.at(t) };
        yk.iter().zip(h0).map(|(a, b)| a - b).collect()
    };
    let n = r.n_states();
    let mut f = f0.clone();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(f.clone());
    let (mut k1, mut k2, mut k3, mut k4) = (
        CVector::zeros(n),
        CVector::zeros(n),
        CVector::zeros(n),
        CVector::zeros(n),
    );
    let half = Complex64::new(0.5 * dt, 0.0);
    let full = Complex64::new(dt, 0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        let (d0, d1, d2) = (
            innovation(2 * k, t),
            innovation(2 * k + 1, t + 0.5 * dt),
            innovation(2 * k + 2, t + dt),
        );
        r.derivative(&f, &d0, &mut k1);
        r.derivative(&(&f + &k1 * half), &d1, &mut k2);
        r.derivative(&(&f + &k2 * half), &d1, &mut k3);
        r.derivative(&(&f + &k3 * full), &d2, &mut k4);
        f += (&k1 + &k2 * Complex64::new(2.0, 0.0) + &k3 * Complex64::new(2.0, 0.0) + &k4)
            * Complex64::new(dt / 6.0, 0.0);
        if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::simulation(format!(
                "observer state is not finite at t = {}",
                (k + 1) as f64 * dt
            )));
        }
        out.push(f.clone());
    }
    Ok(out)
}

/// How the baseline copies the dynamics.
#[derive(Clone, Debug)]
pub enum BaselineModel {
    /// `x̂' = J x̂ + L (J_h x̂ − (y − h(0)))`.
    Linear {
        jacobian: DMatrix<f64>,
        output_jacobian: DMatrix<f64>,
    },
    /// `x̂' = F(x̂) + L (h(x̂) − y)`.
    Nonlinear,
}

pub fn integrate_baseline(
    field: &VectorField,
    output: &OutputMap,
    model: &BaselineModel,
    gain: &DMatrix<f64>,
    xhat0: &[f64],
    y: &OutputSamples,
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let aligned = (y.spacing() - 0.5 * dt).abs() <= 1e-12 * dt && y.len() > 2 * steps;
    let h0 = output.h0();
    let mut x = xhat0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        let ys: [Vec<f64>; 3] = if aligned {
            [y.sample(2 * k).to_vec(), y.sample(2 * k + 1).to_vec(), y.sample(2 * k + 2).to_vec()]
        } else {
            [y.at(t), y.at(t + 0.5 * dt), y.at(t + dt)]
        };
        x = rk4(&x, dt, |stage, z| {
            let yk = &ys[stage];
            let (mut dx, innov): (DVector<f64>, DVector<f64>) = match model {
                BaselineModel::Linear {
                    jacobian,
                    output_jacobian,
                } => {
                    let zv = DVector::from_column_slice(z);
                    let innov = output_jacobian * &zv
                        - DVector::from_iterator(yk.len(), yk.iter().zip(&h0).map(|(a, b)| a - b));
                    (jacobian * zv, innov)
                }
                BaselineModel::Nonlinear => {
                    let hz = output.eval(z);
                    (
                        DVector::from_vec(field.eval_real(z)),
                        DVector::from_iterator(yk.len(), hz.iter().zip(yk).map(|(a, b)| a - b)),
                    )
                }
            };
            dx += gain * innov;
            dx.as_slice().to_vec()
        });
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::simulation(format!(
                "baseline state is not finite at t = {}",
                (k + 1) as f64 * dt
            )));
        }
        out.push(x.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateFit {
    /// Slope of `log err` against `t`; `-∞` when the window is all zeros.
    pub rate: f64,
    /// RMS deviation of `log err` from the fitted line.
    pub residual: f64,
    /// Samples used.
    pub samples: usize,
}

/// Least-squares exponential rate over the last `window_fraction` of the
/// series. The window is cut at the first non-positive sample.
pub fn fit_rate(err: &[f64], dt: f64, window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::validation(format!(
            "fit window must lie in (0, 1], got {window_fraction}"
        )));
    }
    if err.is_empty() {
        return Err(Error::validation("empty error series"));
    }
    let last = err.len() - 1;
    let start = ((1.0 - window_fraction) * last as f64).floor() as usize;
    let window = &err[start..];
    if window.iter().all(|&e| e == 0.0) {
        return Ok(RateFit {
            rate: f64::NEG_INFINITY,
            residual: 0.0,
            samples: window.len(),
        });
    }
    let len = window.iter().position(|&e| !(e > 0.0)).unwrap_or(window.len());
    if len < MIN_FIT_SAMPLES {
        return Err(Error::validation(format!(
            "only {len} positive samples in the fit window"
        )));
    }
    let pts: Vec<(f64, f64)> = window[..len]
        .iter()
        .enumerate()
        .map(|(i, &e)| ((start + i) as f64 * dt, e.ln()))
        .collect();
    let nf = len as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let rate = sxy / sxx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - ml - rate * (p.0 - mt)).powi(2))
        .sum::<f64>()
        / nf)
        .sqrt();
    Ok(RateFit {
        rate,
        residual,
        samples: len,
    })
}

/// Everything needed to run one experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub name: String,
    pub field: VectorField,
    pub output: OutputMap,
    pub degree: u32,
    pub beta: f64,
    pub targets: Vec<f64>,
    pub baseline_targets: Vec<f64>,
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    pub fit_window: f64,
    pub seed: u64,
    pub skip_invariance_check: bool,
    pub linear_baseline: bool,
}

#[derive(Clone, Debug)]
pub enum InvarianceStatus {
    Checked(InvarianceVerdict),
    Skipped,
    /// The field is not of the particular class the check applies to.
    NotApplicable,
}

/// Synthesis products and verdicts, before any simulation.
#[derive(Clone, Debug)]
pub struct Synthesis {
    pub nonresonance: NonresonanceVerdict,
    pub invariance: InvarianceStatus,
    pub spectral: SpectralDecomposition,
    pub criteria: ObservabilityReport,
    pub realization: ObserverRealization,
    pub targets: Vec<Complex64>,
    pub achieved: Vec<Complex64>,
    pub baseline_gain: DMatrix<f64>,
    pub baseline_targets: Vec<Complex64>,
    pub baseline_achieved: Vec<Complex64>,
    pub eigen_residual: f64,
    pub biorthonormality_error: f64,
}

impl Synthesis {
    pub fn n_d(&self) -> usize {
        self.spectral.len()
    }

    pub fn n_beta(&self) -> usize {
        self.realization.partition().n_beta()
    }
}

fn reals(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn sort_spectrum(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    v
}

/// Every pipeline stage up to and including both gains.
pub fn synthesize(e: &Experiment) -> Result<Synthesis> {
    let n = e.field.dim();
    if e.output.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.output.dim(),
        });
    }
    if !(e.beta < 0.0) {
        return Err(Error::validation(format!("β must be negative, got {}", e.beta)));
    }
    if let Some(t) = e.targets.iter().find(|&&t| t > e.beta) {
        return Err(Error::validation(format!("target {t} has real part above β = {}", e.beta)));
    }

    let spec = equilibrium_spectrum(&e.field).map_err(|x| x.in_stage("assumptions"))?;
    let nonresonance = check_nonresonance(&spec, e.degree, RESONANCE_TOLERANCE);
    if let Some(r) = nonresonance.resonances.first() {
        return Err(Error::assumption(format!(
            "λ_{} = {} resonates with the combination {} (gap {:e})",
            r.j + 1,
            spec.eigenvalues()[r.j],
            r.m,
            r.gap
        ))
        .in_stage("assumptions"));
    }
    let invariance = match particular_class(&e.field) {
        Some(_) if e.skip_invariance_check => {
            warn!("forward-invariance check skipped by configuration");
            InvarianceStatus::Skipped
        }
        Some(class) => {
            let v = check_forward_invariance(&class.couplings, DEFAULT_INVARIANCE_RESOLUTION)
                .map_err(|x| x.in_stage("assumptions"))?;
            if !v.passed {
                return Err(Error::assumption(format!(
                    "sufficient condition for forward invariance fails: max |u_i| = {:?}",
                    v.max_abs
                ))
                .in_stage("assumptions"));
            }
            InvarianceStatus::Checked(v)
        }
        None => {
            if !e.skip_invariance_check {
                warn!("vector field is outside the class covered by the invariance check; relying on runtime monitoring");
            }
            InvarianceStatus::NotApplicable
        }
    };

    let ordering = enumerate_basis(n, e.degree).map_err(|x| x.in_stage("generator"))?;
    let m = build_generator(&e.field, &ordering).map_err(|x| x.in_stage("generator"))?;
    let spectral = decompose(&m, &spec).map_err(|x| x.in_stage("spectral"))?;
    let eigen_residual = spectral.right_residual(&m).max(spectral.left_residual(&m))
        / max_abs(m.entries()).max(1.0);
    let biorthonormality_error = spectral.biorthonormality_error();

    let part = partition(&spectral, e.beta).map_err(|x| x.in_stage("partition"))?;
    if e.targets.len() != part.n_beta() {
        return Err(Error::validation(format!(
            "{} targets given but N_β = {} at β = {}",
            e.targets.len(),
            part.n_beta(),
            e.beta
        ))
        .in_stage("partition"));
    }

    let outputs = e.output.taylor(e.degree);
    let criteria = check_observability_criteria(&outputs, &spectral, &part, CRITERION_TOLERANCE);
    if !criteria.convergence.passed() {
        let names: Vec<String> = criteria
            .convergence
            .failing
            .iter()
            .map(|&p| spectral.label(p).to_string())
            .collect();
        return Err(Error::synthesis(format!(
            "no output sees the β-unstable mode(s) {}: every ⟨h_i, ψ⟩ vanishes",
            names.join(", ")
        ))
        .in_stage("criteria"));
    }

    let opts = PlacementOptions {
        seed: e.seed,
        ..Default::default()
    };
    let targets = reals(&e.targets);
    let (c_plus, _) = build_output_matrices(&outputs, &spectral, &part);
    let a_plus: Vec<Complex64> = part.plus.iter().map(|&p| spectral.eigenvalue(p).conj()).collect();
    let l_plus = place_poles(&a_plus, &c_plus, &targets, &opts).map_err(|x| x.in_stage("placement"))?;
    let realization = assemble_observer(&spectral, &part, &outputs, &e.output.h0(), &l_plus)
        .map_err(|x| x.in_stage("placement"))?;
    let mut closed = &l_plus * &c_plus;
    for (i, &a) in a_plus.iter().enumerate() {
        closed[(i, i)] += a;
    }
    let achieved = sort_spectrum(eigenvalues(&closed)?);

    let baseline_targets = reals(&e.baseline_targets);
    let jh = e.output.jacobian();
    let baseline_gain = place_poles_linearized(&spec, &jh, &baseline_targets, &opts)
        .map_err(|x| x.in_stage("baseline"))?;
    let jl = spec.jacobian() + &baseline_gain * &jh;
    let baseline_achieved = sort_spectrum(eigenvalues(&jl.map(|x| Complex64::new(x, 0.0)))?);

    Ok(Synthesis {
        nonresonance,
        invariance,
        spectral,
        criteria,
        realization,
        targets,
        achieved,
        baseline_gain,
        baseline_targets,
        baseline_achieved,
        eigen_residual,
        biorthonormality_error,
    })
}

#[derive(Clone, Debug)]
pub struct SimulationResult {
    pub synthesis: Synthesis,
    pub t: Vec<f64>,
    pub x_true: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub x_koopman: Vec<Vec<f64>>,
    pub x_baseline: Vec<Vec<f64>>,
    pub err_koopman: Vec<f64>,
    pub err_baseline: Vec<f64>,
    pub koopman_rate: RateFit,
    pub baseline_rate: RateFit,
    /// Per-state-component rates of `|x̂_i − x_i|`, `None` where the fit fails.
    pub koopman_component_rates: Vec<Option<RateFit>>,
    pub baseline_component_rates: Vec<Option<RateFit>>,
    pub max_imaginary_residue: f64,
    /// `max_k ‖C f̂(t_k) − (y(t_k) − h(0))‖` over the last tenth of the horizon.
    pub final_output_residual: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn component_rates(est: &[Vec<f64>], truth: &[Vec<f64>], dt: f64, w: f64) -> Vec<Option<RateFit>> {
    (0..truth[0].len())
        .map(|i| {
            let e: Vec<f64> = est.iter().zip(truth).map(|(a, b)| (a[i] - b[i]).abs()).collect();
            fit_rate(&e, dt, w).ok()
        })
        .collect()
}

/// Synthesis, simulation of plant and both observers, and rate fits.
pub fn run_experiment(e: &Experiment) -> Result<SimulationResult> {
    let synthesis = synthesize(e)?;
    let steps = step_count(e.dt, e.t_end)?;
    let plant = PlantModel {
        field: e.field.clone(),
        output: e.output.clone(),
        x0: e.x0.clone(),
    };
    let traj = integrate_plant(&plant, e.dt, e.t_end).map_err(|x| x.in_stage("simulation"))?;
    let r = &synthesis.realization;
    let f0 = lift_initial(&e.xhat0, &synthesis.spectral).map_err(|x| x.in_stage("simulation"))?;
    let fs = integrate_observer(r, &traj.y, &f0, e.dt, steps).map_err(|x| x.in_stage("simulation"))?;

    let model = if e.linear_baseline {
        BaselineModel::Linear {
            jacobian: e.field.jacobian(),
            output_jacobian: e.output.jacobian(),
        }
    } else {
        BaselineModel::Nonlinear
    };
    let x_baseline = integrate_baseline(
        &e.field,
        &e.output,
        &model,
        &synthesis.baseline_gain,
        &e.xhat0,
        &traj.y,
        e.dt,
        steps,
    )
    .map_err(|x| x.in_stage("simulation"))?;

    let mut x_koopman = Vec::with_capacity(fs.len());
    let mut max_imag: f64 = 0.0;
    for f in &fs {
        let s = recover_state(f, r);
        max_imag = max_imag.max(s.imaginary_residue);
        x_koopman.push(s.x);
    }
    let y = traj.y_grid();
    let tail = fs.len() - fs.len() / 10 - 1;
    let h0 = r.h0();
    let final_output_residual = (tail..fs.len())
        .map(|k| {
            let cf = r.output_matrix() * &fs[k];
            cf.iter()
                .zip(&y[k])
                .zip(h0)
                .map(|((c, yk), h)| (c - Complex64::new(yk - h, 0.0)).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);

    let err_koopman: Vec<f64> = x_koopman.iter().zip(&traj.x).map(|(a, b)| distance(a, b)).collect();
    let err_baseline: Vec<f64> = x_baseline.iter().zip(&traj.x).map(|(a, b)| distance(a, b)).collect();
    let koopman_rate = fit_rate(&err_koopman, e.dt, e.fit_window).map_err(|x| x.in_stage("fit"))?;
    let baseline_rate = fit_rate(&err_baseline, e.dt, e.fit_window).map_err(|x| x.in_stage("fit"))?;

    Ok(SimulationResult {
        koopman_component_rates: component_rates(&x_koopman, &traj.x, e.dt, e.fit_window),
        baseline_component_rates: component_rates(&x_baseline, &traj.x, e.dt, e.fit_window),
        synthesis,
        t: traj.t,
        x_true: traj.x,
        y,
        x_koopman,
        x_baseline,
        err_koopman,
        err_baseline,
        koopman_rate,
        baseline_rate,
        max_imaginary_residue: max_imag,
        final_output_residual,
    })
}

/// Convenience: the moment estimate `E[x^α]` along an observer trajectory.
pub fn moment_trajectory(
    fs: &[CVector],
    alpha: &MultiIndex,
    r: &ObserverRealization,
) -> Result<Vec<Complex64>> {
    let u = r.recovery_vector(alpha)?;
    Ok(fs.iter().map(|f| f.dotc(&u)).collect())
}

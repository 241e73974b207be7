//! CSV and JSON writers for a finished run.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::sim::{InvarianceStatus, RateFit, SimulationResult, Synthesis};
use crate::spectral::CriterionVerdict;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per grid point:
/// `t,x1..,y1..,xk_hat1..,xb_hat1..,err_koopman,err_baseline`.
pub fn trajectory_csv(r: &SimulationResult) -> String {
    let n = r.x_true[0].len();
    let m = r.y[0].len();
    let mut head = vec!["t".to_owned()];
    head.extend((1..=n).map(|i| format!("x{i}")));
    head.extend((1..=m).map(|i| format!("y{i}")));
    head.extend((1..=n).map(|i| format!("xk_hat{i}")));
    head.extend((1..=n).map(|i| format!("xb_hat{i}")));
    head.push("err_koopman".into());
    head.push("err_baseline".into());
    let mut s = head.join(",");
    s.push('\n');
    for k in 0..r.t.len() {
        let mut row = vec![num(r.t[k])];
        row.extend(r.x_true[k].iter().map(|&v| num(v)));
        row.extend(r.y[k].iter().map(|&v| num(v)));
        row.extend(r.x_koopman[k].iter().map(|&v| num(v)));
        row.extend(r.x_baseline[k].iter().map(|&v| num(v)));
        row.push(num(r.err_koopman[k]));
        row.push(num(r.err_baseline[k]));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// One row per mode: exponents, `λ_α`, and `|⟨h_i, ψ_α⟩|` per output.
pub fn spectrum_csv(s: &Synthesis) -> String {
    let d = &s.spectral;
    let n = d.ordering().dim();
    let m = s.criteria.inner.nrows();
    let mut head: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    head.push("re_lambda".into());
    head.push("im_lambda".into());
    head.extend((1..=m).map(|i| format!("abs_inner_h{i}")));
    let mut out = head.join(",");
    out.push('\n');
    for p in 0..d.len() {
        let mut row: Vec<String> = d.mode(p).exponents().iter().map(|e| e.to_string()).collect();
        row.push(num(d.eigenvalue(p).re));
        row.push(num(d.eigenvalue(p).im));
        row.extend((0..m).map(|i| num(s.criteria.inner[(i, p)].norm())));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct Fit {
    rate: Option<f64>,
    residual: f64,
    samples: usize,
}

impl From<&RateFit> for Fit {
    fn from(f: &RateFit) -> Self {
        Fit {
            rate: f.rate.is_finite().then_some(f.rate),
            residual: f.residual,
            samples: f.samples,
        }
    }
}

#[derive(Serialize)]
struct ObserverSummary {
    targets: Vec<[f64; 2]>,
    achieved_poles: Vec<[f64; 2]>,
    rate: Fit,
    component_rates: Vec<Option<Fit>>,
}

#[derive(Serialize)]
struct Verdict {
    passed: bool,
    failing_modes: Vec<String>,
}

#[derive(Serialize)]
struct Verdicts {
    nonresonance_passed: bool,
    nonresonance_margin: f64,
    invariance: &'static str,
    observability: Verdict,
    detectability: Verdict,
    convergence: Verdict,
}

#[derive(Serialize)]
struct Summary {
    name: String,
    n: usize,
    d: u32,
    n_d: usize,
    beta: f64,
    n_beta: usize,
    dt: f64,
    t_end: f64,
    koopman: ObserverSummary,
    baseline: ObserverSummary,
    verdicts: Verdicts,
    eigen_residual: f64,
    biorthonormality_error: f64,
    max_imaginary_residue: f64,
    final_output_residual: f64,
}

fn pairs(v: &[Complex64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn verdict(v: &CriterionVerdict, s: &Synthesis) -> Verdict {
    Verdict {
        passed: v.passed(),
        failing_modes: v.failing.iter().map(|&p| s.spectral.label(p).to_string()).collect(),
    }
}

pub fn invariance_label(s: &InvarianceStatus) -> &'static str {
    match s {
        InvarianceStatus::Checked(v) if v.passed => "passed",
        InvarianceStatus::Checked(_) => "failed",
        InvarianceStatus::Skipped => "skipped",
        InvarianceStatus::NotApplicable => "not-applicable",
    }
}

pub fn summary_json(name: &str, dt: f64, t_end: f64, r: &SimulationResult) -> String {
    let s = &r.synthesis;
    let ord = s.spectral.ordering();
    let summary = Summary {
        name: name.to_owned(),
        n: ord.dim(),
        d: ord.degree(),
        n_d: s.n_d(),
        beta: s.realization.partition().beta,
        n_beta: s.n_beta(),
        dt,
        t_end,
        koopman: ObserverSummary {
            targets: pairs(&s.targets),
            achieved_poles: pairs(&s.achieved),
            rate: (&r.koopman_rate).into(),
            component_rates: r.koopman_component_rates.iter().map(|f| f.as_ref().map(Fit::from)).collect(),
        },
        baseline: ObserverSummary {
            targets: pairs(&s.baseline_targets),
            achieved_poles: pairs(&s.baseline_achieved),
            rate: (&r.baseline_rate).into(),
            component_rates: r.baseline_component_rates.iter().map(|f| f.as_ref().map(Fit::from)).collect(),
        },
        verdicts: Verdicts {
            nonresonance_passed: s.nonresonance.passed(),
            nonresonance_margin: s.nonresonance.margin,
            invariance: invariance_label(&s.invariance),
            observability: verdict(&s.criteria.pao, s),
            detectability: verdict(&s.criteria.detectability, s),
            convergence: verdict(&s.criteria.convergence, s),
        },
        eigen_residual: s.eigen_residual,
        biorthonormality_error: s.biorthonormality_error,
        max_imaginary_residue: r.max_imaginary_residue,
        final_output_residual: r.final_output_residual,
    };
    let mut out = serde_json::to_string_pretty(&summary).expect("summary is serializable");
    out.push('\n');
    out
}

/// Writes `trajectory.csv`, `spectrum.csv` and `summary.json` into `dir`.
pub fn write_outputs(dir: &Path, name: &str, dt: f64, t_end: f64, r: &SimulationResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trajectory.csv"), trajectory_csv(r))?;
    fs::write(dir.join("spectrum.csv"), spectrum_csv(&r.synthesis))?;
    fs::write(dir.join("summary.json"), summary_json(name, dt, t_end, r))?;
    Ok(())
}

//! Configuration, presets, and the `run` / `check` entry points.

pub mod config;
pub mod presets;
pub mod report;

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::basis::enumerate_basis;
use crate::design::build_output_matrices;
use crate::error::{Error, Result};
use crate::generator::{
    build_generator, check_forward_invariance, check_nonresonance, equilibrium_spectrum,
    particular_class, DEFAULT_INVARIANCE_RESOLUTION,
};
use crate::linalg::{max_abs, CMatrix};
use crate::sim::{run_experiment, SimulationResult, CRITERION_TOLERANCE, RESONANCE_TOLERANCE};
use crate::spectral::{check_observability_criteria, decompose, partition, CriterionVerdict};

pub use config::{emit, parse_config, ExperimentConfig, Overrides};

/// Where a config comes from.
#[derive(Clone, Debug)]
pub enum Source<'a> {
    Preset(&'a str),
    File(&'a Path),
}

/// Loads, applies overrides and validates.
pub fn load(source: Source<'_>, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut c = match source {
        Source::Preset(name) => presets::load(name)?,
        Source::File(path) => config::parse_unchecked(&std::fs::read_to_string(path)?)?,
    };
    c.apply(overrides);
    config::check(c)
}

/// Runs the full pipeline and writes the output files into `out_dir`.
pub fn run(c: &ExperimentConfig, out_dir: &Path) -> Result<SimulationResult> {
    let e = c.to_experiment().map_err(|x| x.in_stage("config"))?;
    let r = run_experiment(&e)?;
    report::write_outputs(out_dir, &c.system.name, c.observer.dt, c.observer.t_end, &r)
        .map_err(|x| x.in_stage("output"))?;
    Ok(r)
}

/// Human-readable assumption and criteria report. `failure` holds the
/// first hard failure, after which the report stops.
#[derive(Debug)]
pub struct CheckReport {
    pub text: String,
    pub failure: Option<Error>,
}

fn c_str(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

fn matrix_str(m: &CMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:>12}", c_str(m[(i, j)]))).collect();
        let _ = writeln!(s, "    [{}]", row.join(" "));
    }
    s
}

/// Validates assumptions and observability criteria without simulating.
pub fn check(c: &ExperimentConfig) -> CheckReport {
    let mut text = String::new();
    let failure = check_into(c, &mut text).err();
    if let Some(e) = &failure {
        let _ = writeln!(text, "FAILED: {e}");
    }
    CheckReport { text, failure }
}

fn check_into(c: &ExperimentConfig, out: &mut String) -> Result<()> {
    let e = c.to_experiment()?;
    let _ = writeln!(out, "system {} (n = {}), d = {}, β = {}", e.name, e.field.dim(), e.degree, e.beta);

    let spec = equilibrium_spectrum(&e.field).map_err(|x| x.in_stage("assumptions"))?;
    let ev: Vec<String> = spec.eigenvalues().iter().map(|&z| c_str(z)).collect();
    let _ = writeln!(out, "equilibrium: stable, simple eigenvalues [{}]", ev.join(", "));

    let nr = check_nonresonance(&spec, e.degree, RESONANCE_TOLERANCE);
    let _ = writeln!(
        out,
        "non-resonance up to degree {}: {} (margin {:.6e})",
        e.degree,
        if nr.passed() { "passed" } else { "FAILED" },
        nr.margin
    );
    if let Some(r) = nr.resonances.first() {
        return Err(Error::assumption(format!(
            "λ_{} resonates with the combination {} (gap {:e})",
            r.j + 1,
            r.m,
            r.gap
        ))
        .in_stage("assumptions"));
    }

    match particular_class(&e.field) {
        Some(_) if e.skip_invariance_check => {
            let _ = writeln!(out, "forward invariance: skipped by configuration (runtime monitoring only)");
        }
        Some(class) => {
            let v = check_forward_invariance(&class.couplings, DEFAULT_INVARIANCE_RESOLUTION)?;
            let maxes: Vec<String> = v.max_abs.iter().map(|x| format!("{x:.4}")).collect();
            let _ = writeln!(
                out,
                "forward invariance: {} (max |u_i| = [{}])",
                if v.passed { "passed" } else { "FAILED" },
                maxes.join(", ")
            );
            if !v.passed {
                return Err(Error::assumption("sufficient condition for forward invariance fails")
                    .in_stage("assumptions"));
            }
        }
        None => {
            let _ = writeln!(out, "forward invariance: not applicable to this vector field");
        }
    }

    let ordering = enumerate_basis(e.field.dim(), e.degree)?;
    let m = build_generator(&e.field, &ordering).map_err(|x| x.in_stage("generator"))?;
    let d = decompose(&m, &spec).map_err(|x| x.in_stage("spectral"))?;
    let norm = max_abs(m.entries()).max(1.0);
    let _ = writeln!(
        out,
        "N_d = {}, eigen-residual {:.3e}, biorthonormality error {:.3e}",
        d.len(),
        d.right_residual(&m).max(d.left_residual(&m)) / norm,
        d.biorthonormality_error()
    );

    let part = partition(&d, e.beta).map_err(|x| x.in_stage("partition"))?;
    let _ = writeln!(out, "N_β = {}", part.n_beta());
    let outputs = e.output.taylor(e.degree);
    let rep = check_observability_criteria(&outputs, &d, &part, CRITERION_TOLERANCE);
    let _ = writeln!(out, "β-unstable modes and |⟨h_i, ψ⟩|:");
    for &p in &part.plus {
        let ip: Vec<String> = (0..outputs.len()).map(|i| format!("{:.6e}", rep.inner[(i, p)].norm())).collect();
        let _ = writeln!(out, "  {}  [{}]", d.label(p), ip.join(", "));
    }
    let verdict = |name: &str, v: &CriterionVerdict, out: &mut String| {
        let failing: Vec<String> = v.failing.iter().map(|&p| d.label(p).to_string()).collect();
        if v.passed() {
            let _ = writeln!(out, "{name}: passed");
        } else {
            let _ = writeln!(out, "{name}: FAILED ({})", failing.join(", "));
        }
    };
    verdict("observability of principal modes", &rep.pao, out);
    verdict("detectability", &rep.detectability, out);
    verdict("convergence criterion", &rep.convergence, out);
    let (cp, _) = build_output_matrices(&outputs, &d, &part);
    let _ = writeln!(out, "C⁺ =");
    out.push_str(&matrix_str(&cp));

    if !rep.convergence.passed() {
        let names: Vec<String> = rep.convergence.failing.iter().map(|&p| d.label(p).to_string()).collect();
        return Err(Error::synthesis(format!(
            "no output sees the β-unstable mode(s) {}",
            names.join(", ")
        ))
        .in_stage("criteria"));
    }
    if e.targets.len() != part.n_beta() {
        return Err(Error::validation(format!(
            "{} targets given but N_β = {}",
            e.targets.len(),
            part.n_beta()
        ))
        .in_stage("partition"));
    }
    Ok(())
}

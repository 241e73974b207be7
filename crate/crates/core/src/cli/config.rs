//! TOML experiment configuration.

use serde::{Deserialize, Serialize};

use crate::basis::MultiIndex;
use crate::design::{OutputMap, OutputTerm};
use crate::error::{Error, Result};
use crate::generator::VectorField;
use crate::sim::{Experiment, DEFAULT_FIT_WINDOW};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub system: SystemConfig,
    pub output: OutputConfig,
    pub observer: ObserverConfig,
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub flags: Flags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    pub n: usize,
    /// One list of terms per component of `F`.
    pub vector_field: Vec<Vec<Term>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub alpha: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub components: Vec<Vec<OutputTermConfig>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Monomial,
    Cos,
    Sin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputTermConfig {
    pub kind: OutputKind,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<u32>>,
    /// 1-based state index for `cos`/`sin`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub degree: u32,
    pub beta: f64,
    pub targets: Vec<f64>,
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_fit_window")]
    pub fit_window: f64,
}

fn default_fit_window() -> f64 {
    DEFAULT_FIT_WINDOW
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    #[serde(default)]
    pub skip_invariance_check: bool,
    #[serde(default = "yes")]
    pub linear_baseline: bool,
}

fn yes() -> bool {
    true
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            skip_invariance_check: false,
            linear_baseline: true,
        }
    }
}

/// Command-line overrides applied on top of a config.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub degree: Option<u32>,
    pub beta: Option<f64>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.dt {
            self.observer.dt = v;
        }
        if let Some(v) = o.t_end {
            self.observer.t_end = v;
        }
        if let Some(v) = o.degree {
            self.observer.degree = v;
        }
        if let Some(v) = o.beta {
            self.observer.beta = v;
        }
    }

    /// Every schema violation, each prefixed with its field path.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.system.n;
        if n == 0 {
            errs.push("system.n: must be at least 1".into());
        }
        if self.system.vector_field.len() != n {
            errs.push(format!(
                "system.vector_field: F must have n components (n = {n}, found {})",
                self.system.vector_field.len()
            ));
        }
        for (i, comp) in self.system.vector_field.iter().enumerate() {
            for (j, t) in comp.iter().enumerate() {
                let path = format!("system.vector_field[{i}][{j}]");
                if t.alpha.len() != n {
                    errs.push(format!("{path}.alpha: expected {n} exponents, found {}", t.alpha.len()));
                }
                if !t.coeff.is_finite() {
                    errs.push(format!("{path}.coeff: must be finite"));
                }
            }
        }

        if self.output.components.is_empty() {
            errs.push("output.components: need at least one output".into());
        }
        for (i, comp) in self.output.components.iter().enumerate() {
            for (j, t) in comp.iter().enumerate() {
                let path = format!("output.components[{i}][{j}]");
                if !t.coeff.is_finite() {
                    errs.push(format!("{path}.coeff: must be finite"));
                }
                match t.kind {
                    OutputKind::Monomial => {
                        match &t.alpha {
                            Some(a) if a.len() == n => {}
                            Some(a) => errs.push(format!(
                                "{path}.alpha: expected {n} exponents, found {}",
                                a.len()
                            )),
                            None => errs.push(format!("{path}.alpha: required for a monomial")),
                        }
                        if t.variable.is_some() {
                            errs.push(format!("{path}.variable: not allowed for a monomial"));
                        }
                    }
                    OutputKind::Cos | OutputKind::Sin => {
                        match t.variable {
                            Some(v) if (1..=n).contains(&v) => {}
                            Some(v) => errs.push(format!("{path}.variable: {v} is not in 1..={n}")),
                            None => errs.push(format!("{path}.variable: required for cos/sin")),
                        }
                        if t.alpha.is_some() {
                            errs.push(format!("{path}.alpha: not allowed for cos/sin"));
                        }
                    }
                }
            }
        }

        let o = &self.observer;
        if o.degree == 0 {
            errs.push("observer.degree: must be at least 1".into());
        }
        if !(o.beta < 0.0) || !o.beta.is_finite() {
            errs.push(format!("observer.beta: must be negative, got {}", o.beta));
        }
        for (i, &t) in o.targets.iter().enumerate() {
            if !t.is_finite() || t > o.beta {
                errs.push(format!("observer.targets[{i}]: {t} must not exceed beta = {}", o.beta));
            }
        }
        for (name, v) in [("x0", &o.x0), ("xhat0", &o.xhat0)] {
            if v.len() != n {
                errs.push(format!("observer.{name}: expected {n} components, found {}", v.len()));
            }
            for (i, &x) in v.iter().enumerate() {
                if !(x.abs() < 1.0) {
                    errs.push(format!("observer.{name}[{i}]: {x} is outside (-1, 1)"));
                }
            }
        }
        if !(o.dt > 0.0) || !o.dt.is_finite() {
            errs.push(format!("observer.dt: must be positive, got {}", o.dt));
        }
        if !(o.t_end >= o.dt) || !o.t_end.is_finite() {
            errs.push(format!("observer.t_end: must be at least dt, got {}", o.t_end));
        }
        if !(o.fit_window > 0.0 && o.fit_window <= 1.0) {
            errs.push(format!("observer.fit_window: must lie in (0, 1], got {}", o.fit_window));
        }

        if self.baseline.targets.len() != n {
            errs.push(format!(
                "baseline.targets: expected {n} targets, found {}",
                self.baseline.targets.len()
            ));
        }
        for (i, &t) in self.baseline.targets.iter().enumerate() {
            if !(t < 0.0) || !t.is_finite() {
                errs.push(format!("baseline.targets[{i}]: {t} must be negative"));
            }
        }
        errs
    }

    /// Builds the experiment; the config must already be valid.
    pub fn to_experiment(&self) -> Result<Experiment> {
        let n = self.system.n;
        let terms = self
            .system
            .vector_field
            .iter()
            .map(|c| c.iter().map(|t| (t.coeff, t.alpha.clone())).collect())
            .collect();
        let field = VectorField::from_real_terms(n, terms)?;
        let components = self
            .output
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .map(|t| match t.kind {
                        OutputKind::Monomial => OutputTerm::Monomial {
                            coeff: t.coeff,
                            alpha: MultiIndex::new(t.alpha.clone().unwrap_or_default()),
                        },
                        OutputKind::Cos => OutputTerm::Cos {
                            coeff: t.coeff,
                            variable: t.variable.unwrap_or(1) - 1,
                        },
                        OutputKind::Sin => OutputTerm::Sin {
                            coeff: t.coeff,
                            variable: t.variable.unwrap_or(1) - 1,
                        },
                    })
                    .collect()
            })
            .collect();
        let output = OutputMap::new(n, components)?;
        let o = &self.observer;
        Ok(Experiment {
            name: self.system.name.clone(),
            field,
            output,
            degree: o.degree,
            beta: o.beta,
            targets: o.targets.clone(),
            baseline_targets: self.baseline.targets.clone(),
            x0: o.x0.clone(),
            xhat0: o.xhat0.clone(),
            t_end: o.t_end,
            dt: o.dt,
            fit_window: o.fit_window,
            seed: self.seed,
            skip_invariance_check: self.flags.skip_invariance_check,
            linear_baseline: self.flags.linear_baseline,
        })
    }
}

/// Parses without validating.
pub fn parse_unchecked(text: &str) -> Result<ExperimentConfig> {
    toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string().trim_end().to_owned()]))
}

/// Parses and validates, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let c = parse_unchecked(text)?;
    check(c)
}

/// Validates a config, returning it unchanged if it passes.
pub fn check(c: ExperimentConfig) -> Result<ExperimentConfig> {
    let errs = c.validate();
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(Error::Config(errs))
    }
}

pub fn emit(c: &ExperimentConfig) -> String {
    toml::to_string(c).expect("config is serializable")
}

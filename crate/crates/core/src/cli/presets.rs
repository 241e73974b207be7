//! Built-in experiment configurations.

use crate::cli::config::{parse_config, ExperimentConfig};
use crate::error::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("experiment1", include_str!("../../presets/experiment1.toml")),
    ("lorenz", include_str!("../../presets/lorenz.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

/// Raw TOML text of a preset.
pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn load(name: &str) -> Result<ExperimentConfig> {
    let t = text(name).ok_or_else(|| {
        let known: Vec<&str> = names().collect();
        Error::validation(format!("unknown preset '{name}' (known: {})", known.join(", ")))
    })?;
    parse_config(t)
}

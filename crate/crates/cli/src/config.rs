use std::path::Path;

use serde::Deserialize;

use crate::commands::CliError;

/// Per-step uses: a single size repeated K times, or an explicit list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum StepSpec {
    Uniform(u64),
    List(Vec<u64>),
}

/// Sweep settings read from a file; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "N")]
    pub n_total: Option<u64>,
    #[serde(rename = "K")]
    pub k_steps: Option<usize>,
    pub runway: Option<u64>,
    pub step: Option<StepSpec>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub grid_step: Option<f64>,
    pub low_noise_only: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let is_toml = path
            .extension()
            .and_then(|x| x.to_str())
            .is_some_and(|x| x.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }
}

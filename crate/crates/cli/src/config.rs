use std::fs;
use std::path::{Path, PathBuf};

use bicl_core::env::{EnvInstance, EnvSpec, GraphEnvConfig, RouteEnvConfig};
use bicl_core::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// One experiment: exactly one environment section plus training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteEnvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphEnvConfig>,
    pub train: TrainConfig,
}

fn default_label() -> String {
    "run".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let config: Self = serde_json::from_str(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
        config.env_spec()?;
        config.train.validate()?;
        Ok(config)
    }

    pub fn env_spec(&self) -> Result<EnvSpec> {
        match (&self.route, &self.graph) {
            (Some(r), None) => Ok(EnvSpec::Route(r.clone())),
            (None, Some(g)) => Ok(EnvSpec::Graph(g.clone())),
            (None, None) => Err(CliError::Config("needs a `route` or a `graph` section".into())),
            (Some(_), Some(_)) => Err(CliError::Config("has both `route` and `graph` sections; keep one".into())),
        }
    }

    pub fn env(&self) -> Result<EnvInstance> {
        Ok(EnvInstance::from_spec(&self.env_spec()?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const ENV_HOST: &str = "MINDSCREEN_HOST";
pub const ENV_PORT: &str = "MINDSCREEN_PORT";
pub const ENV_MODEL: &str = "MINDSCREEN_MODEL";
pub const ENV_LOG: &str = "MINDSCREEN_LOG";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            model_path: "model.json".into(),
            log_path: "assessments.jsonl".into(),
        }
    }
}

impl ServiceConfig {
    /// Reads a `.json` file as JSON and anything else as TOML. Missing keys
    /// keep their defaults.
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies `MINDSCREEN_*` overrides. `lookup` is normally `std::env::var`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ServiceError> {
        if let Some(v) = lookup(ENV_HOST) {
            self.host = v;
        }
        if let Some(v) = lookup(ENV_PORT) {
            self.port = v
                .parse()
                .map_err(|_| ServiceError::Config(format!("{ENV_PORT}={v} is not a port number")))?;
        }
        if let Some(v) = lookup(ENV_MODEL) {
            self.model_path = v.into();
        }
        if let Some(v) = lookup(ENV_LOG) {
            self.log_path = v.into();
        }
        Ok(())
    }

    pub fn from_process_env(mut self) -> Result<Self, ServiceError> {
        self.apply_env(|k| std::env::var(k).ok())?;
        Ok(self)
    }
}

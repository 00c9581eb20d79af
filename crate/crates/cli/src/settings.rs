//! Run settings. Each value comes from, in increasing precedence: built-in
//! defaults, the `--config` file, command-line flags, `MINDSCREEN_*`
//! environment variables.

use std::path::{Path, PathBuf};

use mindscreen_core::evaluation::CvOptions;
use mindscreen_core::svm::SvmParams;
use mindscreen_core::synth::{GeneratorConfig, MarginalTargets};
use mindscreen_core::ClassifierConfig;
use mindscreen_service::ServiceConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_SEED: &str = "MINDSCREEN_SEED";
pub const ENV_K: &str = "MINDSCREEN_K";
pub const ENV_C: &str = "MINDSCREEN_C";
pub const ENV_TOL: &str = "MINDSCREEN_TOL";
pub const ENV_FOLDS: &str = "MINDSCREEN_FOLDS";
pub const ENV_TEST_FRACTION: &str = "MINDSCREEN_TEST_FRACTION";

/// Generator keys of a config file. The seed is the top-level `seed`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub n: Option<usize>,
    pub class_priors: Option<[f64; 3]>,
    pub separability: Option<f64>,
    pub marginals: Option<MarginalTargets>,
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub tol: Option<f64>,
    pub folds: Option<usize>,
    pub test_fraction: Option<f64>,
    pub stratified: Option<bool>,
    pub generator: Option<GeneratorSection>,
    pub service: Option<ServiceConfig>,
}

impl FileConfig {
    /// `.json` is parsed as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::File(format!("{}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// The subset of flags that also exist in config files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagValues {
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub c: Option<f64>,
    pub tol: Option<f64>,
    pub folds: Option<usize>,
    pub test_fraction: Option<f64>,
    pub stratified: bool,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub model: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub k: usize,
    pub c: f64,
    pub tol: f64,
    pub folds: usize,
    pub test_fraction: f64,
    pub stratified: bool,
    pub generator: GeneratorConfig,
    pub service: ServiceConfig,
}

impl Default for Settings {
    fn default() -> Self {
        let svm = SvmParams::default();
        let cv = CvOptions::default();
        Self {
            seed: 42,
            k: ClassifierConfig::default().k,
            c: svm.c,
            tol: svm.tol,
            folds: cv.folds,
            test_fraction: 0.2,
            stratified: cv.stratified,
            generator: GeneratorConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

fn env_parse<T: std::str::FromStr>(
    lookup: &impl Fn(&str) -> Option<String>,
    key: &str,
    slot: &mut T,
) -> Result<(), CliError> {
    if let Some(raw) = lookup(key) {
        *slot = raw.trim().parse().map_err(|_| CliError::Config(format!("{key}={raw} is not valid")))?;
    }
    Ok(())
}

impl Settings {
    pub fn resolve(
        file: Option<FileConfig>,
        flags: &FlagValues,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, CliError> {
        let mut s = Settings::default();
        if let Some(f) = file {
            s.seed = f.seed.unwrap_or(s.seed);
            s.k = f.k.unwrap_or(s.k);
            s.c = f.c.unwrap_or(s.c);
            s.tol = f.tol.unwrap_or(s.tol);
            s.folds = f.folds.unwrap_or(s.folds);
            s.test_fraction = f.test_fraction.unwrap_or(s.test_fraction);
            s.stratified = f.stratified.unwrap_or(s.stratified);
            if let Some(g) = f.generator {
                let d = s.generator;
                s.generator = GeneratorConfig {
                    n: g.n.unwrap_or(d.n),
                    class_priors: g.class_priors.unwrap_or(d.class_priors),
                    separability: g.separability.unwrap_or(d.separability),
                    marginals: g.marginals.unwrap_or(d.marginals),
                    seed: d.seed,
                };
            }
            if let Some(svc) = f.service {
                s.service = svc;
            }
        }
        s.seed = flags.seed.unwrap_or(s.seed);
        s.k = flags.k.unwrap_or(s.k);
        s.c = flags.c.unwrap_or(s.c);
        s.tol = flags.tol.unwrap_or(s.tol);
        s.folds = flags.folds.unwrap_or(s.folds);
        s.test_fraction = flags.test_fraction.unwrap_or(s.test_fraction);
        s.stratified |= flags.stratified;
        if let Some(v) = &flags.host {
            s.service.host = v.clone();
        }
        s.service.port = flags.port.unwrap_or(s.service.port);
        if let Some(v) = &flags.model {
            s.service.model_path = v.clone();
        }
        if let Some(v) = &flags.log {
            s.service.log_path = v.clone();
        }

        env_parse(&lookup, ENV_SEED, &mut s.seed)?;
        env_parse(&lookup, ENV_K, &mut s.k)?;
        env_parse(&lookup, ENV_C, &mut s.c)?;
        env_parse(&lookup, ENV_TOL, &mut s.tol)?;
        env_parse(&lookup, ENV_FOLDS, &mut s.folds)?;
        env_parse(&lookup, ENV_TEST_FRACTION, &mut s.test_fraction)?;
        s.service.apply_env(&lookup).map_err(|e| CliError::Config(e.to_string()))?;
        s.generator.seed = s.seed;
        s.check()?;
        Ok(s)
    }

    fn check(&self) -> Result<(), CliError> {
        if self.folds < 2 {
            return Err(CliError::Usage(format!("folds must be at least 2, got {}", self.folds)));
        }
        if self.k == 0 {
            return Err(CliError::Usage("k must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(CliError::Usage(format!("test fraction must be in (0, 1), got {}", self.test_fraction)));
        }
        Ok(())
    }

    pub fn classifier(&self) -> ClassifierConfig {
        ClassifierConfig { k: self.k, svm: SvmParams { c: self.c, tol: self.tol, ..SvmParams::default() } }
    }

    pub fn cv(&self) -> CvOptions {
        CvOptions { folds: self.folds, seed: self.seed, stratified: self.stratified }
    }

    pub fn model_path(&self) -> &PathBuf {
        &self.service.model_path
    }
}

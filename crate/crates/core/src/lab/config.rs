use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regmaps::{RegMap, RegMapConfig};
use crate::riccati::FilterModel;

/// Prefix of environment overrides; `__` separates path segments, e.g.
/// `KBFLOW_RUN__STEP=0.001`.
pub const ENV_PREFIX: &str = "KBFLOW_";

/// `[model]`: one matrix file per block, relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "A_file")]
    pub a_file: String,
    #[serde(rename = "R_file")]
    pub r_file: String,
    #[serde(rename = "C_file")]
    pub c_file: String,
    #[serde(rename = "Sigma_file")]
    pub sigma_file: String,
    pub x0_file: String,
    #[serde(rename = "P0_file")]
    pub p0_file: String,
}

impl ModelConfig {
    pub fn build(&self, base: &Path) -> Result<FilterModel> {
        FilterModel::from_files(
            &base.join(&self.a_file),
            &base.join(&self.r_file),
            &base.join(&self.c_file),
            &base.join(&self.sigma_file),
            &base.join(&self.x0_file),
            &base.join(&self.p0_file),
        )
    }
}

/// `[run]`: numerical settings shared by the suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    /// Integrator step; the model's characteristic step when absent.
    #[serde(default)]
    pub step: Option<f64>,
    /// Gramian window.
    #[serde(default = "defaults::v")]
    pub v: f64,
    /// Ensemble sizes of the mean-field experiment.
    #[serde(default = "defaults::n_list")]
    pub n_list: Vec<usize>,
    /// Replicates of the mean-field experiment.
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    /// Random models drawn by the model sweeps.
    #[serde(default = "defaults::models")]
    pub models: usize,
    /// Samples of the Gaussian Monte Carlo oracles.
    #[serde(default = "defaults::mc_samples")]
    pub mc_samples: usize,
    /// Replicates of the Nystrom Monte Carlo.
    #[serde(default = "defaults::nystrom_replicates")]
    pub nystrom_replicates: usize,
    /// Horizon of the mean-field experiment.
    #[serde(default = "defaults::meanfield_t")]
    pub meanfield_t: f64,
    /// Step of the mean-field experiment.
    #[serde(default = "defaults::meanfield_step")]
    pub meanfield_step: f64,
}

mod defaults {
    pub fn t_end() -> f64 {
        5.0
    }
    pub fn v() -> f64 {
        1.0
    }
    pub fn n_list() -> Vec<usize> {
        vec![64, 256, 1024, 4096]
    }
    pub fn replicates() -> usize {
        20
    }
    pub fn models() -> usize {
        20
    }
    pub fn mc_samples() -> usize {
        100_000
    }
    pub fn nystrom_replicates() -> usize {
        10_000
    }
    pub fn meanfield_t() -> f64 {
        1.0
    }
    pub fn meanfield_step() -> f64 {
        1e-3
    }
}

impl RunConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            t_end: defaults::t_end(),
            step: None,
            v: defaults::v(),
            n_list: defaults::n_list(),
            replicates: defaults::replicates(),
            models: defaults::models(),
            mc_samples: defaults::mc_samples(),
            nystrom_replicates: defaults::nystrom_replicates(),
            meanfield_t: defaults::meanfield_t(),
            meanfield_step: defaults::meanfield_step(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.t_end) || !pos(self.v) || !pos(self.meanfield_t) || !pos(self.meanfield_step) {
            return Err(Error::Config(
                "t_end, v, meanfield_t and meanfield_step must be positive".into(),
            ));
        }
        if let Some(h) = self.step {
            if !pos(h) {
                return Err(Error::Config(format!("step must be positive, got {h}")));
            }
        }
        if self.n_list.iter().any(|&n| n < 2) {
            return Err(Error::Config("ensemble sizes must be at least 2".into()));
        }
        if self.replicates < 2 || self.nystrom_replicates < 2 || self.mc_samples < 2 {
            return Err(Error::Config("replicate and sample counts must be at least 2".into()));
        }
        if self.models == 0 {
            return Err(Error::Config("models must be positive".into()));
        }
        Ok(())
    }
}

/// Whole experiment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub regmap: Option<RegMapConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    /// Read a TOML file and apply `KBFLOW_*` overrides from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, &base, std::env::vars())
    }

    /// Parse TOML text, applying `(key, value)` overrides whose key starts
    /// with [`ENV_PREFIX`].
    pub fn from_toml_str(
        text: &str,
        base: &Path,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self> {
        let mut value: toml::Value =
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML: {e}")))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX) && k.len() > ENV_PREFIX.len())
            .collect();
        overrides.sort();
        for (k, v) in overrides {
            apply_override(&mut value, &k[ENV_PREFIX.len()..], &v)?;
        }
        let mut cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.base_dir = base.to_path_buf();
        cfg.run.validate()?;
        for s in &cfg.suites {
            if !super::suite_names().contains(&s.as_str()) {
                return Err(Error::UnknownSuite(s.clone()));
            }
        }
        Ok(cfg)
    }

    pub fn build_model(&self) -> Result<Option<FilterModel>> {
        self.model.as_ref().map(|m| m.build(&self.base_dir)).transpose()
    }

    pub fn build_map(&self) -> Result<Option<RegMap>> {
        self.regmap.as_ref().map(|m| m.build(&self.base_dir)).transpose()
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Set `path` (segments separated by `__`, matched case-insensitively
/// against existing keys) to `raw`.
fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<()> {
    let segments: Vec<&str> = path.split("__").collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("malformed override key {ENV_PREFIX}{path}")));
    }
    let mut cur = root;
    for (i, seg) in segments.iter().enumerate() {
        let table = cur.as_table_mut().ok_or_else(|| {
            Error::Config(format!("override {ENV_PREFIX}{path} descends into a non-table"))
        })?;
        let key = table
            .keys()
            .find(|k| k.eq_ignore_ascii_case(seg))
            .cloned()
            .unwrap_or_else(|| seg.to_ascii_lowercase());
        if i + 1 == segments.len() {
            table.insert(key, parse_scalar(raw));
            return Ok(());
        }
        cur = table
            .entry(key)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "suites = [\"logdet\"]\n[run]\nseed = 3\n";

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_toml_str(BASE, Path::new("."), Vec::new()).unwrap();
        assert_eq!(c.run, RunConfig::with_seed(3));
        assert_eq!(c.suites, vec!["logdet"]);
    }

    #[test]
    fn env_overrides_apply() {
        let env = vec![
            ("KBFLOW_RUN__STEP".to_string(), "0.002".to_string()),
            ("KBFLOW_RUN__N_LIST".to_string(), "[8, 16]".to_string()),
            ("KBFLOW_OUTPUT_DIR".to_string(), "out here".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let c = ExperimentConfig::from_toml_str(BASE, Path::new("."), env).unwrap();
        assert_eq!(c.run.step, Some(0.002));
        assert_eq!(c.run.n_list, vec![8, 16]);
        assert_eq!(c.output_dir.as_deref(), Some("out here"));
    }

    #[test]
    fn rejects_bad_configs() {
        let no_seed = "[run]\nt_end = 1.0\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(no_seed, Path::new("."), Vec::new()),
            Err(Error::Config(_))
        ));
        let bad_step = "[run]\nseed = 1\nstep = -1.0\n";
        assert!(ExperimentConfig::from_toml_str(bad_step, Path::new("."), Vec::new()).is_err());
        let unknown = "suites = [\"nope\"]\n[run]\nseed = 1\n";
        assert!(matches!(
            ExperimentConfig::from_toml_str(unknown, Path::new("."), Vec::new()),
            Err(Error::UnknownSuite(_))
        ));
    }
}

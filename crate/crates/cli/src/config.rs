//! Layered configuration: flag > environment > config file > default.

use std::path::{Path, PathBuf};
use std::time::Duration;

use qbridge_core::scaler::{EndpointConfig, SamplingWeights};
use serde::Deserialize;

use crate::CliError;

/// Keys accepted in the TOML config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed_root: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub rng_seed: Option<u64>,
    pub temperature: Option<f64>,
    pub k: Option<usize>,
    pub weights: Option<[f64; 4]>,
    pub external_checker: Option<String>,
    pub endpoint: Option<FileEndpoint>,
}

/// `[endpoint]` table. The API key is only read from the environment.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEndpoint {
    pub base_url: Option<String>,
    pub model_name: Option<String>,
    pub max_in_flight: Option<usize>,
    pub retry_limit: Option<usize>,
    pub timeout_secs: Option<f64>,
    pub backoff_secs: Option<f64>,
    pub max_tokens: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.seed_root, &mut cfg.manifest_path, &mut cfg.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Settings given on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagConfig {
    pub seed_root: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub rng_seed: Option<u64>,
    pub temperature: Option<f64>,
    pub k: Option<usize>,
    pub external_checker: Option<String>,
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
}

/// Fully resolved settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub seed_root: PathBuf,
    pub manifest_path: PathBuf,
    pub out_dir: PathBuf,
    pub rng_seed: u64,
    pub temperature: f64,
    pub k: usize,
    pub weights: SamplingWeights,
    pub external_checker: Option<String>,
    pub endpoint: EndpointConfig,
}

pub const DEFAULT_OUT_DIR: &str = "qbridge-out";
pub const DEFAULT_SEED_ROOT: &str = "seeds";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

fn secs(v: f64, key: &str) -> Result<Duration, CliError> {
    Duration::try_from_secs_f64(v).map_err(|_| CliError::Usage(format!("{key} must be a non-negative number of seconds")))
}

impl CliConfig {
    /// Merges the layers and makes every path absolute against `cwd`.
    pub fn resolve(
        flags: &FlagConfig,
        env: impl Fn(&str) -> Option<String>,
        file: &FileConfig,
        cwd: &Path,
    ) -> Result<Self, CliError> {
        let out_dir = flags
            .out_dir
            .clone()
            .or_else(|| file.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let manifest_path = flags
            .manifest_path
            .clone()
            .or_else(|| file.manifest_path.clone())
            .unwrap_or_else(|| out_dir.join(MANIFEST_FILE));
        let seed_root = flags
            .seed_root
            .clone()
            .or_else(|| file.seed_root.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_SEED_ROOT));
        let weights = match file.weights {
            Some(w) => SamplingWeights::new(w).map_err(|e| CliError::Usage(e.to_string()))?,
            None => SamplingWeights::default(),
        };

        let mut endpoint = EndpointConfig::default();
        if let Some(e) = &file.endpoint {
            if let Some(v) = &e.base_url {
                endpoint.base_url = v.clone();
            }
            if let Some(v) = &e.model_name {
                endpoint.model_name = v.clone();
            }
            if let Some(v) = e.max_in_flight {
                endpoint.max_in_flight = v;
            }
            if let Some(v) = e.retry_limit {
                endpoint.retry_limit = v;
            }
            if let Some(v) = e.timeout_secs {
                endpoint.timeout = secs(v, "endpoint.timeout_secs")?;
            }
            if let Some(v) = e.backoff_secs {
                endpoint.backoff = secs(v, "endpoint.backoff_secs")?;
            }
            if let Some(v) = e.max_tokens {
                endpoint.max_tokens = v;
            }
        }
        endpoint.apply_vars(&env);
        if let Some(v) = &flags.endpoint_url {
            endpoint.base_url = v.clone();
        }
        if let Some(v) = &flags.model_name {
            endpoint.model_name = v.clone();
        }

        let absolute = |p: PathBuf| if p.is_absolute() { p } else { cwd.join(p) };
        Ok(Self {
            seed_root: absolute(seed_root),
            manifest_path: absolute(manifest_path),
            out_dir: absolute(out_dir),
            rng_seed: flags.rng_seed.or(file.rng_seed).unwrap_or(0),
            temperature: flags.temperature.or(file.temperature).unwrap_or(0.6),
            k: flags.k.or(file.k).unwrap_or(5),
            weights,
            external_checker: flags
                .external_checker
                .clone()
                .or_else(|| file.external_checker.clone()),
            endpoint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qbridge_core::scaler::{ENV_KEY, ENV_MODEL, ENV_URL};

    fn env<'a>(vars: &'a [(&'a str, &'a str)]) -> impl Fn(&str) -> Option<String> + 'a {
        move |k| vars.iter().find(|(n, _)| *n == k).map(|(_, v)| v.to_string())
    }

    #[test]
    fn defaults() {
        let c = CliConfig::resolve(&FlagConfig::default(), |_| None, &FileConfig::default(), Path::new("/w")).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("/w/qbridge-out"));
        assert_eq!(c.manifest_path, PathBuf::from("/w/qbridge-out/manifest.jsonl"));
        assert_eq!(c.seed_root, PathBuf::from("/w/seeds"));
        assert_eq!((c.rng_seed, c.temperature, c.k), (0, 0.6, 5));
        assert_eq!(c.endpoint, EndpointConfig::default());
    }

    #[test]
    fn three_layer_precedence() {
        let file: FileConfig = toml::from_str(
            "k = 3\ntemperature = 0.3\n[endpoint]\nbase_url = \"http://file/v1\"\nmodel_name = \"file-model\"\nretry_limit = 7\n",
        )
        .unwrap();
        let vars = [(ENV_URL, "http://env/v1"), (ENV_MODEL, "env-model"), (ENV_KEY, "secret")];

        let none = FlagConfig::default();
        let c = CliConfig::resolve(&none, |_| None, &file, Path::new("/")).unwrap();
        assert_eq!(c.endpoint.base_url, "http://file/v1");
        assert_eq!(c.endpoint.retry_limit, 7);

        let c = CliConfig::resolve(&none, env(&vars), &file, Path::new("/")).unwrap();
        assert_eq!(c.endpoint.base_url, "http://env/v1");
        assert_eq!(c.endpoint.model_name, "env-model");
        assert_eq!(c.endpoint.api_key.as_deref(), Some("secret"));
        assert_eq!(c.k, 3);

        let flags = FlagConfig {
            endpoint_url: Some("http://flag/v1".into()),
            k: Some(10),
            ..FlagConfig::default()
        };
        let c = CliConfig::resolve(&flags, env(&vars), &file, Path::new("/")).unwrap();
        assert_eq!(c.endpoint.base_url, "http://flag/v1");
        assert_eq!(c.endpoint.model_name, "env-model");
        assert_eq!(c.k, 10);
        assert_eq!(c.temperature, 0.3);
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.toml");
        std::fs::write(&path, "seed_root = \"s\"\nout_dir = \"/abs/out\"\n").unwrap();
        let file = FileConfig::load(&path).unwrap();
        assert_eq!(file.seed_root, Some(dir.path().join("s")));
        assert_eq!(file.out_dir, Some(PathBuf::from("/abs/out")));
    }

    #[test]
    fn invalid_inputs_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.toml");
        std::fs::write(&path, "colour = 1\n").unwrap();
        assert!(matches!(FileConfig::load(&path), Err(CliError::Usage(_))));
        let file = FileConfig {
            weights: Some([0.5, 0.5, 0.5, 0.5]),
            ..FileConfig::default()
        };
        assert!(matches!(
            CliConfig::resolve(&FlagConfig::default(), |_| None, &file, Path::new("/")),
            Err(CliError::Usage(_))
        ));
    }
}

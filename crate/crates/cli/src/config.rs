use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use personasim::analytics::DEFAULT_AGE_BINS;
use personasim::domain::validate_bin_edges;
use personasim::gateway::{GatewayConfig, MockConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub store: PathBuf,
    pub census: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
    /// Directory with template overrides.
    pub templates: Option<PathBuf>,
    pub item_bank: Option<PathBuf>,
    /// Report output root.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            store: "personasim.db".into(),
            census: None,
            baseline: None,
            templates: None,
            item_bank: None,
            out: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderKind,
    pub model: String,
    pub endpoint: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub concurrency: usize,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub paths: Paths,
    pub bins: Vec<f64>,
    pub mock: MockConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            provider: ProviderKind::Mock,
            model: "deepseek-chat".into(),
            endpoint: "https://api.deepseek.com/v1".into(),
            api_key_env: "PERSONASIM_API_KEY".into(),
            temperature: 0.7,
            concurrency: 4,
            max_retries: 3,
            timeout_secs: 120,
            paths: Paths::default(),
            bins: DEFAULT_AGE_BINS.to_vec(),
            mock: MockConfig::default(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config, String> {
        let cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                toml::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
            }
            None => Config::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.concurrency == 0 {
            return Err("concurrency must be at least 1".into());
        }
        validate_bin_edges(&self.bins).map_err(|e| format!("bins: {e}"))?;
        Ok(())
    }

    pub fn gateway(&self) -> GatewayConfig {
        GatewayConfig {
            max_retries: self.max_retries,
            concurrency: self.concurrency,
            timeout_secs: self.timeout_secs,
            temperature: Some(self.temperature),
            ..GatewayConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c: Config = toml::from_str("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.temperature, 0.7);
        let c: Config = toml::from_str(
            "provider = \"live\"\nconcurrency = 8\nbins = [20, 40, 60]\n[paths]\nstore = \"x.db\"\n[mock]\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(c.provider, ProviderKind::Live);
        assert_eq!(c.paths.store, PathBuf::from("x.db"));
        assert_eq!(c.mock.seed, 3);
        assert_eq!(c.mock.poor_word_threshold, 40);
        c.validate().unwrap();
        assert!(toml::from_str::<Config>("temprature = 1.0").is_err());
        let bad = Config { temperature: 3.0, ..Config::default() };
        assert!(bad.validate().is_err());
    }
}

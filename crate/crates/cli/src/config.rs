use std::fmt;
use std::path::{Path, PathBuf};

use daepca::daepca::NetworkConfig;
use daepca::dataio::{SynthConfig, TeLayout};
use daepca::evaluation::{Method, MethodConfig, MIN_REPETITIONS};
use daepca::subspace::KernelConfig;
use serde::{Deserialize, Serialize};

/// Configuration bundled into the binary, used when `--config` is absent.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

/// A configuration problem; maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    /// Independent trials per stochastic method in `eval`.
    pub trials: usize,
    pub seed: u64,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub network: NetworkConfig,
    pub kernel: KernelConfig,
    pub eval: EvalConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory written by `synth`.
    pub dir: PathBuf,
    /// Tennessee Eastman directory; when set it replaces `dir` as the source.
    pub te_dir: Option<PathBuf>,
    pub te: TeLayout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Methods to compare; empty means just `method`.
    pub methods: Vec<Method>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub repetitions: usize,
    /// Training-set sizes (leading rows); empty means the full set.
    pub n_train: Vec<usize>,
    /// Test set to score; `None` means the first one.
    pub fault: Option<u32>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::DaePca2,
            trials: 10,
            seed: 0,
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            network: NetworkConfig::default(),
            kernel: KernelConfig::default(),
            eval: EvalConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("data"),
            te_dir: None,
            te: TeLayout::default(),
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Kpca, Method::DaePca2],
            repetitions: MIN_REPETITIONS,
            n_train: Vec::new(),
            fault: None,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>) -> Result<RunConfig, ConfigError> {
        match path {
            None => RunConfig::parse(DEFAULT_CONFIG),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", p.display())))?;
                RunConfig::parse(&text)
                    .map_err(|e| ConfigError(format!("{}: {}", p.display(), e.0)))
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |e: daepca::Error| ConfigError(e.to_string());
        if self.trials == 0 {
            return Err(ConfigError("trials must be at least 1".into()));
        }
        self.synth.validate().map_err(wrap)?;
        // m is taken from the data at fit time
        let mut net = self.network.clone();
        net.m = net.m.max(1);
        net.validate().map_err(wrap)?;
        self.kernel.validate().map_err(wrap)?;
        if self.data.te_dir.is_some() {
            self.data.te.validate().map_err(wrap)?;
        }
        if self.bench.repetitions < MIN_REPETITIONS {
            return Err(ConfigError(format!(
                "bench.repetitions must be at least {MIN_REPETITIONS}"
            )));
        }
        if self.bench.methods.is_empty() {
            return Err(ConfigError("bench.methods must not be empty".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn method_config(&self, method: Method) -> MethodConfig {
        MethodConfig {
            method,
            network: self.network.clone(),
            kernel: self.kernel,
        }
    }

    pub fn eval_methods(&self) -> Vec<Method> {
        if self.eval.methods.is_empty() {
            vec![self.method]
        } else {
            self.eval.methods.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let cfg = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(cfg.synth.observed_dim, 20);
        // printing and reparsing gives the same configuration
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("methd = \"pca\"").is_err());
        assert!(RunConfig::parse("[network]\nlearning_rate = 0.1").is_err());
        assert!(RunConfig::parse("[kernel]\nkind = \"rbf\"\nwidth = 1.0\nextra = 2").is_err());
        assert!(RunConfig::parse("method = \"svm\"").is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(RunConfig::parse("trials = 0").is_err());
        assert!(RunConfig::parse("[network]\na = 40\nd = 20").is_err());
        assert!(RunConfig::parse("[network]\nalpha = 1.5").is_err());
        assert!(RunConfig::parse("[kernel]\nkind = \"rbf\"\nwidth = -1.0").is_err());
        assert!(RunConfig::parse("[bench]\nrepetitions = 2").is_err());
        let ok = RunConfig::parse("method = \"kpca\"\n[kernel]\nkind = \"linear\"").unwrap();
        assert_eq!(ok.method, Method::Kpca);
        assert_eq!(ok.kernel, KernelConfig::Linear);
    }
}

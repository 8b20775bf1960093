//! Run configuration: defaults, TOML file, environment, CLI flags, in
//! that precedence order. Flag overrides are applied by the argument
//! parser in the binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gates::GateKind;
use crate::model::TransmonModel;
use crate::optimize::{OptimizerConfig, SynthesisConfig};
use crate::robustness::DisturbanceConfig;

/// Environment variable that overrides the base seed when set.
pub const SEED_ENV_VAR: &str = "CRABFORGE_SEED";

fn default_gates() -> Vec<GateKind> {
    GateKind::ALL.to_vec()
}

fn default_runs_per_gate() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("solutions")
}

/// Everything a batch invocation needs, loadable from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: TransmonModel,
    pub synthesis: SynthesisConfig,
    pub optimizer: OptimizerConfig,
    pub disturbance: DisturbanceConfig,
    /// Gates the optimize command synthesizes, in order.
    pub gates: Vec<GateKind>,
    /// Independent runs per gate; run i uses seed base_seed + i.
    pub runs_per_gate: usize,
    pub base_seed: u64,
    /// Where solution files and reports land.
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: TransmonModel::default(),
            synthesis: SynthesisConfig::default(),
            optimizer: OptimizerConfig::default(),
            disturbance: DisturbanceConfig::default(),
            gates: default_gates(),
            runs_per_gate: default_runs_per_gate(),
            base_seed: 0,
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.synthesis.validate()?;
        self.optimizer.validate()?;
        self.disturbance.validate()?;
        if self.gates.is_empty() {
            return Err(Error::Config("gates must not be empty".into()));
        }
        if self.runs_per_gate < 1 {
            return Err(Error::Config("runs_per_gate must be at least 1".into()));
        }
        Ok(())
    }

    /// Parse a TOML file into a config, leaving defaults in place for
    /// omitted keys.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(config)
    }

    /// Apply environment overrides. A malformed value is a config
    /// error, not a silent fallback.
    pub fn apply_environment(&mut self) -> Result<()> {
        if let Ok(raw) = std::env::var(SEED_ENV_VAR) {
            let seed: u64 = raw.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV_VAR} must be an unsigned integer, got '{raw}'"))
            })?;
            self.base_seed = seed;
        }
        Ok(())
    }
}

/// Defaults, then the file when given, then the environment.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let mut config = match path {
        Some(p) => RunConfig::from_toml_file(p)?,
        None => RunConfig::default(),
    };
    config.apply_environment()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_are_valid() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(config.gates.len(), 4);
        assert_eq!(config.runs_per_gate, 5);
        assert_eq!(config.synthesis.num_components, 10);
        assert_eq!(config.optimizer.max_cost_evaluations, 200_000);
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");

        let full = toml::to_string(&RunConfig::default()).unwrap();
        std::fs::write(&path, &full).unwrap();
        let loaded = RunConfig::from_toml_file(&path).unwrap();
        assert_eq!(loaded, RunConfig::default());

        let partial = r#"
            base_seed = 7
            gates = ["cnot", "pi8"]

            [optimizer]
            target_infidelity = 1e-3

            [model]
            gate_time = 50.0
        "#;
        std::fs::write(&path, partial).unwrap();
        let loaded = RunConfig::from_toml_file(&path).unwrap();
        assert_eq!(loaded.base_seed, 7);
        assert_eq!(loaded.gates, vec![GateKind::Cnot, GateKind::Pi8]);
        assert_eq!(loaded.optimizer.target_infidelity, 1e-3);
        assert_eq!(loaded.model.gate_time, 50.0);
        assert_eq!(loaded.model.levels_per_mode, 3);
        assert_eq!(loaded.runs_per_gate, 5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "base_sede = 7\n").unwrap();
        let err = RunConfig::from_toml_file(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");

        std::fs::write(&path, "[optimizer]\ntarget = 1e-3\n").unwrap();
        assert!(RunConfig::from_toml_file(&path).is_err());
    }

    #[test]
    fn malformed_toml_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.toml");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "base_seed = [[[").unwrap();
        drop(f);
        assert!(matches!(
            RunConfig::from_toml_file(&path).unwrap_err(),
            Error::Parse { .. }
        ));
        assert!(matches!(
            RunConfig::from_toml_file(Path::new("/nonexistent/x.toml")).unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let config = RunConfig {
            gates: Vec::new(),
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());

        let config = RunConfig {
            runs_per_gate: 0,
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());

        let config = RunConfig {
            optimizer: OptimizerConfig {
                target_infidelity: -1.0,
                ..OptimizerConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(config.validate().is_err());
    }
}

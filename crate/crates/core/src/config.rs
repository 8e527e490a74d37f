//! Pipeline configuration file (TOML or JSON).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ChannelMode;
use crate::embeddings::EmbeddingConfig;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::functionals::FunctionalsConfig;
use crate::scoring::ScoringConfig;
use crate::synth::CohortSpec;

/// Every tunable of a pipeline run; omitted sections take their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub channel_mode: ChannelMode,
    pub scoring: ScoringConfig,
    pub functionals: FunctionalsConfig,
    pub embedding: EmbeddingConfig,
    pub experiment: ExperimentConfig,
    pub synth: CohortSpec,
}

impl PipelineConfig {
    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scoring.validate()?;
        self.experiment.validate()?;
        self.synth.validate()?;
        if !(self.embedding.window_s > 0.0 && self.embedding.min_tail_s >= 0.0) {
            return Err(Error::Config("embedding window must be positive and min_tail non-negative".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ThresholdRule;

    #[test]
    fn partial_toml_keeps_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "channel_mode = \"patient\"\n[scoring]\nthreshold = { fixed = -1.2 }\n[experiment]\nseed = 9\n[synth]\nn_subjects = 20\nbalance = { type = \"fraction\", impaired = 0.5, concordance = 0.8 }\n",
        )
        .unwrap();
        let c = PipelineConfig::load(&path).unwrap();
        assert_eq!(c.channel_mode, ChannelMode::Patient);
        assert_eq!(c.scoring.threshold, ThresholdRule::Fixed(-1.2));
        assert_eq!(c.experiment.seed, 9);
        assert_eq!(c.experiment.grid, crate::experiments::GridSpace::default());
        assert_eq!(c.synth.n_subjects, 20);
        assert_eq!(c.synth.subtest_s, CohortSpec::default().subtest_s);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        let c = PipelineConfig::default();
        std::fs::write(&path, serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(PipelineConfig::load(&path).unwrap(), c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[experiment.protocol]\nouter_k = 1\n").unwrap();
        assert!(PipelineConfig::load(&path).unwrap_err().is_validation());
        std::fs::write(&path, "unknown_section = 3\n").unwrap();
        assert!(PipelineConfig::load(&path).unwrap_err().is_validation());
    }
}

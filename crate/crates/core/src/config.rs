//! Experiment configuration, read from TOML. Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GpParams;
use crate::kernel::KernelSpec;
use crate::smdp::HierarchyConfig;
use crate::user::UserConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentMode {
    Hierarchical,
    Flat,
    Adapt,
}

impl std::str::FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hier" | "hierarchical" => Ok(Self::Hierarchical),
            "flat" => Ok(Self::Flat),
            "adapt" => Ok(Self::Adapt),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub n_train_dialogues: usize,
    pub eval_every: usize,
    pub eval_dialogues_per_point: usize,
    /// Master-only pretraining dialogues for the adaptation experiment.
    pub pretrain_dialogues: usize,
    pub seeds: Vec<u64>,
    /// Seed of the generated venue databases, shared by every run.
    pub world_seed: u64,
    pub output_dir: Option<PathBuf>,
    pub hierarchy: HierarchyConfig,
    pub user: UserConfig,
    pub kernel: KernelSpec,
    pub gp: GpParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: ExperimentMode::Hierarchical,
            n_train_dialogues: 4000,
            eval_every: 200,
            eval_dialogues_per_point: 200,
            pretrain_dialogues: 2000,
            seeds: vec![1, 2, 3, 4, 5],
            world_seed: 7,
            output_dir: None,
            hierarchy: HierarchyConfig::default(),
            user: UserConfig::default(),
            kernel: KernelSpec::default(),
            gp: GpParams::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        if !self.n_train_dialogues.is_multiple_of(self.eval_every) {
            return Err(Error::Config(format!(
                "eval_every ({}) must divide n_train_dialogues ({})",
                self.eval_every, self.n_train_dialogues
            )));
        }
        if self.eval_dialogues_per_point == 0 {
            return Err(Error::Config(
                "eval_dialogues_per_point must be positive".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        self.hierarchy.validate()?;
        self.user.validate()?;
        self.kernel.validate()?;
        self.gp.validate()?;
        if (self.gp.discount - self.hierarchy.discount).abs() > 0.0 {
            return Err(Error::Config(format!(
                "gp.discount ({}) differs from hierarchy.discount ({})",
                self.gp.discount, self.hierarchy.discount
            )));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        assert_eq!(
            ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(),
            c
        );
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(ExperimentConfig::from_toml("n_train_dialogs = 10").is_err());
        assert!(ExperimentConfig::from_toml("[hierarchy]\ngama = 0.9").is_err());
    }

    #[test]
    fn eval_every_must_divide() {
        let err =
            ExperimentConfig::from_toml("n_train_dialogues = 300\neval_every = 200").unwrap_err();
        assert!(err.to_string().contains("eval_every"));
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_toml("mode = \"flat\"\nseeds = [9]\n[user]\np_change = 0.0")
            .unwrap();
        assert_eq!(c.mode, ExperimentMode::Flat);
        assert_eq!(c.seeds, [9]);
        assert_eq!(c.user.p_change, 0.0);
        assert_eq!(c.n_train_dialogues, 4000);
    }
}

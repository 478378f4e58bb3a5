use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mmdtest::KernelMethod;
use crate::tcloss::TcParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    /// Test batches come from the adversarial file.
    Power,
    /// Test batches are fresh clean rows.
    Type1,
}

impl fmt::Display for StudyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StudyMode::Power => "power",
            StudyMode::Type1 => "type1",
        })
    }
}

/// Numeric settings of a detection study, independent of where the data lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudySettings {
    pub mode: StudyMode,
    pub kernel: KernelMethod,
    pub tc: TcParams,
    pub batch_size: usize,
    pub holdout_size: usize,
    /// Rows per side set aside for kernel optimization.
    pub calibration_size: usize,
    pub trials: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub optimize_steps: usize,
    pub learning_rate: f64,
    pub eps0: f64,
    pub seed: u64,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            mode: StudyMode::Power,
            kernel: KernelMethod::Tpsammd,
            tc: TcParams {
                max_dim: 0,
                ..TcParams::default()
            },
            batch_size: 50,
            holdout_size: 1000,
            calibration_size: 50,
            trials: 100,
            permutations: 200,
            alpha: 0.05,
            optimize_steps: 100,
            learning_rate: 0.05,
            eps0: 0.1,
            seed: 0,
        }
    }
}

/// JSON config of `detect-study`: data paths plus every [`StudySettings`]
/// field at the top level. Relative paths are resolved against the config
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub clean: PathBuf,
    pub adversarial: Option<PathBuf>,
    pub text: PathBuf,
    /// Separate hold-out file; carved out of `clean` when absent.
    pub holdout: Option<PathBuf>,
    pub l2_normalize: bool,
    pub mode: StudyMode,
    pub kernel: KernelMethod,
    pub tc: TcParams,
    pub batch_size: usize,
    pub holdout_size: usize,
    pub calibration_size: usize,
    pub trials: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub optimize_steps: usize,
    pub learning_rate: f64,
    pub eps0: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = StudySettings::default();
        Self {
            clean: PathBuf::new(),
            adversarial: None,
            text: PathBuf::new(),
            holdout: None,
            l2_normalize: false,
            mode: s.mode,
            kernel: s.kernel,
            tc: s.tc,
            batch_size: s.batch_size,
            holdout_size: s.holdout_size,
            calibration_size: s.calibration_size,
            trials: s.trials,
            permutations: s.permutations,
            alpha: s.alpha,
            optimize_steps: s.optimize_steps,
            learning_rate: s.learning_rate,
            eps0: s.eps0,
            seed: s.seed,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.clean.as_os_str().is_empty() || cfg.text.as_os_str().is_empty() {
            return Err(Error::InvalidInput("config needs `clean` and `text` paths".into()));
        }
        if cfg.mode == StudyMode::Power && cfg.adversarial.is_none() {
            return Err(Error::InvalidInput("power mode needs an `adversarial` path".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve(dir);
        }
        Ok(cfg)
    }

    pub fn settings(&self) -> StudySettings {
        StudySettings {
            mode: self.mode,
            kernel: self.kernel,
            tc: self.tc,
            batch_size: self.batch_size,
            holdout_size: self.holdout_size,
            calibration_size: self.calibration_size,
            trials: self.trials,
            permutations: self.permutations,
            alpha: self.alpha,
            optimize_steps: self.optimize_steps,
            learning_rate: self.learning_rate,
            eps0: self.eps0,
            seed: self.seed,
        }
    }

    fn resolve(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.clean);
        fix(&mut self.text);
        if let Some(p) = self.adversarial.as_mut() {
            fix(p);
        }
        if let Some(p) = self.holdout.as_mut() {
            fix(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"clean": "c.emb", "adversarial": "a.emb", "text": "t.emb"}"#).unwrap();
        assert_eq!(cfg.settings(), StudySettings::default());
        assert!(ExperimentConfig::from_json(r#"{"clean": "c.emb", "text": "t.emb"}"#).is_err());
        assert!(cfg.holdout.is_none());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = ExperimentConfig::from_json(
            r#"{"clean": "c.emb", "adversarial": "a.emb", "text": "t.emb", "mode": "type1",
                "kernel": "mksammd", "tc": {"method": "mk", "sigma": 0.5},
                "trials": 3, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(cfg.settings().mode, StudyMode::Type1);
        assert_eq!(cfg.settings().kernel, KernelMethod::Mksammd);
        assert_eq!(cfg.settings().tc.sigma, 0.5);
        assert_eq!(cfg.settings().tc.max_dim, 1);
        assert_eq!(cfg.settings().trials, 3);
        assert_eq!(cfg.settings().batch_size, 50);
        assert!(ExperimentConfig::from_json(r#"{"clean": "c", "adversarial": "a", "text": "t", "trails": 3}"#).is_err());
    }
}

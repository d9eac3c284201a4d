//! Experiment configuration: dataset source, split ratios, training rounds,
//! assessment settings, and ablation switches, with desk-scale defaults that
//! finish in minutes on a laptop.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::{AggregationMode, PrivacyMode, RoundConfig};
use crate::graph::GeneratorConfig;
use crate::reasoning::AssessConfig;

/// Component knock-outs. All flags compose; each disables exactly one part of
/// the full pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    /// Skip the second-stage assessment; final score = model score.
    pub no_agi: bool,
    /// Aggregate by dataset-size weights instead of the learned gate.
    pub no_moe: bool,
    /// Uniform neighborhood averaging instead of learned attention.
    pub no_attention: bool,
    /// No clipping, no noise, no secret sharing.
    pub no_privacy: bool,
    /// Train a single client on its local view only (no federation).
    pub no_fed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Generator settings, used when `dataset_path` is unset.
    pub dataset: GeneratorConfig,
    /// Load an existing dataset directory instead of generating one.
    pub dataset_path: Option<String>,
    /// Train / validation / test fractions.
    pub split: (f64, f64, f64),
    pub round: RoundConfig,
    pub assess: AssessConfig,
    pub ablation: AblationFlags,
    pub out_dir: String,
    /// Master seed; reseeds both the generator and the round loop so one
    /// number pins the whole experiment.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut round = RoundConfig {
            aggregation: AggregationMode::Moe,
            privacy: PrivacyMode::DpSecureagg,
            ..RoundConfig::default()
        };
        // Desk-scale noise: the published sigma drowns a 2.8k-parameter model,
        // so the default uses a small explicit override while the accounted
        // (epsilon, delta) stay at the stated per-round budget. Sweeps clear
        // the override and use the formula value.
        round.dp.sigma_override = Some(0.01);
        ExperimentConfig {
            dataset: GeneratorConfig::desk(),
            dataset_path: None,
            split: (0.6, 0.2, 0.2),
            round,
            assess: AssessConfig::default(),
            ablation: AblationFlags::default(),
            out_dir: "results".into(),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.round.validate()?;
        self.assess.validate()?;
        let (tr, va, te) = self.split;
        for r in [tr, va, te] {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::Config("split fractions must be finite and >= 0".into()));
            }
        }
        if (tr + va + te - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions sum to {}, expected 1",
                tr + va + te
            )));
        }
        Ok(())
    }

    /// Parse a JSON config file. A missing or unreadable file is a
    /// configuration error naming the path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Re-thread `seed` through every seeded sub-config.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.dataset.seed = seed;
        self.round.seed = seed;
        self
    }
}

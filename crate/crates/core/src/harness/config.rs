//! Experiment configuration: fully serializable, reproducible from config
//! plus seed alone.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coset::CosetPattern;
use crate::scene::ScenarioSpec;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Precomputed / searched low-coherence offsets (default).
    LowCoherence,
    Random,
    Bursty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub p: usize,
    pub kind: PatternKind,
    pub seed: u64,
}

impl Default for PatternSpec {
    fn default() -> Self {
        Self { p: 8, kind: PatternKind::LowCoherence, seed: 1 }
    }
}

impl PatternSpec {
    pub fn build(&self, scenario: &ScenarioSpec) -> CosetPattern {
        self.build_p(scenario, self.p)
    }

    pub fn build_p(&self, scenario: &ScenarioSpec, p: usize) -> CosetPattern {
        let l = scenario.num_subbands;
        match self.kind {
            PatternKind::LowCoherence => {
                CosetPattern::low_coherence(l, p, &scenario.carrier_universe())
            }
            PatternKind::Random => CosetPattern::random(l, p, self.seed),
            PatternKind::Bursty => CosetPattern::bursty(l, p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub train_frames: usize,
    pub val_frames: usize,
    pub test_frames: usize,
    /// Generate band-limited Gaussian scenes instead of protocol scenes.
    pub gaussian: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { train_frames: 20000, val_frames: 1000, test_frames: 1000, gaussian: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Overrides the per-task default initial learning rate.
    pub learning_rate: Option<f64>,
    pub model_seed: u64,
    /// Sensor: stop early once validation FA and MD both drop below this.
    pub target_fa_md: Option<f64>,
    /// Identifier/decoder sub-band sample cap per epoch (0 = all).
    pub max_samples_per_epoch: usize,
    /// Identifier model file consumed by decoder training.
    pub identifier_model: Option<String>,
    /// Decoder target protocol ("dvbs2" | "wifi_nonht" | "wifi_ht").
    pub decoder_protocol: Option<String>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 512,
            learning_rate: None,
            model_seed: 7,
            target_fa_md: None,
            max_samples_per_epoch: 0,
            identifier_model: None,
            decoder_protocol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub frames: usize,
    pub snr_grid_db: Vec<f64>,
    pub p_grid: Vec<usize>,
    pub theta_points: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            frames: 200,
            snr_grid_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            p_grid: vec![4, 5, 6, 8],
            theta_points: 21,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub pattern: PatternSpec,
    pub gen: GenConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash carried by every emitted CSV row.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml().as_bytes());
        let digest = hasher.finalize();
        hex_short(&digest)
    }

    /// Disjoint per-split frame seeds.
    pub fn split_seed(&self, split: Split, index: u64) -> u64 {
        let base = match split {
            Split::Train => 0u64,
            Split::Val => 1u64 << 40,
            Split::Test => 2u64 << 40,
            Split::Eval => 3u64 << 40,
        };
        self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(base + index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
    Eval,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => "train.mcds",
            Split::Val => "val.mcds",
            Split::Test => "test.mcds",
            Split::Eval => "eval.mcds",
        }
    }
}

pub fn hex_short(digest: &[u8]) -> String {
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 (shortened) of a file's bytes, for dataset provenance columns.
pub fn file_hash(path: &Path) -> Result<String, HarnessError> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_short(&hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_hash_is_stable() {
        let config = ExperimentConfig::default();
        let text = config.to_toml();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
        assert_eq!(config.hash(), back.hash());
        let mut other = config.clone();
        other.seed = 99;
        assert_ne!(config.hash(), other.hash());
    }

    #[test]
    fn split_seeds_are_disjoint() {
        let config = ExperimentConfig::default();
        let a: Vec<u64> = (0..100).map(|i| config.split_seed(Split::Train, i)).collect();
        let b: Vec<u64> = (0..100).map(|i| config.split_seed(Split::Val, i)).collect();
        for x in &a {
            assert!(!b.contains(x));
        }
    }
}

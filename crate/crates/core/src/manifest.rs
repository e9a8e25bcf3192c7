//! Run configuration and the reproducibility manifest written next to every
//! artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{DEFAULT_SEEN, DEFAULT_UNSEEN, SHUFFLE_ALGORITHM};
use crate::ensemble::{member_seed, DEFAULT_ENSEMBLE_SIZE};
use crate::error::Result;
use crate::regressor::{TrainingConfig, HASHGRAM_LEARNING_RATE};

/// Fully resolved run configuration. All randomness flows from `seed`;
/// derived seeds are recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub strategy: String,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub lr: f64,
    pub seed: u64,
    pub ratio: f64,
    pub ensemble_size: usize,
    pub backbone: String,
    pub backend: Option<String>,
    pub cache: Option<PathBuf>,
    pub seen_languages: Vec<String>,
    pub unseen_languages: Vec<String>,
    pub clamp: bool,
    pub fallback_original: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: "original".to_string(),
            epochs: 3,
            batch_size: 8,
            max_len: 128,
            lr: HASHGRAM_LEARNING_RATE,
            seed: 0,
            ratio: 0.7,
            ensemble_size: DEFAULT_ENSEMBLE_SIZE,
            backbone: "hashgram".to_string(),
            backend: None,
            cache: None,
            seen_languages: DEFAULT_SEEN.iter().map(|s| s.to_string()).collect(),
            unseen_languages: DEFAULT_UNSEEN.iter().map(|s| s.to_string()).collect(),
            clamp: false,
            fallback_original: false,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            max_sequence_length: self.max_len,
            learning_rate: self.lr,
            seed: self.seed,
        }
    }
}

/// Optional flat key-value config file (TOML). Every key mirrors a CLI
/// flag; flags override file values, file values override defaults.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct FileConfig {
    pub strategy: Option<String>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub max_len: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub ratio: Option<f64>,
    pub ensemble_size: Option<usize>,
    pub backbone: Option<String>,
    pub backend: Option<String>,
    pub cache: Option<PathBuf>,
    pub seen_languages: Option<Vec<String>>,
    pub unseen_languages: Option<Vec<String>>,
    pub clamp: Option<bool>,
    pub fallback_original: Option<bool>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let contents = std::fs::read_to_string(path)?;
        toml::from_str(&contents)
            .map_err(|e| crate::error::Error::Argument(format!("bad config file: {e}")))
    }
}

/// The persisted record that makes a run reproducible: config, derived
/// seeds, input checksums, and the shuffle algorithm identifier. No
/// timestamps, so equal inputs produce byte-identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub shuffle_algorithm: String,
    pub derived_seeds: BTreeMap<String, u64>,
    pub input_checksums: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        let mut derived_seeds = BTreeMap::new();
        derived_seeds.insert("split".to_string(), config.seed);
        for i in 0..config.ensemble_size {
            derived_seeds.insert(format!("member_{i}"), member_seed(config.seed, i));
        }
        Self {
            command: command.to_string(),
            config: config.clone(),
            shuffle_algorithm: SHUFFLE_ALGORITHM.to_string(),
            derived_seeds,
            input_checksums: BTreeMap::new(),
        }
    }

    pub fn checksum_input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.input_checksums
            .insert(label.to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Writes manifest.json under the run's output directory.
    pub fn write(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(out_dir.join("manifest.json"), json)?;
        Ok(())
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

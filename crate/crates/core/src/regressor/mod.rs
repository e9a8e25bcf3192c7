//! Training, prediction, persistence, and the external-model adapter
//! contract.

pub mod hashgram;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{truncate, RenderedInput, Strategy, WhitespaceTokenizer};
use crate::scalar::Real;
use hashgram::{HashGramBackbone, SparseFeatures, DEFAULT_FEATURE_DIM, HASHGRAM_ID};

/// Learning rate the reference backbone defaults to; the 4e-5 value of
/// [`TrainingConfig::default`] is scaled for transformer fine-tuning and
/// makes a linear model crawl.
pub const HASHGRAM_LEARNING_RATE: f64 = 0.05;

/// Training hyperparameters. The recorded values are always the ones
/// actually used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub max_sequence_length: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 3,
            batch_size: 8,
            max_sequence_length: 128,
            learning_rate: 4e-5,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    /// Defaults tuned for the built-in hashed n-gram backbone.
    pub fn for_hashgram() -> Self {
        Self {
            learning_rate: HASHGRAM_LEARNING_RATE,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Argument("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Argument("learning_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Loss observations captured during training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub first_batch_loss: f64,
    pub final_epoch_mean_loss: f64,
}

/// A trained model: backbone id, strategy it was trained on, the config
/// actually used, and the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "F: Serialize", deserialize = "F: DeserializeOwned"))]
pub struct TrainedModel<F: Real> {
    pub backbone_id: String,
    pub strategy: Strategy,
    pub config: TrainingConfig,
    pub trace: TrainingTrace,
    pub backbone: HashGramBackbone<F>,
}

/// Trains the reference backbone by seeded mini-batch gradient descent on
/// MSE loss, for exactly `config.epochs` passes. Deterministic given the
/// input order and `config.seed`.
pub fn train<F: Real>(
    inputs: &[RenderedInput],
    labels: &[F],
    config: &TrainingConfig,
    backbone_id: &str,
) -> Result<TrainedModel<F>> {
    config.validate()?;
    if backbone_id != HASHGRAM_ID {
        return Err(Error::Argument(format!(
            "unknown trainable backbone {backbone_id:?}; external models predict via the adapter"
        )));
    }
    if inputs.is_empty() {
        return Err(Error::Argument("cannot train on empty inputs".into()));
    }
    if inputs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "inputs/labels length mismatch: {} vs {}",
            inputs.len(),
            labels.len()
        )));
    }
    if inputs.len() < config.batch_size {
        return Err(Error::Argument(format!(
            "need at least batch_size={} examples, got {}",
            config.batch_size,
            inputs.len()
        )));
    }

    let mut backbone = HashGramBackbone::<F>::new(DEFAULT_FEATURE_DIM);
    let tokenizer = WhitespaceTokenizer;
    let features: Vec<SparseFeatures<F>> = inputs
        .iter()
        .map(|input| {
            let truncated = truncate(input.clone(), config.max_sequence_length, &tokenizer);
            backbone.featurize(&truncated.text)
        })
        .collect();

    let lr = F::from_f64(config.learning_rate)
        .ok_or_else(|| Error::Argument("learning rate not representable".into()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();

    let mut first_batch_loss = None;
    let mut final_epoch_mean_loss = 0.0;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss_sum = 0.0;
        let mut batch_count = 0usize;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<SparseFeatures<F>> =
                chunk.iter().map(|&i| features[i].clone()).collect();
            let batch_labels: Vec<F> = chunk.iter().map(|&i| labels[i]).collect();
            let loss = backbone.batch_loss(&batch, &batch_labels);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_no,
                });
            }
            let loss_f64 = loss.to_f64().unwrap_or(f64::NAN);
            first_batch_loss.get_or_insert(loss_f64);
            epoch_loss_sum += loss_f64;
            batch_count += 1;
            let (grad_w, grad_b) = backbone.batch_gradient(&batch, &batch_labels);
            backbone.apply_step(&grad_w, grad_b, lr);
        }
        final_epoch_mean_loss = epoch_loss_sum / batch_count as f64;
    }

    Ok(TrainedModel {
        backbone_id: backbone_id.to_string(),
        strategy: inputs[0].strategy,
        config: *config,
        trace: TrainingTrace {
            first_batch_loss: first_batch_loss.unwrap_or(0.0),
            final_epoch_mean_loss,
        },
        backbone,
    })
}

/// One finite score per input. Inputs rendered with a different strategy
/// than the model's are allowed (cross-representation evaluation). No
/// clamping; see [`clamp_scores`].
pub fn predict<F: Real>(model: &TrainedModel<F>, inputs: &[RenderedInput]) -> Vec<F> {
    let tokenizer = WhitespaceTokenizer;
    inputs
        .iter()
        .map(|input| {
            let truncated =
                truncate(input.clone(), model.config.max_sequence_length, &tokenizer);
            model.backbone.predict_text(&truncated.text)
        })
        .collect()
}

/// Optional post-hoc clamp to the label range [1, 5].
pub fn clamp_scores<F: Real>(scores: &mut [F]) {
    let lo = F::from_f64(crate::corpus::SCORE_MIN).unwrap();
    let hi = F::from_f64(crate::corpus::SCORE_MAX).unwrap();
    for s in scores {
        *s = s.max(lo).min(hi);
    }
}

/// Persists a model as a self-describing JSON blob.
pub fn save_model<F: Real + Serialize>(model: &TrainedModel<F>, path: &Path) -> Result<()> {
    let json = serde_json::to_string(model)?;
    std::fs::write(path, json).map_err(|e| Error::Storage(format!("{}: {e}", path.display())))
}

pub fn load_model<F: Real + DeserializeOwned>(path: &Path) -> Result<TrainedModel<F>> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
    Ok(serde_json::from_str(&contents)?)
}

/// Runs an external model adapter: `adapter <inputs.tsv> <output.csv>`.
/// The output must be CSV `id,score` covering every input id exactly once.
pub fn external_adapter_predict(
    adapter: &str,
    inputs_file: &Path,
    output_file: &Path,
) -> Result<BTreeMap<String, f64>> {
    let status = Command::new(adapter)
        .arg(inputs_file)
        .arg(output_file)
        .status()
        .map_err(|e| Error::AdapterContract(format!("failed to launch {adapter:?}: {e}")))?;
    if !status.success() {
        return Err(Error::AdapterContract(format!(
            "adapter {adapter:?} exited with {status}"
        )));
    }
    let expected: Vec<String> = crate::representation::read_rendered_tsv(inputs_file)?
        .into_iter()
        .map(|r| r.record_id)
        .collect();
    read_adapter_predictions(output_file, &expected)
}

/// Validates an adapter output file against the expected id set.
pub fn read_adapter_predictions(
    output_file: &Path,
    expected_ids: &[String],
) -> Result<BTreeMap<String, f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(output_file)?;
    let mut scores = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line_no = i + 2;
        let (id, raw) = match (row.get(0), row.get(1)) {
            (Some(a), Some(b)) => (a.to_string(), b),
            _ => {
                return Err(Error::AdapterContract(format!(
                    "line {line_no}: expected id,score"
                )))
            }
        };
        let score: f64 = raw.trim().parse().map_err(|_| {
            Error::AdapterContract(format!("line {line_no}: non-numeric score {raw:?}"))
        })?;
        if scores.insert(id.clone(), score).is_some() {
            return Err(Error::AdapterContract(format!(
                "line {line_no}: duplicate id {id:?}"
            )));
        }
    }
    let expected_set: BTreeSet<&str> = expected_ids.iter().map(String::as_str).collect();
    let missing: Vec<&str> = expected_set
        .iter()
        .filter(|id| !scores.contains_key(**id))
        .copied()
        .collect();
    if !missing.is_empty() {
        return Err(Error::AdapterContract(format!(
            "missing ids: {missing:?}"
        )));
    }
    let extra: Vec<&String> = scores
        .keys()
        .filter(|id| !expected_set.contains(id.as_str()))
        .collect();
    if !extra.is_empty() {
        return Err(Error::AdapterContract(format!("unexpected ids: {extra:?}")));
    }
    Ok(scores)
}

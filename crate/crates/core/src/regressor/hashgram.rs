//! Hashed character n-gram linear regressor, the built-in deterministic
//! backbone standing in for fine-tuned encoders.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Backbone identifier accepted by `train`.
pub const HASHGRAM_ID: &str = "hashgram";

/// Default feature dimensionality (2^16 buckets).
pub const DEFAULT_FEATURE_DIM: usize = 1 << 16;

/// Character n-gram sizes hashed into the feature space.
pub const NGRAM_RANGE: (usize, usize) = (1, 3);

/// Seed for the FNV-1a feature hash. Fixed so featurization is reproducible
/// across platforms and versions.
pub const FEATURE_HASH_SEED: u64 = 0x7465_7874_6772_616d; // "textgram"

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded FNV-1a over the UTF-8 bytes of `s`.
fn fnv1a64(s: &str, seed: u64) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for byte in s.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Sparse feature vector: (bucket, value) pairs sorted by bucket.
pub type SparseFeatures<F> = Vec<(usize, F)>;

/// Linear model over hashed character n-grams: prediction = w·x + b.
#[derive(Debug, Clone, PartialEq)]
pub struct HashGramBackbone<F> {
    feature_dim: usize,
    weights: Vec<F>,
    bias: F,
}

impl<F: Real> HashGramBackbone<F> {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            weights: vec![F::zero(); feature_dim],
            bias: F::zero(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn bias(&self) -> F {
        self.bias
    }

    pub fn weight(&self, bucket: usize) -> F {
        self.weights[bucket]
    }

    pub fn set_weight(&mut self, bucket: usize, value: F) {
        self.weights[bucket] = value;
    }

    pub fn set_bias(&mut self, value: F) {
        self.bias = value;
    }

    /// Character 1–3-gram counts, hashed into buckets and normalized by the
    /// total n-gram count (term frequency). Deterministic per text.
    pub fn featurize(&self, text: &str) -> SparseFeatures<F> {
        let chars: Vec<char> = text.chars().collect();
        let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        let mut total = 0usize;
        let mut buf = String::new();
        for n in NGRAM_RANGE.0..=NGRAM_RANGE.1 {
            if chars.len() < n {
                continue;
            }
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window.iter());
                let bucket = (fnv1a64(&buf, FEATURE_HASH_SEED) % self.feature_dim as u64) as usize;
                *counts.entry(bucket).or_default() += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Vec::new();
        }
        let norm = F::from_count(total);
        counts
            .into_iter()
            .map(|(bucket, count)| (bucket, F::from_count(count) / norm))
            .collect()
    }

    pub fn predict_features(&self, features: &SparseFeatures<F>) -> F {
        let mut acc = self.bias;
        for &(bucket, value) in features {
            acc += self.weights[bucket] * value;
        }
        acc
    }

    pub fn predict_text(&self, text: &str) -> F {
        self.predict_features(&self.featurize(text))
    }

    /// Mean squared error of the current parameters over a batch.
    pub fn batch_loss(&self, batch: &[SparseFeatures<F>], labels: &[F]) -> F {
        debug_assert_eq!(batch.len(), labels.len());
        let mut sum = F::zero();
        for (features, &label) in batch.iter().zip(labels) {
            let err = self.predict_features(features) - label;
            sum += err * err;
        }
        sum / F::from_count(batch.len())
    }

    /// Analytic gradient of [`Self::batch_loss`] with respect to the touched
    /// weights and the bias.
    pub fn batch_gradient(
        &self,
        batch: &[SparseFeatures<F>],
        labels: &[F],
    ) -> (std::collections::BTreeMap<usize, F>, F) {
        debug_assert_eq!(batch.len(), labels.len());
        let two_over_n = F::from_count(2) / F::from_count(batch.len());
        let mut grad_w = std::collections::BTreeMap::new();
        let mut grad_b = F::zero();
        for (features, &label) in batch.iter().zip(labels) {
            let err = self.predict_features(features) - label;
            grad_b += two_over_n * err;
            for &(bucket, value) in features {
                *grad_w.entry(bucket).or_insert_with(F::zero) += two_over_n * err * value;
            }
        }
        (grad_w, grad_b)
    }

    /// One gradient-descent step at the given learning rate.
    pub fn apply_step(
        &mut self,
        grad_w: &std::collections::BTreeMap<usize, F>,
        grad_b: F,
        learning_rate: F,
    ) {
        for (&bucket, &g) in grad_w {
            self.weights[bucket] -= learning_rate * g;
        }
        self.bias -= learning_rate * grad_b;
    }
}

/// Persisted form: nonzero weights only.
#[derive(Serialize, Deserialize)]
struct SparseBlob<F> {
    feature_dim: usize,
    bias: F,
    nonzero: Vec<(u32, F)>,
}

impl<F: Real + Serialize> Serialize for HashGramBackbone<F> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let blob = SparseBlob {
            feature_dim: self.feature_dim,
            bias: self.bias,
            nonzero: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        };
        blob.serialize(serializer)
    }
}

impl<'de, F: Real + DeserializeOwned> Deserialize<'de> for HashGramBackbone<F> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let blob = SparseBlob::<F>::deserialize(deserializer)?;
        let mut model = HashGramBackbone::new(blob.feature_dim);
        model.bias = blob.bias;
        for (bucket, weight) in blob.nonzero {
            let bucket = bucket as usize;
            if bucket >= model.feature_dim {
                return Err(serde::de::Error::custom(format!(
                    "weight bucket {bucket} out of range for dim {}",
                    model.feature_dim
                )));
            }
            model.weights[bucket] = weight;
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn featurization_is_deterministic() {
        let model = HashGramBackbone::<f64>::new(DEFAULT_FEATURE_DIM);
        let a = model.featurize("hello world");
        let b = model.featurize("hello world");
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn feature_values_sum_to_one() {
        let model = HashGramBackbone::<f64>::new(DEFAULT_FEATURE_DIM);
        let features = model.featurize("abc def");
        let total: f64 = features.iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_text_has_no_features() {
        let model = HashGramBackbone::<f64>::new(DEFAULT_FEATURE_DIM);
        assert!(model.featurize("").is_empty());
        assert_eq!(model.predict_text(""), 0.0);
    }

    #[test]
    fn hash_is_stable() {
        // Frozen value: guards against accidental hash changes that would
        // silently re-bucket every persisted model.
        assert_eq!(fnv1a64("abc", FEATURE_HASH_SEED), 13171006658254937144u64);
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut model = HashGramBackbone::<f64>::new(64);
        model.set_weight(3, 0.1 + 0.2); // deliberately non-representable
        model.set_weight(61, -1.5e-30);
        model.set_bias(2.0f64.sqrt());
        let json = serde_json::to_string(&model).unwrap();
        let back: HashGramBackbone<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(model, back);
        assert_eq!(
            model.predict_text("abc").to_bits(),
            back.predict_text("abc").to_bits()
        );
    }
}

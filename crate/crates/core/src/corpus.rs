//! Multilingual labeled dataset: loading, validation, splitting, statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of the shuffle algorithm, persisted in run manifests so
/// partitions stay reproducible across versions.
pub const SHUFFLE_ALGORITHM: &str = "fisher-yates/chacha20/v1";

/// English is the pivot language: translations target it and it is never
/// excluded in leave-one-language-out runs.
pub const ENGLISH: &str = "en";

/// Languages present in the training data.
pub const DEFAULT_SEEN: [&str; 6] = ["en", "es", "it", "pt", "fr", "zh"];

/// Test-only languages scored zero-shot.
pub const DEFAULT_UNSEEN: [&str; 4] = ["hi", "ar", "nl", "ko"];

/// Inclusive bounds of the intimacy score scale.
pub const SCORE_MIN: f64 = 1.0;
pub const SCORE_MAX: f64 = 5.0;

/// One tweet, optionally labeled with an intimacy score in [1, 5].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub language: String,
    pub score: Option<f64>,
}

impl TweetRecord {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        language: impl Into<String>,
        score: Option<f64>,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            language: language.into(),
            score,
        }
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
    Derived,
}

/// An ordered sequence of records with unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<TweetRecord>,
    pub split_tag: SplitTag,
}

impl Dataset {
    pub fn new(records: Vec<TweetRecord>, split_tag: SplitTag) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Validation(format!("duplicate record id {:?}", r.id)));
            }
        }
        Ok(Self { records, split_tag })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct language codes present, sorted.
    pub fn languages(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.language.clone()).collect()
    }

    pub fn ids(&self) -> BTreeSet<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }
}

/// Seeded 70:30-style split parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratio: f64,
    pub seed: u64,
}

/// Per-language count and mean token length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub language: String,
    pub count: usize,
    pub avg_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatsTable {
    pub rows: Vec<StatsRow>,
}

/// Counts tokens in a text. Default is whitespace splitting; a subword
/// tokenizer adapter can be supplied to match pretrained-model token counts.
pub trait TokenCounter {
    fn count(&self, text: &str) -> usize;
}

/// Splits on Unicode whitespace.
pub struct WhitespaceCounter;

impl TokenCounter for WhitespaceCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

fn validate_record(
    row: usize,
    record: &TweetRecord,
    known: Option<&BTreeSet<String>>,
) -> Result<()> {
    if record.text.trim().is_empty() {
        return Err(Error::Validation(format!("row {row}: empty text")));
    }
    if let Some(score) = record.score {
        if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
            return Err(Error::Validation(format!(
                "row {row}: score {score} outside [{SCORE_MIN}, {SCORE_MAX}]"
            )));
        }
    }
    if let Some(known) = known {
        if !known.contains(&record.language) {
            return Err(Error::Validation(format!(
                "row {row}: unknown language code {:?}",
                record.language
            )));
        }
    }
    Ok(())
}

/// Loads a CSV with header `text,label,language` and an optional leading
/// `id` column. Empty labels yield unlabeled records; ids default to row
/// ordinals.
pub fn load_dataset(path: &Path, expected_languages: &BTreeSet<String>) -> Result<Dataset> {
    load_dataset_inner(path, Some(expected_languages))
}

/// Like [`load_dataset`] but accepts any language code; routing and
/// evaluation key on whatever codes the file carries.
pub fn load_dataset_any(path: &Path) -> Result<Dataset> {
    load_dataset_inner(path, None)
}

fn load_dataset_inner(path: &Path, expected_languages: Option<&BTreeSet<String>>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (text_col, label_col, lang_col) = match (col("text"), col("label"), col("language")) {
        (Some(t), Some(l), Some(g)) => (t, l, g),
        _ => {
            return Err(Error::Parse {
                row: 1,
                detail: format!(
                    "header must name columns text, label, language; got {:?}",
                    headers.iter().collect::<Vec<_>>()
                ),
            })
        }
    };
    let id_col = col("id");

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // Row numbers are 1-based over data rows (header is row 0).
        let row_no = i + 1;
        let row = row.map_err(|e| Error::Parse {
            row: row_no,
            detail: e.to_string(),
        })?;
        if row.len() != headers.len() {
            return Err(Error::Parse {
                row: row_no,
                detail: format!("expected {} columns, got {}", headers.len(), row.len()),
            });
        }
        let label = row.get(label_col).unwrap_or("").trim();
        let score = if label.is_empty() {
            None
        } else {
            Some(label.parse::<f64>().map_err(|_| Error::Parse {
                row: row_no,
                detail: format!("label {label:?} is not a decimal"),
            })?)
        };
        let id = match id_col {
            Some(c) => row.get(c).unwrap_or("").to_string(),
            None => (i + 1).to_string(),
        };
        let record = TweetRecord::new(
            id,
            row.get(text_col).unwrap_or(""),
            row.get(lang_col).unwrap_or(""),
            score,
        );
        validate_record(row_no, &record, expected_languages)?;
        records.push(record);
    }
    Dataset::new(records, SplitTag::Train)
}

/// Writes the dataset back out with an explicit id column so that
/// load → save → load is the identity on records.
pub fn save_dataset(d: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "text", "label", "language"])?;
    for r in &d.records {
        let label = r.score.map(|s| s.to_string()).unwrap_or_default();
        writer.write_record([r.id.as_str(), r.text.as_str(), &label, r.language.as_str()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Seeded deterministic split: Fisher-Yates shuffle over record indices,
/// then the first `floor(ratio * N)` records form the train side.
pub fn split_dataset(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if !(spec.ratio > 0.0 && spec.ratio < 1.0) {
        return Err(Error::Argument(format!(
            "split ratio must lie in (0, 1), got {}",
            spec.ratio
        )));
    }
    if d.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 records to split, got {}",
            d.len()
        )));
    }
    let n = d.len();
    let train_size = (spec.ratio * n as f64).floor() as usize;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let take = |ix: &[usize]| -> Vec<TweetRecord> {
        ix.iter().map(|&i| d.records[i].clone()).collect()
    };
    let train = Dataset::new(take(&order[..train_size]), SplitTag::Derived)?;
    let valid = Dataset::new(take(&order[train_size..]), SplitTag::Derived)?;
    Ok((train, valid))
}

/// Leave-one-language-out partition. English cannot be excluded: it serves
/// as the pivot language for the joint representation.
pub fn leave_one_out(d: &Dataset, excluded_language: &str) -> Result<(Dataset, Dataset)> {
    if excluded_language == ENGLISH {
        return Err(Error::Protocol(
            "English is the pivot language and cannot be excluded".into(),
        ));
    }
    if !d.languages().contains(excluded_language) {
        return Err(Error::Argument(format!(
            "language {excluded_language:?} not present in dataset"
        )));
    }
    let (eval, train): (Vec<_>, Vec<_>) = d
        .records
        .iter()
        .cloned()
        .partition(|r| r.language == excluded_language);
    Ok((
        Dataset::new(train, SplitTag::Derived)?,
        Dataset::new(eval, SplitTag::Derived)?,
    ))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Per-language record counts and mean token counts (2 decimals).
pub fn compute_statistics(d: &Dataset, tokenizer: &dyn TokenCounter) -> StatsTable {
    let mut by_lang: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &d.records {
        let entry = by_lang.entry(r.language.as_str()).or_default();
        entry.0 += 1;
        entry.1 += tokenizer.count(&r.text);
    }
    StatsTable {
        rows: by_lang
            .into_iter()
            .map(|(language, (count, tokens))| StatsRow {
                language: language.to_string(),
                count,
                avg_tokens: round2(tokens as f64 / count as f64),
            })
            .collect(),
    }
}

/// Writes a stats table as CSV `language,count,avg_tokens`.
pub fn save_statistics(stats: &StatsTable, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["language", "count", "avg_tokens"])?;
    for row in &stats.rows {
        writer.write_record([
            row.language.as_str(),
            &row.count.to_string(),
            &format!("{:.2}", row.avg_tokens),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn language_set(codes: &[&str]) -> BTreeSet<String> {
    codes.iter().map(|s| s.to_string()).collect()
}

/// The ten task languages, for loaders that accept any of them.
pub fn all_task_languages() -> BTreeSet<String> {
    DEFAULT_SEEN
        .iter()
        .chain(DEFAULT_UNSEEN.iter())
        .map(|s| s.to_string())
        .collect()
}

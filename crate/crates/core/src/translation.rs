//! Cached English translation of tweets via pluggable backends.
//!
//! English texts pass through untouched and never reach a backend. The cache
//! key is the exact (language, text) pair with no normalization.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, ENGLISH};
use crate::error::{Error, Result};

/// Environment variable carrying the live backend's API key.
pub const API_KEY_ENV: &str = "TRANSLATE_API_KEY";

/// Turns a non-English text into English.
pub trait TranslationBackend {
    fn translate(&self, text: &str, source_language: &str) -> Result<String>;
    fn id(&self) -> &str;
}

/// One persisted cache line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheLine {
    lang: String,
    text: String,
    translation: String,
}

/// Persistent (language, text) → translation map, stored as JSON lines.
#[derive(Debug, Default)]
pub struct TranslationCache {
    entries: BTreeMap<(String, String), String>,
    path: Option<PathBuf>,
}

impl TranslationCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens (or creates) a cache backed by the given JSONL file.
    pub fn open(path: &Path) -> Result<Self> {
        let mut cache = Self {
            entries: BTreeMap::new(),
            path: Some(path.to_path_buf()),
        };
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for line in reader.lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: CacheLine = serde_json::from_str(&line)?;
                cache
                    .entries
                    .insert((entry.lang, entry.text), entry.translation);
            }
        }
        Ok(cache)
    }

    pub fn get(&self, language: &str, text: &str) -> Option<&str> {
        self.entries
            .get(&(language.to_string(), text.to_string()))
            .map(String::as_str)
    }

    pub fn insert(&mut self, language: &str, text: &str, translation: &str) {
        self.entries.insert(
            (language.to_string(), text.to_string()),
            translation.to_string(),
        );
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rewrites the backing file from the in-memory map. Single-writer
    /// contract: callers serialize saves.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let mut file = File::create(path)?;
        for ((lang, text), translation) in &self.entries {
            let line = serde_json::to_string(&CacheLine {
                lang: lang.clone(),
                text: text.clone(),
                translation: translation.clone(),
            })?;
            writeln!(file, "{line}")?;
        }
        Ok(())
    }
}

/// Offline backend: a fixed lookup table loaded from a JSONL file with the
/// same schema as the cache. Drives all desk-scale tests.
#[derive(Debug, Default)]
pub struct StaticLookupBackend {
    table: BTreeMap<(String, String), String>,
}

impl StaticLookupBackend {
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (String, String, String)>,
    {
        Self {
            table: pairs
                .into_iter()
                .map(|(lang, text, translation)| ((lang, text), translation))
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut table = BTreeMap::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheLine = serde_json::from_str(&line)?;
            table.insert((entry.lang, entry.text), entry.translation);
        }
        Ok(Self { table })
    }
}

impl TranslationBackend for StaticLookupBackend {
    fn translate(&self, text: &str, source_language: &str) -> Result<String> {
        self.table
            .get(&(source_language.to_string(), text.to_string()))
            .cloned()
            .ok_or_else(|| Error::TranslationUnavailable {
                lang: source_language.to_string(),
                text: text.to_string(),
                detail: "no entry in static lookup table".into(),
            })
    }

    fn id(&self) -> &str {
        "static-lookup"
    }
}

/// Live HTTP translation engine adapter. Configured via base URL and the
/// TRANSLATE_API_KEY environment variable; the test suite never exercises it.
pub struct HttpBackend {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    q: &'a str,
    source: &'a str,
    target: &'a str,
}

#[derive(Deserialize)]
struct HttpResponse {
    translation: String,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>) -> Result<Self> {
        let api_key = std::env::var(API_KEY_ENV).map_err(|_| {
            Error::Argument(format!("{API_KEY_ENV} not set; required for the live backend"))
        })?;
        Ok(Self {
            base_url: base_url.into(),
            api_key,
            client: reqwest::blocking::Client::new(),
        })
    }
}

impl TranslationBackend for HttpBackend {
    fn translate(&self, text: &str, source_language: &str) -> Result<String> {
        let response = self
            .client
            .post(format!("{}/translate", self.base_url))
            .bearer_auth(&self.api_key)
            .json(&HttpRequest {
                q: text,
                source: source_language,
                target: ENGLISH,
            })
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<HttpResponse>())
            .map_err(|e| Error::TranslationUnavailable {
                lang: source_language.to_string(),
                text: text.to_string(),
                detail: e.to_string(),
            })?;
        Ok(response.translation)
    }

    fn id(&self) -> &str {
        "http"
    }
}

/// What to do when a backend cannot translate a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FallbackPolicy {
    /// Fail the batch, listing untranslatable record ids.
    #[default]
    HardError,
    /// Use the original text in place of the missing translation.
    UseOriginal,
}

/// Translates one text, consulting the cache first. English passes through
/// without touching backend or cache.
pub fn translate(
    text: &str,
    source_language: &str,
    backend: &dyn TranslationBackend,
    cache: &mut TranslationCache,
) -> Result<String> {
    if text.is_empty() {
        return Err(Error::Argument("cannot translate empty text".into()));
    }
    if source_language == ENGLISH {
        return Ok(text.to_string());
    }
    if let Some(hit) = cache.get(source_language, text) {
        return Ok(hit.to_string());
    }
    let translation = backend.translate(text, source_language)?;
    cache.insert(source_language, text, &translation);
    Ok(translation)
}

/// Translates every record in a dataset, returning id → English text.
/// Failures are aggregated; the batch fails unless a fallback is set.
pub fn translate_dataset(
    d: &Dataset,
    backend: &dyn TranslationBackend,
    cache: &mut TranslationCache,
    policy: FallbackPolicy,
) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut failed: Vec<String> = Vec::new();
    for record in &d.records {
        match translate(&record.text, &record.language, backend, cache) {
            Ok(translation) => {
                out.insert(record.id.clone(), translation);
            }
            Err(Error::TranslationUnavailable { .. }) if policy == FallbackPolicy::UseOriginal => {
                out.insert(record.id.clone(), record.text.clone());
            }
            Err(Error::TranslationUnavailable { .. }) => failed.push(record.id.clone()),
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(Error::Validation(format!(
            "untranslatable records: {failed:?}"
        )));
    }
    Ok(out)
}

//! Input rendering: turn (record, strategy) into the exact string a
//! backbone consumes.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, TweetRecord, ENGLISH};
use crate::error::{Error, Result};

/// Literal separator between original and translated text in joint inputs.
/// Treated as plain text; flanked by single spaces when rendered.
pub const SEPARATOR: &str = "</s></s>";

/// The three input representation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Original,
    Translated,
    Joint,
}

impl Strategy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Strategy::Original),
            "translated" => Ok(Strategy::Translated),
            "joint" => Ok(Strategy::Joint),
            other => Err(Error::Argument(format!(
                "unknown strategy {other:?}; expected original, translated, or joint"
            ))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Strategy::Original => "original",
            Strategy::Translated => "translated",
            Strategy::Joint => "joint",
        };
        f.write_str(s)
    }
}

/// A strategy-tagged string ready for a backbone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedInput {
    pub record_id: String,
    pub strategy: Strategy,
    pub text: String,
}

/// Splits a text into tokens; `truncate` rejoins kept tokens with single
/// spaces.
pub trait Tokenizer {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn tokenize<'a>(&self, text: &'a str) -> Vec<&'a str> {
        text.split_whitespace().collect()
    }
}

fn translation_for<'a>(record: &'a TweetRecord, translation: Option<&'a str>) -> Result<&'a str> {
    match translation {
        Some(t) => Ok(t),
        None if record.language == ENGLISH => Ok(&record.text),
        None => Err(Error::Render {
            id: record.id.clone(),
            detail: format!(
                "strategy requires a translation but none was supplied for language {:?}",
                record.language
            ),
        }),
    }
}

/// Renders one record. Original passes the text through; Translated emits
/// the English translation; Joint concatenates both around [`SEPARATOR`].
pub fn render(
    record: &TweetRecord,
    translation: Option<&str>,
    strategy: Strategy,
) -> Result<RenderedInput> {
    let text = match strategy {
        Strategy::Original => record.text.clone(),
        Strategy::Translated => translation_for(record, translation)?.to_string(),
        Strategy::Joint => {
            let translated = translation_for(record, translation)?;
            format!("{} {SEPARATOR} {}", record.text, translated)
        }
    };
    Ok(RenderedInput {
        record_id: record.id.clone(),
        strategy,
        text,
    })
}

/// Order-preserving batch render; one output per record.
pub fn render_dataset(
    d: &Dataset,
    translations: &BTreeMap<String, String>,
    strategy: Strategy,
) -> Result<Vec<RenderedInput>> {
    d.records
        .iter()
        .map(|r| render(r, translations.get(&r.id).map(String::as_str), strategy))
        .collect()
}

/// Trims a rendered input to at most `max_len` tokens. For joint inputs the
/// translated side loses tokens first, then the original side; the separator
/// survives intact. Inputs within budget are returned unchanged.
pub fn truncate(
    input: RenderedInput,
    max_len: usize,
    tokenizer: &dyn Tokenizer,
) -> RenderedInput {
    assert!(max_len >= 8, "max_len must be at least 8 tokens");
    if tokenizer.count(&input.text) <= max_len {
        return input;
    }
    let text = match (input.strategy, split_joint(&input.text)) {
        (Strategy::Joint, Some((original, translated))) => {
            let sep_tokens = tokenizer.count(SEPARATOR);
            let mut orig: Vec<&str> = tokenizer.tokenize(original);
            let mut trans: Vec<&str> = tokenizer.tokenize(translated);
            let budget = max_len.saturating_sub(sep_tokens);
            let trans_keep = budget.saturating_sub(orig.len()).min(trans.len());
            trans.truncate(trans_keep);
            if orig.len() + trans.len() > budget {
                orig.truncate(budget.saturating_sub(trans.len()));
            }
            format!("{} {SEPARATOR} {}", orig.join(" "), trans.join(" "))
        }
        _ => {
            let mut tokens = tokenizer.tokenize(&input.text);
            tokens.truncate(max_len);
            tokens.join(" ")
        }
    };
    RenderedInput { text, ..input }
}

/// Splits a joint text into (original, translated) on the first separator.
/// Returns None when the separator is absent.
pub fn split_joint(text: &str) -> Option<(&str, &str)> {
    let ix = text.find(SEPARATOR)?;
    let original = text[..ix].trim_end_matches(' ');
    let translated = text[ix + SEPARATOR.len()..].trim_start_matches(' ');
    Some((original, translated))
}

fn escape_field(text: &str) -> String {
    text.replace('\\', "\\\\")
        .replace('\t', "\\t")
        .replace('\n', "\\n")
        .replace('\r', "\\r")
}

pub fn unescape_field(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Writes rendered inputs as TSV `id, strategy, text` for external
/// backbones; text is tab/newline-escaped.
pub fn write_rendered_tsv(inputs: &[RenderedInput], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "id\tstrategy\ttext")?;
    for input in inputs {
        writeln!(
            w,
            "{}\t{}\t{}",
            input.record_id,
            input.strategy,
            escape_field(&input.text)
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a TSV produced by [`write_rendered_tsv`].
pub fn read_rendered_tsv(path: &Path) -> Result<Vec<RenderedInput>> {
    let contents = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        let mut parts = line.splitn(3, '\t');
        let (id, strategy, text) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Parse {
                    row: i,
                    detail: format!("expected 3 tab-separated fields, got {line:?}"),
                })
            }
        };
        out.push(RenderedInput {
            record_id: id.to_string(),
            strategy: Strategy::parse(strategy)?,
            text: unescape_field(text),
        });
    }
    Ok(out)
}

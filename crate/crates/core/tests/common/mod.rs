//! Shared fixtures: a planted-signal synthetic corpus whose mock
//! translations preserve the signal token, plus the sample-row translation
//! table.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

use intimacy::corpus::{Dataset, SplitTag, TweetRecord};

/// Pseudo-language codes reuse the task's seen set so default language
/// validation applies.
pub const PSEUDO_LANGUAGES: [&str; 5] = ["es", "it", "pt", "fr", "zh"];

/// Signal character per language. Signal tokens share no 1–3-grams across
/// languages; filler tokens are digit strings shared by all languages.
fn signal_char(language: &str) -> char {
    match language {
        "es" => 'q',
        "it" => 'j',
        "pt" => 'k',
        "fr" => 'x',
        "zh" => 'w',
        "en" => 'v',
        "hi" => 'g',
        "ar" => 'r',
        "nl" => 'n',
        "ko" => 'o',
        other => panic!("no signal char for {other}"),
    }
}

fn signal_token(language: &str) -> String {
    signal_char(language).to_string().repeat(4)
}

/// Generates a labeled corpus where label = 1 + 0.5 × (signal token count).
/// The mock English translation rewrites every signal token to the shared
/// English signal token, so joint inputs carry the signal across languages
/// while original inputs keep it language-private.
pub fn planted_signal_corpus(
    per_language: usize,
    text_tokens: usize,
    seed: u64,
) -> (Dataset, BTreeMap<String, String>) {
    let languages: Vec<&str> = PSEUDO_LANGUAGES.iter().chain(["en"].iter()).copied().collect();
    planted_signal_corpus_for(&languages, per_language, text_tokens, seed)
}

/// Same generator over an arbitrary language set.
pub fn planted_signal_corpus_for(
    languages: &[&str],
    per_language: usize,
    text_tokens: usize,
    seed: u64,
) -> (Dataset, BTreeMap<String, String>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut translations = BTreeMap::new();

    for &language in languages {
        for i in 0..per_language {
            let id = format!("{language}_{i}");
            let signal_count = rng.gen_range(0..=8usize);
            let label = 1.0 + 0.5 * signal_count as f64;

            let mut tokens: Vec<String> = Vec::with_capacity(text_tokens);
            for _ in 0..signal_count {
                tokens.push(signal_token(language));
            }
            while tokens.len() < text_tokens {
                tokens.push(format!("{:03}", rng.gen_range(0..400)));
            }
            tokens.shuffle(&mut rng);
            let text = tokens.join(" ");

            let translated: Vec<String> = tokens
                .iter()
                .map(|t| {
                    if *t == signal_token(language) {
                        signal_token("en")
                    } else {
                        t.clone()
                    }
                })
                .collect();
            if language != "en" {
                translations.insert(id.clone(), translated.join(" "));
            } else {
                translations.insert(id.clone(), text.clone());
            }
            records.push(TweetRecord::new(id, text, language, Some(label)));
        }
    }
    (
        Dataset::new(records, SplitTag::Train).unwrap(),
        translations,
    )
}

/// The four sample rows: (language, original, translation, joint).
#[allow(dead_code)] // used by the acceptance target only
pub fn sample_rows() -> Vec<(&'static str, &'static str, &'static str, String)> {
    let rows = vec![
        (
            "fr",
            "j’ai plus aucune force",
            "I have no more strength",
        ),
        (
            "it",
            "La mia prima stagione e, forse per questo, la mia favorita buon compleanno #Reggina107 http",
            "My first season and, perhaps for this reason, my favorite happy birthday #Reggina107 http",
        ),
        (
            "es",
            "@user Es normal cuando no se sale bien",
            "@user It's normal when it doesn't work out",
        ),
        (
            "zh",
            "开学了 会更新的慢一点了 快万粉了 你们有什么想看的吗 http",
            "The school has started, the update will be a bit slower, I am almost 10,000 fans, do you have anything you want to see http",
        ),
    ];
    rows.into_iter()
        .map(|(lang, orig, trans)| (lang, orig, trans, format!("{orig} </s></s> {trans}")))
        .collect()
}

//! Ensemble averaging and language-based routing.
//!
//! Seen-language records go to the Original-strategy ensemble, unseen ones
//! to the Joint-strategy ensemble. Member predictions are combined by
//! elementwise arithmetic mean.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{language_set, Dataset, DEFAULT_SEEN, DEFAULT_UNSEEN};
use crate::error::{Error, Result};
use crate::regressor::{predict, TrainedModel};
use crate::representation::{render, RenderedInput, Strategy};
use crate::scalar::Real;

/// Default number of ensemble members.
pub const DEFAULT_ENSEMBLE_SIZE: usize = 7;

/// Seed for ensemble member `i` under a base seed: members differ only by
/// seed, base_seed + i.
pub fn member_seed(base_seed: u64, member: usize) -> u64 {
    base_seed.wrapping_add(member as u64)
}

/// Elementwise arithmetic mean across model prediction vectors.
pub fn average_predictions<F: Real>(per_model: &[Vec<F>]) -> Result<Vec<F>> {
    let Some(first) = per_model.first() else {
        return Err(Error::Argument("no model predictions to average".into()));
    };
    let len = first.len();
    if per_model.iter().any(|p| p.len() != len) {
        return Err(Error::Argument(format!(
            "ragged prediction lengths: {:?}",
            per_model.iter().map(Vec::len).collect::<Vec<_>>()
        )));
    }
    let count = F::from_count(per_model.len());
    Ok((0..len)
        .map(|i| per_model.iter().map(|p| p[i]).sum::<F>() / count)
        .collect())
}

/// An ordered set of same-strategy trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "F: Serialize",
    deserialize = "F: serde::de::DeserializeOwned"
))]
pub struct Ensemble<F: Real> {
    pub strategy: Strategy,
    pub members: Vec<TrainedModel<F>>,
}

impl<F: Real> Ensemble<F> {
    pub fn new(members: Vec<TrainedModel<F>>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::Argument("ensemble needs at least one member".into()));
        };
        let strategy = first.strategy;
        if members.iter().any(|m| m.strategy != strategy) {
            return Err(Error::Argument(
                "ensemble members must share one strategy".into(),
            ));
        }
        Ok(Self { strategy, members })
    }

    /// Mean of member predictions over the inputs.
    pub fn predict(&self, inputs: &[RenderedInput]) -> Result<Vec<F>> {
        let per_model: Vec<Vec<F>> =
            self.members.iter().map(|m| predict(m, inputs)).collect();
        average_predictions(&per_model)
    }
}

/// Which ensemble scored a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Seen,
    Unseen,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Seen => "seen",
            Route::Unseen => "unseen",
        })
    }
}

/// Language → ensemble dispatch table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Router {
    pub seen_languages: BTreeSet<String>,
    pub unseen_languages: BTreeSet<String>,
}

impl Default for Router {
    fn default() -> Self {
        Self {
            seen_languages: language_set(&DEFAULT_SEEN),
            unseen_languages: language_set(&DEFAULT_UNSEEN),
        }
    }
}

impl Router {
    pub fn new(seen: BTreeSet<String>, unseen: BTreeSet<String>) -> Result<Self> {
        let overlap: Vec<_> = seen.intersection(&unseen).cloned().collect();
        if !overlap.is_empty() {
            return Err(Error::Argument(format!(
                "languages in both seen and unseen sets: {overlap:?}"
            )));
        }
        Ok(Self {
            seen_languages: seen,
            unseen_languages: unseen,
        })
    }

    pub fn route(&self, language: &str) -> Option<Route> {
        if self.seen_languages.contains(language) {
            Some(Route::Seen)
        } else if self.unseen_languages.contains(language) {
            Some(Route::Unseen)
        } else {
            None
        }
    }
}

/// One routed score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedScore<F> {
    pub language: String,
    pub score: F,
    pub route: Route,
}

/// Routes every test record to a scorer: seen languages rendered with
/// Original and scored by `seen_score`, unseen rendered with Joint and
/// scored by `unseen_score`. A scorer is invoked only when its group is
/// non-empty.
pub fn route_predict<F, S, U>(
    router: &Router,
    test: &Dataset,
    translations: &BTreeMap<String, String>,
    mut seen_score: S,
    mut unseen_score: U,
) -> Result<BTreeMap<String, RoutedScore<F>>>
where
    F: Real,
    S: FnMut(&[RenderedInput]) -> Result<Vec<F>>,
    U: FnMut(&[RenderedInput]) -> Result<Vec<F>>,
{
    let unroutable: BTreeSet<String> = test
        .records
        .iter()
        .filter(|r| router.route(&r.language).is_none())
        .map(|r| r.language.clone())
        .collect();
    if !unroutable.is_empty() {
        return Err(Error::Routing(unroutable.into_iter().collect()));
    }

    let mut out = BTreeMap::new();
    for (route, strategy) in [(Route::Seen, Strategy::Original), (Route::Unseen, Strategy::Joint)] {
        let group: Vec<_> = test
            .records
            .iter()
            .filter(|r| router.route(&r.language) == Some(route))
            .collect();
        if group.is_empty() {
            continue;
        }
        let rendered: Vec<RenderedInput> = group
            .iter()
            .map(|r| render(r, translations.get(&r.id).map(String::as_str), strategy))
            .collect::<Result<_>>()?;
        let scores = match route {
            Route::Seen => seen_score(&rendered)?,
            Route::Unseen => unseen_score(&rendered)?,
        };
        if scores.len() != group.len() {
            return Err(Error::Argument(format!(
                "scorer returned {} scores for {} inputs",
                scores.len(),
                group.len()
            )));
        }
        for (record, score) in group.iter().zip(scores) {
            out.insert(
                record.id.clone(),
                RoutedScore {
                    language: record.language.clone(),
                    score,
                    route,
                },
            );
        }
    }
    Ok(out)
}

/// Convenience wrapper scoring with two trained ensembles.
pub fn route_predict_ensembles<F: Real>(
    router: &Router,
    test: &Dataset,
    translations: &BTreeMap<String, String>,
    seen_ensemble: &Ensemble<F>,
    unseen_ensemble: &Ensemble<F>,
) -> Result<BTreeMap<String, RoutedScore<F>>> {
    if seen_ensemble.strategy != Strategy::Original {
        return Err(Error::Argument(
            "seen ensemble must use the original strategy".into(),
        ));
    }
    if unseen_ensemble.strategy != Strategy::Joint {
        return Err(Error::Argument(
            "unseen ensemble must use the joint strategy".into(),
        ));
    }
    route_predict(
        router,
        test,
        translations,
        |inputs| seen_ensemble.predict(inputs),
        |inputs| unseen_ensemble.predict(inputs),
    )
}

/// Writes routed predictions as CSV `id,language,score,ensemble`.
pub fn write_predictions(
    predictions: &BTreeMap<String, RoutedScore<f64>>,
    path: &Path,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["id", "language", "score", "ensemble"])?;
    for (id, routed) in predictions {
        writer.write_record([
            id.as_str(),
            routed.language.as_str(),
            &routed.score.to_string(),
            &routed.route.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a predictions CSV written by [`write_predictions`].
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, RoutedScore<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let parse_err = |detail: String| Error::Parse {
            row: i + 1,
            detail,
        };
        let id = row.get(0).unwrap_or("").to_string();
        let language = row.get(1).unwrap_or("").to_string();
        let score: f64 = row
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|e| parse_err(format!("bad score: {e}")))?;
        let route = match row.get(3) {
            Some("seen") => Route::Seen,
            Some("unseen") => Route::Unseen,
            other => return Err(parse_err(format!("bad ensemble tag {other:?}"))),
        };
        out.insert(
            id,
            RoutedScore {
                language,
                score,
                route,
            },
        );
    }
    Ok(out)
}

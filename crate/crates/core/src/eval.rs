//! Evaluation protocols: per-language reports, the leave-one-language-out
//! grid, and report emission.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{leave_one_out, Dataset};
use crate::ensemble::RoutedScore;
use crate::error::{Error, Result};
use crate::metrics::{mse, pearson_r, summary_stats, SummaryStats};
use crate::regressor::hashgram::HASHGRAM_ID;
use crate::regressor::{predict, train, TrainingConfig};
use crate::representation::{render_dataset, Strategy};

/// Pearson's r (None when undefined) and MSE for one slice of data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub pearson_r: Option<f64>,
    pub mse: f64,
}

fn metric_pair(pred: &[f64], gold: &[f64]) -> Result<MetricPair> {
    Ok(MetricPair {
        pearson_r: pearson_r(pred, gold)?,
        mse: mse(pred, gold)?,
    })
}

/// Aggregate over a language group: pooled (micro) metrics plus the mean of
/// per-language r values. Undefined per-language cells are skipped and
/// counted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pooled: MetricPair,
    pub mean_language_r: Option<f64>,
    pub undefined_language_count: usize,
}

/// Per-language and grouped metrics for one prediction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_language: BTreeMap<String, MetricPair>,
    pub seen: Option<Aggregate>,
    pub unseen: Option<Aggregate>,
    pub overall: Aggregate,
}

fn aggregate(
    languages: &BTreeSet<String>,
    per_language: &BTreeMap<String, MetricPair>,
    pairs: &[(String, f64, f64)],
) -> Result<Option<Aggregate>> {
    let pooled: Vec<&(String, f64, f64)> = pairs
        .iter()
        .filter(|(lang, _, _)| languages.contains(lang))
        .collect();
    if pooled.is_empty() {
        return Ok(None);
    }
    let pred: Vec<f64> = pooled.iter().map(|(_, p, _)| *p).collect();
    let gold: Vec<f64> = pooled.iter().map(|(_, _, g)| *g).collect();
    let group_rows: Vec<&MetricPair> = per_language
        .iter()
        .filter(|(lang, _)| languages.contains(*lang))
        .map(|(_, m)| m)
        .collect();
    let defined: Vec<f64> = group_rows.iter().filter_map(|m| m.pearson_r).collect();
    Ok(Some(Aggregate {
        pooled: metric_pair(&pred, &gold)?,
        mean_language_r: if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        },
        undefined_language_count: group_rows.len() - defined.len(),
    }))
}

/// Per-language metrics plus seen/unseen/overall aggregates. Predictions
/// must cover every gold id; gold records must be labeled.
pub fn evaluate_by_language(
    preds: &BTreeMap<String, f64>,
    gold: &Dataset,
    seen: &BTreeSet<String>,
    unseen: &BTreeSet<String>,
) -> Result<EvaluationReport> {
    let missing: Vec<String> = gold
        .records
        .iter()
        .filter(|r| !preds.contains_key(&r.id))
        .map(|r| r.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }

    let mut pairs: Vec<(String, f64, f64)> = Vec::with_capacity(gold.len());
    for record in &gold.records {
        let label = record.score.ok_or_else(|| {
            Error::Validation(format!("gold record {:?} has no score", record.id))
        })?;
        pairs.push((record.language.clone(), preds[&record.id], label));
    }

    let mut per_language = BTreeMap::new();
    for language in gold.languages() {
        let (pred, gold_scores): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .filter(|(lang, _, _)| *lang == language)
            .map(|(_, p, g)| (*p, *g))
            .unzip();
        per_language.insert(language, metric_pair(&pred, &gold_scores)?);
    }

    let all_languages = gold.languages();
    let overall = aggregate(&all_languages, &per_language, &pairs)?
        .ok_or_else(|| Error::Argument("cannot evaluate an empty dataset".into()))?;
    Ok(EvaluationReport {
        seen: aggregate(seen, &per_language, &pairs)?,
        unseen: aggregate(unseen, &per_language, &pairs)?,
        per_language,
        overall,
    })
}

/// The five train/validation representation pairings of the zero-shot grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridConfiguration {
    OriginalOriginal,
    OriginalTranslated,
    TranslatedTranslated,
    TranslatedOriginal,
    JointJoint,
}

impl GridConfiguration {
    pub const ALL: [GridConfiguration; 5] = [
        GridConfiguration::OriginalOriginal,
        GridConfiguration::OriginalTranslated,
        GridConfiguration::TranslatedTranslated,
        GridConfiguration::TranslatedOriginal,
        GridConfiguration::JointJoint,
    ];

    pub fn train_strategy(self) -> Strategy {
        match self {
            GridConfiguration::OriginalOriginal | GridConfiguration::OriginalTranslated => {
                Strategy::Original
            }
            GridConfiguration::TranslatedTranslated | GridConfiguration::TranslatedOriginal => {
                Strategy::Translated
            }
            GridConfiguration::JointJoint => Strategy::Joint,
        }
    }

    pub fn eval_strategy(self) -> Strategy {
        match self {
            GridConfiguration::OriginalOriginal | GridConfiguration::TranslatedOriginal => {
                Strategy::Original
            }
            GridConfiguration::OriginalTranslated | GridConfiguration::TranslatedTranslated => {
                Strategy::Translated
            }
            GridConfiguration::JointJoint => Strategy::Joint,
        }
    }
}

impl fmt::Display for GridConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GridConfiguration::OriginalOriginal => "train:original/val:original",
            GridConfiguration::OriginalTranslated => "train:original/val:translated",
            GridConfiguration::TranslatedTranslated => "train:translated/val:translated",
            GridConfiguration::TranslatedOriginal => "train:translated/val:original",
            GridConfiguration::JointJoint => "train:joint/val:joint",
        };
        f.write_str(s)
    }
}

/// Id-level record of what each grid cell trained and evaluated on, kept so
/// leakage of the excluded language is checkable after the fact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAudit {
    pub configuration: GridConfiguration,
    pub excluded_language: String,
    pub train_ids: BTreeSet<String>,
    pub eval_ids: BTreeSet<String>,
}

/// One grid row: a configuration and its per-excluded-language cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub configuration: GridConfiguration,
    pub cells: BTreeMap<String, MetricPair>,
}

/// The 5-configuration × excluded-language evaluation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotGrid {
    pub rows: Vec<GridRow>,
    pub audit: Vec<CellAudit>,
}

/// Runs the full leave-one-language-out grid: for every (configuration,
/// excluded language) pair, partition, render both sides with the row's
/// strategies, train one model, and score the held-out language.
pub fn run_zero_shot_grid(
    data: &Dataset,
    translations: &BTreeMap<String, String>,
    config: &TrainingConfig,
    excludable: &BTreeSet<String>,
) -> Result<ZeroShotGrid> {
    let mut rows: Vec<GridRow> = GridConfiguration::ALL
        .iter()
        .map(|&configuration| GridRow {
            configuration,
            cells: BTreeMap::new(),
        })
        .collect();
    let mut audit = Vec::new();

    for excluded in excludable {
        let (train_set, eval_set) = leave_one_out(data, excluded)?;
        for row in &mut rows {
            let configuration = row.configuration;
            let tag_err = |e: Error| {
                Error::Validation(format!("grid cell ({configuration}, {excluded}): {e}"))
            };

            let train_inputs =
                render_dataset(&train_set, translations, configuration.train_strategy())
                    .map_err(tag_err)?;
            let eval_inputs =
                render_dataset(&eval_set, translations, configuration.eval_strategy())
                    .map_err(tag_err)?;
            let train_labels: Vec<f64> = train_set
                .records
                .iter()
                .map(|r| {
                    r.score.ok_or_else(|| {
                        tag_err(Error::Validation(format!("record {:?} unlabeled", r.id)))
                    })
                })
                .collect::<Result<_>>()?;
            let eval_labels: Vec<f64> = eval_set
                .records
                .iter()
                .map(|r| {
                    r.score.ok_or_else(|| {
                        tag_err(Error::Validation(format!("record {:?} unlabeled", r.id)))
                    })
                })
                .collect::<Result<_>>()?;

            let model =
                train(&train_inputs, &train_labels, config, HASHGRAM_ID).map_err(tag_err)?;
            let preds = predict(&model, &eval_inputs);
            row.cells.insert(
                excluded.clone(),
                metric_pair(&preds, &eval_labels).map_err(tag_err)?,
            );
            audit.push(CellAudit {
                configuration,
                excluded_language: excluded.clone(),
                train_ids: train_set.ids(),
                eval_ids: eval_set.ids(),
            });
        }
    }
    Ok(ZeroShotGrid { rows, audit })
}

/// Writes a grid as long-form CSV `configuration,language,mse,pearson_r`.
pub fn write_grid_csv(grid: &ZeroShotGrid, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["configuration", "language", "mse", "pearson_r"])?;
    for row in &grid.rows {
        for (language, cell) in &row.cells {
            writer.write_record([
                row.configuration.to_string().as_str(),
                language,
                &cell.mse.to_string(),
                &cell
                    .pearson_r
                    .map(|r| r.to_string())
                    .unwrap_or_else(|| "undefined".to_string()),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Histogram bin edges: width 0.25 over [0.5, 5.5], 20 bins.
pub const HISTOGRAM_LO: f64 = 0.5;
pub const HISTOGRAM_HI: f64 = 5.5;
pub const HISTOGRAM_BINS: usize = 20;

/// Bins a score sequence; out-of-range values land in the edge bins.
pub fn histogram(scores: &[f64]) -> [usize; HISTOGRAM_BINS] {
    let width = (HISTOGRAM_HI - HISTOGRAM_LO) / HISTOGRAM_BINS as f64;
    let mut bins = [0usize; HISTOGRAM_BINS];
    for &s in scores {
        let ix = ((s - HISTOGRAM_LO) / width).floor() as isize;
        let ix = ix.clamp(0, HISTOGRAM_BINS as isize - 1) as usize;
        bins[ix] += 1;
    }
    bins
}

/// Everything `emit_report` writes alongside the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub metrics: EvaluationReport,
    pub prediction_summary: SummaryStats<f64>,
    pub gold_summary: SummaryStats<f64>,
    pub metadata: serde_json::Value,
}

/// Assembles the report document: metrics, prediction and gold summary
/// statistics, and run metadata.
pub fn build_report_document(
    report: &EvaluationReport,
    predictions: &BTreeMap<String, RoutedScore<f64>>,
    gold: &Dataset,
    metadata: serde_json::Value,
) -> Result<ReportDocument> {
    let pred_scores: Vec<f64> = gold
        .records
        .iter()
        .map(|r| {
            predictions
                .get(&r.id)
                .map(|p| p.score)
                .ok_or_else(|| Error::Coverage(vec![r.id.clone()]))
        })
        .collect::<Result<_>>()?;
    let gold_scores: Vec<f64> = gold
        .records
        .iter()
        .map(|r| {
            r.score
                .ok_or_else(|| Error::Validation(format!("gold record {:?} unlabeled", r.id)))
        })
        .collect::<Result<_>>()?;

    Ok(ReportDocument {
        metrics: report.clone(),
        prediction_summary: summary_stats(&pred_scores)?,
        gold_summary: summary_stats(&gold_scores)?,
        metadata,
    })
}

/// Writes report.json with stable key order and a trailing newline.
pub fn write_report_json(document: &ReportDocument, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let mut json = serde_json::to_string_pretty(document)?;
    json.push('\n');
    std::fs::write(out_dir.join("report.json"), json)?;
    Ok(())
}

/// Writes report.json (metrics, summary statistics, run metadata) plus CSV
/// sidecars: per-language histograms and (gold, pred) scatter pairs.
pub fn emit_report(
    report: &EvaluationReport,
    predictions: &BTreeMap<String, RoutedScore<f64>>,
    gold: &Dataset,
    metadata: serde_json::Value,
    out_dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let document = build_report_document(report, predictions, gold, metadata)?;
    write_report_json(&document, out_dir)?;

    // Histogram sidecar: language,bin_lo,bin_hi,count
    let width = (HISTOGRAM_HI - HISTOGRAM_LO) / HISTOGRAM_BINS as f64;
    let mut hist = File::create(out_dir.join("histogram.csv"))?;
    writeln!(hist, "language,bin_lo,bin_hi,count")?;
    for language in gold.languages() {
        let scores: Vec<f64> = gold
            .records
            .iter()
            .filter(|r| r.language == language)
            .map(|r| predictions[&r.id].score)
            .collect();
        for (i, count) in histogram(&scores).iter().enumerate() {
            let lo = HISTOGRAM_LO + i as f64 * width;
            writeln!(hist, "{language},{lo},{},{count}", lo + width)?;
        }
    }

    // Scatter sidecar: language,id,gold,pred
    let mut scatter = File::create(out_dir.join("scatter.csv"))?;
    writeln!(scatter, "language,id,gold,pred")?;
    for record in &gold.records {
        writeln!(
            scatter,
            "{},{},{},{}",
            record.language,
            record.id,
            record.score.unwrap_or(f64::NAN),
            predictions[&record.id].score
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{language_set, SplitTag, TweetRecord};
    use crate::ensemble::Route;

    fn gold(records: &[(&str, &str, f64)]) -> Dataset {
        Dataset::new(
            records
                .iter()
                .map(|(id, lang, score)| {
                    TweetRecord::new(*id, format!("text {id}"), *lang, Some(*score))
                })
                .collect(),
            SplitTag::Test,
        )
        .unwrap()
    }

    #[test]
    fn single_language_overall_equals_per_language() {
        let g = gold(&[("a", "es", 1.0), ("b", "es", 2.0), ("c", "es", 3.0)]);
        let preds: BTreeMap<String, f64> =
            [("a", 1.1), ("b", 2.2), ("c", 2.9)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let report = evaluate_by_language(
            &preds,
            &g,
            &language_set(&["es"]),
            &BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(report.per_language["es"], report.overall.pooled);
        assert!(report.unseen.is_none());
    }

    #[test]
    fn pooled_overall_matches_brute_force() {
        // Per-language r is 1.0 for both languages, but pooling mixes two
        // differently shifted score scales, so overall r drops below 1.
        let g = gold(&[
            ("a", "es", 1.0),
            ("b", "es", 2.0),
            ("c", "it", 1.0),
            ("d", "it", 2.0),
        ]);
        let preds: BTreeMap<String, f64> = [("a", 1.0), ("b", 1.5), ("c", 4.0), ("d", 4.5)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let report = evaluate_by_language(
            &preds,
            &g,
            &language_set(&["es", "it"]),
            &BTreeSet::new(),
        )
        .unwrap();
        assert_eq!(report.per_language["es"].pearson_r, Some(1.0));
        assert_eq!(report.per_language["it"].pearson_r, Some(1.0));
        // Brute-force pooled Pearson over the concatenation.
        let pred = [1.0, 1.5, 4.0, 4.5];
        let goldv = [1.0, 2.0, 1.0, 2.0];
        let oracle = pearson_r(&pred, &goldv).unwrap().unwrap();
        let pooled = report.overall.pooled.pearson_r.unwrap();
        assert!((pooled - oracle).abs() < 1e-12);
        assert!(pooled < 1.0);
    }

    #[test]
    fn missing_prediction_is_coverage_error() {
        let g = gold(&[("a", "es", 1.0), ("b", "es", 2.0)]);
        let preds: BTreeMap<String, f64> =
            [("a".to_string(), 1.0)].into_iter().collect();
        let err =
            evaluate_by_language(&preds, &g, &language_set(&["es"]), &BTreeSet::new())
                .unwrap_err();
        match err {
            Error::Coverage(ids) => assert_eq!(ids, vec!["b".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn histogram_bins_constant_scores() {
        let bins = histogram(&[2.0, 2.0, 2.0]);
        assert_eq!(bins.iter().sum::<usize>(), 3);
        assert_eq!(bins.iter().filter(|&&c| c > 0).count(), 1);
    }

    #[test]
    fn emit_report_diagonal_predictions() {
        let g = gold(&[("a", "es", 1.0), ("b", "es", 2.0), ("c", "es", 3.0), ("d", "es", 4.0)]);
        let preds_f: BTreeMap<String, f64> = g
            .records
            .iter()
            .map(|r| (r.id.clone(), r.score.unwrap()))
            .collect();
        let report = evaluate_by_language(
            &preds_f,
            &g,
            &language_set(&["es"]),
            &BTreeSet::new(),
        )
        .unwrap();
        let routed: BTreeMap<String, RoutedScore<f64>> = preds_f
            .iter()
            .map(|(id, &score)| {
                (
                    id.clone(),
                    RoutedScore {
                        language: "es".to_string(),
                        score,
                        route: Route::Seen,
                    },
                )
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        emit_report(&report, &routed, &g, serde_json::json!({}), dir.path()).unwrap();

        let doc: ReportDocument = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(doc.metrics.overall.pooled.mse, 0.0);
        assert_eq!(doc.prediction_summary, doc.gold_summary);
        assert_eq!(doc.prediction_summary.mean, 2.5);
        assert!((doc.prediction_summary.std - 1.25f64.sqrt()).abs() < 1e-12);

        let scatter = std::fs::read_to_string(dir.path().join("scatter.csv")).unwrap();
        for line in scatter.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[2], fields[3], "off-diagonal: {line}");
        }
    }
}

//! Command-line driver for the intimacy regression pipeline.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use intimacy::corpus::{
    self, compute_statistics, load_dataset, load_dataset_any, save_dataset, save_statistics,
    split_dataset, Dataset, SplitSpec, WhitespaceCounter,
};
use intimacy::ensemble::{
    member_seed, read_predictions, route_predict, write_predictions, Ensemble, RoutedScore,
    Router,
};
use intimacy::error::{Error, Result};
use intimacy::eval::{
    build_report_document, emit_report, evaluate_by_language, run_zero_shot_grid, write_grid_csv,
    write_report_json,
};
use intimacy::manifest::{FileConfig, RunConfig, RunManifest};
use intimacy::regressor::{
    clamp_scores, external_adapter_predict, load_model, save_model, train,
};
use intimacy::representation::{render_dataset, write_rendered_tsv, RenderedInput, Strategy};
use intimacy::translation::{
    translate_dataset, FallbackPolicy, HttpBackend, StaticLookupBackend, TranslationBackend,
    TranslationCache,
};
use intimacy::Model;

#[derive(Parser)]
#[command(name = "intimacy", about = "Multilingual tweet intimacy regression pipeline")]
struct Cli {
    /// Flat key-value config file (TOML). Flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command; unset flags fall back to the config file,
/// then to defaults.
#[derive(Args, Debug, Default, Clone)]
struct CommonOpts {
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// hashgram | external:<command>
    #[arg(long)]
    backbone: Option<String>,
    /// static:<jsonl> | http:<base-url>
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    seen_languages: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    unseen_languages: Option<Vec<String>>,
    /// Clamp predicted scores into [1, 5].
    #[arg(long)]
    clamp: bool,
    /// Fall back to the original text when a translation is unavailable.
    #[arg(long)]
    fallback_original: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Per-language counts and mean token lengths.
    Stats {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Translate a dataset to English through the configured backend.
    Translate {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Deterministic seeded train/validation split.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train an ensemble of models on one representation strategy.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Score a test set, routing each language to its ensemble.
    Predict {
        #[arg(long)]
        test: PathBuf,
        /// Directory produced by `train` with original-strategy models.
        #[arg(long)]
        seen_ensemble: Option<PathBuf>,
        /// Directory produced by `train` with joint-strategy models.
        #[arg(long)]
        unseen_ensemble: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Leave-one-language-out grid over the five representation pairings.
    Zeroshot {
        #[arg(long)]
        input: PathBuf,
        /// Languages to exclude in turn; defaults to every non-English
        /// language present.
        #[arg(long, value_delimiter = ',')]
        exclude: Option<Vec<String>>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Per-language and aggregate metrics for a prediction file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Full report: metrics, histograms, scatter pairs, summary statistics.
    Report {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn resolve_config(common: &CommonOpts, file: &FileConfig) -> RunConfig {
    let defaults = RunConfig::default();
    RunConfig {
        strategy: common
            .strategy
            .clone()
            .or_else(|| file.strategy.clone())
            .unwrap_or(defaults.strategy),
        epochs: common.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size: common
            .batch_size
            .or(file.batch_size)
            .unwrap_or(defaults.batch_size),
        max_len: common.max_len.or(file.max_len).unwrap_or(defaults.max_len),
        lr: common.lr.or(file.lr).unwrap_or(defaults.lr),
        seed: common.seed.or(file.seed).unwrap_or(defaults.seed),
        ratio: common.ratio.or(file.ratio).unwrap_or(defaults.ratio),
        ensemble_size: common
            .ensemble_size
            .or(file.ensemble_size)
            .unwrap_or(defaults.ensemble_size),
        backbone: common
            .backbone
            .clone()
            .or_else(|| file.backbone.clone())
            .unwrap_or(defaults.backbone),
        backend: common.backend.clone().or_else(|| file.backend.clone()),
        cache: common.cache.clone().or_else(|| file.cache.clone()),
        seen_languages: common
            .seen_languages
            .clone()
            .or_else(|| file.seen_languages.clone())
            .unwrap_or(defaults.seen_languages),
        unseen_languages: common
            .unseen_languages
            .clone()
            .or_else(|| file.unseen_languages.clone())
            .unwrap_or(defaults.unseen_languages),
        clamp: common.clamp || file.clamp.unwrap_or(false),
        fallback_original: common.fallback_original || file.fallback_original.unwrap_or(false),
        out: common
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or(defaults.out),
    }
}

/// Backend that never translates: cache hits and English passthrough only.
struct NoBackend;

impl TranslationBackend for NoBackend {
    fn translate(&self, text: &str, source_language: &str) -> Result<String> {
        Err(Error::TranslationUnavailable {
            lang: source_language.to_string(),
            text: text.to_string(),
            detail: "no backend configured".into(),
        })
    }
    fn id(&self) -> &str {
        "none"
    }
}

fn open_backend(spec: Option<&str>) -> Result<Box<dyn TranslationBackend>> {
    match spec {
        None => Ok(Box::new(NoBackend)),
        Some(s) => match s.split_once(':') {
            Some(("static", path)) => Ok(Box::new(StaticLookupBackend::from_file(Path::new(
                path,
            ))?)),
            Some(("http", url)) => Ok(Box::new(HttpBackend::new(format!("http:{url}"))?)),
            _ => Err(Error::Argument(format!(
                "backend must be static:<file> or http:<url>, got {s:?}"
            ))),
        },
    }
}

fn known_languages(config: &RunConfig) -> BTreeSet<String> {
    config
        .seen_languages
        .iter()
        .chain(config.unseen_languages.iter())
        .cloned()
        .collect()
}

fn build_translations(
    dataset: &Dataset,
    config: &RunConfig,
) -> Result<BTreeMap<String, String>> {
    let backend = open_backend(config.backend.as_deref())?;
    let mut cache = match &config.cache {
        Some(path) => TranslationCache::open(path)?,
        None => TranslationCache::in_memory(),
    };
    let policy = if config.fallback_original {
        FallbackPolicy::UseOriginal
    } else {
        FallbackPolicy::HardError
    };
    let translations = translate_dataset(dataset, backend.as_ref(), &mut cache, policy)?;
    if config.cache.is_some() {
        cache.save()?;
    }
    Ok(translations)
}

/// On-disk ensemble description written next to the member model files.
#[derive(Serialize, Deserialize)]
struct EnsembleSpecFile {
    strategy: Strategy,
    backbone: String,
    members: Vec<String>,
}

fn load_ensemble(dir: &Path) -> Result<Ensemble<f64>> {
    let spec_path = dir.join("ensemble.json");
    let spec: EnsembleSpecFile = serde_json::from_str(
        &std::fs::read_to_string(&spec_path)
            .map_err(|e| Error::Storage(format!("{}: {e}", spec_path.display())))?,
    )?;
    let members: Vec<Model> = spec
        .members
        .iter()
        .map(|name| load_model(&dir.join(name)))
        .collect::<Result<_>>()?;
    Ensemble::new(members)
}

fn cmd_stats(input: &Path, config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(input, &known_languages(config))?;
    let stats = compute_statistics(&dataset, &WhitespaceCounter);
    std::fs::create_dir_all(&config.out)?;
    save_statistics(&stats, &config.out.join("stats.csv"))?;
    let mut manifest = RunManifest::new("stats", config);
    manifest.checksum_input("input", input)?;
    manifest.write(&config.out)?;
    println!("wrote {} language rows", stats.rows.len());
    Ok(())
}

fn cmd_translate(input: &Path, config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(input, &known_languages(config))?;
    let translations = build_translations(&dataset, config)?;
    std::fs::create_dir_all(&config.out)?;
    let mut writer = csv::Writer::from_path(config.out.join("translations.csv"))?;
    writer.write_record(["id", "translation"])?;
    for (id, translation) in &translations {
        writer.write_record([id.as_str(), translation.as_str()])?;
    }
    writer.flush()?;
    let mut manifest = RunManifest::new("translate", config);
    manifest.checksum_input("input", input)?;
    manifest.write(&config.out)?;
    println!("translated {} records", translations.len());
    Ok(())
}

fn cmd_split(input: &Path, config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(input, &known_languages(config))?;
    let (train_set, valid_set) = split_dataset(
        &dataset,
        &SplitSpec {
            ratio: config.ratio,
            seed: config.seed,
        },
    )?;
    std::fs::create_dir_all(&config.out)?;
    save_dataset(&train_set, &config.out.join("train.csv"))?;
    save_dataset(&valid_set, &config.out.join("valid.csv"))?;
    let mut manifest = RunManifest::new("split", config);
    manifest.checksum_input("input", input)?;
    manifest.write(&config.out)?;
    println!("split {} -> {} / {}", dataset.len(), train_set.len(), valid_set.len());
    Ok(())
}

fn cmd_train(input: &Path, config: &RunConfig) -> Result<()> {
    if config.backbone != "hashgram" {
        return Err(Error::Argument(format!(
            "only the hashgram backbone is trainable; {:?} models predict via the external adapter",
            config.backbone
        )));
    }
    let dataset = load_dataset(input, &known_languages(config))?;
    let strategy = Strategy::parse(&config.strategy)?;
    let translations = match strategy {
        Strategy::Original => BTreeMap::new(),
        _ => build_translations(&dataset, config)?,
    };
    let inputs = render_dataset(&dataset, &translations, strategy)?;
    let labels: Vec<f64> = dataset
        .records
        .iter()
        .map(|r| {
            r.score
                .ok_or_else(|| Error::Validation(format!("record {:?} unlabeled", r.id)))
        })
        .collect::<Result<_>>()?;

    std::fs::create_dir_all(&config.out)?;
    let mut member_files = Vec::new();
    for i in 0..config.ensemble_size {
        let mut training = config.training_config();
        training.seed = member_seed(config.seed, i);
        let model = train(&inputs, &labels, &training, &config.backbone)?;
        let name = format!("member_{i}.json");
        save_model(&model, &config.out.join(&name))?;
        member_files.push(name);
    }
    let spec = EnsembleSpecFile {
        strategy,
        backbone: config.backbone.clone(),
        members: member_files,
    };
    let mut json = serde_json::to_string_pretty(&spec)?;
    json.push('\n');
    std::fs::write(config.out.join("ensemble.json"), json)?;
    let mut manifest = RunManifest::new("train", config);
    manifest.checksum_input("input", input)?;
    manifest.write(&config.out)?;
    println!("trained {} {} models", config.ensemble_size, strategy);
    Ok(())
}

fn external_scorer<'a>(
    adapter: &'a str,
    out_dir: &'a Path,
    tag: &'a str,
) -> impl FnMut(&[RenderedInput]) -> Result<Vec<f64>> + 'a {
    move |inputs: &[RenderedInput]| {
        let tsv = out_dir.join(format!("{tag}_inputs.tsv"));
        let csv_out = out_dir.join(format!("{tag}_scores.csv"));
        write_rendered_tsv(inputs, &tsv)?;
        let scores = external_adapter_predict(adapter, &tsv, &csv_out)?;
        Ok(inputs.iter().map(|i| scores[&i.record_id]).collect())
    }
}

fn cmd_predict(
    test: &Path,
    seen_dir: Option<&Path>,
    unseen_dir: Option<&Path>,
    config: &RunConfig,
) -> Result<()> {
    let dataset = load_dataset_any(test)?;
    let router = Router::new(
        config.seen_languages.iter().cloned().collect(),
        config.unseen_languages.iter().cloned().collect(),
    )?;
    let translations = build_translations(&dataset, config)?;
    std::fs::create_dir_all(&config.out)?;

    let mut predictions = match config.backbone.split_once(':') {
        Some(("external", adapter)) => route_predict(
            &router,
            &dataset,
            &translations,
            external_scorer(adapter, &config.out, "seen"),
            external_scorer(adapter, &config.out, "unseen"),
        )?,
        _ => {
            let seen_dir = seen_dir.ok_or_else(|| {
                Error::Argument("--seen-ensemble is required with the hashgram backbone".into())
            })?;
            let unseen_dir = unseen_dir.ok_or_else(|| {
                Error::Argument("--unseen-ensemble is required with the hashgram backbone".into())
            })?;
            let seen = load_ensemble(seen_dir)?;
            let unseen = load_ensemble(unseen_dir)?;
            intimacy::ensemble::route_predict_ensembles(
                &router,
                &dataset,
                &translations,
                &seen,
                &unseen,
            )?
        }
    };
    if config.clamp {
        let mut scores: Vec<f64> = predictions.values().map(|p| p.score).collect();
        clamp_scores(&mut scores);
        for (p, s) in predictions.values_mut().zip(scores) {
            p.score = s;
        }
    }
    write_predictions(&predictions, &config.out.join("predictions.csv"))?;
    let mut manifest = RunManifest::new("predict", config);
    manifest.checksum_input("test", test)?;
    manifest.write(&config.out)?;
    println!("scored {} records", predictions.len());
    Ok(())
}

fn cmd_zeroshot(input: &Path, exclude: Option<Vec<String>>, config: &RunConfig) -> Result<()> {
    let dataset = load_dataset(input, &known_languages(config))?;
    let translations = build_translations(&dataset, config)?;
    let excludable: BTreeSet<String> = match exclude {
        Some(langs) => langs.into_iter().collect(),
        None => dataset
            .languages()
            .into_iter()
            .filter(|l| l != corpus::ENGLISH)
            .collect(),
    };
    let grid = run_zero_shot_grid(
        &dataset,
        &translations,
        &config.training_config(),
        &excludable,
    )?;
    std::fs::create_dir_all(&config.out)?;
    write_grid_csv(&grid, &config.out.join("grid.csv"))?;
    let mut json = serde_json::to_string_pretty(&grid)?;
    json.push('\n');
    std::fs::write(config.out.join("grid.json"), json)?;
    let mut manifest = RunManifest::new("zeroshot", config);
    manifest.checksum_input("input", input)?;
    manifest.write(&config.out)?;
    println!(
        "grid: {} configurations x {} languages",
        grid.rows.len(),
        excludable.len()
    );
    Ok(())
}

fn load_eval_inputs(
    predictions: &Path,
    gold: &Path,
) -> Result<(BTreeMap<String, RoutedScore<f64>>, Dataset)> {
    let preds = read_predictions(predictions)?;
    let gold_set = load_dataset_any(gold)?;
    Ok((preds, gold_set))
}

fn cmd_evaluate(predictions: &Path, gold: &Path, config: &RunConfig) -> Result<()> {
    let (preds, gold_set) = load_eval_inputs(predictions, gold)?;
    let scores: BTreeMap<String, f64> =
        preds.iter().map(|(id, p)| (id.clone(), p.score)).collect();
    let report = evaluate_by_language(
        &scores,
        &gold_set,
        &config.seen_languages.iter().cloned().collect(),
        &config.unseen_languages.iter().cloned().collect(),
    )?;
    let mut manifest = RunManifest::new("evaluate", config);
    manifest.checksum_input("predictions", predictions)?;
    manifest.checksum_input("gold", gold)?;
    let document =
        build_report_document(&report, &preds, &gold_set, serde_json::to_value(&manifest)?)?;
    write_report_json(&document, &config.out)?;
    manifest.write(&config.out)?;
    match report.overall.pooled.pearson_r {
        Some(r) => println!("overall r {:.4}, mse {:.4}", r, report.overall.pooled.mse),
        None => println!("overall r undefined, mse {:.4}", report.overall.pooled.mse),
    }
    Ok(())
}

fn cmd_report(predictions: &Path, gold: &Path, config: &RunConfig) -> Result<()> {
    let (preds, gold_set) = load_eval_inputs(predictions, gold)?;
    let scores: BTreeMap<String, f64> =
        preds.iter().map(|(id, p)| (id.clone(), p.score)).collect();
    let report = evaluate_by_language(
        &scores,
        &gold_set,
        &config.seen_languages.iter().cloned().collect(),
        &config.unseen_languages.iter().cloned().collect(),
    )?;
    let mut manifest = RunManifest::new("report", config);
    manifest.checksum_input("predictions", predictions)?;
    manifest.checksum_input("gold", gold)?;
    emit_report(
        &report,
        &preds,
        &gold_set,
        serde_json::to_value(&manifest)?,
        &config.out,
    )?;
    manifest.write(&config.out)?;
    println!("report written to {}", config.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file_config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match cli.command {
        Command::Stats { input, common } => {
            cmd_stats(&input, &resolve_config(&common, &file_config))
        }
        Command::Translate { input, common } => {
            cmd_translate(&input, &resolve_config(&common, &file_config))
        }
        Command::Split { input, common } => {
            cmd_split(&input, &resolve_config(&common, &file_config))
        }
        Command::Train { input, common } => {
            cmd_train(&input, &resolve_config(&common, &file_config))
        }
        Command::Predict {
            test,
            seen_ensemble,
            unseen_ensemble,
            common,
        } => cmd_predict(
            &test,
            seen_ensemble.as_deref(),
            unseen_ensemble.as_deref(),
            &resolve_config(&common, &file_config),
        ),
        Command::Zeroshot {
            input,
            exclude,
            common,
        } => cmd_zeroshot(&input, exclude, &resolve_config(&common, &file_config)),
        Command::Evaluate {
            predictions,
            gold,
            common,
        } => cmd_evaluate(&predictions, &gold, &resolve_config(&common, &file_config)),
        Command::Report {
            predictions,
            gold,
            common,
        } => cmd_report(&predictions, &gold, &resolve_config(&common, &file_config)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: category={} detail={e}", e.category());
            ExitCode::FAILURE
        }
    }
}

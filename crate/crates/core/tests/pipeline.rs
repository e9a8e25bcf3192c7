//! End-to-end CLI tests: exit codes, error categories, file outputs, and
//! config precedence.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{planted_signal_corpus, planted_signal_corpus_for};
use intimacy::corpus::save_dataset;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_intimacy")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn assert_ok(output: &Output, what: &str) {
    assert!(
        output.status.success(),
        "{what} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
}

fn write_translation_table(
    dir: &Path,
    corpora: &[(&intimacy::corpus::Dataset, &std::collections::BTreeMap<String, String>)],
) -> String {
    let mut table = String::new();
    for (dataset, translations) in corpora {
        for record in &dataset.records {
            if record.language == "en" {
                continue;
            }
            let line = serde_json::json!({
                "lang": record.language,
                "text": record.text,
                "translation": translations[&record.id],
            });
            table.push_str(&line.to_string());
            table.push('\n');
        }
    }
    let path = dir.join("table.jsonl");
    fs::write(&path, table).unwrap();
    format!("static:{}", path.display())
}

#[test]
fn split_is_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = planted_signal_corpus(30, 12, 3);
    save_dataset(&dataset, &dir.path().join("data.csv")).unwrap();

    for out in ["a", "b"] {
        let output = run_in(
            dir.path(),
            &["split", "--input", "data.csv", "--ratio", "0.7", "--seed", "9", "--out", out],
        );
        assert_ok(&output, "split");
    }
    // Manifests embed the output directory, so only the data files are
    // expected to match byte for byte.
    for name in ["train.csv", "valid.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    assert!(dir.path().join("a/manifest.json").exists());
    // floor(0.7 × 180) = 125 train rows (0.7 is just under 7/10 in binary),
    // plus a header line in each file.
    let train = fs::read_to_string(dir.path().join("a/train.csv")).unwrap();
    assert_eq!(train.lines().count(), 126);
    let valid = fs::read_to_string(dir.path().join("a/valid.csv")).unwrap();
    assert_eq!(valid.lines().count(), 56);
}

#[test]
fn stats_reports_each_language() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = planted_signal_corpus(7, 12, 4);
    save_dataset(&dataset, &dir.path().join("data.csv")).unwrap();
    let output = run_in(dir.path(), &["stats", "--input", "data.csv", "--out", "s"]);
    assert_ok(&output, "stats");
    let stats = fs::read_to_string(dir.path().join("s/stats.csv")).unwrap();
    for lang in ["en", "es", "it", "pt", "fr", "zh"] {
        let row = stats
            .lines()
            .find(|l| l.starts_with(&format!("{lang},")))
            .unwrap_or_else(|| panic!("no stats row for {lang}"));
        assert!(row.split(',').nth(1).unwrap().parse::<usize>().unwrap() == 7);
    }
}

#[test]
fn unroutable_language_fails_with_routing_category() {
    let dir = tempfile::tempdir().unwrap();
    let (train_set, train_tr) = planted_signal_corpus(10, 12, 5);
    // "xx" is not in either routing set.
    let mut records = train_set.records.clone();
    records.push(intimacy::corpus::TweetRecord::new(
        "bad_0", "999 888 777", "xx", Some(2.0),
    ));
    let test_set =
        intimacy::corpus::Dataset::new(records, intimacy::corpus::SplitTag::Test).unwrap();
    save_dataset(&train_set, &dir.path().join("train.csv")).unwrap();
    save_dataset(&test_set, &dir.path().join("test.csv")).unwrap();
    let backend = write_translation_table(dir.path(), &[(&train_set, &train_tr)]);

    for (strategy, out) in [("original", "seen"), ("joint", "unseen")] {
        let output = run_in(
            dir.path(),
            &[
                "train", "--input", "train.csv", "--strategy", strategy,
                "--backend", &backend, "--epochs", "2", "--ensemble-size", "2",
                "--out", out,
            ],
        );
        assert_ok(&output, "train");
    }
    let output = run_in(
        dir.path(),
        &[
            "predict", "--test", "test.csv",
            "--seen-ensemble", "seen", "--unseen-ensemble", "unseen",
            "--backend", &backend, "--fallback-original", "--out", "run",
        ],
    );
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("category=routing"), "stderr: {stderr}");
    assert!(stderr.contains("xx"), "stderr: {stderr}");
}

#[test]
fn usage_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let output = run_in(dir.path(), &["predict"]); // missing required --test
    assert_eq!(output.status.code(), Some(2));
    let output = run_in(dir.path(), &["no-such-command"]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn external_adapter_scores_are_used() {
    let dir = tempfile::tempdir().unwrap();
    let (test_set, test_tr) = planted_signal_corpus_for(
        &["en", "es", "nl"],
        5,
        12,
        6,
    );
    save_dataset(&test_set, &dir.path().join("test.csv")).unwrap();
    let backend = write_translation_table(dir.path(), &[(&test_set, &test_tr)]);

    // Adapter contract: invoked as `adapter <inputs.tsv> <scores.csv>`, must
    // echo every input id back with a score. This one returns a constant.
    let adapter = dir.path().join("adapter.sh");
    fs::write(
        &adapter,
        "#!/bin/sh\necho 'id,score' > \"$2\"\ntail -n +2 \"$1\" | cut -f1 | sed 's/$/,3.25/' >> \"$2\"\n",
    )
    .unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&adapter, fs::Permissions::from_mode(0o755)).unwrap();
    }

    let backbone = format!("external:{}", adapter.display());
    let output = run_in(
        dir.path(),
        &[
            "predict", "--test", "test.csv", "--backbone", &backbone,
            "--backend", &backend, "--out", "run",
        ],
    );
    assert_ok(&output, "predict with external adapter");

    let predictions = fs::read_to_string(dir.path().join("run/predictions.csv")).unwrap();
    let rows: Vec<&str> = predictions.lines().skip(1).collect();
    assert_eq!(rows.len(), test_set.len());
    for row in rows {
        let score: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(score, 3.25);
    }
}

#[test]
fn zeroshot_writes_grid_files() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, translations) = planted_signal_corpus_for(&["en", "es", "it"], 12, 12, 7);
    save_dataset(&dataset, &dir.path().join("data.csv")).unwrap();
    let backend = write_translation_table(dir.path(), &[(&dataset, &translations)]);

    let output = run_in(
        dir.path(),
        &[
            "zeroshot", "--input", "data.csv", "--backend", &backend,
            "--epochs", "3", "--out", "grid",
        ],
    );
    assert_ok(&output, "zeroshot");

    let csv = fs::read_to_string(dir.path().join("grid/grid.csv")).unwrap();
    // Header plus 5 configurations × 2 excludable languages.
    assert_eq!(csv.lines().count(), 11, "grid.csv:\n{csv}");
    for cfg in [
        "train:original/val:original",
        "train:original/val:translated",
        "train:translated/val:translated",
        "train:translated/val:original",
        "train:joint/val:joint",
    ] {
        assert!(csv.contains(cfg), "missing {cfg} in grid.csv");
    }
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("grid/grid.json")).unwrap())
            .unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("grid/manifest.json").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, _) = planted_signal_corpus(10, 12, 8);
    save_dataset(&dataset, &dir.path().join("data.csv")).unwrap();
    fs::write(dir.path().join("run.toml"), "seed = 5\nratio = 0.5\n").unwrap();

    // File value applies when no flag is given.
    let output = run_in(
        dir.path(),
        &["split", "--config", "run.toml", "--input", "data.csv", "--out", "a"],
    );
    assert_ok(&output, "split from config");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(manifest["config"]["ratio"], 0.5);

    // Flag wins over the file.
    let output = run_in(
        dir.path(),
        &[
            "split", "--config", "run.toml", "--input", "data.csv",
            "--seed", "11", "--out", "b",
        ],
    );
    assert_ok(&output, "split with flag override");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("b/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["seed"], 11);
    assert_eq!(manifest["config"]["ratio"], 0.5);
}

#[test]
fn translate_populates_and_reuses_cache() {
    let dir = tempfile::tempdir().unwrap();
    let (dataset, translations) = planted_signal_corpus_for(&["es", "it"], 6, 12, 9);
    save_dataset(&dataset, &dir.path().join("data.csv")).unwrap();
    let backend = write_translation_table(dir.path(), &[(&dataset, &translations)]);

    let output = run_in(
        dir.path(),
        &[
            "translate", "--input", "data.csv", "--backend", &backend,
            "--cache", "cache.jsonl", "--out", "t1",
        ],
    );
    assert_ok(&output, "translate");
    let cache = fs::read_to_string(dir.path().join("cache.jsonl")).unwrap();
    assert_eq!(cache.lines().count(), dataset.len());

    // Second run with the cache but no backend: everything must come from
    // the cache file.
    let output = run_in(
        dir.path(),
        &["translate", "--input", "data.csv", "--cache", "cache.jsonl", "--out", "t2"],
    );
    assert_ok(&output, "translate from cache only");
    let a = fs::read(dir.path().join("t1/translations.csv")).unwrap();
    let b = fs::read(dir.path().join("t2/translations.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_report_contains_metrics_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let (train_set, train_tr) = planted_signal_corpus(15, 12, 10);
    let (test_set, test_tr) = planted_signal_corpus_for(
        &["en", "es", "it", "nl", "ko"],
        5,
        12,
        11,
    );
    save_dataset(&train_set, &dir.path().join("train.csv")).unwrap();
    save_dataset(&test_set, &dir.path().join("test.csv")).unwrap();
    let backend = write_translation_table(
        dir.path(),
        &[(&train_set, &train_tr), (&test_set, &test_tr)],
    );

    for (strategy, out) in [("original", "seen"), ("joint", "unseen")] {
        let output = run_in(
            dir.path(),
            &[
                "train", "--input", "train.csv", "--strategy", strategy,
                "--backend", &backend, "--epochs", "6", "--ensemble-size", "2",
                "--out", out,
            ],
        );
        assert_ok(&output, "train");
    }
    let output = run_in(
        dir.path(),
        &[
            "predict", "--test", "test.csv",
            "--seen-ensemble", "seen", "--unseen-ensemble", "unseen",
            "--backend", &backend, "--clamp", "--out", "run",
        ],
    );
    assert_ok(&output, "predict");
    let output = run_in(
        dir.path(),
        &[
            "report", "--predictions", "run/predictions.csv",
            "--gold", "test.csv", "--out", "run",
        ],
    );
    assert_ok(&output, "report");

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run/report.json")).unwrap())
            .unwrap();
    for lang in ["en", "es", "it", "nl", "ko"] {
        assert!(
            report["metrics"]["per_language"][lang].is_object(),
            "missing metrics for {lang}"
        );
    }
    assert!(report["metrics"]["overall"]["pooled"]["mse"].is_number());
    assert!(report["metrics"]["seen"].is_object());
    assert!(report["metrics"]["unseen"].is_object());

    // Clamped predictions stay in the score range.
    let predictions = fs::read_to_string(dir.path().join("run/predictions.csv")).unwrap();
    for row in predictions.lines().skip(1) {
        let score: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((1.0..=5.0).contains(&score), "unclamped score {score}");
    }

    let histogram = fs::read_to_string(dir.path().join("run/histogram.csv")).unwrap();
    assert!(histogram.lines().count() > 1);
    let scatter = fs::read_to_string(dir.path().join("run/scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), test_set.len() + 1);
}

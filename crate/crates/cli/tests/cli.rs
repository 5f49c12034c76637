//! Binary-level behavior: flag handling, CSV shapes, error paths.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concord"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn write_jsonl(dir: &Path, name: &str, lines: &[serde_json::Value]) -> PathBuf {
    let path = dir.join(name);
    let mut text = String::new();
    for line in lines {
        text.push_str(&line.to_string());
        text.push('\n');
    }
    std::fs::write(&path, text).unwrap();
    path
}

/// Two instances, four generations each, two correct per instance. Correct
/// texts share most tokens with the reference; incorrect ones are disjoint.
fn labeled_corpus(dir: &Path) -> PathBuf {
    let mut lines = Vec::new();
    for (q, (good_a, good_b, bad_a, bad_b)) in [
        (
            "alpha beta gamma delta",
            "alpha beta gamma epsilon",
            "zeta eta theta iota",
            "kappa lambda mu nu",
        ),
        (
            "one two three four",
            "one two three five",
            "six seven eight nine",
            "ten eleven twelve thirteen",
        ),
    ]
    .into_iter()
    .enumerate()
    {
        let id = format!("q{q}");
        let reference = good_a;
        for (text, label, lp) in [
            (good_a, true, -0.1),
            (good_b, true, -0.2),
            (bad_a, false, -1.0),
            (bad_b, false, -1.2),
        ] {
            lines.push(json!({
                "instance_id": id,
                "query": format!("question {q}"),
                "generation": text,
                "reference": reference,
                "label": label,
                "mean_log_prob": lp,
            }));
        }
    }
    write_jsonl(dir, "labeled.jsonl", &lines)
}

/// Same texts without labels; one generation lacks a log probability.
fn unlabeled_corpus(dir: &Path) -> PathBuf {
    let mut lines = Vec::new();
    for (q, texts) in [
        [
            "alpha beta gamma delta",
            "alpha beta gamma epsilon",
            "zeta eta theta iota",
            "kappa lambda mu nu",
        ],
        [
            "one two three four",
            "one two three five",
            "six seven eight nine",
            "ten eleven twelve thirteen",
        ],
    ]
    .into_iter()
    .enumerate()
    {
        for (j, text) in texts.into_iter().enumerate() {
            let mut line = json!({
                "instance_id": format!("q{q}"),
                "query": format!("question {q}"),
                "generation": text,
                "reference": texts[0],
            });
            if !(q == 0 && j == 3) {
                line["mean_log_prob"] = json!(-0.5);
            }
            lines.push(line);
        }
    }
    write_jsonl(dir, "unlabeled.jsonl", &lines)
}

fn rows(csv_text: &str) -> Vec<Vec<String>> {
    csv_text
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn verify_emits_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &["verify", "--input", corpus.to_str().unwrap(), "--out", "v"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));

    let table = rows(&read(&dir.path().join("v/verify.csv")));
    assert_eq!(
        table[0],
        [
            "hypothesis",
            "variant",
            "similarity",
            "aggregator",
            "n_groups",
            "relative_n_groups",
            "rho_mean",
            "rho_variance",
            "rho_std",
            "repetitions",
            "alpha"
        ]
    );
    // Grid for two instances is {1, 2}; three hypotheses, pairwise only.
    assert_eq!(table.len() - 1, 6);
    for row in &table[1..] {
        assert_eq!(row[3], "na", "pairwise rows carry no aggregator");
        let rho: f64 = row[6].parse().unwrap();
        assert!((0.0..=1.0).contains(&rho));
    }
    assert!(dir.path().join("v/manifest-verify.json").exists());
}

#[test]
fn metrics_appends_the_summary_columns() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &["metrics", "--input", corpus.to_str().unwrap(), "--out", "m"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));

    let table = rows(&read(&dir.path().join("m/metrics.csv")));
    let header = &table[0];
    assert_eq!(header[11..], ["delta_mu", "theta_star", "rho_threshold"]);
    for row in &table[1..] {
        let delta: f64 = row[11].parse().unwrap();
        assert!(delta.is_finite());
        assert_eq!(row[13], "0.8");
        if row[12] != "na" {
            let theta: f64 = row[12].parse().unwrap();
            assert!((0.0..=1.0).contains(&theta));
        }
    }
}

#[test]
fn score_handles_unlabeled_corpora_and_skips_missing_methods() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = unlabeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &["score", "--input", corpus.to_str().unwrap(), "--out", "s"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));

    let table = rows(&read(&dir.path().join("s/scores.csv")));
    assert_eq!(
        table[0],
        [
            "instance_id",
            "generation_index",
            "method",
            "score",
            "label"
        ]
    );
    // 8 generations x (arith, geom, harm, always_one); avg_prob is absent
    // because one generation has no log probability.
    assert_eq!(table.len() - 1, 32);
    for row in &table[1..] {
        assert_ne!(row[2], "avg_prob");
        assert!(
            row[4].is_empty(),
            "unlabeled rows leave the label cell empty"
        );
    }
}

#[test]
fn score_carries_labels_when_present() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &["score", "--input", corpus.to_str().unwrap(), "--out", "s"],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));

    let table = rows(&read(&dir.path().join("s/scores.csv")));
    // All five methods on a fully annotated corpus.
    assert_eq!(table.len() - 1, 40);
    let methods: std::collections::BTreeSet<&str> =
        table[1..].iter().map(|r| r[2].as_str()).collect();
    assert_eq!(
        methods,
        [
            "arith_agg",
            "geom_agg",
            "harm_agg",
            "always_one",
            "avg_prob"
        ]
        .into_iter()
        .collect()
    );
    for row in &table[1..] {
        assert!(row[4] == "true" || row[4] == "false");
    }
}

#[test]
fn eval_requires_labels_or_a_labeler() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = unlabeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &["eval", "--input", corpus.to_str().unwrap(), "--out", "e"],
    );
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("--labeler"),
        "stderr: {}",
        stderr_of(&out)
    );

    let out = run_in(
        dir.path(),
        &[
            "eval",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            "e",
            "--labeler",
            "rougel:0.7",
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table = rows(&read(&dir.path().join("e/eval.csv")));
    assert_eq!(
        table[0],
        [
            "method",
            "similarity",
            "aggregator",
            "auroc_mean",
            "auroc_std",
            "auarc_mean",
            "auarc_std",
            "runs",
            "subset_fraction",
            "unit",
            "seed"
        ]
    );
    for row in &table[1..] {
        let auarc: f64 = row[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&auarc));
        assert_eq!(row[7], "5");
    }
}

#[test]
fn cosine_without_embeddings_fails_fast() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            "v",
            "--similarity",
            "cosine",
        ],
    );
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("embedding"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn invalid_settings_exit_with_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());

    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            "v",
            "--alpha",
            "1.5",
        ],
    );
    assert!(!out.status.success());
    assert!(stderr_of(&out).starts_with("error:"));

    std::fs::write(dir.path().join("bad.conf"), "alfa = 0.01\n").unwrap();
    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            "v",
            "--config",
            "bad.conf",
        ],
    );
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("unknown config key"),
        "stderr: {}",
        stderr_of(&out)
    );

    let out = run_in(
        dir.path(),
        &["verify", "--input", "absent.jsonl", "--out", "v"],
    );
    assert!(!out.status.success());
    assert!(stderr_of(&out).starts_with("error:"));
}

#[test]
fn flags_override_config_files_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    std::fs::write(
        dir.path().join("run.conf"),
        "alpha = 0.01\nrepetitions = 3\n",
    )
    .unwrap();

    let out = run_in(
        dir.path(),
        &[
            "verify",
            "--input",
            corpus.to_str().unwrap(),
            "--out",
            "v",
            "--config",
            "run.conf",
            "--alpha",
            "0.02",
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    let table = rows(&read(&dir.path().join("v/verify.csv")));
    for row in &table[1..] {
        assert_eq!(row[10], "0.02", "flag alpha wins");
        assert_eq!(row[9], "3", "file repetitions applies");
    }
}

#[test]
fn matrix_cache_is_written_reused_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    let args = |out: &'static str| {
        vec![
            "verify",
            "--input",
            "labeled.jsonl",
            "--out",
            out,
            "--matrix-cache",
            "cache",
        ]
    };

    let first = run_in(dir.path(), &args("v1"));
    assert!(first.status.success(), "{}", stderr_of(&first));
    let cache_file = dir.path().join("cache/matrix-00000-jaccard.csv");
    assert!(cache_file.exists());

    let second = run_in(dir.path(), &args("v2"));
    assert!(second.status.success(), "{}", stderr_of(&second));
    assert_eq!(
        read(&dir.path().join("v1/verify.csv")),
        read(&dir.path().join("v2/verify.csv"))
    );

    // A cached matrix of the wrong size is a hard error, not silent reuse.
    std::fs::write(&cache_file, "jaccard\n1,0.5\n0.5,1\n").unwrap();
    let third = run_in(dir.path(), &args("v3"));
    assert!(!third.status.success());
    assert!(
        stderr_of(&third).contains("cached matrix"),
        "stderr: {}",
        stderr_of(&third)
    );
    drop(corpus);
}

#[test]
fn pair_orientation_flag_halves_within_group_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = labeled_corpus(dir.path());
    for (mode, out) in [("ordered", "o"), ("unordered", "u")] {
        let run = run_in(
            dir.path(),
            &[
                "simdist",
                "--input",
                corpus.to_str().unwrap(),
                "--out",
                out,
                "--pair-orientation",
                mode,
            ],
        );
        assert!(run.status.success(), "{}", stderr_of(&run));
    }
    let ordered = rows(&read(&dir.path().join("o/simdist.csv")));
    let unordered = rows(&read(&dir.path().join("u/simdist.csv")));
    let count = |table: &[Vec<String>], hyp: &str, side: &str| {
        table[1..]
            .iter()
            .filter(|r| r[0] == hyp && r[2] == side)
            .count()
    };
    // Within-correct pairs: 2 correct gens per instance, 2 instances.
    assert_eq!(count(&ordered, "sim-separate", "C"), 4);
    assert_eq!(count(&unordered, "sim-separate", "C"), 2);
    // Cross-label pairs under sim-correct keep one value per ordered pair.
    assert_eq!(count(&ordered, "sim-correct", "I"), 8);
    assert_eq!(count(&unordered, "sim-correct", "I"), 8);
}

#[test]
fn synth_validates_its_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["synth", "--vocab-size", "5", "--out", "x"]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).starts_with("error:"));

    let out = run_in(dir.path(), &["synth", "--m-generations", "1", "--out", "x"]);
    assert!(!out.status.success());

    let out = run_in(
        dir.path(),
        &[
            "synth",
            "--n-instances",
            "5",
            "--m-generations",
            "4",
            "--out",
            "x",
        ],
    );
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert!(dir.path().join("x/corpus.jsonl").exists());
    let manifest = read(&dir.path().join("x/manifest-synth.json"));
    assert!(manifest.contains("\"n_instances\": 5"));
}

//! Subcommand implementations and their CSV emitters.
//!
//! Every command resolves its configuration, streams the pipeline, writes
//! CSVs plus a manifest into the output directory, and stays byte-identical
//! across runs with equal inputs. Floats are written in shortest
//! round-trip form.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use concord_core::confidence::{
    score_always_one, score_avg_prob, score_by_aggregation, ConfidenceScore, ScoreMethod,
};
use concord_core::hypothesis::{
    build_aggregated_sets, build_pairwise_sets, pool_sets, Aggregator, AggregatorKind, Hypothesis,
    HypothesisSets, Variant,
};
use concord_core::stats::{rho_curve, summarize, TTestKind};
use concord_core::synth::{generate_planted, EffectKind, PlantSpec};
use concord_core::{save_corpus, subset_eval_with, Corpus};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::pipeline::{instance_matrix, load_corpus, per_instance, LabelNeed};

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_manifest(config: &RunConfig, command: &str, extra: &[(&str, Value)]) -> Result<()> {
    let path = config.out.join(format!("manifest-{command}.json"));
    let manifest = config.manifest(command, extra);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn prepare_out(config: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&config.out)
        .with_context(|| format!("cannot create output directory {}", config.out.display()))
}

fn combos(config: &RunConfig) -> Vec<(Hypothesis, Variant)> {
    let mut list = Vec::new();
    for &h in &config.hypotheses {
        for &v in &config.variants {
            list.push((h, v));
        }
    }
    list
}

/// Per-combo instance sets, computing each instance's matrix exactly once.
fn combo_sets(
    corpus: &Corpus,
    config: &RunConfig,
    combos: &[(Hypothesis, Variant)],
) -> Result<Vec<Vec<HypothesisSets>>> {
    let aggregator = Aggregator::new(config.aggregator, config.epsilon)?;
    let per = per_instance(corpus, |index, bundle| {
        let matrix = instance_matrix(config, index, bundle)?;
        combos
            .iter()
            .map(|&(hypothesis, variant)| {
                Ok(match variant {
                    Variant::Pairwise => {
                        build_pairwise_sets(bundle, &matrix, hypothesis, config.pair_orientation)?
                    }
                    Variant::Aggregated => {
                        build_aggregated_sets(bundle, &matrix, hypothesis, &aggregator)?
                    }
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut by_combo = vec![Vec::with_capacity(per.len()); combos.len()];
    for instance_row in per {
        for (c, sets) in instance_row.into_iter().enumerate() {
            by_combo[c].push(sets);
        }
    }
    Ok(by_combo)
}

fn aggregator_cell(config: &RunConfig, variant: Variant) -> String {
    match variant {
        Variant::Aggregated => config.aggregator.name().to_string(),
        Variant::Pairwise => "na".to_string(),
    }
}

pub fn cmd_verify(config: &RunConfig) -> Result<()> {
    prepare_out(config)?;
    let corpus = load_corpus(config, LabelNeed::Required)?;
    let n = corpus.n_instances();
    let grid = config.groups.resolve(n)?;
    let combos = combos(config);
    let sets = combo_sets(&corpus, config, &combos)?;

    let mut rows = Vec::new();
    for ((hypothesis, variant), instance_sets) in combos.iter().zip(&sets) {
        let curve = rho_curve(
            instance_sets,
            &grid,
            config.repetitions,
            config.seed,
            config.alpha,
        )?;
        for point in curve {
            rows.push(vec![
                hypothesis.name().to_string(),
                variant.name().to_string(),
                config.similarity.name().to_string(),
                aggregator_cell(config, *variant),
                point.n_groups.to_string(),
                (point.n_groups as f64 / n as f64).to_string(),
                point.rho_mean.to_string(),
                point.rho_variance.to_string(),
                point.rho_variance.sqrt().to_string(),
                point.repetitions.to_string(),
                config.alpha.to_string(),
            ]);
        }
    }
    write_csv(
        &config.out.join("verify.csv"),
        &[
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
            "alpha",
        ],
        &rows,
    )?;
    write_manifest(
        config,
        "verify",
        &[("n_instances", json!(n)), ("grid", json!(grid))],
    )
}

pub fn cmd_metrics(config: &RunConfig) -> Result<()> {
    prepare_out(config)?;
    let corpus = load_corpus(config, LabelNeed::Required)?;
    let n = corpus.n_instances();
    let grid = config.groups.resolve(n)?;
    let combos = combos(config);
    let sets = combo_sets(&corpus, config, &combos)?;

    let mut rows = Vec::new();
    for ((hypothesis, variant), instance_sets) in combos.iter().zip(&sets) {
        let summary = summarize(
            instance_sets,
            &grid,
            config.repetitions,
            config.seed,
            config.alpha,
            config.rho_threshold,
            TTestKind::Welch,
        )?;
        let theta = summary
            .theta_star
            .map_or_else(|| "na".to_string(), |t| t.to_string());
        for point in &summary.rho_curve {
            rows.push(vec![
                hypothesis.name().to_string(),
                variant.name().to_string(),
                config.similarity.name().to_string(),
                aggregator_cell(config, *variant),
                point.n_groups.to_string(),
                (point.n_groups as f64 / n as f64).to_string(),
                point.rho_mean.to_string(),
                point.rho_variance.to_string(),
                point.rho_variance.sqrt().to_string(),
                point.repetitions.to_string(),
                config.alpha.to_string(),
                summary.mean_difference.to_string(),
                theta.clone(),
                config.rho_threshold.to_string(),
            ]);
        }
    }
    write_csv(
        &config.out.join("metrics.csv"),
        &[
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
            "alpha",
            "delta_mu",
            "theta_star",
            "rho_threshold",
        ],
        &rows,
    )?;
    write_manifest(
        config,
        "metrics",
        &[("n_instances", json!(n)), ("grid", json!(grid))],
    )
}

/// Every scoring method the corpus supports, each with its flat score list
/// in corpus order. The likelihood baseline joins only when every
/// generation carries a mean log-probability.
fn method_scores(
    corpus: &Corpus,
    config: &RunConfig,
) -> Result<Vec<(ScoreMethod, Vec<ConfidenceScore>)>> {
    let has_log_probs = corpus
        .instances
        .iter()
        .all(|b| b.generations.iter().all(|g| g.mean_log_prob.is_some()));
    let kinds = [
        AggregatorKind::Arithmetic,
        AggregatorKind::Geometric,
        AggregatorKind::Harmonic,
    ];

    let per = per_instance(corpus, |index, bundle| {
        let matrix = instance_matrix(config, index, bundle)?;
        let mut blocks = Vec::with_capacity(5);
        for kind in kinds {
            let aggregator = Aggregator::new(kind, config.epsilon)?;
            blocks.push(score_by_aggregation(
                bundle,
                &matrix,
                &aggregator,
                config.include_self,
            )?);
        }
        blocks.push(score_always_one(bundle));
        if has_log_probs {
            blocks.push(score_avg_prob(bundle)?);
        }
        Ok(blocks)
    })?;

    let mut methods = vec![
        ScoreMethod::ArithAgg,
        ScoreMethod::GeomAgg,
        ScoreMethod::HarmAgg,
        ScoreMethod::AlwaysOne,
    ];
    if has_log_probs {
        methods.push(ScoreMethod::AvgProb);
    }
    let mut out: Vec<(ScoreMethod, Vec<ConfidenceScore>)> =
        methods.into_iter().map(|m| (m, Vec::new())).collect();
    for instance_row in per {
        for (block_index, block) in instance_row.into_iter().enumerate() {
            out[block_index].1.extend(block);
        }
    }
    Ok(out)
}

/// One optional label per generation, flattened in corpus order.
fn flat_labels(corpus: &Corpus) -> Vec<Option<bool>> {
    let mut labels = Vec::new();
    for bundle in &corpus.instances {
        for (j, generation) in bundle.generations.iter().enumerate() {
            labels.push(bundle.labels.as_ref().map(|l| l[j]).or(generation.label));
        }
    }
    labels
}

pub fn cmd_score(config: &RunConfig) -> Result<()> {
    prepare_out(config)?;
    let corpus = load_corpus(config, LabelNeed::Optional)?;
    let scored = method_scores(&corpus, config)?;
    let labels = flat_labels(&corpus);

    let mut rows = Vec::new();
    for (method, scores) in &scored {
        for (item, label) in scores.iter().zip(&labels) {
            rows.push(vec![
                item.instance_id.clone(),
                item.generation_index.to_string(),
                method.name().to_string(),
                item.score.to_string(),
                label.map_or_else(String::new, |l| l.to_string()),
            ]);
        }
    }
    write_csv(
        &config.out.join("scores.csv"),
        &[
            "instance_id",
            "generation_index",
            "method",
            "score",
            "label",
        ],
        &rows,
    )?;
    let methods: Vec<&str> = scored.iter().map(|(m, _)| m.name()).collect();
    write_manifest(
        config,
        "score",
        &[
            ("n_instances", json!(corpus.n_instances())),
            ("methods", json!(methods)),
        ],
    )
}

pub fn cmd_eval(config: &RunConfig) -> Result<()> {
    prepare_out(config)?;
    let corpus = load_corpus(config, LabelNeed::Required)?;
    let scored = method_scores(&corpus, config)?;
    let labels: Vec<bool> = flat_labels(&corpus)
        .into_iter()
        .map(|l| l.expect("labeling already enforced"))
        .collect();

    let mut rows = Vec::new();
    for (method, items) in &scored {
        let report = subset_eval_with(
            items,
            &labels,
            config.eval_unit,
            config.subset_fraction,
            config.eval_runs,
            config.seed,
        )?;
        let (similarity, aggregator) = match method {
            ScoreMethod::ArithAgg => (config.similarity.name(), "arith"),
            ScoreMethod::GeomAgg => (config.similarity.name(), "geom"),
            ScoreMethod::HarmAgg => (config.similarity.name(), "harm"),
            ScoreMethod::AlwaysOne | ScoreMethod::AvgProb => ("na", "na"),
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| x.to_string());
        rows.push(vec![
            method.name().to_string(),
            similarity.to_string(),
            aggregator.to_string(),
            opt(report.auroc_mean),
            opt(report.auroc_std),
            report.auarc_mean.to_string(),
            report.auarc_std.to_string(),
            report.runs.to_string(),
            report.subset_fraction.to_string(),
            report.unit.name().to_string(),
            report.seed.to_string(),
        ]);
    }
    write_csv(
        &config.out.join("eval.csv"),
        &[
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
            "seed",
        ],
        &rows,
    )?;
    let methods: Vec<&str> = scored.iter().map(|(m, _)| m.name()).collect();
    write_manifest(
        config,
        "eval",
        &[
            ("n_instances", json!(corpus.n_instances())),
            ("methods", json!(methods)),
        ],
    )
}

pub fn cmd_simdist(config: &RunConfig) -> Result<()> {
    prepare_out(config)?;
    let corpus = load_corpus(config, LabelNeed::Required)?;
    let combos = combos(config);
    let sets = combo_sets(&corpus, config, &combos)?;

    let mut rows = Vec::new();
    for ((hypothesis, variant), instance_sets) in combos.iter().zip(&sets) {
        let members: Vec<usize> = (0..instance_sets.len()).collect();
        let pooled = pool_sets(instance_sets, &members)?;
        for value in &pooled.correct {
            rows.push(vec![
                hypothesis.name().to_string(),
                variant.name().to_string(),
                "C".to_string(),
                value.to_string(),
            ]);
        }
        for value in &pooled.incorrect {
            rows.push(vec![
                hypothesis.name().to_string(),
                variant.name().to_string(),
                "I".to_string(),
                value.to_string(),
            ]);
        }
    }
    write_csv(
        &config.out.join("simdist.csv"),
        &["hypothesis", "variant", "side", "value"],
        &rows,
    )?;
    write_manifest(
        config,
        "simdist",
        &[("n_instances", json!(corpus.n_instances()))],
    )
}

/// Flags for corpus synthesis.
#[derive(Args, Clone, Debug)]
pub struct SynthArgs {
    /// Number of instances
    #[arg(long, default_value_t = 200)]
    pub n_instances: usize,
    /// Generations per instance
    #[arg(long, default_value_t = 10)]
    pub m_generations: usize,
    /// Probability that a generation is correct
    #[arg(long, default_value_t = 0.6)]
    pub correct_rate: f64,
    /// Planted effect: strong, weak, or null
    #[arg(long, default_value = "strong")]
    pub effect: String,
    /// Vocabulary size for token sampling
    #[arg(long, default_value_t = 5000)]
    pub vocab_size: usize,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let effect: EffectKind = args.effect.parse()?;
    let spec = PlantSpec {
        n_instances: args.n_instances,
        m_generations: args.m_generations,
        correct_rate: args.correct_rate,
        effect,
        vocab_size: args.vocab_size,
        seed: args.seed,
    };
    let corpus = generate_planted(&spec)?;
    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    let path = args.out.join("corpus.jsonl");
    save_corpus(&corpus, &path)
        .with_context(|| format!("cannot write corpus {}", path.display()))?;

    let manifest: std::collections::BTreeMap<&str, Value> = [
        ("command", json!("synth")),
        ("n_instances", json!(spec.n_instances)),
        ("m_generations", json!(spec.m_generations)),
        ("correct_rate", json!(spec.correct_rate)),
        ("effect", json!(effect.name())),
        ("vocab_size", json!(spec.vocab_size)),
        ("seed", json!(spec.seed)),
        ("output", json!(path.display().to_string())),
    ]
    .into_iter()
    .collect();
    let mut text = serde_json::to_string_pretty(&json!(manifest))?;
    text.push('\n');
    let manifest_path = args.out.join("manifest-synth.json");
    std::fs::write(&manifest_path, text)
        .with_context(|| format!("cannot write {}", manifest_path.display()))?;
    Ok(())
}

//! Shared pipeline stages: corpus loading with fail-fast validation,
//! labeling, and parallel per-instance similarity work.
//!
//! Matrices are built per instance and dropped after use, so memory stays
//! proportional to the corpus plus one m-by-m matrix per worker. With a
//! cache directory configured, each instance's matrix is persisted as CSV
//! and reused on later runs.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use anyhow::{bail, Context, Result};
use concord_core::corpus::InstanceBundle;
use concord_core::similarity::{
    pairwise_matrix, read_matrix_csv, write_matrix_csv, Metric, SimilarityMatrix,
};
use concord_core::{label_by_rouge_l, label_external, Corpus};
use rayon::prelude::*;

use crate::config::{Labeler, RunConfig};

/// Whether a subcommand insists on a fully labeled corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelNeed {
    Required,
    /// Keep whatever labels the records carry; an external labeler with
    /// gaps is fine.
    Optional,
}

/// Loads the corpus, applies the configured labeler, and runs the cheap
/// validations that must fail before any similarity computation starts.
pub fn load_corpus(config: &RunConfig, need: LabelNeed) -> Result<Corpus> {
    let mut corpus = concord_core::load_corpus(&config.input)
        .with_context(|| format!("cannot load corpus {}", config.input.display()))?;
    corpus.task_tag = config.task_tag.clone();

    if config.similarity == Metric::EmbeddingCosine && corpus.embedding_dim().is_none() {
        bail!(
            "similarity {} needs embeddings on every generation, but {} carries none",
            config.similarity.name(),
            config.input.display()
        );
    }

    match (config.labeler, need) {
        (Labeler::RougeL(threshold), _) => {
            label_by_rouge_l(&mut corpus, threshold).context("rouge-l labeling failed")?
        }
        (Labeler::External, LabelNeed::Required) => label_external(&mut corpus).context(
            "corpus is not fully labeled; supply labels in the input or pass --labeler rougel:<threshold>",
        )?,
        (Labeler::External, LabelNeed::Optional) => {
            // scoring is label-free; partial labels only annotate output
        }
    }
    Ok(corpus)
}

/// Applies `work` to every instance in parallel, preserving corpus order.
pub fn per_instance<T, F>(corpus: &Corpus, work: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &InstanceBundle) -> Result<T> + Sync,
{
    corpus
        .instances
        .par_iter()
        .enumerate()
        .map(|(index, bundle)| work(index, bundle))
        .collect()
}

fn cache_path(dir: &Path, index: usize, metric: Metric) -> std::path::PathBuf {
    dir.join(format!("matrix-{index:05}-{}.csv", metric.name()))
}

/// Computes the instance's similarity matrix, or round-trips it through
/// the cache directory when one is configured.
pub fn instance_matrix(
    config: &RunConfig,
    index: usize,
    bundle: &InstanceBundle,
) -> Result<SimilarityMatrix> {
    let Some(dir) = &config.matrix_cache else {
        return Ok(pairwise_matrix(bundle, config.similarity)?);
    };
    let path = cache_path(dir, index, config.similarity);
    if path.exists() {
        let file = File::open(&path)
            .with_context(|| format!("cannot open cached matrix {}", path.display()))?;
        let matrix = read_matrix_csv(BufReader::new(file))
            .with_context(|| format!("invalid cached matrix {}", path.display()))?;
        if matrix.size() != bundle.len() {
            bail!(
                "cached matrix {} is {}x{} but instance {} has {} generations",
                path.display(),
                matrix.size(),
                matrix.size(),
                bundle.instance_id,
                bundle.len()
            );
        }
        return Ok(matrix);
    }
    let matrix = pairwise_matrix(bundle, config.similarity)?;
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create cache directory {}", dir.display()))?;
    let file = File::create(&path)
        .with_context(|| format!("cannot write cached matrix {}", path.display()))?;
    write_matrix_csv(&matrix, BufWriter::new(file))?;
    Ok(matrix)
}

/// Configures the global worker pool; 0 keeps one thread per core.
pub fn configure_threads(threads: usize) -> Result<()> {
    if threads == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("worker pool is already configured")
}

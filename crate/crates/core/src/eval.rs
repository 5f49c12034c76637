//! Score quality metrics: ranking power (AUROC) and selective-prediction
//! value (AUARC), plus the repeated random-subset protocol that puts error
//! bars on both.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::confidence::ConfidenceScore;
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, STREAM_SUBSET};

/// What one sampled subset element is: a single scored generation, or an
/// instance with all of its generations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalUnit {
    #[default]
    Generation,
    Instance,
}

impl EvalUnit {
    pub fn name(self) -> &'static str {
        match self {
            EvalUnit::Generation => "generation",
            EvalUnit::Instance => "instance",
        }
    }
}

impl std::str::FromStr for EvalUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generation" => Ok(EvalUnit::Generation),
            "instance" => Ok(EvalUnit::Instance),
            other => Err(Error::UnknownName {
                what: "eval unit",
                value: other.to_string(),
            }),
        }
    }
}

/// Subset-evaluation summary for one scoring method.
///
/// The AUROC fields are None when no sampled subset contained both classes;
/// `auroc_runs` counts the subsets that did. AUARC is defined on every
/// non-empty subset, so its fields always carry values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub auroc_mean: Option<f64>,
    pub auroc_std: Option<f64>,
    pub auarc_mean: f64,
    pub auarc_std: f64,
    pub auroc_runs: usize,
    pub runs: usize,
    pub subset_fraction: f64,
    pub unit: EvalUnit,
    pub seed: u64,
}

fn check_items(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "scores must be finite, got {bad}"
        )));
    }
    Ok(())
}

/// Probability that a uniformly chosen correct item outscores a uniformly
/// chosen incorrect item, ties counted one half. Computed through midranks,
/// which agrees exactly with brute-force pair counting.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_items(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassLabels);
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Every rank is a multiple of one half, so the sums below are exact.
    let mut positive_rank_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &item in &idx[i..j] {
            if labels[item] {
                positive_rank_sum += midrank;
            }
        }
        i = j;
    }

    let wins = positive_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(wins / (n_pos * n_neg) as f64)
}

/// Area under the accuracy-rejection curve.
///
/// Items are retained in descending score order with ties kept in input
/// order; accuracy at rejection count r is the fraction of true labels
/// among the n-r retained items, with accuracy at full rejection defined
/// as 1; the area is the trapezoidal integral over rejection fraction.
pub fn auarc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_items(scores, labels)?;
    let n = scores.len();

    let mut idx: Vec<usize> = (0..n).collect();
    // stable sort: equal scores keep their input order
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut retained_true = vec![0usize; n + 1];
    for (pos, &item) in idx.iter().enumerate() {
        retained_true[pos + 1] = retained_true[pos] + labels[item] as usize;
    }
    let accuracy = |rejected: usize| {
        if rejected == n {
            1.0
        } else {
            retained_true[n - rejected] as f64 / (n - rejected) as f64
        }
    };

    let mut area = 0.0;
    for r in 0..n {
        area += (accuracy(r) + accuracy(r + 1)) / 2.0;
    }
    Ok(area / n as f64)
}

/// [`subset_eval_with`] over per-generation units.
pub fn subset_eval(
    items: &[ConfidenceScore],
    labels: &[bool],
    subset_fraction: f64,
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    subset_eval_with(
        items,
        labels,
        EvalUnit::Generation,
        subset_fraction,
        runs,
        seed,
    )
}

/// Draws `runs` random subsets of floor(fraction * N) units without
/// replacement, evaluates AUROC and AUARC on each, and reports means with
/// population standard deviations. A single-class subset is skipped for
/// AUROC but still counts for AUARC. Deterministic for a given seed.
pub fn subset_eval_with(
    items: &[ConfidenceScore],
    labels: &[bool],
    unit: EvalUnit,
    subset_fraction: f64,
    runs: usize,
    seed: u64,
) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput);
    }
    if items.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: items.len(),
            labels: labels.len(),
        });
    }
    if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "subset fraction {subset_fraction} is outside (0, 1]"
        )));
    }
    if runs < 1 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let method = items[0].method;
    if items.iter().any(|i| i.method != method) {
        return Err(Error::MixedSets { what: "method" });
    }

    let scores: Vec<f64> = items.iter().map(|i| i.score).collect();

    // Sampling units as item-index groups, in corpus order.
    let units: Vec<Vec<usize>> = match unit {
        EvalUnit::Generation => (0..items.len()).map(|i| vec![i]).collect(),
        EvalUnit::Instance => {
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut seen: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
            for (i, item) in items.iter().enumerate() {
                match seen.get(item.instance_id.as_str()) {
                    Some(&g) => groups[g].push(i),
                    None => {
                        seen.insert(item.instance_id.as_str(), groups.len());
                        groups.push(vec![i]);
                    }
                }
            }
            groups
        }
    };
    let take = (subset_fraction * units.len() as f64).floor() as usize;
    if take == 0 {
        return Err(Error::InvalidParameter(format!(
            "subset fraction {subset_fraction} of {} units selects nothing",
            units.len()
        )));
    }

    let mut aurocs = Vec::with_capacity(runs);
    let mut auarcs = Vec::with_capacity(runs);
    for run in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SUBSET, run as u64));
        let mut chosen = sample(&mut rng, units.len(), take).into_vec();
        chosen.sort_unstable(); // corpus order, so AUARC tie order is stable
        let mut sub_scores = Vec::new();
        let mut sub_labels = Vec::new();
        for g in chosen {
            for &i in &units[g] {
                sub_scores.push(scores[i]);
                sub_labels.push(labels[i]);
            }
        }
        match auroc(&sub_scores, &sub_labels) {
            Ok(a) => aurocs.push(a),
            Err(Error::SingleClassLabels) => {}
            Err(e) => return Err(e),
        }
        auarcs.push(auarc(&sub_scores, &sub_labels)?);
    }

    let summarize = |xs: &[f64]| {
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        (mean, var.sqrt())
    };
    let (auroc_mean, auroc_std) = if aurocs.is_empty() {
        (None, None)
    } else {
        let (m, s) = summarize(&aurocs);
        (Some(m), Some(s))
    };
    let (auarc_mean, auarc_std) = summarize(&auarcs);

    Ok(EvalReport {
        method: method.name().to_string(),
        auroc_mean,
        auroc_std,
        auarc_mean,
        auarc_std,
        auroc_runs: aurocs.len(),
        runs,
        subset_fraction,
        unit,
        seed,
    })
}

//! Per-generation confidence scores.
//!
//! The aggregation scorer rates each generation by how similar it is to its
//! siblings; a generation that agrees with the rest of the sample earns a
//! high score. Two baselines are provided for comparison: a constant score
//! and the exponentiated mean token log-probability.

use crate::corpus::InstanceBundle;
use crate::error::{Error, Result};
use crate::hypothesis::{Aggregator, AggregatorKind};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMethod {
    ArithAgg,
    GeomAgg,
    HarmAgg,
    AlwaysOne,
    AvgProb,
}

impl ScoreMethod {
    pub const ALL: [ScoreMethod; 5] = [
        ScoreMethod::ArithAgg,
        ScoreMethod::GeomAgg,
        ScoreMethod::HarmAgg,
        ScoreMethod::AlwaysOne,
        ScoreMethod::AvgProb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreMethod::ArithAgg => "arith_agg",
            ScoreMethod::GeomAgg => "geom_agg",
            ScoreMethod::HarmAgg => "harm_agg",
            ScoreMethod::AlwaysOne => "always_one",
            ScoreMethod::AvgProb => "avg_prob",
        }
    }
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ScoreMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arith_agg" => Ok(ScoreMethod::ArithAgg),
            "geom_agg" => Ok(ScoreMethod::GeomAgg),
            "harm_agg" => Ok(ScoreMethod::HarmAgg),
            "always_one" => Ok(ScoreMethod::AlwaysOne),
            "avg_prob" => Ok(ScoreMethod::AvgProb),
            other => Err(Error::UnknownName {
                what: "score method",
                value: other.to_string(),
            }),
        }
    }
}

/// Confidence attached to one generation of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceScore {
    pub instance_id: String,
    pub generation_index: usize,
    pub method: ScoreMethod,
    pub score: f64,
}

/// Scores every generation by aggregating its similarity to the other
/// generations of the same instance. With `include_self` the unit
/// self-similarity joins the pool, which inflates every score toward 1.
/// A single-generation bundle has an empty pool and is an error.
pub fn score_by_aggregation(
    bundle: &InstanceBundle,
    matrix: &SimilarityMatrix,
    aggregator: &Aggregator,
    include_self: bool,
) -> Result<Vec<ConfidenceScore>> {
    let m = bundle.len();
    if matrix.size() != m {
        return Err(Error::LengthMismatch {
            scores: matrix.size(),
            labels: m,
        });
    }
    let method = match aggregator.kind() {
        AggregatorKind::Arithmetic => ScoreMethod::ArithAgg,
        AggregatorKind::Geometric => ScoreMethod::GeomAgg,
        AggregatorKind::Harmonic => ScoreMethod::HarmAgg,
    };
    let mut out = Vec::with_capacity(m);
    let mut pool = Vec::with_capacity(m);
    for j in 0..m {
        pool.clear();
        for k in 0..m {
            if k != j || include_self {
                pool.push(matrix.get(j, k));
            }
        }
        out.push(ConfidenceScore {
            instance_id: bundle.instance_id.clone(),
            generation_index: j,
            method,
            score: aggregator.apply(&pool)?,
        });
    }
    Ok(out)
}

/// Constant-confidence baseline: every generation scores 1.
pub fn score_always_one(bundle: &InstanceBundle) -> Vec<ConfidenceScore> {
    (0..bundle.len())
        .map(|j| ConfidenceScore {
            instance_id: bundle.instance_id.clone(),
            generation_index: j,
            method: ScoreMethod::AlwaysOne,
            score: 1.0,
        })
        .collect()
}

/// Sequence-likelihood baseline: exp of the mean token log-probability,
/// clamped to [0, 1]. Requires every generation to carry one.
pub fn score_avg_prob(bundle: &InstanceBundle) -> Result<Vec<ConfidenceScore>> {
    let mut out = Vec::with_capacity(bundle.len());
    for (j, g) in bundle.generations.iter().enumerate() {
        let lp = g.mean_log_prob.ok_or(Error::MissingMeanLogProb {
            instance_id: bundle.instance_id.clone(),
            index: j,
        })?;
        out.push(ConfidenceScore {
            instance_id: bundle.instance_id.clone(),
            generation_index: j,
            method: ScoreMethod::AvgProb,
            score: lp.exp().clamp(0.0, 1.0),
        });
    }
    Ok(out)
}

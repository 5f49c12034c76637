//! Construction of the correct/incorrect similarity sample sets.
//!
//! Three set-membership rules are supported, each in a pairwise and an
//! aggregated flavor. Pairwise sets collect raw matrix entries; aggregated
//! sets collect one value per qualifying generation, produced by an
//! aggregator over that generation's comparison pool. Sets are multisets:
//! pooling concatenates, nothing is deduplicated.

use std::fmt;
use std::str::FromStr;

use crate::corpus::InstanceBundle;
use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Which population comparison is being tested.
///
/// * `SimAny`: correct generations are similar to everything else.
/// * `SimCorrect`: correct generations are similar to other correct ones,
///   and incorrect generations are dissimilar from correct ones.
/// * `SimSeparate`: correct and incorrect generations form their own
///   similarity clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    SimAny,
    SimCorrect,
    SimSeparate,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 3] = [
        Hypothesis::SimAny,
        Hypothesis::SimCorrect,
        Hypothesis::SimSeparate,
    ];

    /// Conventional 1-based index used in output tables.
    pub fn index(self) -> u8 {
        match self {
            Hypothesis::SimAny => 1,
            Hypothesis::SimCorrect => 2,
            Hypothesis::SimSeparate => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::SimAny => "sim-any",
            Hypothesis::SimCorrect => "sim-correct",
            Hypothesis::SimSeparate => "sim-separate",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "sim-any" => Ok(Hypothesis::SimAny),
            "2" | "sim-correct" => Ok(Hypothesis::SimCorrect),
            "3" | "sim-separate" => Ok(Hypothesis::SimSeparate),
            other => Err(Error::UnknownName {
                what: "hypothesis",
                value: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Pairwise,
    Aggregated,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Pairwise => "pairwise",
            Variant::Aggregated => "aggregated",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Variant::Pairwise),
            "aggregated" => Ok(Variant::Aggregated),
            other => Err(Error::UnknownName {
                what: "variant",
                value: other.to_string(),
            }),
        }
    }
}

/// Scope a sample set was pooled over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Instance,
    Group,
    Dataset,
}

/// Whether ordered pairs (j,k) and (k,j) both contribute, or each unordered
/// pair contributes once per side it qualifies for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairOrientation {
    #[default]
    Ordered,
    Unordered,
}

impl PairOrientation {
    pub fn name(self) -> &'static str {
        match self {
            PairOrientation::Ordered => "ordered",
            PairOrientation::Unordered => "unordered",
        }
    }
}

impl FromStr for PairOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ordered" => Ok(PairOrientation::Ordered),
            "unordered" => Ok(PairOrientation::Unordered),
            other => Err(Error::UnknownName {
                what: "pair orientation",
                value: other.to_string(),
            }),
        }
    }
}

/// The two sample multisets a hypothesis compares.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSets {
    pub hypothesis: Hypothesis,
    pub variant: Variant,
    pub scope: Scope,
    pub correct: Vec<f64>,
    pub incorrect: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregatorKind {
    Arithmetic,
    Geometric,
    Harmonic,
}

impl AggregatorKind {
    pub fn name(self) -> &'static str {
        match self {
            AggregatorKind::Arithmetic => "arith",
            AggregatorKind::Geometric => "geom",
            AggregatorKind::Harmonic => "harm",
        }
    }
}

impl fmt::Display for AggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "arith" | "arithmetic" => Ok(AggregatorKind::Arithmetic),
            "geom" | "geometric" => Ok(AggregatorKind::Geometric),
            "harm" | "harmonic" => Ok(AggregatorKind::Harmonic),
            other => Err(Error::UnknownName {
                what: "aggregator",
                value: other.to_string(),
            }),
        }
    }
}

/// Mean family over a value pool. Geometric and harmonic means floor each
/// value at `epsilon` so that pools containing zeros aggregate to
/// approximately zero instead of being undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregator {
    kind: AggregatorKind,
    epsilon: f64,
}

impl Aggregator {
    pub const DEFAULT_EPSILON: f64 = 1e-12;

    /// `epsilon` must be positive and at most 1e-6 so the floor cannot
    /// distort genuine similarity values.
    pub fn new(kind: AggregatorKind, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "aggregator epsilon {epsilon} is outside (0, 1e-6]"
            )));
        }
        Ok(Aggregator { kind, epsilon })
    }

    pub fn with_default_epsilon(kind: AggregatorKind) -> Self {
        Aggregator {
            kind,
            epsilon: Self::DEFAULT_EPSILON,
        }
    }

    pub fn arithmetic() -> Self {
        Self::with_default_epsilon(AggregatorKind::Arithmetic)
    }

    pub fn geometric() -> Self {
        Self::with_default_epsilon(AggregatorKind::Geometric)
    }

    pub fn harmonic() -> Self {
        Self::with_default_epsilon(AggregatorKind::Harmonic)
    }

    pub fn kind(&self) -> AggregatorKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Aggregates a non-empty pool of values from [0, 1] into one value,
    /// clamped back to [0, 1].
    pub fn apply(&self, values: &[f64]) -> Result<f64> {
        if values.is_empty() {
            return Err(Error::EmptyAggregation);
        }
        let n = values.len() as f64;
        let out = match self.kind {
            AggregatorKind::Arithmetic => values.iter().sum::<f64>() / n,
            AggregatorKind::Geometric => {
                let log_sum: f64 = values.iter().map(|v| v.max(self.epsilon).ln()).sum();
                (log_sum / n).exp()
            }
            AggregatorKind::Harmonic => {
                let inv_sum: f64 = values.iter().map(|v| 1.0 / v.max(self.epsilon)).sum();
                n / inv_sum
            }
        };
        Ok(out.clamp(0.0, 1.0))
    }
}

fn checked_labels<'a>(bundle: &'a InstanceBundle, matrix: &SimilarityMatrix) -> Result<&'a [bool]> {
    let labels = bundle.labels()?;
    if labels.len() != matrix.size() || bundle.len() != matrix.size() {
        return Err(Error::LengthMismatch {
            scores: matrix.size(),
            labels: labels.len(),
        });
    }
    Ok(labels)
}

/// Builds the pairwise sample sets for one instance.
pub fn build_pairwise_sets(
    bundle: &InstanceBundle,
    matrix: &SimilarityMatrix,
    hypothesis: Hypothesis,
    orientation: PairOrientation,
) -> Result<HypothesisSets> {
    let labels = checked_labels(bundle, matrix)?;
    let m = labels.len();
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();

    match orientation {
        PairOrientation::Ordered => {
            for j in 0..m {
                for k in 0..m {
                    if k == j {
                        continue;
                    }
                    let s = matrix.get(j, k);
                    match hypothesis {
                        Hypothesis::SimAny => {
                            if labels[j] {
                                correct.push(s);
                            } else {
                                incorrect.push(s);
                            }
                        }
                        Hypothesis::SimCorrect => {
                            if labels[j] && labels[k] {
                                correct.push(s);
                            } else if !labels[j] && labels[k] {
                                incorrect.push(s);
                            }
                        }
                        Hypothesis::SimSeparate => {
                            if labels[j] && labels[k] {
                                correct.push(s);
                            } else if !labels[j] && !labels[k] {
                                incorrect.push(s);
                            }
                        }
                    }
                }
            }
        }
        // Each unordered pair contributes once to every side it qualifies
        // for, which halves within-group multiplicities but keeps the same
        // side means as the ordered convention.
        PairOrientation::Unordered => {
            for j in 0..m {
                for k in (j + 1)..m {
                    let s = matrix.get(j, k);
                    match hypothesis {
                        Hypothesis::SimAny => {
                            if labels[j] || labels[k] {
                                correct.push(s);
                            }
                            if !labels[j] || !labels[k] {
                                incorrect.push(s);
                            }
                        }
                        Hypothesis::SimCorrect => {
                            if labels[j] && labels[k] {
                                correct.push(s);
                            } else if labels[j] != labels[k] {
                                incorrect.push(s);
                            }
                        }
                        Hypothesis::SimSeparate => {
                            if labels[j] && labels[k] {
                                correct.push(s);
                            } else if !labels[j] && !labels[k] {
                                incorrect.push(s);
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(HypothesisSets {
        hypothesis,
        variant: Variant::Pairwise,
        scope: Scope::Instance,
        correct,
        incorrect,
    })
}

/// Builds the aggregated sample sets for one instance: one value per
/// generation with a non-empty comparison pool, aggregated by `agg`.
///
/// Comparison pools, all excluding the generation itself:
/// * `SimAny`: every other generation.
/// * `SimCorrect`: other correct generations for a correct one; all correct
///   generations for an incorrect one.
/// * `SimSeparate`: other generations sharing the generation's own label.
pub fn build_aggregated_sets(
    bundle: &InstanceBundle,
    matrix: &SimilarityMatrix,
    hypothesis: Hypothesis,
    agg: &Aggregator,
) -> Result<HypothesisSets> {
    let labels = checked_labels(bundle, matrix)?;
    let m = labels.len();
    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    let mut pool = Vec::with_capacity(m.saturating_sub(1));

    for j in 0..m {
        pool.clear();
        for k in 0..m {
            if k == j {
                continue;
            }
            let include = match hypothesis {
                Hypothesis::SimAny => true,
                Hypothesis::SimCorrect => labels[k],
                Hypothesis::SimSeparate => labels[k] == labels[j],
            };
            if include {
                pool.push(matrix.get(j, k));
            }
        }
        if pool.is_empty() {
            continue;
        }
        let value = agg.apply(&pool)?;
        if labels[j] {
            correct.push(value);
        } else {
            incorrect.push(value);
        }
    }

    Ok(HypothesisSets {
        hypothesis,
        variant: Variant::Aggregated,
        scope: Scope::Instance,
        correct,
        incorrect,
    })
}

/// Pools the sets of the instances selected by `member_ids` into one
/// group-level (or dataset-level, when every instance is selected) multiset
/// union. All inputs must agree on hypothesis and variant.
pub fn pool_sets(instance_sets: &[HypothesisSets], member_ids: &[usize]) -> Result<HypothesisSets> {
    if instance_sets.is_empty() || member_ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hypothesis = instance_sets[0].hypothesis;
    let variant = instance_sets[0].variant;
    for s in instance_sets {
        if s.hypothesis != hypothesis {
            return Err(Error::MixedSets { what: "hypothesis" });
        }
        if s.variant != variant {
            return Err(Error::MixedSets { what: "variant" });
        }
    }
    let mut seen = vec![false; instance_sets.len()];
    for &id in member_ids {
        if id >= instance_sets.len() {
            return Err(Error::InvalidParameter(format!(
                "member id {id} is outside the instance list of length {}",
                instance_sets.len()
            )));
        }
        if seen[id] {
            return Err(Error::InvalidParameter(format!(
                "member id {id} appears twice in one group"
            )));
        }
        seen[id] = true;
    }

    let mut correct = Vec::new();
    let mut incorrect = Vec::new();
    for &id in member_ids {
        correct.extend_from_slice(&instance_sets[id].correct);
        incorrect.extend_from_slice(&instance_sets[id].incorrect);
    }
    let scope = if member_ids.len() == instance_sets.len() {
        Scope::Dataset
    } else {
        Scope::Group
    };

    Ok(HypothesisSets {
        hypothesis,
        variant,
        scope,
        correct,
        incorrect,
    })
}

//! Consistency-based verification and confidence estimation for sampled
//! LLM generations.
//!
//! Given several sampled answers per query and correctness labels, this
//! crate tests whether correct answers are more similar to their peers
//! than incorrect ones (three hypothesis variants, pairwise or aggregated),
//! measures how the evidence scales with group size, and reuses the same
//! similarity aggregation as a label-free confidence score evaluated with
//! AUROC and AUARC.
//!
//! Everything randomized is seed-deterministic: corpus synthesis, group
//! splits, and subset evaluation all derive per-use seeds from one root.

pub mod confidence;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hypothesis;
mod seeding;
pub mod similarity;
pub mod stats;
pub mod synth;

pub use confidence::{
    score_always_one, score_avg_prob, score_by_aggregation, ConfidenceScore, ScoreMethod,
};
pub use corpus::{
    label_by_rouge_l, label_external, load_corpus, save_corpus, Corpus, GenerationRecord,
    InstanceBundle,
};
pub use error::{Error, Result};
pub use eval::{auarc, auroc, subset_eval, subset_eval_with, EvalReport, EvalUnit};
pub use hypothesis::{
    build_aggregated_sets, build_pairwise_sets, pool_sets, Aggregator, AggregatorKind, Hypothesis,
    HypothesisSets, PairOrientation, Scope, Variant,
};
pub use similarity::{
    embedding_cosine, jaccard, pairwise_matrix, rouge1_f, rouge_l_f, tokenize, Metric,
    SimilarityMatrix,
};
pub use stats::{
    default_grid, fraction_verified, fraction_verified_with, mean_difference, one_sided_t_test,
    one_sided_t_test_with, rho_curve, rho_curve_with, student_t_upper_tail, summarize, theta_star,
    MetricSummary, RhoPoint, TTestKind, TestResult, Verdict,
};
pub use synth::{brute_force_auroc, generate_planted, EffectKind, PlantSpec};

//! Seeded synthetic corpora with planted consistency effects, plus the
//! brute-force ranking oracle. These power the acceptance tests and let
//! users regenerate every reported number from a seed.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, GenerationRecord, InstanceBundle};
use crate::error::{Error, Result};
use crate::seeding::{derive_seed, STREAM_SYNTH};

/// Planted effect strength.
///
/// Strong and weak effects make correct generations paraphrases of a shared
/// per-instance answer (20% and 50% token substitution respectively) while
/// incorrect generations are fresh random token strings. The null effect
/// draws every generation at random and assigns labels independently of
/// content, so nothing real is plantable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectKind {
    Strong,
    Weak,
    Null,
}

impl EffectKind {
    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Strong => "strong",
            EffectKind::Weak => "weak",
            EffectKind::Null => "null",
        }
    }
}

impl std::str::FromStr for EffectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strong" => Ok(EffectKind::Strong),
            "weak" => Ok(EffectKind::Weak),
            "null" => Ok(EffectKind::Null),
            other => Err(Error::UnknownName {
                what: "effect kind",
                value: other.to_string(),
            }),
        }
    }
}

/// Recipe for one synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub n_instances: usize,
    pub m_generations: usize,
    pub correct_rate: f64,
    pub effect: EffectKind,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        PlantSpec {
            n_instances: 200,
            m_generations: 10,
            correct_rate: 0.6,
            effect: EffectKind::Strong,
            vocab_size: 5000,
            seed: 0,
        }
    }
}

const ANSWER_LEN: usize = 10;
const SUBSTITUTIONS_STRONG: usize = 2;
const SUBSTITUTIONS_WEAK: usize = 5;
const EMBEDDING_DIM: usize = 16;
const TEMPERATURES: [f64; 6] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5];

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; 1 - u keeps the logarithm away from zero
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn random_unit_vector(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..EMBEDDING_DIM).map(|_| gauss(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn clustered_vector(center: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = center.iter().map(|c| c + 0.25 * gauss(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn token(index: usize) -> String {
    format!("w{index}")
}

fn fresh_tokens(vocab_size: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    sample(rng, vocab_size, len).into_vec()
}

fn paraphrase(
    answer: &[usize],
    substitutions: usize,
    vocab_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut tokens = answer.to_vec();
    for position in sample(rng, answer.len(), substitutions).into_vec() {
        tokens[position] = rng.gen_range(0..vocab_size);
    }
    tokens
}

fn render(tokens: &[usize]) -> String {
    tokens
        .iter()
        .map(|&t| token(t))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Generates a fully labeled corpus with the requested planted effect.
/// Deterministic: equal specs produce byte-identical corpora. Each instance
/// draws from its own derived seed, so instances are independent of the
/// corpus size.
pub fn generate_planted(spec: &PlantSpec) -> Result<Corpus> {
    if spec.n_instances < 1 {
        return Err(Error::InvalidParameter(
            "at least one instance is required".into(),
        ));
    }
    if spec.m_generations < 2 {
        return Err(Error::InvalidParameter(
            "at least two generations per instance are required".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.correct_rate) {
        return Err(Error::InvalidParameter(format!(
            "correct rate {} is outside [0, 1]",
            spec.correct_rate
        )));
    }
    if spec.vocab_size < 2 * ANSWER_LEN {
        return Err(Error::InvalidParameter(format!(
            "vocabulary of {} is too small, need at least {}",
            spec.vocab_size,
            2 * ANSWER_LEN
        )));
    }

    let instances = (0..spec.n_instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_SYNTH, i as u64));
            let answer = fresh_tokens(spec.vocab_size, ANSWER_LEN, &mut rng);
            let center = random_unit_vector(&mut rng);

            let mut generations = Vec::with_capacity(spec.m_generations);
            let mut labels = Vec::with_capacity(spec.m_generations);
            for j in 0..spec.m_generations {
                let correct = rng.gen_bool(spec.correct_rate);
                let (tokens, label) = match spec.effect {
                    EffectKind::Strong if correct => (
                        paraphrase(&answer, SUBSTITUTIONS_STRONG, spec.vocab_size, &mut rng),
                        true,
                    ),
                    EffectKind::Weak if correct => (
                        paraphrase(&answer, SUBSTITUTIONS_WEAK, spec.vocab_size, &mut rng),
                        true,
                    ),
                    EffectKind::Strong | EffectKind::Weak => {
                        (fresh_tokens(spec.vocab_size, ANSWER_LEN, &mut rng), false)
                    }
                    // content never depends on the label under the null
                    EffectKind::Null => {
                        (fresh_tokens(spec.vocab_size, ANSWER_LEN, &mut rng), correct)
                    }
                };
                let embedding = if label && spec.effect != EffectKind::Null {
                    clustered_vector(&center, &mut rng)
                } else {
                    random_unit_vector(&mut rng)
                };
                let mean_prob: f64 = match (spec.effect, label) {
                    (EffectKind::Null, _) => rng.gen_range(0.15..0.9),
                    (_, true) => rng.gen_range(0.55..0.9),
                    (_, false) => rng.gen_range(0.15..0.6),
                };
                generations.push(GenerationRecord {
                    text: render(&tokens),
                    embedding: Some(embedding),
                    mean_log_prob: Some(mean_prob.ln()),
                    label: Some(label),
                    temperature: Some(TEMPERATURES[j % TEMPERATURES.len()]),
                });
                labels.push(label);
            }

            InstanceBundle {
                instance_id: format!("inst-{i:04}"),
                query: format!("query {i}"),
                references: vec![render(&answer)],
                generations,
                labels: Some(labels),
            }
        })
        .collect();

    Ok(Corpus {
        instances,
        task_tag: "synthetic".to_string(),
    })
}

/// Explicit O(n^2) ranking oracle: wins plus half-ties over all
/// (correct, incorrect) pairs.
pub fn brute_force_auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let mut wins = 0.0;
    let mut pairs = 0u64;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::SingleClassLabels);
    }
    Ok(wins / pairs as f64)
}

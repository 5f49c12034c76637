//! JSONL corpus ingestion, serialization and correctness labeling.
//!
//! One JSON object per line. Records sharing an `instance_id` form one
//! bundle in file order, whether or not they are adjacent. Validation is
//! strict: empty text, inconsistent queries, mixed embedding dimensions
//! and instances with fewer than two generations are load errors, because
//! each of those conditions signals an upstream data bug.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{rouge_l_f, tokenize};

/// One sampled generation together with its optional side data.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub text: String,
    pub embedding: Option<Vec<f64>>,
    pub mean_log_prob: Option<f64>,
    /// Externally supplied correctness label, if the file carried one.
    pub label: Option<bool>,
    pub temperature: Option<f64>,
}

/// All generations sampled for one query, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceBundle {
    pub instance_id: String,
    pub query: String,
    /// Reference answers, deduplicated in encounter order.
    pub references: Vec<String>,
    pub generations: Vec<GenerationRecord>,
    /// Resolved correctness labels, one per generation. None until a
    /// labeling pass has run.
    pub labels: Option<Vec<bool>>,
}

impl InstanceBundle {
    /// Number of generations in the bundle.
    pub fn len(&self) -> usize {
        self.generations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generations.is_empty()
    }

    /// Resolved labels, or an error if no labeling pass has run.
    pub fn labels(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::UnlabeledBundle {
                instance_id: self.instance_id.clone(),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub instances: Vec<InstanceBundle>,
    /// Free-form dataset tag carried through to output metadata.
    pub task_tag: String,
}

impl Corpus {
    pub fn n_instances(&self) -> usize {
        self.instances.len()
    }

    /// Dimension shared by every embedding in the corpus, if any exist.
    pub fn embedding_dim(&self) -> Option<usize> {
        self.instances
            .iter()
            .flat_map(|b| b.generations.iter())
            .find_map(|g| g.embedding.as_ref().map(Vec::len))
    }

    /// True when every generation carries an external label.
    pub fn fully_labeled_externally(&self) -> bool {
        self.instances
            .iter()
            .all(|b| b.generations.iter().all(|g| g.label.is_some()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ReferenceField {
    One(String),
    Many(Vec<String>),
}

/// Wire format of one JSONL line. Field order here fixes the serialized
/// field order.
#[derive(Serialize, Deserialize)]
struct WireRecord {
    instance_id: String,
    query: String,
    generation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceField>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_log_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
    /// Optional explicit position, used only to detect duplicate records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generation_index: Option<usize>,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    load_corpus_from_reader(BufReader::new(File::open(path)?))
}

pub fn load_corpus_from_reader<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut instances: Vec<InstanceBundle> = Vec::new();
    let mut index_of: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut seen_indices: Vec<std::collections::HashSet<usize>> = Vec::new();
    let mut embedding_dim: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: WireRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
            line: lineno,
            reason: e.to_string(),
        })?;

        if rec.generation.trim().is_empty() {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "empty generation text".into(),
            });
        }
        if rec.query.trim().is_empty() {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "empty query text".into(),
            });
        }
        if let Some(t) = rec.temperature {
            if t.is_nan() || t < 0.0 {
                return Err(Error::MalformedLine {
                    line: lineno,
                    reason: format!("temperature {t} is negative"),
                });
            }
        }
        let refs: Vec<String> = match rec.reference {
            None => vec![],
            Some(ReferenceField::One(s)) => vec![s],
            Some(ReferenceField::Many(v)) => v,
        };
        if refs.iter().any(|r| r.trim().is_empty()) {
            return Err(Error::MalformedLine {
                line: lineno,
                reason: "empty reference text".into(),
            });
        }
        if let Some(e) = &rec.embedding {
            if e.is_empty() {
                return Err(Error::MalformedLine {
                    line: lineno,
                    reason: "empty embedding array".into(),
                });
            }
            match embedding_dim {
                None => embedding_dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(Error::MixedEmbeddingDims {
                        line: lineno,
                        instance_id: rec.instance_id,
                        expected: d,
                        found: e.len(),
                    })
                }
                _ => {}
            }
        }

        let slot = match index_of.get(&rec.instance_id) {
            Some(&i) => {
                if instances[i].query != rec.query {
                    return Err(Error::InconsistentQuery {
                        line: lineno,
                        instance_id: rec.instance_id,
                    });
                }
                i
            }
            None => {
                index_of.insert(rec.instance_id.clone(), instances.len());
                instances.push(InstanceBundle {
                    instance_id: rec.instance_id.clone(),
                    query: rec.query.clone(),
                    references: vec![],
                    generations: vec![],
                    labels: None,
                });
                seen_indices.push(std::collections::HashSet::new());
                instances.len() - 1
            }
        };

        if let Some(gi) = rec.generation_index {
            if !seen_indices[slot].insert(gi) {
                return Err(Error::DuplicateGeneration {
                    line: lineno,
                    instance_id: rec.instance_id,
                    index: gi,
                });
            }
        }
        for r in refs {
            if !instances[slot].references.contains(&r) {
                instances[slot].references.push(r);
            }
        }
        instances[slot].generations.push(GenerationRecord {
            text: rec.generation,
            embedding: rec.embedding,
            mean_log_prob: rec.mean_log_prob,
            label: rec.label,
            temperature: rec.temperature,
        });
    }

    if instances.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for b in &instances {
        if b.len() < 2 {
            return Err(Error::TooFewGenerations {
                instance_id: b.instance_id.clone(),
                count: b.len(),
            });
        }
    }

    Ok(Corpus {
        instances,
        task_tag: String::new(),
    })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save_corpus_to_writer(corpus, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes one record per generation. References are attached to the first
/// record of each bundle; resolved labels, when present, replace the
/// per-record labels so that a labeled corpus survives a round trip.
pub fn save_corpus_to_writer<W: Write>(corpus: &Corpus, mut w: W) -> Result<()> {
    for b in &corpus.instances {
        for (j, g) in b.generations.iter().enumerate() {
            let rec = WireRecord {
                instance_id: b.instance_id.clone(),
                query: b.query.clone(),
                generation: g.text.clone(),
                reference: if j == 0 && !b.references.is_empty() {
                    Some(ReferenceField::Many(b.references.clone()))
                } else {
                    None
                },
                embedding: g.embedding.clone(),
                mean_log_prob: g.mean_log_prob,
                label: b.labels.as_ref().map(|l| l[j]).or(g.label),
                temperature: g.temperature,
                generation_index: None,
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::MalformedLine {
                line: 0,
                reason: e.to_string(),
            })?;
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

/// Labels each generation by its best Rouge-L F score over the instance
/// references: correct iff the maximum reaches `threshold`.
pub fn label_by_rouge_l(corpus: &mut Corpus, threshold: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "rouge-l threshold {threshold} is outside [0, 1]"
        )));
    }
    for b in &mut corpus.instances {
        if b.references.is_empty() {
            return Err(Error::EmptyReferences {
                instance_id: b.instance_id.clone(),
            });
        }
        let ref_tokens: Vec<Vec<String>> = b.references.iter().map(|r| tokenize(r)).collect();
        let labels = b
            .generations
            .iter()
            .map(|g| {
                let toks = tokenize(&g.text);
                ref_tokens
                    .iter()
                    .map(|r| rouge_l_f(&toks, r))
                    .fold(0.0f64, f64::max)
                    >= threshold
            })
            .collect();
        b.labels = Some(labels);
    }
    Ok(())
}

/// Adopts the labels supplied in the input file. Every generation must
/// carry one.
pub fn label_external(corpus: &mut Corpus) -> Result<()> {
    for b in &mut corpus.instances {
        let mut labels = Vec::with_capacity(b.len());
        for (index, g) in b.generations.iter().enumerate() {
            match g.label {
                Some(l) => labels.push(l),
                None => {
                    return Err(Error::MissingLabel {
                        instance_id: b.instance_id.clone(),
                        index,
                    })
                }
            }
        }
        b.labels = Some(labels);
    }
    Ok(())
}

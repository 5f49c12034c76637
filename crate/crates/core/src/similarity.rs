//! Pairwise similarity metrics on [0, 1] and the per-instance matrix.
//!
//! All lexical metrics share one tokenizer so that labeling and similarity
//! agree on what a token is. Matrices are symmetric with an exact unit
//! diagonal; only the upper triangle is ever computed.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::corpus::InstanceBundle;
use crate::error::{Error, Result};

/// Lowercases, splits on whitespace and strips leading/trailing
/// non-alphanumeric characters. A token that consists entirely of
/// punctuation survives whole, so "select * from t;" keeps its "*".
/// Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| {
            let lowered = raw.to_lowercase();
            let trimmed = lowered.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                lowered
            } else {
                trimmed.to_string()
            }
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Jaccard index over token sets. Two empty sequences are identical, so 1.0.
pub fn jaccard<T: AsRef<str>>(a: &[T], b: &[T]) -> f64 {
    let sa: HashSet<&str> = a.iter().map(|t| t.as_ref()).collect();
    let sb: HashSet<&str> = b.iter().map(|t| t.as_ref()).collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count() as f64;
    let union = sa.union(&sb).count() as f64;
    inter / union
}

fn counts<T: AsRef<str>>(tokens: &[T]) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_ref()).or_insert(0) += 1;
    }
    map
}

fn f1(overlap: f64, len_a: usize, len_b: usize) -> f64 {
    if overlap == 0.0 {
        // Both empty means identical; otherwise there is nothing in common.
        return if len_a == 0 && len_b == 0 { 1.0 } else { 0.0 };
    }
    let p = overlap / len_a as f64;
    let r = overlap / len_b as f64;
    2.0 * p * r / (p + r)
}

/// Unigram F1 with clipped multiset overlap.
pub fn rouge1_f<T: AsRef<str>>(a: &[T], b: &[T]) -> f64 {
    let ca = counts(a);
    let cb = counts(b);
    let overlap: usize = ca
        .iter()
        .map(|(tok, &n)| n.min(cb.get(tok).copied().unwrap_or(0)))
        .sum();
    f1(overlap as f64, a.len(), b.len())
}

fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    // Rolling two-row dynamic program; O(|a|*|b|) time, O(|b|) space.
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest-common-subsequence F1.
pub fn rouge_l_f<T: AsRef<str>>(a: &[T], b: &[T]) -> f64 {
    f1(lcs_len(a, b) as f64, a.len(), b.len())
}

/// Cosine similarity clamped below at zero. Both vectors must be non-zero
/// and of equal dimension.
pub fn embedding_cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

/// Similarity metric selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Jaccard,
    Rouge1,
    RougeL,
    EmbeddingCosine,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Jaccard => "jaccard",
            Metric::Rouge1 => "rouge1",
            Metric::RougeL => "rougel",
            Metric::EmbeddingCosine => "embedding-cosine",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jaccard" => Ok(Metric::Jaccard),
            "rouge1" => Ok(Metric::Rouge1),
            "rougel" => Ok(Metric::RougeL),
            "cosine" | "embedding-cosine" => Ok(Metric::EmbeddingCosine),
            other => Err(Error::UnknownName {
                what: "similarity metric",
                value: other.to_string(),
            }),
        }
    }
}

/// Symmetric m-by-m similarity matrix for one instance, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    metric: Metric,
    m: usize,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from row-major values. The matrix must be square,
    /// exactly symmetric, with a unit diagonal and entries in [0, 1].
    pub fn from_values(metric: Metric, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * m {
            return Err(Error::InvalidParameter(format!(
                "matrix of size {m} needs {} values, got {}",
                m * m,
                values.len()
            )));
        }
        for j in 0..m {
            if values[j * m + j] != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "diagonal entry ({j},{j}) is {}, expected exactly 1.0",
                    values[j * m + j]
                )));
            }
            for k in 0..m {
                let v = values[j * m + k];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "matrix entry ({j},{k}) = {v} is outside [0, 1]"
                    )));
                }
                if v != values[k * m + j] {
                    return Err(Error::InvalidParameter(format!(
                        "matrix is asymmetric at ({j},{k})"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { metric, m, values })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    /// Number of generations the matrix covers.
    pub fn size(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.m + k]
    }
}

/// Computes the full pairwise matrix for one instance. Each unordered pair
/// is evaluated once and mirrored; the diagonal is set to exactly 1.0.
pub fn pairwise_matrix(bundle: &InstanceBundle, metric: Metric) -> Result<SimilarityMatrix> {
    let m = bundle.generations.len();
    let mut values = vec![0.0; m * m];
    for j in 0..m {
        values[j * m + j] = 1.0;
    }

    match metric {
        Metric::EmbeddingCosine => {
            let mut embeddings = Vec::with_capacity(m);
            for (index, g) in bundle.generations.iter().enumerate() {
                match &g.embedding {
                    Some(e) => embeddings.push(e.as_slice()),
                    None => {
                        return Err(Error::MissingEmbedding {
                            instance_id: bundle.instance_id.clone(),
                            index,
                        })
                    }
                }
            }
            for j in 0..m {
                for k in (j + 1)..m {
                    let s = embedding_cosine(embeddings[j], embeddings[k])?;
                    values[j * m + k] = s;
                    values[k * m + j] = s;
                }
            }
        }
        _ => {
            let tokens: Vec<Vec<String>> = bundle
                .generations
                .iter()
                .map(|g| tokenize(&g.text))
                .collect();
            for j in 0..m {
                for k in (j + 1)..m {
                    let s = match metric {
                        Metric::Jaccard => jaccard(&tokens[j], &tokens[k]),
                        Metric::Rouge1 => rouge1_f(&tokens[j], &tokens[k]),
                        Metric::RougeL => rouge_l_f(&tokens[j], &tokens[k]),
                        Metric::EmbeddingCosine => unreachable!(),
                    };
                    values[j * m + k] = s;
                    values[k * m + j] = s;
                }
            }
        }
    }

    Ok(SimilarityMatrix { metric, m, values })
}

/// Writes a matrix as CSV: one header cell naming the metric, then m
/// row-major data rows. Output is byte-identical across runs for the same
/// matrix because float formatting is shortest-roundtrip.
pub fn write_matrix_csv<W: Write>(matrix: &SimilarityMatrix, mut w: W) -> Result<()> {
    writeln!(w, "{}", matrix.metric.name())?;
    for j in 0..matrix.m {
        let row: Vec<String> = (0..matrix.m)
            .map(|k| matrix.get(j, k).to_string())
            .collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads a matrix previously written by [`write_matrix_csv`].
pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<SimilarityMatrix> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(Error::EmptyInput)??;
    let metric = Metric::from_str(header.trim())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::MalformedLine {
                        line: i + 2,
                        reason: format!("bad matrix cell: {e}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    let mut values = Vec::with_capacity(m * m);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(Error::MalformedLine {
                line: i + 2,
                reason: format!("matrix row has {} cells, expected {m}", row.len()),
            });
        }
        values.extend_from_slice(row);
    }
    Ok(SimilarityMatrix { metric, m, values })
}

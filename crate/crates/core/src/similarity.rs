//! Word-vector table loading and mean-pooled sentence similarity.
//!
//! A sentence vector is the arithmetic mean of the vectors of its
//! in-vocabulary tokens; similarity is the cosine of two such means. All
//! accumulation is in `f64`, summed in token order and then divided.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a number")]
    BadFloat { line: usize, value: String },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("vector file contains no vectors")]
    Empty,
    #[error("sentence vectors have different dimensions ({0} vs {1})")]
    VectorDimensionMismatch(usize, usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Immutable token → vector map.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Build a table from in-memory entries. Tokens are lowercased; when two
    /// tokens fold to the same key the first one is kept.
    pub fn from_entries<I>(dim: usize, entries: I) -> Result<Self, SimilarityError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut table = Self {
            dim,
            entries: HashMap::new(),
        };
        for (i, (token, vector)) in entries.into_iter().enumerate() {
            if vector.len() != dim {
                return Err(SimilarityError::DimensionMismatch {
                    line: i + 1,
                    expected: dim,
                    found: vector.len(),
                });
            }
            table.entries.entry(token.to_lowercase()).or_insert(vector);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }
}

/// Read a GloVe-style text file: `token v1 ... vd` per line. A leading
/// word2vec `count dim` header is skipped.
pub fn load_vectors<R: BufRead>(reader: R) -> Result<EmbeddingTable, SimilarityError> {
    let mut dim: Option<usize> = None;
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    let mut raw_tokens: HashSet<String> = HashSet::new();
    let mut seen_content = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let mut fields = line.split(' ').filter(|f| !f.is_empty());
        let Some(raw_token) = fields.next() else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();

        if !seen_content {
            seen_content = true;
            if let [declared] = rest.as_slice() {
                if let (Ok(_), Ok(d)) = (raw_token.parse::<usize>(), declared.parse::<usize>()) {
                    if d > 0 {
                        dim = Some(d);
                        continue;
                    }
                }
            }
        }

        let expected = *dim.get_or_insert(rest.len());
        if rest.len() != expected || expected == 0 {
            return Err(SimilarityError::DimensionMismatch {
                line: line_no,
                expected,
                found: rest.len(),
            });
        }
        let mut vector = Vec::with_capacity(expected);
        for value in rest {
            let v: f64 = value
                .trim()
                .parse()
                .map_err(|_| SimilarityError::BadFloat {
                    line: line_no,
                    value: value.to_string(),
                })?;
            vector.push(v);
        }
        if !raw_tokens.insert(raw_token.to_string()) {
            return Err(SimilarityError::DuplicateToken {
                line: line_no,
                token: raw_token.to_string(),
            });
        }
        // Cased files (word2vec) fold onto lowercase keys; the earliest line wins.
        entries.entry(raw_token.to_lowercase()).or_insert(vector);
    }

    let dim = dim.ok_or(SimilarityError::Empty)?;
    if entries.is_empty() {
        return Err(SimilarityError::Empty);
    }
    Ok(EmbeddingTable { dim, entries })
}

/// Lowercase, split on whitespace, trim non-alphanumeric characters from
/// both ends of each piece and drop what becomes empty.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceVector {
    pub values: Vec<f64>,
    pub covered: usize,
    pub total: usize,
}

impl SentenceVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

pub fn sentence_vector<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> SentenceVector {
    let mut sum = vec![0.0f64; table.dim()];
    let mut covered = 0;
    for token in tokens {
        if let Some(v) = table.get(token.as_ref()) {
            for (acc, x) in sum.iter_mut().zip(v) {
                *acc += x;
            }
            covered += 1;
        }
    }
    if covered > 0 {
        let n = covered as f64;
        for acc in &mut sum {
            *acc /= n;
        }
    }
    SentenceVector {
        values: sum,
        covered,
        total: tokens.len(),
    }
}

/// Cosine similarity clamped to `[-1, 1]`; 0.0 when either norm is zero.
pub fn cosine_similarity(a: &SentenceVector, b: &SentenceVector) -> Result<f64, SimilarityError> {
    if a.dim() != b.dim() {
        return Err(SimilarityError::VectorDimensionMismatch(a.dim(), b.dim()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Tokenize, pool and compare two sentences in one go.
pub fn sentence_similarity(a: &str, b: &str, table: &EmbeddingTable) -> f64 {
    let va = sentence_vector(&tokenize(a), table);
    let vb = sentence_vector(&tokenize(b), table);
    cosine_similarity(&va, &vb).expect("vectors from one table share a dimension")
}

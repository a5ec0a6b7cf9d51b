//! Synthetic corpora, vector files and naive reference computations shared by
//! the integration suites.

#![allow(dead_code)]

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qgen::rng::SeededRng;

const SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ren", "tos", "va", "shi", "dan", "el", "or", "bru", "ne",
];

pub const FUNCTION_WORDS: [&str; 14] = [
    "what",
    "who",
    "when",
    "is",
    "the",
    "was",
    "of",
    "in",
    "did",
    "a",
    "mentioned",
    "text",
    "how",
    "where",
];

pub fn word(rng: &mut SeededRng) -> String {
    let n = 2 + rng.index(2);
    (0..n)
        .map(|_| SYLLABLES[rng.index(SYLLABLES.len())])
        .collect()
}

pub fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

pub struct Vocab {
    pub words: Vec<String>,
    pub names: Vec<String>,
}

impl Vocab {
    pub fn new(rng: &mut SeededRng) -> Self {
        let mut words: Vec<String> = (0..300).map(|_| word(rng)).collect();
        words.sort();
        words.dedup();
        let mut names: Vec<String> = (0..40).map(|_| capitalize(&word(rng))).collect();
        names.sort();
        names.dedup();
        Self { words, names }
    }

    pub fn pick<'a>(&'a self, rng: &mut SeededRng) -> &'a str {
        &self.words[rng.index(self.words.len())]
    }
}

/// A SQuAD v1.1 document with `n_contexts` paragraphs spread over a few
/// articles; every answer is a real span of its context.
pub fn synthetic_squad(seed: u64, n_contexts: usize) -> String {
    let mut rng = SeededRng::new(seed);
    let vocab = Vocab::new(&mut rng);
    let mut articles: Vec<serde_json::Value> = Vec::new();
    let mut paragraphs = Vec::new();
    let mut qid = 0;
    for ci in 0..n_contexts {
        let n_sentences = 3 + rng.index(4);
        let mut context = String::new();
        for s in 0..n_sentences {
            if s > 0 {
                context.push(' ');
            }
            context.push_str(&vocab.names[rng.index(vocab.names.len())]);
            for _ in 0..(5 + rng.index(8)) {
                context.push(' ');
                context.push_str(vocab.pick(&mut rng));
            }
            context.push('.');
        }
        let tokens: Vec<(usize, &str)> = {
            let mut out = Vec::new();
            let mut char_pos = 0;
            for piece in context.split(' ') {
                out.push((char_pos, piece.trim_end_matches('.')));
                char_pos += piece.chars().count() + 1;
            }
            out
        };
        let n_questions = 2 + rng.index(4);
        let mut qas = Vec::new();
        for _ in 0..n_questions {
            let (start, answer) = tokens[rng.index(tokens.len())];
            let mut question = String::from(["What", "Who", "When", "Where"][rng.index(4)]);
            for _ in 0..(3 + rng.index(5)) {
                question.push(' ');
                question.push_str(tokens[rng.index(tokens.len())].1);
            }
            question.push('?');
            qas.push(serde_json::json!({
                "id": format!("q{qid:05}"),
                "question": question,
                "answers": [{"text": answer, "answer_start": start}],
            }));
            qid += 1;
        }
        paragraphs.push(serde_json::json!({"context": context, "qas": qas}));
        if paragraphs.len() == 7 || ci + 1 == n_contexts {
            articles.push(serde_json::json!({
                "title": format!("Article_{}", articles.len()),
                "paragraphs": std::mem::take(&mut paragraphs),
            }));
        }
    }
    serde_json::json!({"version": "1.1", "data": articles}).to_string()
}

/// GloVe-style text covering the synthetic vocabulary except every tenth word.
pub fn synthetic_vectors(seed: u64, dim: usize) -> String {
    let mut rng = SeededRng::new(seed);
    let vocab = Vocab::new(&mut rng);
    let mut vec_rng = SeededRng::new(seed ^ 0x5eed);
    let mut out = String::new();
    let all = vocab
        .words
        .iter()
        .map(String::as_str)
        .chain(vocab.names.iter().map(String::as_str))
        .chain(FUNCTION_WORDS);
    let mut seen = std::collections::HashSet::new();
    for (i, w) in all.enumerate() {
        let w = w.to_lowercase();
        if i % 10 == 9 || !seen.insert(w.clone()) {
            continue;
        }
        out.push_str(&w);
        for _ in 0..dim {
            let v = (vec_rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0;
            write!(out, " {v:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub dataset: PathBuf,
    pub vectors: PathBuf,
}

pub fn fixture(n_contexts: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let dataset = dir.path().join("squad.json");
    let vectors = dir.path().join("vectors.txt");
    // Corpus and vectors share a vocabulary seed.
    std::fs::write(&dataset, synthetic_squad(11, n_contexts)).unwrap();
    std::fs::write(&vectors, synthetic_vectors(11, 16)).unwrap();
    Fixture {
        dir,
        dataset,
        vectors,
    }
}

/// Every regular file under `dir`, name → bytes.
pub fn dir_contents(dir: &Path) -> HashMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

// ---- naive references, independent of the library's code paths ----

pub fn naive_table(text: &str) -> HashMap<String, Vec<f64>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split_whitespace();
            let token = parts.next().unwrap().to_string();
            (token, parts.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

pub fn naive_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for piece in text.split_whitespace() {
        let chars: Vec<char> = piece.chars().collect();
        let mut a = 0;
        let mut b = chars.len();
        while a < b && !chars[a].is_alphanumeric() {
            a += 1;
        }
        while b > a && !chars[b - 1].is_alphanumeric() {
            b -= 1;
        }
        if a < b {
            out.push(chars[a..b].iter().collect::<String>().to_lowercase());
        }
    }
    out
}

pub fn naive_mean(tokens: &[String], table: &HashMap<String, Vec<f64>>, dim: usize) -> Vec<f64> {
    let hits: Vec<&Vec<f64>> = tokens.iter().filter_map(|t| table.get(t)).collect();
    (0..dim)
        .map(|d| {
            if hits.is_empty() {
                0.0
            } else {
                hits.iter().map(|v| v[d]).sum::<f64>() / hits.len() as f64
            }
        })
        .collect()
}

pub fn naive_cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
    }
}

/// Quantile as `(1 - g) x[k] + g x[k+1]` with `k + g = (n - 1) p`.
pub fn naive_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * p;
    let mut k = 0;
    while (k + 1) as f64 <= pos {
        k += 1;
    }
    let g = pos - k as f64;
    if k + 1 < v.len() {
        (1.0 - g) * v[k] + g * v[k + 1]
    } else {
        v[k]
    }
}

pub struct NaiveBox {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

pub fn naive_box(values: &[f64]) -> NaiveBox {
    let mut mean = 0.0;
    for v in values {
        mean += v;
    }
    mean /= values.len() as f64;
    let q1 = naive_quantile(values, 0.25);
    let q3 = naive_quantile(values, 0.75);
    let lo = q1 - 1.5 * (q3 - q1);
    let hi = q3 + 1.5 * (q3 - q1);
    let mut whisker_lo = f64::INFINITY;
    let mut whisker_hi = f64::NEG_INFINITY;
    let mut outliers = Vec::new();
    for &v in values {
        if v < lo || v > hi {
            outliers.push(v);
        } else {
            whisker_lo = whisker_lo.min(v);
            whisker_hi = whisker_hi.max(v);
        }
    }
    outliers.sort_by(|a, b| a.partial_cmp(b).unwrap());
    NaiveBox {
        mean,
        median: naive_quantile(values, 0.5),
        q1,
        q3,
        whisker_lo,
        whisker_hi,
        outliers,
    }
}

//! Dataset exploration data: question-length histogram with Tukey outlier
//! exclusion and stopword-filtered keyword frequencies.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::tokenize;
use crate::stats::{quantile_sorted, tukey_fences};

/// Stopword list shipped with the crate.
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// Question length is counted in whitespace-separated tokens.
pub const LENGTH_UNIT: &str = "whitespace tokens";

#[derive(Debug, Error)]
pub enum TextStatsError {
    #[error("no input to summarize")]
    EmptyInput,
    #[error("bin width must be at least 1")]
    InvalidBinWidth,
    #[error("top_k must be at least 1")]
    InvalidTopK,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub excluded_outliers: u64,
    pub length_unit: String,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.excluded_outliers
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordFrequency {
    pub entries: Vec<(String, u64)>,
}

pub fn question_length_histogram<S: AsRef<str>>(
    questions: &[S],
    bin_width: u32,
) -> Result<Histogram, TextStatsError> {
    if bin_width == 0 {
        return Err(TextStatsError::InvalidBinWidth);
    }
    if questions.is_empty() {
        return Err(TextStatsError::EmptyInput);
    }
    let lengths: Vec<u64> = questions
        .iter()
        .map(|q| q.as_ref().split_whitespace().count() as u64)
        .collect();
    let mut sorted: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let (lo_fence, hi_fence) = tukey_fences(
        quantile_sorted(&sorted, 0.25),
        quantile_sorted(&sorted, 0.75),
    );

    let retained: Vec<u64> = lengths
        .iter()
        .copied()
        .filter(|&l| (l as f64) >= lo_fence && (l as f64) <= hi_fence)
        .collect();
    let excluded_outliers = (lengths.len() - retained.len()) as u64;
    // The median always lies inside the fences.
    let min = *retained.iter().min().expect("median is retained");
    let max = *retained.iter().max().expect("median is retained");
    let width = u64::from(bin_width);
    let n_bins = ((max - min) / width + 1) as usize;
    let mut counts = vec![0u64; n_bins];
    for l in retained {
        counts[((l - min) / width) as usize] += 1;
    }
    let bin_edges = (0..=n_bins as u64)
        .map(|i| (min + i * width) as f64)
        .collect();
    Ok(Histogram {
        bin_edges,
        counts,
        excluded_outliers,
        length_unit: LENGTH_UNIT.to_string(),
    })
}

/// Parse a stopword file: one token per line, `#` starts a comment line.
pub fn parse_stopwords<R: BufRead>(reader: R) -> Result<HashSet<String>, TextStatsError> {
    let mut words = HashSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        words.insert(word.to_lowercase());
    }
    Ok(words)
}

pub fn bundled_stopwords() -> HashSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS.as_bytes()).expect("bundled list is valid UTF-8")
}

pub fn frequent_words<S: AsRef<str>>(
    questions: &[S],
    stopwords: &HashSet<String>,
    top_k: usize,
) -> Result<KeywordFrequency, TextStatsError> {
    if top_k == 0 {
        return Err(TextStatsError::InvalidTopK);
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for q in questions {
        for token in tokenize(q.as_ref()) {
            if !stopwords.contains(&token) {
                *counts.entry(token).or_default() += 1;
            }
        }
    }
    if counts.is_empty() {
        return Err(TextStatsError::EmptyInput);
    }
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    // BTreeMap order is lexicographic, so a stable sort on count keeps ties ordered.
    entries.sort_by_key(|e| std::cmp::Reverse(e.1));
    entries.truncate(top_k);
    Ok(KeywordFrequency { entries })
}

pub fn write_histogram_csv<W: Write>(h: &Histogram, out: W) -> Result<(), TextStatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (i, count) in h.counts.iter().enumerate() {
        w.write_record([
            h.bin_edges[i].to_string(),
            h.bin_edges[i + 1].to_string(),
            count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `(bin_lo, bin_hi, count)`; the outlier count is not part of the CSV.
pub fn read_histogram_csv<R: Read>(input: R) -> Result<Vec<(f64, f64, u64)>, TextStatsError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

pub fn write_keywords_csv<W: Write>(k: &KeywordFrequency, out: W) -> Result<(), TextStatsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["token", "count"])?;
    for (token, count) in &k.entries {
        w.write_record([token.as_str(), &count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_keywords_csv<R: Read>(input: R) -> Result<KeywordFrequency, TextStatsError> {
    let mut r = csv::Reader::from_reader(input);
    let mut entries = Vec::new();
    for row in r.deserialize() {
        entries.push(row?);
    }
    Ok(KeywordFrequency { entries })
}

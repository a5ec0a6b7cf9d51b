//! Offline backend that derives numbered questions from the prompt's context.
//!
//! For each requested question it draws a sentence and a question form from a
//! generator seeded with `seed` mixed with a hash of the prompt, takes the
//! sentence's first capitalized token span as its subject and fills a
//! What/Who/When template. The output only needs to exercise the pipeline.

use std::collections::HashSet;

use super::{extract_context, Backend, BackendError, BackendRequest, BackendResponse};
use crate::rng::SeededRng;
use crate::textstats::bundled_stopwords;

const MAX_PREDICATE_TOKENS: usize = 12;
const FORMS: usize = 4;

#[derive(Debug, Clone)]
pub struct MockBackend {
    seed: u64,
    questions: usize,
    stopwords: HashSet<String>,
}

impl MockBackend {
    pub fn new(seed: u64, questions: usize) -> Self {
        Self {
            seed,
            questions,
            stopwords: bundled_stopwords(),
        }
    }

    fn question(&self, sentence: &[&str], form: usize) -> String {
        let (subject, predicate) = split_subject(sentence, &self.stopwords);
        let subject = if subject.is_empty() {
            "the text".to_string()
        } else {
            subject
        };
        match (form, predicate.is_empty()) {
            (0, false) => format!("Who {predicate}?"),
            (1, false) => format!("What {predicate}?"),
            (0, true) => format!("Who is {subject}?"),
            (1, true) | (3, _) => format!("What is {subject}?"),
            _ => format!("When is {subject} mentioned?"),
        }
    }
}

impl Backend for MockBackend {
    fn identity(&self) -> String {
        format!("mock(seed={}, questions={})", self.seed, self.questions)
    }

    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        let context = extract_context(&request.prompt).unwrap_or(&request.prompt);
        let sentences = split_sentences(context);
        if sentences.is_empty() {
            return Ok(BackendResponse {
                text: String::new(),
            });
        }
        let mut rng = SeededRng::new(self.seed ^ fnv1a(request.prompt.as_bytes()));
        let mut text = String::new();
        for i in 0..self.questions {
            let sentence = &sentences[rng.index(sentences.len())];
            let form = rng.index(FORMS);
            text.push_str(&format!("{}. {}\n", i + 1, self.question(sentence, form)));
        }
        Ok(BackendResponse { text })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Sentences as token lists; a token ending in `.`, `!` or `?` closes one.
fn split_sentences(text: &str) -> Vec<Vec<&str>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for token in text.split_whitespace() {
        current.push(token);
        if token.ends_with(['.', '!', '?']) {
            sentences.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    sentences
}

fn starts_upper(token: &str) -> bool {
    token
        .chars()
        .find(|c| c.is_alphanumeric())
        .is_some_and(char::is_uppercase)
}

fn clean(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

/// First run of capitalized tokens (skipping a capitalized stopword that
/// merely opens the sentence) and up to a dozen tokens after it.
fn split_subject(sentence: &[&str], stopwords: &HashSet<String>) -> (String, String) {
    let mut i = 0;
    let start = loop {
        match sentence.get(i) {
            None => return (String::new(), String::new()),
            Some(t) if starts_upper(t) && !stopwords.contains(&clean(t).to_lowercase()) => break i,
            Some(_) => i += 1,
        }
    };
    let mut end = start + 1;
    while end < sentence.len() && starts_upper(sentence[end]) && !sentence[end - 1].ends_with(',') {
        end += 1;
    }
    let subject = sentence[start..end]
        .iter()
        .map(|t| clean(t))
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    let predicate = sentence[end..]
        .iter()
        .take(MAX_PREDICATE_TOKENS)
        .copied()
        .collect::<Vec<_>>()
        .join(" ");
    let predicate = predicate
        .trim_end_matches(|c: char| !c.is_alphanumeric())
        .to_string();
    (subject, predicate)
}

//! Recovering individual questions from free-form completion text.
//!
//! Accepted item shapes, per line:
//! - numbered: `1. text`, `1) text`, also several numbered items on one line
//!   when their numbers run consecutively (`1. Who? 2. What?`)
//! - bulleted: `- text`, `* text`, `• text`
//! - bare interrogative: any other line ending in `?`

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("no questions found in response")]
    NoQuestionsFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedQuestions {
    pub questions: Vec<String>,
    pub expected: usize,
}

impl ParsedQuestions {
    /// How many questions are missing relative to the request.
    pub fn shortfall(&self) -> usize {
        self.expected.saturating_sub(self.questions.len())
    }
}

pub fn parse_questions(raw: &str, expected: usize) -> Result<ParsedQuestions, ParseError> {
    let mut items = Vec::new();
    for line in raw.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some((number, body_start)) = marker_at(line, 0) {
            items.extend(split_numbered(line, number, body_start));
        } else if let Some(rest) = strip_bullet(line) {
            items.push(rest.to_string());
        } else if line.ends_with('?') {
            items.push(line.to_string());
        }
    }
    let questions: Vec<String> = items
        .iter()
        .map(|s| normalize_question(s))
        .filter(|s| !s.is_empty())
        .take(expected)
        .collect();
    if questions.is_empty() {
        return Err(ParseError::NoQuestionsFound);
    }
    Ok(ParsedQuestions {
        questions,
        expected,
    })
}

/// Collapse internal whitespace and reduce a trailing run of `.?!` to its
/// first mark.
pub fn normalize_question(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    let trimmed = collapsed.trim_end_matches(['.', '?', '!']);
    match collapsed[trimmed.len()..].chars().next() {
        Some(mark) if !trimmed.is_empty() => format!("{trimmed}{mark}"),
        _ => trimmed.to_string(),
    }
}

fn strip_bullet(line: &str) -> Option<&str> {
    for bullet in ["- ", "* ", "• "] {
        if let Some(rest) = line.strip_prefix(bullet) {
            return Some(rest);
        }
    }
    None
}

/// A list marker (`12.` or `12)` followed by whitespace or end of line)
/// starting at byte `pos`, which must be the start of the line or follow
/// whitespace. Returns the number and the byte offset after the marker.
fn marker_at(line: &str, pos: usize) -> Option<(u32, usize)> {
    let bytes = line.as_bytes();
    if pos > 0 && !bytes[pos - 1].is_ascii_whitespace() {
        return None;
    }
    let digits = bytes[pos..]
        .iter()
        .take_while(|b| b.is_ascii_digit())
        .count();
    if digits == 0 || digits > 2 {
        return None;
    }
    let punct = *bytes.get(pos + digits)?;
    if punct != b'.' && punct != b')' {
        return None;
    }
    let after = pos + digits + 1;
    if after < bytes.len() && !bytes[after].is_ascii_whitespace() {
        return None;
    }
    let number = line[pos..pos + digits].parse().ok()?;
    Some((number, after))
}

fn split_numbered(line: &str, first: u32, body_start: usize) -> Vec<String> {
    let mut items = Vec::new();
    let mut next = first + 1;
    let mut start = body_start;
    let mut pos = body_start;
    while pos < line.len() {
        if line.is_char_boundary(pos) {
            if let Some((number, after)) = marker_at(line, pos) {
                if number == next {
                    items.push(line[start..pos].to_string());
                    start = after;
                    next += 1;
                    pos = after;
                    continue;
                }
            }
        }
        pos += 1;
    }
    items.push(line[start..].to_string());
    items
}

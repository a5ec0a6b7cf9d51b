//! SQuAD v1.1 corpus handling: parsing with span validation, question/answer
//! reversal, seeded context sampling and stride-overlapped chunking.
//!
//! Character offsets everywhere in this module count Unicode scalar values,
//! the unit `answer_start` uses in the official files.

use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("schema error at {path}: {message}")]
    SchemaError { path: String, message: String },
    #[error("answer span error in question {qas_id}: {message}")]
    SpanError { qas_id: String, message: String },
    #[error("cannot sample {requested} contexts from a dataset of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("invalid chunk parameters: max_len {max_len} must exceed doc_stride {doc_stride}")]
    InvalidChunkParams { max_len: usize, doc_stride: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub answer_start: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineQuestion {
    pub id: String,
    pub question: String,
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub context_id: usize,
    pub title: String,
    pub text: String,
    pub baselines: Vec<BaselineQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadDataset {
    pub version: String,
    pub records: Vec<ContextRecord>,
    pub example_count: usize,
}

impl SquadDataset {
    pub fn questions(&self) -> impl Iterator<Item = &BaselineQuestion> {
        self.records.iter().flat_map(|r| r.baselines.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReversedExample {
    pub context: String,
    pub input_answer: String,
    pub target_question: String,
}

/// A window over a context. `start`/`end` are character offsets, the token
/// fields index the whitespace tokenization the window was cut from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub text: String,
}

// Wire schema. Kept separate from the domain types so validation happens in
// one place and the domain types stay free of serde defaults.
#[derive(Deserialize, Serialize)]
struct RawFile {
    #[serde(default)]
    version: Option<String>,
    data: Vec<RawArticle>,
}

#[derive(Deserialize, Serialize)]
struct RawArticle {
    title: String,
    paragraphs: Vec<RawParagraph>,
}

#[derive(Deserialize, Serialize)]
struct RawParagraph {
    context: String,
    qas: Vec<RawQa>,
}

#[derive(Deserialize, Serialize)]
struct RawQa {
    id: String,
    question: String,
    answers: Vec<Answer>,
}

/// Parse a SQuAD v1.1 JSON document.
pub fn parse_squad<R: Read>(mut reader: R) -> Result<SquadDataset, CorpusError> {
    let mut buf = Vec::new();
    reader.read_to_end(&mut buf)?;
    parse_squad_bytes(&buf)
}

pub fn parse_squad_bytes(raw: &[u8]) -> Result<SquadDataset, CorpusError> {
    let mut de = serde_json::Deserializer::from_slice(raw);
    let file: RawFile = match serde_path_to_error::deserialize(&mut de) {
        Ok(file) => file,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => CorpusError::SchemaError {
                    path,
                    message: inner.to_string(),
                },
                _ => CorpusError::MalformedJson(inner.to_string()),
            });
        }
    };
    de.end()
        .map_err(|e| CorpusError::MalformedJson(e.to_string()))?;

    let mut records = Vec::new();
    let mut example_count = 0;
    for (ai, article) in file.data.into_iter().enumerate() {
        for (pi, paragraph) in article.paragraphs.into_iter().enumerate() {
            let path = format!("data[{ai}].paragraphs[{pi}]");
            if paragraph.context.trim().is_empty() {
                return Err(CorpusError::SchemaError {
                    path: format!("{path}.context"),
                    message: "empty context".into(),
                });
            }
            let offsets = char_offsets(&paragraph.context);
            let mut baselines = Vec::with_capacity(paragraph.qas.len());
            for (qi, qa) in paragraph.qas.into_iter().enumerate() {
                let qa_path = format!("{path}.qas[{qi}]");
                if qa.question.trim().is_empty() {
                    return Err(CorpusError::SchemaError {
                        path: format!("{qa_path}.question"),
                        message: format!("empty question (id {})", qa.id),
                    });
                }
                if qa.answers.is_empty() {
                    return Err(CorpusError::SchemaError {
                        path: format!("{qa_path}.answers"),
                        message: format!(
                            "question {} has no answers (unanswerable entries are not supported)",
                            qa.id
                        ),
                    });
                }
                for answer in &qa.answers {
                    check_span(&paragraph.context, &offsets, answer).map_err(|message| {
                        CorpusError::SpanError {
                            qas_id: qa.id.clone(),
                            message,
                        }
                    })?;
                }
                baselines.push(BaselineQuestion {
                    id: qa.id,
                    question: qa.question,
                    answers: qa.answers,
                });
            }
            example_count += baselines.len();
            records.push(ContextRecord {
                context_id: records.len(),
                title: article.title.clone(),
                text: paragraph.context,
                baselines,
            });
        }
    }

    Ok(SquadDataset {
        version: file.version.unwrap_or_default(),
        records,
        example_count,
    })
}

/// Byte offset of every char boundary, including the end of the string.
fn char_offsets(text: &str) -> Vec<usize> {
    text.char_indices()
        .map(|(b, _)| b)
        .chain(std::iter::once(text.len()))
        .collect()
}

fn check_span(context: &str, offsets: &[usize], answer: &Answer) -> Result<(), String> {
    let len = answer.text.chars().count();
    let n_chars = offsets.len() - 1;
    let end = answer.answer_start + len;
    if end > n_chars {
        return Err(format!(
            "span [{}, {end}) exceeds context length {n_chars}",
            answer.answer_start
        ));
    }
    let slice = &context[offsets[answer.answer_start]..offsets[end]];
    if slice != answer.text {
        return Err(format!(
            "context slice {slice:?} at {} does not match answer {:?}",
            answer.answer_start, answer.text
        ));
    }
    Ok(())
}

/// Serialize back to the v1.1 layout. Consecutive records sharing a title
/// become one article.
pub fn to_squad_json(ds: &SquadDataset) -> String {
    let mut data: Vec<RawArticle> = Vec::new();
    for record in &ds.records {
        let paragraph = RawParagraph {
            context: record.text.clone(),
            qas: record
                .baselines
                .iter()
                .map(|b| RawQa {
                    id: b.id.clone(),
                    question: b.question.clone(),
                    answers: b.answers.clone(),
                })
                .collect(),
        };
        match data.last_mut() {
            Some(article) if article.title == record.title => article.paragraphs.push(paragraph),
            _ => data.push(RawArticle {
                title: record.title.clone(),
                paragraphs: vec![paragraph],
            }),
        }
    }
    let file = RawFile {
        version: Some(ds.version.clone()),
        data,
    };
    serde_json::to_string(&file).expect("dataset serialization is infallible")
}

/// Swap question and answer roles. Multi-answer questions use their first answer.
pub fn reverse_dataset(ds: &SquadDataset) -> Vec<ReversedExample> {
    ds.records
        .iter()
        .flat_map(|record| {
            record.baselines.iter().map(move |b| ReversedExample {
                context: record.text.clone(),
                input_answer: b.answers[0].text.clone(),
                target_question: b.question.clone(),
            })
        })
        .collect()
}

/// Draw `n` distinct contexts uniformly without replacement; output ordered by id.
pub fn sample_contexts(
    ds: &SquadDataset,
    n: usize,
    seed: u64,
) -> Result<Vec<ContextRecord>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::EmptySample);
    }
    if n > ds.records.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: ds.records.len(),
        });
    }
    let mut rng = SeededRng::new(seed);
    let mut picked = rng.choose_indices(ds.records.len(), n);
    picked.sort_unstable_by_key(|&i| ds.records[i].context_id);
    Ok(picked.into_iter().map(|i| ds.records[i].clone()).collect())
}

/// Whitespace tokens as `(char_start, char_end)` pairs.
pub fn whitespace_token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    let mut pos = 0;
    for c in text.chars() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, pos));
                start = None;
            }
            (false, None) => start = Some(pos),
            _ => {}
        }
        pos += 1;
    }
    if let Some(s) = start {
        spans.push((s, pos));
    }
    spans
}

/// Split `text` into windows of at most `max_len` whitespace tokens where
/// consecutive windows share exactly `doc_stride` tokens. Windows advance by
/// `max_len - doc_stride` tokens; the last one ends at the final token.
pub fn chunk_context(
    text: &str,
    max_len: usize,
    doc_stride: usize,
) -> Result<Vec<Chunk>, CorpusError> {
    if max_len <= doc_stride {
        return Err(CorpusError::InvalidChunkParams {
            max_len,
            doc_stride,
        });
    }
    let spans = whitespace_token_spans(text);
    if spans.is_empty() {
        return Ok(Vec::new());
    }
    let offsets = char_offsets(text);
    let step = max_len - doc_stride;
    let n = spans.len();
    let mut chunks = Vec::new();
    let mut first = 0;
    loop {
        let last = (first + max_len).min(n);
        let start = spans[first].0;
        let end = spans[last - 1].1;
        chunks.push(Chunk {
            start,
            end,
            token_start: first,
            token_end: last,
            text: text[offsets[start]..offsets[end]].to_string(),
        });
        if last == n {
            break;
        }
        first += step;
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{
      "version": "1.1",
      "data": [{
        "title": "Beyoncé",
        "paragraphs": [{
          "context": "Beyoncé Giselle Knowles-Carter (born September 4, 1981) is an American singer.",
          "qas": [
            {"id": "q1", "question": "When was Beyoncé born?",
             "answers": [{"text": "September 4, 1981", "answer_start": 37}]},
            {"id": "q2", "question": "What is Beyoncé's nationality?",
             "answers": [{"text": "American", "answer_start": 62}]}
          ]
        }]
      }]
    }"#;

    #[test]
    fn parses_hand_fixture() {
        let ds = parse_squad(FIXTURE.as_bytes()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.example_count, 2);
        let record = &ds.records[0];
        assert_eq!(record.context_id, 0);
        assert_eq!(record.baselines.len(), 2);
        // Offsets count chars: "é" is two bytes but one offset unit.
        let chars: Vec<char> = record.text.chars().collect();
        let s: String = chars[37..37 + 17].iter().collect();
        assert_eq!(s, "September 4, 1981");
        let s: String = chars[62..70].iter().collect();
        assert_eq!(s, "American");
    }

    #[test]
    fn empty_corpus() {
        let ds = parse_squad(r#"{"data": []}"#.as_bytes()).unwrap();
        assert!(ds.records.is_empty());
        assert_eq!(ds.example_count, 0);
    }

    #[test]
    fn syntax_error_is_malformed_json() {
        let err = parse_squad(r#"{"data": [}"#.as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::MalformedJson(_)), "{err:?}");
    }

    #[test]
    fn missing_field_reports_path() {
        let raw = r#"{"data": [{"title": "t", "paragraphs": [{"qas": []}]}]}"#;
        match parse_squad(raw.as_bytes()).unwrap_err() {
            CorpusError::SchemaError { path, .. } => assert_eq!(path, "data[0].paragraphs[0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_span_names_question() {
        let raw = FIXTURE.replace("\"answer_start\": 62", "\"answer_start\": 61");
        match parse_squad(raw.as_bytes()).unwrap_err() {
            CorpusError::SpanError { qas_id, .. } => assert_eq!(qas_id, "q2"),
            other => panic!("unexpected {other:?}"),
        }
        let raw = FIXTURE.replace("\"answer_start\": 62", "\"answer_start\": 900");
        assert!(matches!(
            parse_squad(raw.as_bytes()),
            Err(CorpusError::SpanError { .. })
        ));
    }

    #[test]
    fn unanswerable_rejected() {
        let raw = FIXTURE.replace(r#"[{"text": "American", "answer_start": 62}]"#, "[]");
        assert!(matches!(
            parse_squad(raw.as_bytes()),
            Err(CorpusError::SchemaError { .. })
        ));
    }

    #[test]
    fn reversal_swaps_roles() {
        let ds = parse_squad(FIXTURE.as_bytes()).unwrap();
        let rev = reverse_dataset(&ds);
        assert_eq!(rev.len(), ds.example_count);
        assert_eq!(rev[0].input_answer, "September 4, 1981");
        assert_eq!(rev[0].target_question, "When was Beyoncé born?");
        assert_eq!(rev[1].input_answer, "American");
    }

    #[test]
    fn serialize_round_trip() {
        let ds = parse_squad(FIXTURE.as_bytes()).unwrap();
        let again = parse_squad(to_squad_json(&ds).as_bytes()).unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn sample_all_and_errors() {
        let ds = parse_squad(FIXTURE.as_bytes()).unwrap();
        assert_eq!(sample_contexts(&ds, 1, 5).unwrap(), ds.records);
        assert!(matches!(
            sample_contexts(&ds, 2, 5),
            Err(CorpusError::SampleTooLarge {
                requested: 2,
                available: 1
            })
        ));
        assert!(matches!(
            sample_contexts(&ds, 0, 5),
            Err(CorpusError::EmptySample)
        ));
    }

    fn ten_tokens() -> String {
        (0..10)
            .map(|i| format!("t{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    #[test]
    fn short_text_is_one_chunk() {
        let text = ten_tokens();
        let chunks = chunk_context(&text, 20, 5).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, text);
        assert_eq!((chunks[0].token_start, chunks[0].token_end), (0, 10));
    }

    #[test]
    fn hand_traced_windows() {
        let chunks = chunk_context(&ten_tokens(), 6, 2).unwrap();
        let windows: Vec<_> = chunks
            .iter()
            .map(|c| (c.token_start, c.token_end))
            .collect();
        assert_eq!(windows, vec![(0, 6), (4, 10)]);
        assert_eq!(chunks[1].text, "t4 t5 t6 t7 t8 t9");
    }

    #[test]
    fn invalid_chunk_params() {
        assert!(matches!(
            chunk_context("a b", 2, 2),
            Err(CorpusError::InvalidChunkParams { .. })
        ));
    }

    #[test]
    fn chunk_offsets_are_char_based() {
        let text = "  héllo  wörld ünïcode ";
        let chunks = chunk_context(text, 2, 1).unwrap();
        for c in &chunks {
            let slice: String = text.chars().skip(c.start).take(c.end - c.start).collect();
            assert_eq!(slice, c.text);
        }
        assert_eq!(chunks[0].text, "héllo  wörld");
        assert_eq!(chunks[1].text, "wörld ünïcode");
    }

    #[test]
    fn empty_text_has_no_chunks() {
        assert!(chunk_context("   ", 4, 1).unwrap().is_empty());
    }
}

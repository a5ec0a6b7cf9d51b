mod common;

use std::collections::{HashMap, HashSet};

use proptest::prelude::*;

use qgen::eval::{count_matches, count_matches_with, BaselineScore, MatchRule, ScoreRecord};
use qgen::promptgen::{
    parse_questions, render_prompt, Backend, BackendRequest, GeneratedQuestion, MockBackend,
    PromptId,
};
use qgen::similarity::tokenize;
use qgen::textstats::{bundled_stopwords, frequent_words, question_length_histogram};

fn records(maxes: &[f64]) -> Vec<ScoreRecord> {
    maxes
        .iter()
        .enumerate()
        .map(|(index, &m)| ScoreRecord {
            generated: GeneratedQuestion {
                context_id: 0,
                prompt_id: PromptId::A,
                index,
                text: String::new(),
            },
            per_baseline: vec![BaselineScore {
                baseline_id: "b".into(),
                score: m,
            }],
            question_max: m,
            zero_vector_flag: false,
        })
        .collect()
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("the".to_string()),
        Just("What".to_string()),
        "[a-z]{1,5}",
        "[A-Z][a-z]{1,5}[?,.]?",
    ]
}

proptest! {
    #[test]
    fn match_count_is_monotone_in_threshold(
        maxes in prop::collection::vec(-1.0f64..=1.0, 1..40),
        t1 in -1.0f64..=1.0,
        t2 in -1.0f64..=1.0,
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let recs = records(&maxes);
        prop_assert!(count_matches(&recs, lo) >= count_matches(&recs, hi));
        let strict = count_matches_with(&recs, lo, MatchRule::Strict);
        let inclusive = count_matches_with(&recs, lo, MatchRule::Inclusive);
        prop_assert!(inclusive >= strict);
        prop_assert_eq!(inclusive - strict, maxes.iter().filter(|&&m| m == lo).count());
    }

    #[test]
    fn keyword_counts_match_brute_force(
        questions in prop::collection::vec(prop::collection::vec(word(), 1..10), 1..30),
        top_k in 1usize..50,
    ) {
        let questions: Vec<String> = questions.iter().map(|q| q.join(" ")).collect();
        let stop = bundled_stopwords();
        let mut brute: HashMap<String, u64> = HashMap::new();
        for q in &questions {
            for t in common::naive_tokens(q) {
                if !stop.contains(&t) {
                    *brute.entry(t).or_default() += 1;
                }
            }
        }
        match frequent_words(&questions, &stop, top_k) {
            Err(_) => prop_assert!(brute.is_empty()),
            Ok(kw) => {
                prop_assert_eq!(kw.entries.len(), top_k.min(brute.len()));
                for (token, count) in &kw.entries {
                    prop_assert_eq!(brute[token], *count);
                }
                // Anything left out is no more frequent than the last kept entry.
                let kept: HashSet<&String> = kw.entries.iter().map(|(t, _)| t).collect();
                let floor = kw.entries.last().unwrap().1;
                prop_assert!(brute.iter().filter(|(t, _)| !kept.contains(t)).all(|(_, &c)| c <= floor));

                let mut reversed = questions.clone();
                reversed.reverse();
                prop_assert_eq!(frequent_words(&reversed, &stop, top_k).unwrap(), kw);
            }
        }
    }

    #[test]
    fn parsed_questions_respect_expected(raw in "(([0-9]{1,2}[.)] |- |\\* )?[A-Za-z ?.!]{0,20}\n){0,12}", expected in 1usize..8) {
        if let Ok(parsed) = parse_questions(&raw, expected) {
            prop_assert!(!parsed.questions.is_empty());
            prop_assert!(parsed.questions.len() <= expected);
            prop_assert!(parsed.questions.iter().all(|q| !q.trim().is_empty()));
            prop_assert_eq!(parsed.shortfall(), expected - parsed.questions.len());
        }
    }

    #[test]
    fn histogram_conserves_questions(
        lengths in prop::collection::vec(0usize..60, 1..200),
        bin_width in 1u32..6,
    ) {
        let questions: Vec<String> = lengths.iter().map(|&l| vec!["x"; l].join(" ")).collect();
        let h = question_length_histogram(&questions, bin_width).unwrap();
        prop_assert_eq!(h.total(), lengths.len() as u64);
        prop_assert_eq!(h.bin_edges.len(), h.counts.len() + 1);
    }

    #[test]
    fn tokens_are_lowercase_and_trimmed(text in "[ -~é]{0,60}") {
        for t in tokenize(&text) {
            prop_assert!(!t.is_empty());
            prop_assert_eq!(t.to_lowercase(), t.clone());
            prop_assert!(t.chars().next().unwrap().is_alphanumeric());
            prop_assert!(t.chars().last().unwrap().is_alphanumeric());
        }
    }

    #[test]
    fn mock_output_parses_to_requested_count(seed in any::<u64>(), n in 1usize..8) {
        let context = common::synthetic_squad(seed, 1);
        let ds = qgen::corpus::parse_squad_bytes(context.as_bytes()).unwrap();
        let prompt = render_prompt(&PromptId::C.template(), &ds.records[0].text);
        let backend = MockBackend::new(seed, n);
        let request = BackendRequest { prompt, temperature: 0.5, max_tokens: 256 };
        let text = backend.complete(&request).unwrap().text;
        prop_assert_eq!(&text, &backend.complete(&request).unwrap().text);
        prop_assert_eq!(parse_questions(&text, n).unwrap().questions.len(), n);
    }
}

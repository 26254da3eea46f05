//! Lexicon-based message sentiment and the daily sentiment index.
//!
//! Sentiment lexicon files have a `term,weight` header with weights in
//! `[-1, 1]`. A message scores the mean weight over every sentiment-term
//! occurrence in it (0 when nothing matches).

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Message, Table};
use crate::lexicon::{tokenize, PhraseTrie, MAX_PHRASE_TOKENS};

pub const DEFAULT_SIGN_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentLexiconEntry {
    pub term: Vec<String>,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    entries: Vec<SentimentLexiconEntry>,
    trie: PhraseTrie<f64>,
}

impl SentimentLexicon {
    pub fn from_entries(entries: Vec<SentimentLexiconEntry>) -> Result<Self> {
        let mut seen: HashMap<&[String], f64> = HashMap::new();
        for e in &entries {
            if e.term.is_empty() || e.term.len() > MAX_PHRASE_TOKENS {
                return Err(Error::Data(format!(
                    "sentiment term {:?} must have 1..={MAX_PHRASE_TOKENS} tokens",
                    e.term
                )));
            }
            if !e.weight.is_finite() || !(-1.0..=1.0).contains(&e.weight) {
                return Err(Error::Data(format!(
                    "sentiment weight {} for {:?} outside [-1, 1]",
                    e.weight,
                    e.term.join(" ")
                )));
            }
            if seen.insert(&e.term, e.weight).is_some() {
                return Err(Error::Data(format!(
                    "duplicate sentiment term {:?}",
                    e.term.join(" ")
                )));
            }
        }
        let mut trie = PhraseTrie::new();
        for e in &entries {
            trie.insert(&e.term, e.weight);
        }
        Ok(SentimentLexicon { entries, trie })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(Table::open_with(path, true)?)
    }

    pub fn load_from<R: Read>(reader: R, source: &str) -> Result<Self> {
        Self::parse(Table::from_reader_with(reader, source, true)?)
    }

    fn parse<R: Read>(mut table: Table<R>) -> Result<Self> {
        if table.is_empty_file() {
            return Self::from_entries(Vec::new());
        }
        let c_term = table.column("term")?;
        let c_weight = table.column("weight")?;
        let source = table.source().to_string();
        let mut entries = Vec::new();
        for item in table.records() {
            let (line, rec) = item?;
            let raw = rec.get(c_weight).unwrap_or("").trim();
            let weight: f64 = raw
                .parse()
                .map_err(|_| Error::Data(format!("{source}:{line}: bad weight {raw:?}")))?;
            entries.push(SentimentLexiconEntry {
                term: tokenize(rec.get(c_term).unwrap_or("")),
                weight,
            });
        }
        Self::from_entries(entries).map_err(|e| Error::Data(format!("{source}: {e}")))
    }

    pub fn entries(&self) -> &[SentimentLexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        self.trie.for_each_match(tokens, |_, _, &w| {
            sum += w;
            n += 1;
        });
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Mean weight of matched sentiment terms, 0.0 when none match.
pub fn score_message(message: &Message, lexicon: &SentimentLexicon) -> f64 {
    lexicon.score_tokens(&tokenize(&message.text))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Positive,
}

impl Sign {
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Negative => "negative",
            Sign::Positive => "positive",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negative" | "neg" => Ok(Sign::Negative),
            "positive" | "pos" => Ok(Sign::Positive),
            other => Err(format!("unknown sentiment sign {other:?}")),
        }
    }
}

/// Positive iff `score >= threshold`. Weak indices below the threshold,
/// including small positive ones, count as negative.
pub fn classify_sign(score: f64, threshold: f64) -> Sign {
    if score >= threshold {
        Sign::Positive
    } else {
        Sign::Negative
    }
}

/// Mean sentiment of one (firm, node, trading day) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailySentiment {
    pub score: f64,
    pub message_count: u32,
}

/// Mean of the message scores; `None` for an empty day.
pub fn daily_sentiment(scores: &[f64]) -> Option<DailySentiment> {
    if scores.is_empty() {
        return None;
    }
    Some(DailySentiment {
        score: scores.iter().sum::<f64>() / scores.len() as f64,
        message_count: scores.len() as u32,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lex() -> SentimentLexicon {
        SentimentLexicon::load_from(
            "term,weight\ngreat,0.8\nweak,-0.2\nfraud,-1.0\nnot good,-0.5\n".as_bytes(),
            "s",
        )
        .unwrap()
    }

    fn score(text: &str) -> f64 {
        lex().score_tokens(&tokenize(text))
    }

    #[test]
    fn mean_of_matched_weights() {
        assert_abs_diff_eq!(score("great quarter but weak guidance"), 0.3, epsilon = 1e-15);
        assert_eq!(score("nothing to see"), 0.0);
        assert_eq!(score("FRAUD!"), -1.0);
    }

    #[test]
    fn repeated_terms_count_each_time() {
        assert_abs_diff_eq!(score("great great weak"), (0.8 + 0.8 - 0.2) / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn daily_mean() {
        let d = daily_sentiment(&[0.3, -0.5]).unwrap();
        assert_abs_diff_eq!(d.score, -0.1, epsilon = 1e-15);
        assert_eq!(d.message_count, 2);
        assert_eq!(daily_sentiment(&[0.2]).unwrap().score, 0.2);
        assert!(daily_sentiment(&[]).is_none());
    }

    #[test]
    fn sign_threshold() {
        assert_eq!(classify_sign(0.04, DEFAULT_SIGN_THRESHOLD), Sign::Negative);
        assert_eq!(classify_sign(0.05, DEFAULT_SIGN_THRESHOLD), Sign::Positive);
        assert_eq!(classify_sign(-0.3, DEFAULT_SIGN_THRESHOLD), Sign::Negative);
    }

    #[test]
    fn threshold_sweep_around_zero() {
        let scores = [-0.2, -0.01, 0.0, 0.03, 0.05, 0.07, 0.1, 0.4];
        let mut prev_positive = usize::MAX;
        for t in [0.0, 0.05, 0.1] {
            let positive = scores
                .iter()
                .filter(|&&s| classify_sign(s, t) == Sign::Positive)
                .count();
            assert!(positive <= prev_positive, "raising the threshold adds positives");
            prev_positive = positive;
        }
        assert_eq!(classify_sign(0.0, 0.0), Sign::Positive);
        assert_eq!(classify_sign(0.07, 0.1), Sign::Negative);
    }

    #[test]
    fn invalid_lexicons() {
        assert!(SentimentLexicon::load_from("term,weight\nbad,1.5\n".as_bytes(), "s").is_err());
        assert!(SentimentLexicon::load_from("term,weight\nbad,-0.5\nBAD,-0.4\n".as_bytes(), "s").is_err());
        assert!(SentimentLexicon::load_from("term,weight\nbad,abc\n".as_bytes(), "s").is_err());
    }

    proptest! {
        #[test]
        fn score_is_bounded(
            weights in prop::collection::vec(-1.0f64..=1.0, 1..6),
            picks in prop::collection::vec(0usize..6, 0..30),
        ) {
            let entries = weights
                .iter()
                .enumerate()
                .map(|(i, &w)| SentimentLexiconEntry { term: vec![format!("w{i}")], weight: w })
                .collect();
            let lex = SentimentLexicon::from_entries(entries).unwrap();
            let tokens: Vec<String> = picks.iter().map(|p| format!("w{p}")).collect();
            let s = lex.score_tokens(&tokens);
            prop_assert!((-1.0..=1.0).contains(&s));
        }

        #[test]
        fn daily_mean_ignores_order(mut scores in prop::collection::vec(-1.0f64..=1.0, 1..40)) {
            let a = daily_sentiment(&scores).unwrap().score;
            scores.reverse();
            let b = daily_sentiment(&scores).unwrap().score;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn sign_is_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, t in -0.2f64..0.2) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(classify_sign(lo, t) <= classify_sign(hi, t));
        }
    }
}

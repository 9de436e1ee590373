use std::collections::HashSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::Dataset;

static ENGLISH_TOP_WORDS: &str = include_str!("../../data/english_top1000.txt");

/// Decides whether a review is written in English.
pub trait LanguageFilter: Send + Sync {
    fn accepts(&self, text: &str) -> bool;
}

/// Word-list heuristic for English.
///
/// A text passes when at least 10% of its word tokens (and at least one)
/// are among the 1,000 most frequent English words, or when it has at most
/// three tokens and all of them are ASCII-alphabetic. Word tokens are
/// maximal runs of alphanumeric characters, lowercased.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnglishHeuristic;

impl EnglishHeuristic {
    pub const MIN_SHARE: f64 = 0.10;
    pub const SHORT_TEXT_TOKENS: usize = 3;

    fn words() -> &'static HashSet<&'static str> {
        static WORDS: OnceLock<HashSet<&'static str>> = OnceLock::new();
        WORDS.get_or_init(|| {
            ENGLISH_TOP_WORDS
                .lines()
                .map(str::trim)
                .filter(|w| !w.is_empty())
                .collect()
        })
    }

    pub fn is_common_word(word: &str) -> bool {
        Self::words().contains(word)
    }
}

impl LanguageFilter for EnglishHeuristic {
    fn accepts(&self, text: &str) -> bool {
        let tokens: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_lowercase)
            .collect();
        if tokens.is_empty() {
            return false;
        }
        let hits = tokens
            .iter()
            .filter(|t| Self::is_common_word(t.as_str()))
            .count();
        if hits >= 1 && hits as f64 >= Self::MIN_SHARE * tokens.len() as f64 {
            return true;
        }
        tokens.len() <= Self::SHORT_TEXT_TOKENS
            && tokens
                .iter()
                .all(|t| t.chars().all(|c| c.is_ascii_alphabetic()))
    }
}

/// Case-folds and collapses whitespace; two reviews are duplicates when
/// their normalised texts are equal.
pub fn normalize_for_dedup(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when the text has at least two consecutive alphabetic characters.
pub fn has_word(text: &str) -> bool {
    let mut previous_alpha = false;
    for c in text.chars() {
        let alpha = c.is_alphabetic();
        if alpha && previous_alpha {
            return true;
        }
        previous_alpha = alpha;
    }
    false
}

/// Per-rule removal counts of one preprocessing pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub input: usize,
    pub duplicates: usize,
    pub non_english: usize,
    pub no_words: usize,
    pub retained: usize,
}

impl std::fmt::Display for PreprocessStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "input={} duplicates={} non_english={} no_words={} retained={}",
            self.input, self.duplicates, self.non_english, self.no_words, self.retained
        )
    }
}

/// Removes reviews without words, non-English reviews and duplicates, in
/// that order. Duplicates are detected among the reviews that survive the
/// first two rules; the first occurrence is kept.
pub struct Preprocessor {
    language: Box<dyn LanguageFilter>,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Preprocessor::new(Box::new(EnglishHeuristic))
    }
}

impl Preprocessor {
    pub fn new(language: Box<dyn LanguageFilter>) -> Preprocessor {
        Preprocessor { language }
    }

    pub fn run(&self, dataset: &Dataset) -> (Dataset, PreprocessStats) {
        let mut stats = PreprocessStats {
            input: dataset.len(),
            ..PreprocessStats::default()
        };
        let mut seen = HashSet::new();
        let kept = dataset.filter(dataset.name(), |review| {
            if !has_word(&review.text) {
                stats.no_words += 1;
                false
            } else if !self.language.accepts(&review.text) {
                stats.non_english += 1;
                false
            } else if !seen.insert(normalize_for_dedup(&review.text)) {
                stats.duplicates += 1;
                false
            } else {
                true
            }
        });
        stats.retained = kept.len();
        (kept, stats)
    }
}

/// [`Preprocessor::run`] with the default English heuristic.
pub fn preprocess(dataset: &Dataset) -> (Dataset, PreprocessStats) {
    Preprocessor::default().run(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Agreement, KanoLabel, Review};

    fn dataset(texts: &[&str]) -> Dataset {
        let reviews = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Review {
                id: i.to_string(),
                text: t.to_string(),
                label: KanoLabel::ALL[i % 4],
                agreement: Agreement::Unknown,
                source: "t".into(),
            })
            .collect();
        Dataset::new("t", reviews).unwrap()
    }

    #[test]
    fn word_list_has_one_thousand_entries() {
        let words = EnglishHeuristic::words();
        assert_eq!(words.len(), 1000);
        assert!(EnglishHeuristic::is_common_word("the"));
    }

    #[test]
    fn identical_texts_keep_first() {
        let (out, stats) = preprocess(&dataset(&["The app is great", "the  APP is great"]));
        assert_eq!(out.len(), 1);
        assert_eq!(out.reviews()[0].id, "0");
        assert_eq!(stats.duplicates, 1);
    }

    #[test]
    fn symbols_only_removed() {
        let (out, stats) = preprocess(&dataset(&["!!!! ???? 123"]));
        assert!(out.is_empty());
        assert_eq!(stats.no_words, 1);
        assert!(!has_word("a 1 b 2"));
        assert!(has_word("ok"));
    }

    #[test]
    fn ten_review_fixture() {
        // Hand-applied: r1 and r4 repeat r0 and r2; r3 has no word.
        let texts = [
            "This app keeps crashing when I open it",
            "this app keeps   crashing when I open it",
            "Please add a dark mode, it would be great",
            "!!! ??? 42",
            "PLEASE ADD A DARK MODE, IT WOULD BE GREAT",
            "The sync is so slow that I gave up",
            "I love the new widgets",
            "Cannot log in since the last update",
            "Works fine",
            "Battery drain is terrible after the update",
        ];
        let (out, stats) = preprocess(&dataset(&texts));
        assert_eq!(out.len(), 7);
        assert_eq!(
            stats,
            PreprocessStats {
                input: 10,
                duplicates: 2,
                non_english: 0,
                no_words: 1,
                retained: 7
            }
        );
        let ids: Vec<&str> = out.reviews().iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, vec!["0", "2", "5", "6", "7", "8", "9"]);
    }

    #[test]
    fn english_heuristic_cases() {
        let h = EnglishHeuristic;
        assert!(h.accepts("The app crashes every time"));
        assert!(h.accepts("Superb"));
        assert!(!h.accepts("Ständig Abstürze, sehr ärgerlich und nervig geworden"));
        assert!(!h.accepts("Ça plante tout le temps depuis la mise à jour, vraiment nul"));
        assert!(!h.accepts("アプリが落ちる"));
        assert!(!h.accepts(""));
    }

    #[test]
    fn pluggable_language_filter() {
        struct RejectAll;
        impl LanguageFilter for RejectAll {
            fn accepts(&self, _: &str) -> bool {
                false
            }
        }
        let (out, stats) =
            Preprocessor::new(Box::new(RejectAll)).run(&dataset(&["hello there", "!!"]));
        assert!(out.is_empty());
        assert_eq!(stats.non_english, 1);
        assert_eq!(stats.no_words, 1);
    }

    #[test]
    fn idempotent_on_fixture() {
        let d = dataset(&[
            "Great app",
            "great app",
            "??",
            "Ganz schlecht leider, funktioniert nicht mehr richtig",
            "Slow sync",
        ]);
        let (once, _) = preprocess(&d);
        let (twice, stats) = preprocess(&once);
        assert_eq!(once, twice);
        assert_eq!(stats.retained, stats.input);
    }
}

//! Tokenisation, stop words and tf-idf weighting.
//!
//! Weighting used throughout:
//!
//! - `tf(t, d)` is the raw number of occurrences of `t` in `d`;
//! - `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, with `N` the number of
//!   training reviews and `df(t)` the number of reviews containing `t`.
//!
//! A class profile treats all training reviews of one label as a single
//! aggregate document, while `df` and `N` are counted over single reviews.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{Dataset, KanoLabel};

static STOPWORDS_EN: &str = include_str!("../data/stopwords_en.txt");

/// Tag stored with serialised models.
pub const FORMULA_TAG: &str = "tf=raw-count;idf=ln((1+N)/(1+df))+1";

#[derive(Debug, Error)]
pub enum TextError {
    #[error("training corpus has no terms after tokenisation and stop-word removal")]
    EmptyCorpus,
    #[error("model was built with {found}, expected {expected}")]
    Incompatible { expected: String, found: String },
    #[error("model document is inconsistent: {0}")]
    Invalid(String),
}

/// Lowercased maximal runs of alphanumeric characters; runs shorter than two
/// characters are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|run| run.chars().nth(1).is_some())
        .map(str::to_lowercase)
        .collect()
}

fn stopword_set() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| {
        STOPWORDS_EN
            .lines()
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .collect()
    })
}

pub fn is_stopword(token: &str) -> bool {
    stopword_set().contains(token)
}

/// The bundled English stop-word list, one word per line.
pub fn stopwords() -> impl Iterator<Item = &'static str> {
    STOPWORDS_EN.lines().filter(|w| !w.is_empty())
}

/// Hex SHA-256 of the bundled stop-word file.
pub fn stopword_list_hash() -> String {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        Sha256::digest(STOPWORDS_EN.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    })
    .clone()
}

pub fn remove_stopwords(tokens: Vec<String>) -> Vec<String> {
    tokens.into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Tokenise and drop stop words.
pub fn analyze(text: &str) -> Vec<String> {
    remove_stopwords(tokenize(text))
}

fn idf_of(n_docs: usize, df: u32) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + f64::from(df))).ln() + 1.0
}

/// Sorted term list with document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<u32>,
    n_docs: usize,
    index: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl Vocabulary {
    fn from_parts(terms: Vec<String>, df: Vec<u32>, n_docs: usize) -> Vocabulary {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let idf = df.iter().map(|&d| idf_of(n_docs, d)).collect();
        Vocabulary {
            terms,
            df,
            n_docs,
            index,
            idf,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn df(&self, index: usize) -> u32 {
        self.df[index]
    }

    pub fn idf(&self, index: usize) -> f64 {
        self.idf[index]
    }
}

/// Sparse tf-idf vector of one review, entries sorted by term index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReviewVector {
    pub entries: Vec<(usize, f64)>,
}

impl ReviewVector {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0.0)
    }
}

/// Fitted vocabulary plus per-label aggregated tf-idf profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDocument", into = "ModelDocument")]
pub struct TfIdfModel {
    vocabulary: Vocabulary,
    /// `profiles[label][term]`
    profiles: Vec<Vec<f64>>,
    normalize: bool,
}

impl TfIdfModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn profile(&self, label: KanoLabel) -> &[f64] {
        &self.profiles[label.index()]
    }

    pub fn normalizes(&self) -> bool {
        self.normalize
    }

    pub fn with_normalization(mut self, normalize: bool) -> TfIdfModel {
        self.normalize = normalize;
        self
    }

    /// Multiplies every class profile by `factor`.
    pub fn scale_profiles(&mut self, factor: f64) {
        for profile in &mut self.profiles {
            for w in profile.iter_mut() {
                *w *= factor;
            }
        }
    }

    /// Term frequencies of `tokens`, keyed by vocabulary index, ascending.
    /// Out-of-vocabulary tokens are skipped.
    pub fn term_counts(&self, tokens: &[String]) -> BTreeMap<usize, u32> {
        let mut counts = BTreeMap::new();
        for token in tokens {
            if let Some(i) = self.vocabulary.index_of(token) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn vectorize(&self, text: &str) -> ReviewVector {
        self.vectorize_tokens(&analyze(text))
    }

    pub fn vectorize_tokens(&self, tokens: &[String]) -> ReviewVector {
        let mut entries: Vec<(usize, f64)> = self
            .term_counts(tokens)
            .into_iter()
            .map(|(i, c)| (i, f64::from(c) * self.vocabulary.idf(i)))
            .collect();
        if self.normalize {
            let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, w) in &mut entries {
                    *w /= norm;
                }
            }
        }
        ReviewVector { entries }
    }
}

/// Fits vocabulary, document frequencies and class profiles on `train`.
/// Review vectors are L2-normalised by default.
pub fn fit(train: &Dataset) -> Result<TfIdfModel, TextError> {
    let analyzed: Vec<Vec<String>> = train.reviews().iter().map(|r| analyze(&r.text)).collect();

    let mut df_by_term: BTreeMap<&str, u32> = BTreeMap::new();
    for tokens in &analyzed {
        let distinct: HashSet<&str> = tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *df_by_term.entry(t).or_insert(0) += 1;
        }
    }
    if df_by_term.is_empty() {
        return Err(TextError::EmptyCorpus);
    }
    let terms: Vec<String> = df_by_term.keys().map(|t| t.to_string()).collect();
    let df: Vec<u32> = df_by_term.values().copied().collect();
    let vocabulary = Vocabulary::from_parts(terms, df, train.len());

    let mut counts = vec![vec![0u64; vocabulary.len()]; KanoLabel::COUNT];
    for (review, tokens) in train.reviews().iter().zip(&analyzed) {
        let row = &mut counts[review.label.index()];
        for t in tokens {
            row[vocabulary.index_of(t).expect("term was indexed")] += 1;
        }
    }
    let profiles = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .map(|(i, c)| c as f64 * vocabulary.idf(i))
                .collect()
        })
        .collect();
    Ok(TfIdfModel {
        vocabulary,
        profiles,
        normalize: true,
    })
}

/// Serialised form of [`TfIdfModel`].
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    formula: String,
    stopwords_sha256: String,
    n_docs: usize,
    normalize: bool,
    terms: Vec<String>,
    df: Vec<u32>,
    /// Label names in code order; one profile row each.
    labels: Vec<String>,
    profiles: Vec<Vec<f64>>,
}

impl From<TfIdfModel> for ModelDocument {
    fn from(m: TfIdfModel) -> Self {
        ModelDocument {
            formula: FORMULA_TAG.to_string(),
            stopwords_sha256: stopword_list_hash(),
            n_docs: m.vocabulary.n_docs,
            normalize: m.normalize,
            terms: m.vocabulary.terms,
            df: m.vocabulary.df,
            labels: KanoLabel::ALL
                .iter()
                .map(|l| l.name().to_string())
                .collect(),
            profiles: m.profiles,
        }
    }
}

impl TryFrom<ModelDocument> for TfIdfModel {
    type Error = TextError;

    fn try_from(doc: ModelDocument) -> Result<Self, Self::Error> {
        if doc.formula != FORMULA_TAG {
            return Err(TextError::Incompatible {
                expected: FORMULA_TAG.into(),
                found: doc.formula,
            });
        }
        let hash = stopword_list_hash();
        if doc.stopwords_sha256 != hash {
            return Err(TextError::Incompatible {
                expected: format!("stop words {hash}"),
                found: format!("stop words {}", doc.stopwords_sha256),
            });
        }
        let names: Vec<&str> = KanoLabel::ALL.iter().map(|l| l.name()).collect();
        if doc.labels != names {
            return Err(TextError::Invalid(format!("label order {:?}", doc.labels)));
        }
        if doc.terms.len() != doc.df.len()
            || doc.profiles.len() != KanoLabel::COUNT
            || doc.profiles.iter().any(|p| p.len() != doc.terms.len())
        {
            return Err(TextError::Invalid("table lengths differ".into()));
        }
        if doc.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TextError::Invalid("terms are not sorted and unique".into()));
        }
        if doc.df.iter().any(|&d| d == 0 || d as usize > doc.n_docs) {
            return Err(TextError::Invalid(
                "document frequency outside [1, N]".into(),
            ));
        }
        Ok(TfIdfModel {
            vocabulary: Vocabulary::from_parts(doc.terms, doc.df, doc.n_docs),
            profiles: doc.profiles,
            normalize: doc.normalize,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Agreement, Review};

    fn corpus(items: &[(&str, KanoLabel)]) -> Dataset {
        let reviews = items
            .iter()
            .enumerate()
            .map(|(i, (t, l))| Review {
                id: i.to_string(),
                text: t.to_string(),
                label: *l,
                agreement: Agreement::Unknown,
                source: "t".into(),
            })
            .collect();
        Dataset::new("t", reviews).unwrap()
    }

    #[test]
    fn tokenizer_examples() {
        assert_eq!(
            tokenize("App crashes ALWAYS!!"),
            vec!["app", "crashes", "always"]
        );
        assert_eq!(tokenize("I <3 it"), vec!["it"]);
        assert_eq!(
            tokenize("easy-to-use UI2"),
            vec!["easy", "to", "use", "ui2"]
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("Ärger über Ünïcode"),
            vec!["ärger", "über", "ünïcode"]
        );
    }

    #[test]
    fn stopword_examples() {
        let toks = |s: &[&str]| s.iter().map(|t| t.to_string()).collect::<Vec<_>>();
        assert_eq!(
            remove_stopwords(toks(&["the", "app", "is", "great"])),
            toks(&["app", "great"])
        );
        assert!(remove_stopwords(Vec::new()).is_empty());
    }

    #[test]
    fn stopword_sentence_matches_set_difference() {
        let sentence = "i really think that the new version of this app is much slower than the old one and it keeps crashing";
        let tokens = tokenize(sentence);
        assert_eq!(tokens.len(), 20);
        // Oracle: set difference against the list as read from disk.
        let list: HashSet<String> = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/data/stopwords_en.txt"
        ))
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect();
        let expected: Vec<String> = tokens
            .iter()
            .filter(|t| !list.contains(*t))
            .cloned()
            .collect();
        assert_eq!(remove_stopwords(tokens), expected);
        assert_eq!(
            expected,
            vec!["really", "think", "new", "version", "app", "slower", "old", "keeps", "crashing"]
        );
    }

    #[test]
    fn stopword_list_is_pinned() {
        assert_eq!(stopwords().count(), 318);
        assert_eq!(
            stopword_list_hash(),
            "4e22be0ad71ae1c41dd7a8f944e851ead671d114edf4faad1ee8c698d2ba5084"
        );
    }

    #[test]
    fn single_occurrence_term_weight() {
        let d = corpus(&[
            ("crash", KanoLabel::Basic),
            ("slow", KanoLabel::Performance),
        ]);
        let m = fit(&d).unwrap();
        let i = m.vocabulary().index_of("crash").unwrap();
        let expected = (3.0f64 / 2.0).ln() + 1.0;
        assert!((m.profile(KanoLabel::Basic)[i] - expected).abs() < 1e-15);
        assert!((expected - 1.4055).abs() < 1e-4);
        assert_eq!(m.profile(KanoLabel::Performance)[i], 0.0);
    }

    #[test]
    fn ubiquitous_term_has_unit_idf() {
        let d = corpus(&[
            ("app crash", KanoLabel::Basic),
            ("app app slow", KanoLabel::Performance),
        ]);
        let m = fit(&d).unwrap();
        let i = m.vocabulary().index_of("app").unwrap();
        assert_eq!(m.vocabulary().idf(i), 1.0);
        assert_eq!(m.profile(KanoLabel::Performance)[i], 2.0);
    }

    #[test]
    fn empty_corpus_rejected() {
        let d = corpus(&[
            ("the and of", KanoLabel::Basic),
            ("!!", KanoLabel::Delighter),
        ]);
        assert!(matches!(fit(&d), Err(TextError::EmptyCorpus)));
    }

    #[test]
    fn vectorize_cases() {
        let d = corpus(&[
            ("crash login", KanoLabel::Basic),
            ("slow sync", KanoLabel::Performance),
        ]);
        let m = fit(&d).unwrap();
        assert!(m.vectorize("wonderful unicorn").is_zero());
        let v = m.vectorize("crash");
        assert_eq!(v.entries.len(), 1);
        assert_eq!(v.entries[0].1, 1.0);
        let raw = m.clone().with_normalization(false).vectorize("crash crash");
        assert!((raw.entries[0].1 - 2.0 * ((1.5f64).ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn model_document_round_trip() {
        let d = corpus(&[
            ("crash login", KanoLabel::Basic),
            ("slow sync crash", KanoLabel::Performance),
        ]);
        let m = fit(&d).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains(FORMULA_TAG));
        let back: TfIdfModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let tampered = json.replace(FORMULA_TAG, "tf=log");
        assert!(serde_json::from_str::<TfIdfModel>(&tampered).is_err());
    }
}

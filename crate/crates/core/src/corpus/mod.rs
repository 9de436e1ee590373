//! Labelled app-review datasets.

mod ingest;
mod preprocess;
mod sampling;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use ingest::{ingest, read_jsonl, write_jsonl, InputFormat, Mapping};
pub use preprocess::{
    has_word, normalize_for_dedup, preprocess, EnglishHeuristic, LanguageFilter, PreprocessStats,
    Preprocessor,
};
pub use sampling::{make_folds, undersample, FoldPlan, FoldStrategy};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} contains no records")]
    EmptyFile { path: String },
    #[error("record {record}: malformed input: {message}")]
    Malformed { record: usize, message: String },
    #[error("record {record}: missing field `{field}`")]
    MissingField { record: usize, field: String },
    #[error("record {record}: label value `{value}` does not map onto a Kano label")]
    UnmappedLabel { record: usize, value: String },
    #[error("record {record}: agreement value `{value}` is not recognised")]
    UnmappedAgreement { record: usize, value: String },
    #[error("duplicate review id `{0}`")]
    DuplicateId(String),
    #[error("invalid mapping file {path}: {message}")]
    Mapping { path: String, message: String },
    #[error("label `{0}` is absent from the dataset")]
    MissingLabel(KanoLabel),
    #[error("cannot split {size} reviews into {k} folds")]
    InvalidFolds { k: usize, size: usize },
}

/// The four Kano factors, with fixed numeric codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KanoLabel {
    Basic = 0,
    Performance = 1,
    Delighter = 2,
    Irrelevant = 3,
}

impl KanoLabel {
    pub const ALL: [KanoLabel; 4] = [
        KanoLabel::Basic,
        KanoLabel::Performance,
        KanoLabel::Delighter,
        KanoLabel::Irrelevant,
    ];
    pub const COUNT: usize = 4;

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<KanoLabel> {
        KanoLabel::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            KanoLabel::Basic => "basic",
            KanoLabel::Performance => "performance",
            KanoLabel::Delighter => "delighter",
            KanoLabel::Irrelevant => "irrelevant",
        }
    }
}

impl fmt::Display for KanoLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the lowercase names (case-insensitively) or the codes `0`..`3`.
impl FromStr for KanoLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(code) = s.parse::<u8>() {
            return KanoLabel::from_code(code).ok_or_else(|| s.to_string());
        }
        KanoLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| s.to_string())
    }
}

impl Serialize for KanoLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for KanoLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u8::deserialize(deserializer)?;
        KanoLabel::from_code(code).ok_or_else(|| {
            serde::de::Error::custom(format!("label code {code} out of range 0..=3"))
        })
    }
}

/// Whether the gold label was assigned unanimously by the first two labelers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Agreement {
    Unanimous,
    TieBroken,
    #[default]
    Unknown,
}

impl FromStr for Agreement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unanimous" | "agreed" | "true" | "yes" | "1" => Ok(Agreement::Unanimous),
            "tiebroken" | "tie-broken" | "disagreed" | "false" | "no" | "0" => {
                Ok(Agreement::TieBroken)
            }
            "unknown" | "" => Ok(Agreement::Unknown),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub label: KanoLabel,
    #[serde(default)]
    pub agreement: Agreement,
    pub source: String,
}

/// An ordered collection of reviews with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    name: String,
    reviews: Vec<Review>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, reviews: Vec<Review>) -> Result<Dataset, CorpusError> {
        let mut seen = HashSet::with_capacity(reviews.len());
        for r in &reviews {
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Dataset {
            name: name.into(),
            reviews,
        })
    }

    /// Builds a subset from reviews already known to have unique ids.
    pub(crate) fn from_unique(name: impl Into<String>, reviews: Vec<Review>) -> Dataset {
        Dataset {
            name: name.into(),
            reviews,
        }
    }

    /// Concatenates datasets. Ids are namespaced as `source/id` so reviews
    /// from different files never collide.
    pub fn concat(name: impl Into<String>, parts: &[&Dataset]) -> Result<Dataset, CorpusError> {
        let reviews = parts
            .iter()
            .flat_map(|d| d.reviews.iter())
            .map(|r| Review {
                id: format!("{}/{}", r.source, r.id),
                ..r.clone()
            })
            .collect();
        Dataset::new(name, reviews)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    /// Review counts indexed by label code.
    pub fn label_counts(&self) -> [usize; KanoLabel::COUNT] {
        let mut counts = [0; KanoLabel::COUNT];
        for r in &self.reviews {
            counts[r.label.index()] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<KanoLabel> {
        self.reviews.iter().map(|r| r.label).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.reviews.iter().map(|r| r.text.as_str()).collect()
    }

    /// Picks reviews by position, preserving the given order.
    pub fn select(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        Dataset::from_unique(
            name,
            indices.iter().map(|&i| self.reviews[i].clone()).collect(),
        )
    }

    pub fn filter(
        &self,
        name: impl Into<String>,
        mut keep: impl FnMut(&Review) -> bool,
    ) -> Dataset {
        Dataset::from_unique(
            name,
            self.reviews.iter().filter(|r| keep(r)).cloned().collect(),
        )
    }

    /// Errors with the first label (by code) that has no review.
    pub fn require_all_labels(&self) -> Result<(), CorpusError> {
        let counts = self.label_counts();
        match KanoLabel::ALL.into_iter().find(|l| counts[l.index()] == 0) {
            Some(missing) => Err(CorpusError::MissingLabel(missing)),
            None => Ok(()),
        }
    }
}

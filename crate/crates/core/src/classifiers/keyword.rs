use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{argmax, ClassifierError};
use crate::corpus::{Dataset, KanoLabel};
use crate::textproc::{self, TfIdfModel};

/// How a review's terms enter the per-label score sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermSemantics {
    /// Each distinct in-vocabulary term counts once.
    #[default]
    Distinct,
    /// Each occurrence counts.
    Multiplicity,
}

/// Scores a review per label by summing the label's aggregated tf-idf
/// profile over the review's terms and returns the best-scoring label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordClassifier {
    model: TfIdfModel,
    #[serde(default)]
    semantics: TermSemantics,
}

pub fn train_keyword(
    train: &Dataset,
    semantics: TermSemantics,
) -> Result<KeywordClassifier, ClassifierError> {
    train.require_all_labels()?;
    let model = textproc::fit(train)?;
    Ok(KeywordClassifier { model, semantics })
}

impl KeywordClassifier {
    pub fn from_model(model: TfIdfModel, semantics: TermSemantics) -> KeywordClassifier {
        KeywordClassifier { model, semantics }
    }

    pub fn model(&self) -> &TfIdfModel {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut TfIdfModel {
        &mut self.model
    }

    /// Per-label sums, indexed by label code.
    pub fn scores(&self, text: &str) -> [f64; KanoLabel::COUNT] {
        let tokens = textproc::analyze(text);
        let counts = self.model.term_counts(&tokens);
        let mut sums = [0.0; KanoLabel::COUNT];
        for label in KanoLabel::ALL {
            let profile = self.model.profile(label);
            sums[label.index()] = match self.semantics {
                TermSemantics::Distinct => counts.keys().map(|&i| profile[i]).sum(),
                TermSemantics::Multiplicity => counts
                    .iter()
                    .map(|(&i, &c)| f64::from(c) * profile[i])
                    .sum(),
            };
        }
        sums
    }

    pub fn predict(&self, text: &str) -> KanoLabel {
        argmax(&self.scores(text))
    }

    /// Distinct in-vocabulary terms of `text`, for inspection.
    pub fn matched_terms(&self, text: &str) -> BTreeSet<String> {
        textproc::analyze(text)
            .into_iter()
            .filter(|t| self.model.vocabulary().index_of(t).is_some())
            .collect()
    }
}

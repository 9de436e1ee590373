use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::classifiers::ClassifierSpec;
use crate::corpus::{self, Dataset, FoldStrategy, InputFormat, Mapping, PreprocessStats};

pub const STANIK: &str = "stanik";
pub const BRUNOTTE: &str = "brunotte";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// k-fold cross-validation on undersampled Stanik.
    Rq1,
    /// Train on undersampled Stanik, test on Brunotte.
    Rq2Cross,
    /// k-fold cross-validation on undersampled Stanik + Brunotte.
    Rq2Combined,
    /// Cross-dataset predictions split by initial labeler agreement.
    Rq3,
}

impl Protocol {
    pub fn title(self) -> &'static str {
        match self {
            Protocol::Rq1 => "Cross-validation on the undersampled Stanik dataset",
            Protocol::Rq2Cross => "Training on undersampled Stanik, testing on Brunotte",
            Protocol::Rq2Combined => "Cross-validation on the undersampled combined dataset",
            Protocol::Rq3 => "Accuracy on reviews with initial agreement vs. disagreement",
        }
    }

    pub fn required_datasets(self) -> &'static [&'static str] {
        match self {
            Protocol::Rq1 => &[STANIK],
            _ => &[STANIK, BRUNOTTE],
        }
    }

    pub fn uses_folds(self) -> bool {
        matches!(self, Protocol::Rq1 | Protocol::Rq2Combined)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Protocol::Rq1 => "rq1",
            Protocol::Rq2Cross => "rq2_cross",
            Protocol::Rq2Combined => "rq2_combined",
            Protocol::Rq3 => "rq3",
        })
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown protocol `{s}`"))
    }
}

/// Which Stanik reviews train the cross-dataset classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainingSet {
    #[default]
    Undersampled,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceFormat {
    Csv,
    Jsonl,
    /// Canonical JSON-lines (`id, text, label, agreement, source`).
    Canonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub path: PathBuf,
    pub format: SourceFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<PathBuf>,
    /// Skip the preprocessing pass (for already-cleaned files).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub preprocessed: bool,
}

/// Per-dataset counts recorded in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub raw_counts: [usize; 4],
    pub preprocess: Option<PreprocessStats>,
    pub counts: [usize; 4],
}

impl DatasetSource {
    pub fn load(&self) -> Result<(Dataset, DatasetSummary), ExperimentError> {
        let raw = match self.format {
            SourceFormat::Canonical => corpus::read_jsonl(&self.path)?,
            SourceFormat::Csv | SourceFormat::Jsonl => {
                let mapping = match &self.mapping {
                    Some(p) => Mapping::load(p)?,
                    None => Mapping::canonical(),
                };
                let format = if self.format == SourceFormat::Csv {
                    InputFormat::Csv
                } else {
                    InputFormat::Jsonl
                };
                corpus::ingest(&self.path, format, &mapping)?
            }
        };
        let raw_counts = raw.label_counts();
        let (data, stats) = if self.preprocessed {
            (raw, None)
        } else {
            let (d, s) = corpus::preprocess(&raw);
            (d, Some(s))
        };
        let summary = DatasetSummary {
            name: data.name().to_string(),
            raw_counts,
            preprocess: stats,
            counts: data.label_counts(),
        };
        Ok((data, summary))
    }
}

fn default_seed() -> u64 {
    42
}
fn default_runs() -> usize {
    5
}
fn default_k() -> usize {
    10
}
fn default_parallel() -> bool {
    true
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(default)]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    #[serde(default = "default_runs")]
    pub n_undersample_runs: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub fold_strategy: FoldStrategy,
    #[serde(default)]
    pub cross_training: TrainingSet,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetSource>,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol) -> ExperimentConfig {
        ExperimentConfig {
            protocol,
            classifiers: Vec::new(),
            base_seed: default_seed(),
            n_undersample_runs: default_runs(),
            k: default_k(),
            fold_strategy: FoldStrategy::default(),
            cross_training: TrainingSet::default(),
            parallel: default_parallel(),
            datasets: BTreeMap::new(),
        }
    }

    /// Reads a JSON config; relative dataset and mapping paths are resolved
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<ExperimentConfig, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for source in config.datasets.values_mut() {
            source.path = base.join(&source.path);
            if let Some(m) = &source.mapping {
                source.mapping = Some(base.join(m));
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.n_undersample_runs < 1 {
            return Err(ExperimentError::Config(
                "n_undersample_runs must be at least 1".into(),
            ));
        }
        if self.k < 2 {
            return Err(ExperimentError::Config("k must be at least 2".into()));
        }
        for spec in &self.classifiers {
            spec.validate()
                .map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        for name in self.protocol.required_datasets() {
            if !self.datasets.contains_key(*name) {
                return Err(ExperimentError::MissingDataset(name.to_string()));
            }
        }
        Ok(())
    }
}

//! Baseline classifiers and the uniform prediction contract.

mod keyword;
mod logreg;
mod optim;
mod remote;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::adapter::{AdapterError, Endpoint};
use crate::corpus::{CorpusError, Dataset, KanoLabel};
use crate::textproc::TextError;

pub use keyword::{train_keyword, KeywordClassifier, TermSemantics};
pub use logreg::{train_logreg, LogisticRegression, SoftmaxObjective, TrainingSummary};
pub use optim::{minimize_lbfgs, Minimum, Objective};
pub use remote::{adapter_train, RemoteClassifier, SharedClient};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("invalid classifier spec: {0}")]
    InvalidSpec(String),
    #[error("cannot persist classifier at {path}: {message}")]
    Persist { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Keyword,
    Logreg,
    Adapter,
}

impl FromStr for ClassifierKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keyword" => Ok(ClassifierKind::Keyword),
            "logreg" => Ok(ClassifierKind::Logreg),
            "adapter" => Ok(ClassifierKind::Adapter),
            other => Err(format!(
                "unknown classifier `{other}` (expected keyword, logreg or adapter)"
            )),
        }
    }
}

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Classifier kind plus free-form hyperparameters.
///
/// Recognised keys: `C`, `max_iter`, `tol`, `init_seed` (logreg);
/// `term_semantics` (keyword); `endpoint`, `timeout_secs`, `chunk_size`
/// (adapter). For adapters every other key is forwarded in the train
/// request's `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub hyperparameters: BTreeMap<String, Value>,
}

const ADAPTER_CLIENT_KEYS: [&str; 3] = ["endpoint", "timeout_secs", "chunk_size"];

impl ClassifierSpec {
    pub fn new(kind: ClassifierKind) -> ClassifierSpec {
        ClassifierSpec {
            kind,
            name: None,
            hyperparameters: BTreeMap::new(),
        }
    }

    pub fn keyword() -> ClassifierSpec {
        ClassifierSpec::new(ClassifierKind::Keyword)
    }

    pub fn logreg() -> ClassifierSpec {
        ClassifierSpec::new(ClassifierKind::Logreg)
    }

    pub fn adapter(endpoint: &str) -> ClassifierSpec {
        ClassifierSpec::new(ClassifierKind::Adapter).with("endpoint", endpoint)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> ClassifierSpec {
        self.hyperparameters.insert(key.to_string(), value.into());
        self
    }

    pub fn named(mut self, name: &str) -> ClassifierSpec {
        self.name = Some(name.to_string());
        self
    }

    pub fn display_name(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        match self.kind {
            ClassifierKind::Keyword => "Keyword-Driven".into(),
            ClassifierKind::Logreg => "Logistic Regression".into(),
            ClassifierKind::Adapter => format!(
                "Adapter ({})",
                self.string("endpoint").ok().flatten().unwrap_or_default()
            ),
        }
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ClassifierError> {
        match self.hyperparameters.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| {
                ClassifierError::InvalidSpec(format!("`{key}` must be a number, got {v}"))
            }),
        }
    }

    fn integer(&self, key: &str) -> Result<Option<u64>, ClassifierError> {
        match self.hyperparameters.get(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                ClassifierError::InvalidSpec(format!(
                    "`{key}` must be a non-negative integer, got {v}"
                ))
            }),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>, ClassifierError> {
        match self.hyperparameters.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(ClassifierError::InvalidSpec(format!(
                "`{key}` must be a string, got {v}"
            ))),
        }
    }

    /// Inverse regularisation strength.
    pub fn c(&self) -> Result<f64, ClassifierError> {
        let c = self.number("C")?.unwrap_or(DEFAULT_C);
        if c > 0.0 && c.is_finite() {
            Ok(c)
        } else {
            Err(ClassifierError::InvalidSpec(format!(
                "C must be positive, got {c}"
            )))
        }
    }

    pub fn max_iter(&self) -> Result<usize, ClassifierError> {
        let n = self.integer("max_iter")?.unwrap_or(DEFAULT_MAX_ITER as u64);
        if n >= 1 {
            Ok(n as usize)
        } else {
            Err(ClassifierError::InvalidSpec(
                "max_iter must be at least 1".into(),
            ))
        }
    }

    pub fn tol(&self) -> Result<f64, ClassifierError> {
        let tol = self.number("tol")?.unwrap_or(DEFAULT_TOL);
        if tol > 0.0 {
            Ok(tol)
        } else {
            Err(ClassifierError::InvalidSpec(format!(
                "tol must be positive, got {tol}"
            )))
        }
    }

    /// `None` means zero initialisation.
    pub fn init_seed(&self) -> Result<Option<u64>, ClassifierError> {
        self.integer("init_seed")
    }

    pub fn term_semantics(&self) -> Result<TermSemantics, ClassifierError> {
        match self.string("term_semantics")?.as_deref() {
            None | Some("distinct") => Ok(TermSemantics::Distinct),
            Some("multiplicity") => Ok(TermSemantics::Multiplicity),
            Some(other) => Err(ClassifierError::InvalidSpec(format!(
                "term_semantics must be distinct or multiplicity, got `{other}`"
            ))),
        }
    }

    pub fn endpoint(&self) -> Result<Endpoint, ClassifierError> {
        let raw = self.string("endpoint")?.ok_or_else(|| {
            ClassifierError::InvalidSpec("adapter spec needs an `endpoint`".into())
        })?;
        Ok(raw.parse()?)
    }

    pub fn timeout(&self) -> Result<Duration, ClassifierError> {
        Ok(self
            .number("timeout_secs")?
            .map(Duration::from_secs_f64)
            .unwrap_or(crate::adapter::DEFAULT_TIMEOUT))
    }

    pub fn chunk_size(&self) -> Result<usize, ClassifierError> {
        Ok(self
            .integer("chunk_size")?
            .map(|n| n as usize)
            .unwrap_or(crate::adapter::DEFAULT_CHUNK_SIZE))
    }

    /// Hyperparameters forwarded to an adapter's train request.
    pub fn adapter_params(&self) -> BTreeMap<String, Value> {
        self.hyperparameters
            .iter()
            .filter(|(k, _)| !ADAPTER_CLIENT_KEYS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        match self.kind {
            ClassifierKind::Keyword => {
                self.term_semantics()?;
            }
            ClassifierKind::Logreg => {
                self.c()?;
                self.max_iter()?;
                self.tol()?;
                self.init_seed()?;
            }
            ClassifierKind::Adapter => {
                self.endpoint()?;
                self.timeout()?;
                self.chunk_size()?;
            }
        }
        Ok(())
    }
}

/// Adapter connections shared by every classifier trained through one
/// context, keyed by endpoint string.
#[derive(Default)]
pub struct TrainingContext {
    clients: Mutex<HashMap<String, SharedClient>>,
}

impl TrainingContext {
    pub fn new() -> TrainingContext {
        TrainingContext::default()
    }

    pub fn client_for(&self, spec: &ClassifierSpec) -> Result<SharedClient, ClassifierError> {
        let endpoint = spec.endpoint()?;
        let key = endpoint.to_string();
        let mut clients = self.clients.lock().unwrap();
        if let Some(existing) = clients.get(&key) {
            return Ok(Arc::clone(existing));
        }
        let client = remote::connect(spec)?;
        clients.insert(key, Arc::clone(&client));
        Ok(client)
    }

    /// Sends a shutdown request to every adapter opened through this context.
    pub fn shutdown(&self) {
        for (endpoint, client) in self.clients.lock().unwrap().drain() {
            if let Some(c) = client.lock().unwrap().as_mut() {
                if let Err(e) = c.shutdown() {
                    log::warn!("adapter {endpoint} did not shut down cleanly: {e}");
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedState {
    Keyword(KeywordClassifier),
    LogisticRegression(LogisticRegression),
    Remote(RemoteClassifier),
}

/// A fitted predictor of any kind.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub spec: ClassifierSpec,
    pub state: FittedState,
}

pub fn train(
    spec: &ClassifierSpec,
    data: &Dataset,
    context: &TrainingContext,
) -> Result<TrainedClassifier, ClassifierError> {
    spec.validate()?;
    let state = match spec.kind {
        ClassifierKind::Keyword => {
            FittedState::Keyword(train_keyword(data, spec.term_semantics()?)?)
        }
        ClassifierKind::Logreg => FittedState::LogisticRegression(train_logreg(data, spec)?),
        ClassifierKind::Adapter => {
            FittedState::Remote(adapter_train(context.client_for(spec)?, spec, data)?)
        }
    };
    Ok(TrainedClassifier {
        spec: spec.clone(),
        state,
    })
}

impl TrainedClassifier {
    pub fn name(&self) -> String {
        self.spec.display_name()
    }

    pub fn predict(&self, text: &str) -> Result<KanoLabel, ClassifierError> {
        match &self.state {
            FittedState::Keyword(k) => Ok(k.predict(text)),
            FittedState::LogisticRegression(lr) => Ok(lr.predict(text)),
            FittedState::Remote(r) => Ok(r.predict(&[text])?[0]),
        }
    }

    /// Labels for `texts` in order. Remote classifiers send batched requests.
    pub fn predict_batch(&self, texts: &[&str]) -> Result<Vec<KanoLabel>, ClassifierError> {
        match &self.state {
            FittedState::Remote(r) => Ok(r.predict(texts)?),
            _ => texts.iter().map(|t| self.predict(t)).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        let persist = |message: String| ClassifierError::Persist {
            path: path.display().to_string(),
            message,
        };
        let json = serde_json::to_string(self).map_err(|e| persist(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| persist(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedClassifier, ClassifierError> {
        let path = path.as_ref();
        let persist = |message: String| ClassifierError::Persist {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| persist(e.to_string()))?;
        let classifier: TrainedClassifier =
            serde_json::from_str(&text).map_err(|e| persist(e.to_string()))?;
        if let FittedState::LogisticRegression(lr) = &classifier.state {
            lr.check_shape().map_err(persist)?;
        }
        Ok(classifier)
    }
}

impl fmt::Display for TrainedClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Index of the largest score; ties go to the lowest label code.
pub(crate) fn argmax(scores: &[f64; KanoLabel::COUNT]) -> KanoLabel {
    let mut best = 0;
    for k in 1..KanoLabel::COUNT {
        if scores[k] > scores[best] {
            best = k;
        }
    }
    KanoLabel::ALL[best]
}

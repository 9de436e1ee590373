use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ClassifierError, ClassifierSpec};
use crate::adapter::{AdapterClient, AdapterError};
use crate::corpus::{Dataset, KanoLabel};

/// Connection slot shared between the classifiers trained on one adapter.
/// `None` until first use for classifiers loaded from disk.
pub type SharedClient = Arc<Mutex<Option<AdapterClient>>>;

pub(super) fn connect(spec: &ClassifierSpec) -> Result<SharedClient, ClassifierError> {
    let client = AdapterClient::connect(&spec.endpoint()?)?
        .with_timeout(spec.timeout()?)
        .with_chunk_size(spec.chunk_size()?);
    Ok(Arc::new(Mutex::new(Some(client))))
}

/// A model living inside an adapter process.
#[derive(Clone, Serialize, Deserialize)]
pub struct RemoteClassifier {
    endpoint: String,
    model_id: String,
    #[serde(skip)]
    spec: Option<ClassifierSpec>,
    #[serde(skip, default = "empty_slot")]
    client: SharedClient,
}

fn empty_slot() -> SharedClient {
    Arc::new(Mutex::new(None))
}

impl std::fmt::Debug for RemoteClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteClassifier")
            .field("endpoint", &self.endpoint)
            .field("model_id", &self.model_id)
            .finish()
    }
}

pub fn adapter_train(
    client: SharedClient,
    spec: &ClassifierSpec,
    train: &Dataset,
) -> Result<RemoteClassifier, ClassifierError> {
    let examples: Vec<(&str, KanoLabel)> = train
        .reviews()
        .iter()
        .map(|r| (r.text.as_str(), r.label))
        .collect();
    let model_id = {
        let mut slot = client.lock().unwrap();
        let c = slot
            .as_mut()
            .ok_or_else(|| AdapterError::Transport("adapter connection is closed".into()))?;
        c.train(&examples, &spec.adapter_params())?
    };
    Ok(RemoteClassifier {
        endpoint: spec.endpoint()?.to_string(),
        model_id,
        spec: Some(spec.clone()),
        client,
    })
}

impl RemoteClassifier {
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn predict(&self, texts: &[&str]) -> Result<Vec<KanoLabel>, AdapterError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut slot = self.client.lock().unwrap();
        if slot.is_none() {
            let spec = self
                .spec
                .clone()
                .unwrap_or_else(|| ClassifierSpec::adapter(&self.endpoint));
            let client = AdapterClient::connect(&self.endpoint.parse()?)?
                .with_timeout(spec.timeout().unwrap_or(crate::adapter::DEFAULT_TIMEOUT))
                .with_chunk_size(
                    spec.chunk_size()
                        .unwrap_or(crate::adapter::DEFAULT_CHUNK_SIZE),
                );
            *slot = Some(client);
        }
        slot.as_mut()
            .expect("connected above")
            .predict(&self.model_id, texts)
    }
}

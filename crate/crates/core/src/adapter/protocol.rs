//! Message schema. One UTF-8 JSON object per line:
//!
//! ```text
//! {"id":1,"op":"train","train":[{"text":"...","label":0}],"params":{"epochs":1}}
//! {"id":1,"ok":true,"model_id":"m-1"}
//! {"id":2,"op":"predict","model_id":"m-1","texts":["..."]}
//! {"id":2,"ok":true,"labels":[3]}
//! {"id":2,"ok":false,"error":"..."}
//! {"id":3,"op":"shutdown"}
//! {"id":3,"ok":true}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub type Params = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainExample {
    pub text: String,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RequestBody {
    Train {
        train: Vec<TrainExample>,
        #[serde(default)]
        params: Params,
    },
    Predict {
        model_id: String,
        texts: Vec<String>,
    },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Request {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serialisation cannot fail")
    }

    pub fn parse(line: &str) -> Result<Request, String> {
        serde_json::from_str(line).map_err(|e| e.to_string())
    }
}

impl Response {
    pub fn ok(id: u64) -> Response {
        Response {
            id,
            ok: true,
            model_id: None,
            labels: None,
            error: None,
        }
    }

    pub fn trained(id: u64, model_id: impl Into<String>) -> Response {
        Response {
            model_id: Some(model_id.into()),
            ..Response::ok(id)
        }
    }

    pub fn predicted(id: u64, labels: Vec<u8>) -> Response {
        Response {
            labels: Some(labels),
            ..Response::ok(id)
        }
    }

    pub fn failed(id: u64, error: impl Into<String>) -> Response {
        Response {
            ok: false,
            error: Some(error.into()),
            ..Response::ok(id)
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serialisation cannot fail")
    }

    pub fn parse(line: &str) -> Result<Response, String> {
        serde_json::from_str(line).map_err(|e| e.to_string())
    }
}

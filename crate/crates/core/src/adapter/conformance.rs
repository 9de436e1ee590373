//! Protocol conformance checks runnable against any adapter.
//!
//! The checks only rely on behaviour every adapter must show (id echo,
//! error responses, label ranges, deterministic prediction); they make no
//! assumption about prediction quality.

use serde::Serialize;

use super::protocol::{Params, Response};
use super::{AdapterClient, AdapterError};
use crate::corpus::KanoLabel;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Eight short reviews, two per label.
pub fn toy_training_set() -> Vec<(&'static str, KanoLabel)> {
    vec![
        ("The app crashes every time I open it", KanoLabel::Basic),
        ("Login does not work at all anymore", KanoLabel::Basic),
        (
            "Syncing is slow, it should be much faster",
            KanoLabel::Performance,
        ),
        (
            "Battery usage got worse with the update",
            KanoLabel::Performance,
        ),
        (
            "Wow, the new AR mode is an amazing surprise",
            KanoLabel::Delighter,
        ),
        (
            "I did not expect a built-in recipe generator, love it",
            KanoLabel::Delighter,
        ),
        ("I use it on Sundays with my kids", KanoLabel::Irrelevant),
        (
            "Downloaded it yesterday from the store",
            KanoLabel::Irrelevant,
        ),
    ]
}

fn check(name: &'static str, result: Result<String, String>) -> CheckOutcome {
    match result {
        Ok(detail) => CheckOutcome {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckOutcome {
            name,
            passed: false,
            detail,
        },
    }
}

fn raw(client: &mut AdapterClient, line: &str) -> Result<Response, String> {
    let reply = client.exchange_raw(line).map_err(|e| e.to_string())?;
    Response::parse(&reply).map_err(|e| format!("unparseable reply `{reply}`: {e}"))
}

/// Runs every check in order on one session and ends it with a shutdown
/// request. Later checks reuse the model trained by the first one.
pub fn run(client: &mut AdapterClient) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let toy = toy_training_set();
    let texts: Vec<&str> = toy.iter().map(|(t, _)| *t).collect();

    let trained = client.train(&toy, &Params::new());
    let model_id = trained.as_ref().ok().cloned();
    out.push(check(
        "train returns a model id",
        trained
            .map(|id| format!("model_id={id}"))
            .map_err(|e| e.to_string()),
    ));
    let Some(model_id) = model_id else {
        return out;
    };

    out.push(check(
        "predict returns one in-range label per text",
        client
            .predict(&model_id, &texts)
            .map_err(|e| e.to_string())
            .and_then(|labels| {
                if labels.len() == texts.len() {
                    Ok(format!("{} labels", labels.len()))
                } else {
                    Err(format!("{} labels for {} texts", labels.len(), texts.len()))
                }
            }),
    ));

    out.push(check(
        "predict with an empty text list returns no labels",
        raw(
            client,
            &format!(
                r#"{{"id":10001,"op":"predict","model_id":{},"texts":[]}}"#,
                serde_json::to_string(&model_id).unwrap()
            ),
        )
        .and_then(|r| match (r.ok, r.labels.as_deref()) {
            (true, Some([])) => Ok("labels=[]".into()),
            _ => Err(format!("got {}", r.to_line())),
        }),
    ));

    let many: Vec<String> = (0..100)
        .map(|i| format!("{} #{i}", texts[i % texts.len()]))
        .collect();
    let many_refs: Vec<&str> = many.iter().map(String::as_str).collect();
    let previous_chunk = client.chunk_size();
    client.set_chunk_size(many.len());
    let whole = client.predict(&model_id, &many_refs);
    client.set_chunk_size(32);
    let chunked = client.predict(&model_id, &many_refs);
    client.set_chunk_size(previous_chunk);
    out.push(check(
        "chunked predict preserves order",
        match (whole, chunked) {
            (Ok(a), Ok(b)) if a == b => Ok("100 texts, chunks of 32 equal one batch".into()),
            (Ok(_), Ok(_)) => Err("chunked labels differ from single-batch labels".into()),
            (Err(e), _) | (_, Err(e)) => Err(e.to_string()),
        },
    ));

    out.push(check(
        "unknown model id is reported as an adapter error",
        match client.predict("no-such-model", &["anything"]) {
            Err(AdapterError::Remote(msg)) => Ok(msg),
            other => Err(format!("expected adapter error, got {other:?}")),
        },
    ));

    out.push(check(
        "malformed request yields an error response",
        raw(client, "{this is not json").and_then(|r| match (&r.error, r.ok) {
            (Some(e), false) => Ok(e.clone()),
            _ => Err(format!("got {}", r.to_line())),
        }),
    ));

    out.push(check(
        "unknown op yields an error response echoing the id",
        raw(client, r#"{"id":10002,"op":"explode"}"#).and_then(|r| {
            if !r.ok && r.id == 10002 {
                Ok(r.error.unwrap_or_default())
            } else {
                Err(format!("got {}", r.to_line()))
            }
        }),
    ));

    out.push(check(
        "response ids echo request ids",
        raw(
            client,
            &format!(
                r#"{{"id":10003,"op":"predict","model_id":{},"texts":["x"]}}"#,
                serde_json::to_string(&model_id).unwrap()
            ),
        )
        .and_then(|r| {
            if r.id == 10003 && r.ok {
                Ok("id=10003".into())
            } else {
                Err(format!("got {}", r.to_line()))
            }
        }),
    ));

    out.push(check(
        "shutdown is acknowledged",
        client
            .shutdown()
            .map(|_| "ok".into())
            .map_err(|e| e.to_string()),
    ));
    out
}

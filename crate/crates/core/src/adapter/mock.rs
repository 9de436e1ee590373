use std::collections::{HashMap, VecDeque};
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::protocol::{Request, RequestBody, Response};
use super::{AdapterError, Transport};
use crate::corpus::KanoLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockBehavior {
    /// Predicts the most frequent training label (lowest code on ties).
    Majority,
    /// Predicts one fixed label regardless of training data.
    Constant(KanoLabel),
    /// Predicts the first digit 0-3 found in each text, falling back to the
    /// majority label.
    Echo,
}

#[derive(Debug, Clone)]
struct MockModel {
    majority: KanoLabel,
}

/// In-process adapter implementing the wire protocol. Usable directly as a
/// [`Transport`] or served over any reader/writer pair with [`serve`].
pub struct MockAdapter {
    behavior: MockBehavior,
    models: HashMap<String, MockModel>,
    trained: u64,
    outbox: VecDeque<String>,
    transcript: Arc<Mutex<Vec<String>>>,
    shut_down: bool,
}

impl MockAdapter {
    pub fn new(behavior: MockBehavior) -> MockAdapter {
        MockAdapter {
            behavior,
            models: HashMap::new(),
            trained: 0,
            outbox: VecDeque::new(),
            transcript: Arc::new(Mutex::new(Vec::new())),
            shut_down: false,
        }
    }

    /// Shared handle to every request line received so far.
    pub fn transcript(&self) -> Arc<Mutex<Vec<String>>> {
        Arc::clone(&self.transcript)
    }

    pub fn is_shut_down(&self) -> bool {
        self.shut_down
    }

    /// Handles one request line and returns the response line.
    pub fn handle_line(&mut self, line: &str) -> String {
        self.transcript.lock().unwrap().push(line.to_string());
        let request = match Request::parse(line) {
            Ok(r) => r,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_u64()))
                    .unwrap_or(0);
                return Response::failed(id, format!("malformed request: {e}")).to_line();
            }
        };
        let id = request.id;
        let response = match request.body {
            RequestBody::Train { train, .. } => {
                if train.is_empty() {
                    Response::failed(id, "empty training set")
                } else if let Some(bad) = train.iter().find(|e| e.label > 3) {
                    Response::failed(id, format!("label {} outside 0..=3", bad.label))
                } else {
                    let mut counts = [0usize; KanoLabel::COUNT];
                    for e in &train {
                        counts[e.label as usize] += 1;
                    }
                    let best = *counts.iter().max().expect("four counts");
                    let majority = KanoLabel::ALL[counts.iter().position(|&c| c == best).unwrap()];
                    self.trained += 1;
                    let model_id = format!("m-{}", self.trained);
                    self.models.insert(model_id.clone(), MockModel { majority });
                    Response::trained(id, model_id)
                }
            }
            RequestBody::Predict { model_id, texts } => match self.models.get(&model_id) {
                None => Response::failed(id, format!("unknown model: {model_id}")),
                Some(model) => {
                    let labels = texts
                        .iter()
                        .map(|t| self.predict(model, t).code())
                        .collect();
                    Response::predicted(id, labels)
                }
            },
            RequestBody::Shutdown => {
                self.shut_down = true;
                Response::ok(id)
            }
        };
        response.to_line()
    }

    fn predict(&self, model: &MockModel, text: &str) -> KanoLabel {
        match self.behavior {
            MockBehavior::Majority => model.majority,
            MockBehavior::Constant(label) => label,
            MockBehavior::Echo => text
                .chars()
                .find_map(|c| c.to_digit(10).and_then(|d| KanoLabel::from_code(d as u8)))
                .unwrap_or(model.majority),
        }
    }
}

impl Transport for MockAdapter {
    fn send_line(&mut self, line: &str) -> Result<(), AdapterError> {
        if self.shut_down {
            return Err(AdapterError::Transport("mock adapter has shut down".into()));
        }
        let response = self.handle_line(line);
        self.outbox.push_back(response);
        Ok(())
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        self.outbox
            .pop_front()
            .ok_or(AdapterError::Timeout(timeout))
    }
}

/// Serves the mock over a line stream until a shutdown request or EOF.
pub fn serve(
    behavior: MockBehavior,
    input: impl BufRead,
    mut output: impl Write,
) -> std::io::Result<()> {
    let mut adapter = MockAdapter::new(behavior);
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(output, "{}", adapter.handle_line(&line))?;
        output.flush()?;
        if adapter.is_shut_down() {
            break;
        }
    }
    Ok(())
}

/// Transport that replays canned response lines and records what was sent.
/// Lets tests script adapter misbehaviour.
pub struct ScriptedTransport {
    responses: VecDeque<String>,
    sent: Arc<Mutex<Vec<String>>>,
}

impl ScriptedTransport {
    pub fn new<I, S>(responses: I) -> ScriptedTransport
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedTransport {
            responses: responses.into_iter().map(Into::into).collect(),
            sent: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn sent(&self) -> Arc<Mutex<Vec<String>>> {
        Arc::clone(&self.sent)
    }
}

impl Transport for ScriptedTransport {
    fn send_line(&mut self, line: &str) -> Result<(), AdapterError> {
        self.sent.lock().unwrap().push(line.to_string());
        Ok(())
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        self.responses
            .pop_front()
            .ok_or(AdapterError::Timeout(timeout))
    }
}

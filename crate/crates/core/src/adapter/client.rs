use std::time::Duration;

use super::protocol::{Params, Request, RequestBody, Response, TrainExample};
use super::{AdapterError, Endpoint, MockAdapter, StdioTransport, TcpTransport, Transport};
use crate::corpus::KanoLabel;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
pub const DEFAULT_CHUNK_SIZE: usize = 32;

/// Strict request/response client: one request in flight at a time.
///
/// Responses are paired with requests by id. A response whose id belongs
/// to an earlier, abandoned request (for example after a timeout) is
/// discarded; any other id mismatch is a protocol error.
pub struct AdapterClient {
    transport: Box<dyn Transport>,
    next_id: u64,
    timeout: Duration,
    chunk_size: usize,
}

impl AdapterClient {
    pub fn new(transport: Box<dyn Transport>) -> AdapterClient {
        AdapterClient {
            transport,
            next_id: 1,
            timeout: DEFAULT_TIMEOUT,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }

    pub fn connect(endpoint: &Endpoint) -> Result<AdapterClient, AdapterError> {
        let transport: Box<dyn Transport> = match endpoint {
            Endpoint::Mock(behavior) => Box::new(MockAdapter::new(*behavior)),
            Endpoint::Stdio { program, args } => Box::new(StdioTransport::spawn(program, args)?),
            Endpoint::Tcp(address) => Box::new(TcpTransport::connect(address)?),
        };
        Ok(AdapterClient::new(transport))
    }

    pub fn with_timeout(mut self, timeout: Duration) -> AdapterClient {
        self.timeout = timeout;
        self
    }

    /// Maximum number of texts per predict request (at least 1).
    pub fn with_chunk_size(mut self, chunk_size: usize) -> AdapterClient {
        self.chunk_size = chunk_size.max(1);
        self
    }

    pub fn set_chunk_size(&mut self, chunk_size: usize) {
        self.chunk_size = chunk_size.max(1);
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    fn request(&mut self, body: RequestBody) -> Result<Response, AdapterError> {
        let id = self.next_id;
        self.next_id += 1;
        self.transport.send_line(&Request { id, body }.to_line())?;
        loop {
            let line = self.transport.recv_line(self.timeout)?;
            let response = Response::parse(&line).map_err(|message| AdapterError::Protocol {
                line: line.clone(),
                message,
            })?;
            if response.id == id {
                if !response.ok {
                    return Err(AdapterError::Remote(
                        response
                            .error
                            .unwrap_or_else(|| "unspecified adapter error".into()),
                    ));
                }
                return Ok(response);
            }
            if response.id < id {
                log::warn!("discarding late response to request {}", response.id);
                continue;
            }
            return Err(AdapterError::Protocol {
                line,
                message: format!("response id {} does not match request {id}", response.id),
            });
        }
    }

    /// Sends one raw line and returns the next raw line, bypassing id
    /// bookkeeping. For conformance probing.
    pub fn exchange_raw(&mut self, line: &str) -> Result<String, AdapterError> {
        self.transport.send_line(line)?;
        self.transport.recv_line(self.timeout)
    }

    pub fn train(
        &mut self,
        examples: &[(&str, KanoLabel)],
        params: &Params,
    ) -> Result<String, AdapterError> {
        let train = examples
            .iter()
            .map(|&(text, label)| TrainExample {
                text: text.to_string(),
                label: label.code(),
            })
            .collect();
        let response = self.request(RequestBody::Train {
            train,
            params: params.clone(),
        })?;
        match response.model_id {
            Some(id) if !id.is_empty() => Ok(id),
            _ => Err(AdapterError::Protocol {
                line: response.to_line(),
                message: "train response carries no model_id".into(),
            }),
        }
    }

    /// Labels for `texts` in input order, requested in chunks of at most
    /// `chunk_size` texts.
    pub fn predict(
        &mut self,
        model_id: &str,
        texts: &[&str],
    ) -> Result<Vec<KanoLabel>, AdapterError> {
        let mut labels = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.chunk_size) {
            let response = self.request(RequestBody::Predict {
                model_id: model_id.to_string(),
                texts: chunk.iter().map(|t| t.to_string()).collect(),
            })?;
            let line = response.to_line();
            let codes = response.labels.ok_or_else(|| AdapterError::Protocol {
                line: line.clone(),
                message: "predict response carries no labels".into(),
            })?;
            if codes.len() != chunk.len() {
                return Err(AdapterError::Protocol {
                    line,
                    message: format!("{} labels for {} texts", codes.len(), chunk.len()),
                });
            }
            for code in codes {
                labels.push(
                    KanoLabel::from_code(code).ok_or_else(|| AdapterError::Protocol {
                        line: line.clone(),
                        message: format!("label {code} outside 0..=3"),
                    })?,
                );
            }
        }
        Ok(labels)
    }

    pub fn shutdown(&mut self) -> Result<(), AdapterError> {
        self.request(RequestBody::Shutdown).map(|_| ())
    }
}

//! Delegating training and prediction to external classifier processes.
//!
//! Adapters speak newline-delimited JSON (see [`protocol`]) over a child
//! process's standard streams or a TCP connection. Texts are sent raw; the
//! adapter owns its tokenisation.

mod client;
pub mod conformance;
mod mock;
pub mod protocol;
mod transport;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

pub use client::{AdapterClient, DEFAULT_CHUNK_SIZE, DEFAULT_TIMEOUT};
pub use mock::{serve as serve_mock, MockAdapter, MockBehavior, ScriptedTransport};
pub use transport::{StdioTransport, TcpTransport, Transport};

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter transport failed: {0}")]
    Transport(String),
    #[error("adapter did not answer within {0:?}")]
    Timeout(Duration),
    #[error("protocol violation ({message}) in line: {line}")]
    Protocol { line: String, message: String },
    #[error("adapter reported an error: {0}")]
    Remote(String),
    #[error("invalid adapter endpoint `{0}`")]
    InvalidEndpoint(String),
}

/// Where an adapter lives.
///
/// Textual forms: `mock`, `mock:majority`, `mock:echo`, `mock:constant=<label>`,
/// `stdio:<program> [args...]`, `tcp:<host>:<port>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Mock(MockBehavior),
    Stdio { program: String, args: Vec<String> },
    Tcp(String),
}

impl FromStr for Endpoint {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || AdapterError::InvalidEndpoint(s.to_string());
        let (scheme, rest) = s.split_once(':').unwrap_or((s, ""));
        match scheme {
            "mock" => {
                let behavior = match rest {
                    "" | "majority" => MockBehavior::Majority,
                    "echo" => MockBehavior::Echo,
                    other => {
                        let label = other.strip_prefix("constant=").ok_or_else(invalid)?;
                        MockBehavior::Constant(label.parse().map_err(|_| invalid())?)
                    }
                };
                Ok(Endpoint::Mock(behavior))
            }
            "stdio" => {
                let mut words = rest.split_whitespace().map(str::to_string);
                let program = words.next().ok_or_else(invalid)?;
                Ok(Endpoint::Stdio {
                    program,
                    args: words.collect(),
                })
            }
            "tcp" if !rest.is_empty() => Ok(Endpoint::Tcp(rest.to_string())),
            _ => Err(invalid()),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Mock(MockBehavior::Majority) => f.write_str("mock:majority"),
            Endpoint::Mock(MockBehavior::Echo) => f.write_str("mock:echo"),
            Endpoint::Mock(MockBehavior::Constant(l)) => write!(f, "mock:constant={}", l.name()),
            Endpoint::Stdio { program, args } => {
                write!(f, "stdio:{program}")?;
                for a in args {
                    write!(f, " {a}")?;
                }
                Ok(())
            }
            Endpoint::Tcp(address) => write!(f, "tcp:{address}"),
        }
    }
}

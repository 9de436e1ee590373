use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::AdapterError;

/// Line-oriented duplex channel to an adapter.
pub trait Transport: Send {
    fn send_line(&mut self, line: &str) -> Result<(), AdapterError>;
    /// Next line without its terminator.
    fn recv_line(&mut self, timeout: Duration) -> Result<String, AdapterError>;
}

fn transport_err(context: &str, e: impl std::fmt::Display) -> AdapterError {
    AdapterError::Transport(format!("{context}: {e}"))
}

/// Adapter running as a child process, spoken to over stdin/stdout. The
/// child's stderr is inherited.
pub struct StdioTransport {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl StdioTransport {
    pub fn spawn(program: &str, args: &[String]) -> Result<StdioTransport, AdapterError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| transport_err(&format!("cannot start `{program}`"), e))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(StdioTransport {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Transport for StdioTransport {
    fn send_line(&mut self, line: &str) -> Result<(), AdapterError> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| AdapterError::Transport("adapter stdin closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| transport_err("write to adapter", e))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(transport_err("read from adapter", e)),
            Err(RecvTimeoutError::Timeout) => Err(AdapterError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self
                    .child
                    .try_wait()
                    .ok()
                    .flatten()
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "still running".into());
                Err(AdapterError::Transport(format!(
                    "adapter closed its output ({status})"
                )))
            }
        }
    }
}

impl Drop for StdioTransport {
    fn drop(&mut self) {
        drop(self.stdin.take());
        for _ in 0..20 {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Long-lived adapter listening on a TCP address.
pub struct TcpTransport {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl TcpTransport {
    pub fn connect(address: &str) -> Result<TcpTransport, AdapterError> {
        let stream = TcpStream::connect(address)
            .map_err(|e| transport_err(&format!("connect {address}"), e))?;
        let reader = BufReader::new(
            stream
                .try_clone()
                .map_err(|e| transport_err("clone socket", e))?,
        );
        Ok(TcpTransport {
            writer: stream,
            reader,
        })
    }
}

impl Transport for TcpTransport {
    fn send_line(&mut self, line: &str) -> Result<(), AdapterError> {
        writeln!(self.writer, "{line}")
            .and_then(|_| self.writer.flush())
            .map_err(|e| transport_err("write to adapter", e))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, AdapterError> {
        self.reader
            .get_ref()
            .set_read_timeout(Some(timeout))
            .map_err(|e| transport_err("set timeout", e))?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(AdapterError::Transport(
                "adapter closed the connection".into(),
            )),
            Ok(_) => Ok(line.trim_end_matches(['\n', '\r']).to_string()),
            Err(e)
                if matches!(
                    e.kind(),
                    std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                ) =>
            {
                Err(AdapterError::Timeout(timeout))
            }
            Err(e) => Err(transport_err("read from adapter", e)),
        }
    }
}

//! Proposer reached over a child process's stdio or a TCP connection.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::protocol::{Proposer, ProposerError, ProposerReply, ProposerRequest};

/// Default endpoint when none is given explicitly.
pub const PROPOSER_ENDPOINT_ENV: &str = "BSS_PROPOSER_ENDPOINT";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Sends each request as one JSON line and waits for one reply line.
///
/// Endpoints are `tcp://host:port` or a command line (`cmd:` prefix optional)
/// started as a child process. Replies are read on a helper thread so a
/// silent peer turns into [`ProposerError::Timeout`].
pub struct ExternalProposer {
    writer: Box<dyn Write + Send>,
    lines: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
}

fn spawn_reader(source: impl Read + Send + 'static) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(source).lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl ExternalProposer {
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, ProposerError> {
        let endpoint = endpoint.trim();
        if let Some(addr) = endpoint.strip_prefix("tcp://") {
            let stream = TcpStream::connect(addr).map_err(|e| ProposerError::Transport(format!("{addr}: {e}")))?;
            let reader = stream.try_clone().map_err(|e| ProposerError::Transport(e.to_string()))?;
            return Ok(ExternalProposer {
                writer: Box::new(stream),
                lines: spawn_reader(reader),
                child: None,
                timeout,
            });
        }
        let command = endpoint.strip_prefix("cmd:").unwrap_or(endpoint);
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| ProposerError::Transport("empty proposer endpoint".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ProposerError::Transport(format!("cannot start `{program}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(ExternalProposer { writer: Box::new(stdin), lines: spawn_reader(stdout), child: Some(child), timeout })
    }

    /// Connects to the endpoint named by [`PROPOSER_ENDPOINT_ENV`].
    pub fn from_env(timeout: Duration) -> Result<Self, ProposerError> {
        let endpoint = std::env::var(PROPOSER_ENDPOINT_ENV)
            .map_err(|_| ProposerError::Transport(format!("{PROPOSER_ENDPOINT_ENV} is not set")))?;
        Self::connect(&endpoint, timeout)
    }
}

impl Proposer for ExternalProposer {
    fn propose(&mut self, request: &ProposerRequest) -> Result<ProposerReply, ProposerError> {
        // Discard replies that arrived after an earlier timeout.
        while self.lines.try_recv().is_ok() {}
        let transport = |e: std::io::Error| ProposerError::Transport(e.to_string());
        writeln!(self.writer, "{}", request.to_json()).map_err(transport)?;
        self.writer.flush().map_err(transport)?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => ProposerReply::parse(&line),
            Ok(Err(e)) => Err(transport(e)),
            Err(RecvTimeoutError::Timeout) => Err(ProposerError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(ProposerError::Transport("proposer closed the channel".into())),
        }
    }
}

impl Drop for ExternalProposer {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

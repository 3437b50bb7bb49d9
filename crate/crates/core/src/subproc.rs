//! Line-oriented JSON subprocess protocol shared by the TTS provider and
//! transcriber adapter attachments: one request object per line on the
//! child's stdin, one response object per line on its stdout. A child
//! that exits nonzero marks the whole attachment as failed.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use crate::error::{Error, Result};

pub struct LineProtocolChild {
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

impl LineProtocolChild {
    /// Spawns `argv[0]` with the remaining arguments, wiring stdin/stdout
    /// as the protocol channel. Stderr passes through for diagnostics.
    pub fn spawn(argv: &[String]) -> Result<Self> {
        if argv.is_empty() {
            return Err(Error::InvalidConfig("empty subprocess command".into()));
        }
        let name = argv.join(" ");
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Adapter {
                adapter: name.clone(),
                reason: format!("spawn failed: {e}"),
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            name,
            child,
            stdin: Some(stdin),
            stdout,
        })
    }

    /// Sends one JSON line and reads one JSON line back.
    pub fn call(&mut self, request_line: &str) -> Result<String> {
        let stdin = self.stdin.as_mut().ok_or_else(|| Error::Adapter {
            adapter: self.name.clone(),
            reason: "stdin already closed".into(),
        })?;
        stdin
            .write_all(request_line.as_bytes())
            .and_then(|_| stdin.write_all(b"\n"))
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Adapter {
                adapter: self.name.clone(),
                reason: format!("write failed: {e}"),
            })?;
        let mut line = String::new();
        let n = self.stdout.read_line(&mut line).map_err(|e| Error::Adapter {
            adapter: self.name.clone(),
            reason: format!("read failed: {e}"),
        })?;
        if n == 0 {
            return Err(Error::Adapter {
                adapter: self.name.clone(),
                reason: "child closed its stdout mid-run".into(),
            });
        }
        Ok(line)
    }

    /// Closes stdin and reaps the child; a nonzero exit is a failure.
    pub fn finish(mut self) -> Result<()> {
        drop(self.stdin.take());
        let status = self.child.wait().map_err(|e| Error::Adapter {
            adapter: self.name.clone(),
            reason: format!("wait failed: {e}"),
        })?;
        if !status.success() {
            return Err(Error::Adapter {
                adapter: self.name.clone(),
                reason: format!("exited with {status}"),
            });
        }
        Ok(())
    }
}

impl Drop for LineProtocolChild {
    fn drop(&mut self) {
        drop(self.stdin.take());
        let _ = self.child.wait();
    }
}

/// Splits a command string on whitespace. Good enough for attaching
/// providers; shell quoting is deliberately not interpreted.
pub fn split_command(spec: &str) -> Result<Vec<String>> {
    let parts: Vec<String> = spec.split_whitespace().map(str::to_string).collect();
    if parts.is_empty() {
        return Err(Error::InvalidConfig("empty subprocess command".into()));
    }
    Ok(parts)
}

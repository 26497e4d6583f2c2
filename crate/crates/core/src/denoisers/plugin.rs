//! External denoisers speaking a small binary protocol over stdin/stdout.
//!
//! Request:  `b"DNZ1"` | n: u64 | sigma: f64 | n × f64
//! Response: `b"DNZ2"` | n: u64 | n × f64
//!
//! Numbers are little-endian. One request per process; image dimensions,
//! when known, are exported as `IMG_W` and `IMG_H`.

use std::io::{self, Read, Write};
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use crate::{Error, Result};

pub const REQUEST_MAGIC: [u8; 4] = *b"DNZ1";
pub const RESPONSE_MAGIC: [u8; 4] = *b"DNZ2";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

fn encode(magic: [u8; 4], sigma: Option<f64>, values: &[f64]) -> Vec<u8> {
    let mut buf = Vec::with_capacity(20 + 8 * values.len());
    buf.extend_from_slice(&magic);
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    if let Some(s) = sigma {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_request<W: Write>(mut w: W, sigma: f64, r: &[f64]) -> io::Result<()> {
    w.write_all(&encode(REQUEST_MAGIC, Some(sigma), r))?;
    w.flush()
}

pub fn write_response<W: Write>(mut w: W, values: &[f64]) -> io::Result<()> {
    w.write_all(&encode(RESPONSE_MAGIC, None, values))?;
    w.flush()
}

fn take<'a>(bytes: &mut &'a [u8], len: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < len {
        return Err(Error::ProtocolViolation(format!("truncated {what}")));
    }
    let (head, tail) = bytes.split_at(len);
    *bytes = tail;
    Ok(head)
}

fn read_u64(bytes: &mut &[u8], what: &str) -> Result<u64> {
    Ok(u64::from_le_bytes(
        take(bytes, 8, what)?.try_into().unwrap(),
    ))
}

fn read_values(bytes: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    let payload = take(
        bytes,
        n.checked_mul(8)
            .ok_or_else(|| Error::ProtocolViolation(format!("length {n} overflows")))?,
        "payload",
    )?;
    if !bytes.is_empty() {
        return Err(Error::ProtocolViolation(format!(
            "{} trailing bytes after payload",
            bytes.len()
        )));
    }
    Ok(payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

/// Parses a full request frame, returning `(sigma, payload)`.
pub fn decode_request(mut bytes: &[u8]) -> Result<(f64, Vec<f64>)> {
    if take(&mut bytes, 4, "magic")? != REQUEST_MAGIC {
        return Err(Error::ProtocolViolation("bad request magic".into()));
    }
    let n = read_u64(&mut bytes, "length")? as usize;
    let sigma = f64::from_le_bytes(take(&mut bytes, 8, "sigma")?.try_into().unwrap());
    Ok((sigma, read_values(&mut bytes, n)?))
}

/// Parses a full response frame, checking the echoed length against `n`.
pub fn decode_response(mut bytes: &[u8], n: usize) -> Result<Vec<f64>> {
    if take(&mut bytes, 4, "magic")? != RESPONSE_MAGIC {
        return Err(Error::ProtocolViolation("bad response magic".into()));
    }
    let echoed = read_u64(&mut bytes, "length")?;
    if echoed != n as u64 {
        return Err(Error::ProtocolViolation(format!(
            "response length {echoed}, expected {n}"
        )));
    }
    read_values(&mut bytes, n)
}

/// Reads one request frame from a stream (plugin side).
pub fn read_request<R: Read>(mut r: R) -> Result<(f64, Vec<f64>)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    decode_request(&bytes)
}

#[derive(Debug, Clone)]
pub struct PluginRunner {
    command: String,
    timeout: Duration,
    image_dims: Option<(usize, usize)>,
}

impl PluginRunner {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            timeout: DEFAULT_TIMEOUT,
            image_dims: None,
        }
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// `(width, height)` exported to the plugin environment.
    pub fn image_dims(mut self, dims: Option<(usize, usize)>) -> Self {
        self.image_dims = dims;
        self
    }

    /// Spawns the plugin once and exchanges a single frame.
    pub fn run(&self, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
        let mut words = self.command.split_whitespace();
        let program = words.next().ok_or_else(|| Error::PluginSpawn {
            command: self.command.clone(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut cmd = Command::new(program);
        cmd.args(words)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        if let Some((w, h)) = self.image_dims {
            cmd.env("IMG_W", w.to_string()).env("IMG_H", h.to_string());
        }
        let mut child = cmd.spawn().map_err(|source| Error::PluginSpawn {
            command: self.command.clone(),
            source,
        })?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let frame = encode(REQUEST_MAGIC, Some(sigma), r);
        // a plugin that exits early closes the pipe; the response check reports it
        let writer = thread::spawn(move || {
            let _ = stdin.write_all(&frame);
        });
        let mut stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut bytes = Vec::new();
            let res = stdout.read_to_end(&mut bytes).map(|_| bytes);
            let _ = tx.send(res);
        });

        let bytes = match rx.recv_timeout(self.timeout) {
            Ok(res) => res?,
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::PluginTimeout(self.timeout));
            }
        };
        let _ = writer.join();
        let status = child.wait()?;
        let out = decode_response(&bytes, r.len())?;
        if !status.success() {
            return Err(Error::ProtocolViolation(format!(
                "plugin exited with {status}"
            )));
        }
        Ok(out)
    }
}

/// One-shot plugin call with the default timeout.
pub fn plugin_denoise(command: &str, r: &[f64], sigma: f64) -> Result<Vec<f64>> {
    PluginRunner::new(command).run(r, sigma)
}

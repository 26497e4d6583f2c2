//! Grayscale PGM (P2 / P5) reading and writing.

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub const MAXVAL: f64 = 255.0;

/// Row-major grayscale image with pixel values in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::InvalidDimensions(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .filter(|s| !s.is_empty())
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self
            .token()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
        tok.parse()
            .map_err(|_| Error::MalformedHeader(format!("bad {what} `{tok}`")))
    }
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ImageBuffer> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur
        .token()
        .ok_or_else(|| Error::MalformedHeader("empty file".into()))?
        .to_owned();
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => {
            return Err(Error::MalformedHeader(format!(
                "unsupported magic `{other}`"
            )))
        }
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::UnsupportedMaxval(maxval));
    }
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!(
            "empty image {width}x{height}"
        )));
    }
    let count = width * height;
    let raw: Vec<u32> = if binary {
        // exactly one whitespace byte separates the header from the payload
        let start = cur.pos + 1;
        let payload = bytes.get(start..).unwrap_or(&[]);
        if payload.len() < count {
            return Err(Error::TruncatedPayload {
                expected: count,
                found: payload.len(),
            });
        }
        payload[..count].iter().map(|&b| b as u32).collect()
    } else {
        let mut vals = Vec::with_capacity(count);
        while vals.len() < count {
            match cur.token() {
                Some(tok) => vals.push(
                    tok.parse()
                        .map_err(|_| Error::MalformedHeader(format!("bad sample `{tok}`")))?,
                ),
                None => {
                    return Err(Error::TruncatedPayload {
                        expected: count,
                        found: vals.len(),
                    })
                }
            }
        }
        vals
    };
    if let Some(v) = raw.iter().find(|&&v| v > maxval) {
        return Err(Error::MalformedHeader(format!(
            "sample {v} exceeds maxval {maxval}"
        )));
    }
    let scale = MAXVAL / maxval as f64;
    ImageBuffer::new(
        width,
        height,
        raw.iter().map(|&v| v as f64 * scale).collect(),
    )
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    parse_pgm(&fs::read(path)?)
}

/// Binary P5 encoding; pixels are clamped to `[0, 255]` and rounded.
pub fn encode_pgm(img: &ImageBuffer) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend(img.pixels.iter().map(|&p| {
        if p.is_nan() {
            0
        } else {
            p.clamp(0.0, MAXVAL).round() as u8
        }
    }));
    out
}

pub fn save_pgm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

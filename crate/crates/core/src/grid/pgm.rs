//! Minimal PGM (P2 ASCII / P5 binary) codec.
//!
//! Samples are mapped linearly to `[0, 1]` by dividing by `maxval`. Fields are
//! written as 16-bit P5; masks as 8-bit P5 with 0 / 255.

use std::fs;
use std::path::Path;

use super::{BinaryMask, ScalarField, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgmEncoding {
    /// P2
    Ascii,
    /// P5
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| {
                Error::MalformedHeader(format!("{what} is not a number: {:?}", String::from_utf8_lossy(tok)))
            })
    }
}

/// Decodes a P2 or P5 image into a field with values in `[0, 1]`.
pub fn decode_pgm(data: &[u8]) -> Result<ScalarField> {
    if data.is_empty() {
        return Err(Error::MalformedHeader("empty file".into()));
    }
    let mut cur = Cursor { data, pos: 0 };
    let magic = cur
        .token()
        .ok_or_else(|| Error::MalformedHeader("missing magic number".into()))?;
    let encoding = match magic {
        b"P2" => PgmEncoding::Ascii,
        b"P5" => PgmEncoding::Binary,
        other => return Err(Error::UnsupportedMagic(String::from_utf8_lossy(other).into_owned())),
    };
    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("zero dimension {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let scale = maxval as f64;

    let mut values = Vec::with_capacity(n);
    match encoding {
        PgmEncoding::Ascii => {
            while values.len() < n {
                let Some(tok) = cur.token() else { break };
                let sample = std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse::<usize>().ok())
                    .ok_or_else(|| Error::MalformedPayload(format!("bad sample {:?}", String::from_utf8_lossy(tok))))?;
                if sample > maxval {
                    return Err(Error::MalformedPayload(format!(
                        "sample {sample} exceeds maxval {maxval}"
                    )));
                }
                values.push(sample as f64 / scale);
            }
        }
        PgmEncoding::Binary => {
            // Exactly one whitespace byte separates maxval from the raster.
            if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
                return Err(Error::TruncatedPayload { expected: n, found: 0 });
            }
            let payload = &data[cur.pos + 1..];
            let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
            for chunk in payload.chunks_exact(bytes_per_sample).take(n) {
                let sample = if bytes_per_sample == 1 {
                    chunk[0] as usize
                } else {
                    u16::from_be_bytes([chunk[0], chunk[1]]) as usize
                };
                if sample > maxval {
                    return Err(Error::MalformedPayload(format!(
                        "sample {sample} exceeds maxval {maxval}"
                    )));
                }
                values.push(sample as f64 / scale);
            }
        }
    }
    if values.len() < n {
        return Err(Error::TruncatedPayload {
            expected: n,
            found: values.len(),
        });
    }
    ScalarField::new(width, height, values)
}

fn quantize(v: f64, maxval: u16) -> u16 {
    (v.clamp(0.0, 1.0) * maxval as f64).round() as u16
}

/// Encodes a field; values are clamped to `[0, 1]` and rounded to `maxval` levels.
pub fn encode_pgm(field: &ScalarField, encoding: PgmEncoding, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::invalid("maxval", "must be at least 1"));
    }
    let magic = match encoding {
        PgmEncoding::Ascii => "P2",
        PgmEncoding::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", field.width(), field.height()).into_bytes();
    match encoding {
        PgmEncoding::Ascii => {
            for row in field.values().chunks(field.width()) {
                let line: Vec<String> = row.iter().map(|&v| quantize(v, maxval).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        PgmEncoding::Binary => {
            for &v in field.values() {
                let q = quantize(v, maxval);
                if maxval < 256 {
                    out.push(q as u8);
                } else {
                    out.extend_from_slice(&q.to_be_bytes());
                }
            }
        }
    }
    Ok(out)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<ScalarField> {
    decode_pgm(&fs::read(path)?)
}

/// Writes a 16-bit binary PGM.
pub fn write_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(field, PgmEncoding::Binary, u16::MAX)?)?;
    Ok(())
}

/// Reads any PGM and binarizes it at the midpoint of its value range.
pub fn read_mask_pgm(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Ok(read_pgm(path)?.threshold(DEFAULT_THRESHOLD))
}

/// Writes an 8-bit binary PGM with foreground = 255.
pub fn write_mask_pgm(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(&mask.to_field(), PgmEncoding::Binary, 255)?)?;
    Ok(())
}

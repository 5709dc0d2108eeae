//! PGM (P2 ASCII / P5 binary) reading and 16-bit binary writing.
//!
//! Samples are taken as-is: an 8-bit file with value 255 yields intensity
//! 255, never rescaled to the 16-bit range. Two-byte binary samples are
//! big-endian.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::ThermalFrame;

pub fn load_pgm(path: impl AsRef<Path>) -> Result<ThermalFrame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&bytes).map_err(|e| match e {
        Error::Pgm(msg) => Error::Pgm(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Writes `frame` as a P5 file with maxval 65535.
pub fn write_pgm(frame: &ThermalFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(frame)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(frame: &ThermalFrame) -> Result<Vec<u8>> {
    if frame.is_empty() {
        return Err(Error::InvalidFrame("refusing to encode an empty frame".into()));
    }
    let header = format!("P5\n{} {}\n65535\n", frame.width(), frame.height());
    let mut out = Vec::with_capacity(header.len() + frame.len() * 2);
    out.extend_from_slice(header.as_bytes());
    for &p in frame.pixels() {
        out.extend_from_slice(&p.to_be_bytes());
    }
    Ok(out)
}

pub fn decode_pgm(data: &[u8]) -> Result<ThermalFrame> {
    let mut cur = Cursor { data, pos: 0 };
    let binary = match data.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(Error::Pgm("missing P2/P5 magic number".into())),
    };
    cur.pos = 2;

    let width = cur.header_number("width")?;
    let height = cur.header_number("height")?;
    let maxval = cur.header_number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Pgm(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Pgm(format!("{width}x{height} overflows")))?;

    let pixels = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        match cur.next_byte() {
            Some(b) if b.is_ascii_whitespace() => {}
            _ => return Err(Error::Pgm("missing whitespace after maxval".into())),
        }
        let raster = &data[cur.pos..];
        let sample_bytes = if maxval < 256 { 1 } else { 2 };
        let needed = count * sample_bytes;
        if raster.len() != needed {
            return Err(Error::Pgm(format!(
                "dimension mismatch: {width}x{height} needs {needed} raster bytes, found {}",
                raster.len()
            )));
        }
        if sample_bytes == 1 {
            raster.iter().map(|&b| u16::from(b)).collect::<Vec<_>>()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        }
    } else {
        let mut pixels = Vec::with_capacity(count);
        while let Some(tok) = cur.token() {
            let v: u32 = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Pgm(format!("bad sample `{}`", String::from_utf8_lossy(tok))))?;
            if v as usize > maxval {
                return Err(Error::Pgm(format!("sample {v} exceeds maxval {maxval}")));
            }
            if pixels.len() == count {
                return Err(Error::Pgm(format!(
                    "dimension mismatch: more than {count} samples for {width}x{height}"
                )));
            }
            pixels.push(v as u16);
        }
        if pixels.len() != count {
            return Err(Error::Pgm(format!(
                "dimension mismatch: {width}x{height} needs {count} samples, found {}",
                pixels.len()
            )));
        }
        pixels
    };

    if let Some(v) = pixels.iter().find(|&&v| usize::from(v) > maxval) {
        return Err(Error::Pgm(format!("sample {v} exceeds maxval {maxval}")));
    }
    ThermalFrame::new(width, height, pixels)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn next_byte(&mut self) -> Option<u8> {
        let b = self.data.get(self.pos).copied();
        if b.is_some() {
            self.pos += 1;
        }
        b
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.data.get(self.pos) {
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while let Some(&b) = self.data.get(self.pos) {
            if b.is_ascii_whitespace() || b == b'#' {
                break;
            }
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.data[start..self.pos])
    }

    fn header_number(&mut self, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::Pgm(format!("header ends before {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Pgm(format!("bad {what} `{}`", String::from_utf8_lossy(tok))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5_8bit(w: usize, h: usize, fill: u8) -> Vec<u8> {
        let mut v = format!("P5\n{w} {h}\n255\n").into_bytes();
        v.extend(std::iter::repeat(fill).take(w * h));
        v
    }

    #[test]
    fn uniform_ascii_file() {
        let mut text = String::from("P2\n# a comment\n4 4\n255\n");
        for _ in 0..16 {
            text.push_str("100 ");
        }
        let f = decode_pgm(text.as_bytes()).unwrap();
        assert_eq!((f.width(), f.height()), (4, 4));
        assert!(f.pixels().iter().all(|&p| p == 100));
    }

    #[test]
    fn eight_bit_values_are_not_rescaled() {
        let f = decode_pgm(&p5_8bit(4, 2, 255)).unwrap();
        assert!(f.pixels().iter().all(|&p| p == 255));
    }

    #[test]
    fn short_raster_is_a_dimension_mismatch() {
        let mut data = b"P5\n160 120\n65535\n".to_vec();
        data.extend(std::iter::repeat(0u8).take(19199 * 2));
        let err = decode_pgm(&data).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");

        let mut text = String::from("P2 160 120 255\n");
        for _ in 0..19199 {
            text.push_str("1\n");
        }
        let err = decode_pgm(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"), "{err}");
    }

    #[test]
    fn header_errors() {
        assert!(decode_pgm(b"P6\n2 2\n255\n....").is_err());
        assert!(decode_pgm(b"P5\n2 x\n255\n....").is_err());
        assert!(decode_pgm(b"P2\n2 2\n70000\n1 2 3 4").is_err());
        assert!(decode_pgm(b"P2\n2 2\n0\n0 0 0 0").is_err());
        assert!(decode_pgm(b"P2\n2 2\n10\n1 2 3 11").is_err());
        assert!(decode_pgm(b"P2\n").is_err());
    }

    #[test]
    fn odd_dimensions_rejected() {
        assert!(matches!(decode_pgm(&p5_8bit(3, 2, 1)), Err(Error::InvalidFrame(_))));
    }

    #[test]
    fn encoded_header_and_payload_layout() {
        let mut px = vec![0u16; 4];
        px[1] = 40000;
        let f = ThermalFrame::new(2, 2, px).unwrap();
        let bytes = encode_pgm(&f).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len() + 2..header.len() + 4], &40000u16.to_be_bytes());
    }
}

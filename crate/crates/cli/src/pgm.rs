//! PGM (portable graymap) reader and writer, ASCII (P2) and binary (P5),
//! 8- and 16-bit. Binary 16-bit payloads are big-endian per the format.

use std::fmt;
use std::fs;
use std::path::Path;

#[derive(Debug)]
pub enum PgmError {
    /// malformed header or payload, with the byte offset of the problem
    Parse { offset: usize, message: String },
    Io(std::io::Error),
}

impl fmt::Display for PgmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PgmError::Parse { offset, message } => {
                write!(f, "parse error at byte {offset}: {message}")
            }
            PgmError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for PgmError {}

impl From<std::io::Error> for PgmError {
    fn from(e: std::io::Error) -> Self {
        PgmError::Io(e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    pub width: usize,
    pub height: usize,
    /// 255 or 65535
    pub max_value: u32,
    /// row-major, top row first
    pub pixels: Vec<u16>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, max_value: u32, pixels: Vec<u16>) -> Option<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return None;
        }
        if max_value != 255 && max_value != 65535 {
            return None;
        }
        if pixels.iter().any(|&p| p as u32 > max_value) {
            return None;
        }
        Some(ImageBuffer {
            width,
            height,
            max_value,
            pixels,
        })
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> PgmError {
        PgmError::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    /// Skip whitespace and `#` comments (to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a str, PgmError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.data.len()
            && !self.data[self.pos].is_ascii_whitespace()
            && self.data[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a token"));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .map_err(|_| self.err("token is not valid ASCII"))
    }

    fn number(&mut self, what: &str) -> Result<u64, PgmError> {
        let start_pos = self.pos;
        let tok = self.token()?;
        tok.parse::<u64>().map_err(|_| PgmError::Parse {
            offset: start_pos,
            message: format!("bad {what}: {tok:?}"),
        })
    }
}

pub fn parse_pgm(data: &[u8]) -> Result<ImageBuffer, PgmError> {
    let mut cur = Cursor { data, pos: 0 };
    let magic = cur.token()?;
    let binary = match magic {
        "P2" => false,
        "P5" => true,
        other => {
            return Err(PgmError::Parse {
                offset: 0,
                message: format!("unsupported magic {other:?} (only P2/P5 graymaps)"),
            })
        }
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let max_value = cur.number("max value")? as u32;
    if width == 0 || height == 0 {
        return Err(cur.err("image dimensions must be positive"));
    }
    if max_value != 255 && max_value != 65535 {
        return Err(cur.err(format!(
            "max value must be 255 or 65535, got {max_value}"
        )));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if cur.pos >= data.len() || !data[cur.pos].is_ascii_whitespace() {
            return Err(cur.err("expected whitespace before binary payload"));
        }
        cur.pos += 1;
        let bytes_per = if max_value > 255 { 2 } else { 1 };
        let need = count * bytes_per;
        if data.len() - cur.pos < need {
            return Err(PgmError::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!(
                    "payload truncated: need {need} bytes, have {}",
                    data.len() - cur.pos
                ),
            )));
        }
        let payload = &data[cur.pos..cur.pos + need];
        if bytes_per == 1 {
            pixels.extend(payload.iter().map(|&b| b as u16));
        } else {
            for chunk in payload.chunks_exact(2) {
                pixels.push(u16::from_be_bytes([chunk[0], chunk[1]]));
            }
        }
    } else {
        for _ in 0..count {
            let v = cur.number("pixel")?;
            if v > max_value as u64 {
                return Err(cur.err(format!("pixel {v} exceeds max value {max_value}")));
            }
            pixels.push(v as u16);
        }
    }
    Ok(ImageBuffer {
        width,
        height,
        max_value,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<ImageBuffer, PgmError> {
    let data = fs::read(path)?;
    parse_pgm(&data)
}

pub fn encode_pgm(img: &ImageBuffer, binary: bool) -> Vec<u8> {
    let mut out = Vec::new();
    let header = format!(
        "{}\n{} {}\n{}\n",
        if binary { "P5" } else { "P2" },
        img.width,
        img.height,
        img.max_value
    );
    out.extend_from_slice(header.as_bytes());
    if binary {
        if img.max_value > 255 {
            for &p in &img.pixels {
                out.extend_from_slice(&p.to_be_bytes());
            }
        } else {
            out.extend(img.pixels.iter().map(|&p| p as u8));
        }
    } else {
        for (i, p) in img.pixels.iter().enumerate() {
            let sep = if (i + 1) % img.width == 0 { '\n' } else { ' ' };
            out.extend_from_slice(p.to_string().as_bytes());
            out.push(sep as u8);
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &ImageBuffer, binary: bool) -> Result<(), PgmError> {
    fs::write(path, encode_pgm(img, binary))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ascii_example() {
        let img = parse_pgm(b"P2 2 2 255 0 128 255 64").unwrap();
        assert_eq!(img.width, 2);
        assert_eq!(img.height, 2);
        assert_eq!(img.pixels, vec![0, 128, 255, 64]);
    }

    #[test]
    fn comments_are_skipped() {
        let img = parse_pgm(b"P2\n# a comment\n2 1\n# another\n255\n7 9\n").unwrap();
        assert_eq!(img.pixels, vec![7, 9]);
    }

    #[test]
    fn color_magic_rejected() {
        match parse_pgm(b"P3 1 1 255 0 0 0") {
            Err(PgmError::Parse { message, .. }) => assert!(message.contains("P3")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn binary_roundtrip_8_and_16_bit() {
        for max in [255u32, 65535] {
            let pixels: Vec<u16> = (0..12).map(|i| (i * 37 % (max + 1) as usize) as u16).collect();
            let img = ImageBuffer::new(4, 3, max, pixels).unwrap();
            let bytes = encode_pgm(&img, true);
            let back = parse_pgm(&bytes).unwrap();
            assert_eq!(back, img);
            // and byte-level round trip
            assert_eq!(encode_pgm(&back, true), bytes);
        }
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let img = ImageBuffer::new(4, 4, 255, vec![1; 16]).unwrap();
        let mut bytes = encode_pgm(&img, true);
        bytes.truncate(bytes.len() - 3);
        match parse_pgm(&bytes) {
            Err(PgmError::Io(_)) => {}
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn bad_max_value_rejected() {
        assert!(parse_pgm(b"P2 1 1 4095 0").is_err());
    }

    #[test]
    fn ascii_pixel_overflow_has_offset() {
        match parse_pgm(b"P2 1 1 255 300") {
            Err(PgmError::Parse { offset, .. }) => assert!(offset > 0),
            other => panic!("{other:?}"),
        }
    }
}

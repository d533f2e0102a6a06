//! Netpbm grayscale images (binary `P5` and plain `P2`).

use std::fs;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities scaled to `[0, 1]`.
    pub pixels: Vec<f64>,
}

impl Image {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("unsupported magic {0:?} (expected P5 or P2)")]
    Magic(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("expected {expected} bytes of pixel data, found {got}")]
    Truncated { expected: usize, got: usize },
    #[error("sample {value} exceeds maxval {maxval}")]
    Range { value: u32, maxval: u32 },
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&b| b != b'\n' && b != b'\r') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&str> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).ok().filter(|s| !s.is_empty())
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        self.token()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| PgmError::Header(format!("bad {what}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image, PgmError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token().unwrap_or_default().to_string();
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        _ => return Err(PgmError::Magic(magic)),
    };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(PgmError::Header(format!("{width}x{height} maxval {maxval}")));
    }
    let count = width * height;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates maxval from the raster
        let start = cur.pos + 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let raster = bytes.get(start..).unwrap_or_default();
        if raster.len() < count * depth {
            return Err(PgmError::Truncated {
                expected: count * depth,
                got: raster.len(),
            });
        }
        if depth == 1 {
            samples.extend(raster[..count].iter().map(|&b| u32::from(b)));
        } else {
            samples.extend(raster[..2 * count].chunks_exact(2).map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))));
        }
    } else {
        for _ in 0..count {
            samples.push(cur.number("sample")?);
        }
    }
    let scale = f64::from(maxval);
    let pixels = samples
        .into_iter()
        .map(|v| {
            if v > maxval {
                Err(PgmError::Range { value: v, maxval })
            } else {
                Ok(f64::from(v) / scale)
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(Image { width, height, pixels })
}

/// Binary PGM bytes for row-major `samples`; 16-bit when `maxval > 255`.
pub fn encode(width: usize, height: usize, maxval: u16, samples: &[u16]) -> Vec<u8> {
    assert_eq!(samples.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &s in samples {
        if maxval > 255 {
            out.extend_from_slice(&s.to_be_bytes());
        } else {
            out.push(s as u8);
        }
    }
    out
}

pub fn read(path: impl AsRef<Path>) -> Result<Image, Box<dyn std::error::Error + Send + Sync>> {
    Ok(decode(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_with_comments() {
        let mut b = b"P5\n# made by hand\n3 2\n# depth\n255\n".to_vec();
        b.extend_from_slice(&[0, 51, 255, 102, 0, 255]);
        let img = decode(&b).unwrap();
        assert_eq!((img.width, img.height), (3, 2));
        assert_eq!(img.get(0, 1), 0.2);
        assert_eq!(img.get(1, 0), 0.4);
        assert_eq!(img.get(1, 2), 1.0);
    }

    #[test]
    fn sixteen_bit_big_endian() {
        let b = encode(2, 1, 1000, &[1000, 250]);
        let img = decode(&b).unwrap();
        assert_eq!(img.pixels, vec![1.0, 0.25]);
    }

    #[test]
    fn plain_format() {
        let img = decode(b"P2 2 2 4\n0 1\n2 4\n").unwrap();
        assert_eq!(img.pixels, vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn errors() {
        assert!(matches!(decode(b"P6 1 1 255\n\0\0\0"), Err(PgmError::Magic(_))));
        assert!(matches!(decode(b"P5 2 2 255\n\0"), Err(PgmError::Truncated { .. })));
        assert!(matches!(decode(b"P2 1 1 3\n9\n"), Err(PgmError::Range { .. })));
        assert!(matches!(decode(b"P5 x 2 255\n"), Err(PgmError::Header(_))));
    }
}

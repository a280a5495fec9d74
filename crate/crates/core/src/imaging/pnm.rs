//! Binary PPM (P6) and PGM (P5) encoding, 8-bit only.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use super::{Frame, Mask};

#[derive(Debug, Error)]
pub enum PnmError {
    #[error("expected magic {expected}, found {found:?}")]
    BadMagic { expected: &'static str, found: String },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("only maxval 255 is supported, got {0}")]
    MaxVal(u32),
    #[error("raster truncated: need {expected} bytes, have {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

struct Header {
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8], magic: &'static str) -> Result<Header, PnmError> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(PnmError::Header("unexpected end of header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if tokens[0] != magic {
        return Err(PnmError::BadMagic {
            expected: magic,
            found: tokens[0].clone(),
        });
    }
    let num = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| PnmError::Header(format!("not a number: {s:?}")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(PnmError::MaxVal(maxval));
    }
    if width == 0 || height == 0 {
        return Err(PnmError::Header(format!("zero dimension {width}x{height}")));
    }
    // exactly one whitespace byte separates maxval from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(PnmError::Header("missing separator before raster".into()));
    }
    Ok(Header {
        width: width as usize,
        height: height as usize,
        data_offset: pos + 1,
    })
}

impl Frame {
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for px in &self.pixels {
            out.extend_from_slice(px);
        }
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self, PnmError> {
        let h = parse_header(bytes, "P6")?;
        let need = h.width * h.height * 3;
        let raster = &bytes[h.data_offset.min(bytes.len())..];
        if raster.len() < need {
            return Err(PnmError::Truncated {
                expected: need,
                actual: raster.len(),
            });
        }
        let pixels = raster[..need].chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        Ok(Frame {
            width: h.width,
            height: h.height,
            pixels,
        })
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<(), PnmError> {
        Ok(fs::write(path, self.to_ppm())?)
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self, PnmError> {
        Self::from_ppm(&fs::read(path)?)
    }
}

impl Mask {
    /// On-pixels are written as 255, off as 0.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.bits.iter().map(|&b| if b { 255u8 } else { 0 }));
        out
    }

    /// Any non-zero sample reads back as on.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self, PnmError> {
        let h = parse_header(bytes, "P5")?;
        let need = h.width * h.height;
        let raster = &bytes[h.data_offset.min(bytes.len())..];
        if raster.len() < need {
            return Err(PnmError::Truncated {
                expected: need,
                actual: raster.len(),
            });
        }
        Ok(Mask {
            width: h.width,
            height: h.height,
            bits: raster[..need].iter().map(|&v| v != 0).collect(),
        })
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), PnmError> {
        Ok(fs::write(path, self.to_pgm())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppm_header_layout() {
        let frame = Frame::filled(2, 1, [1, 2, 3]).unwrap();
        assert_eq!(frame.to_ppm(), b"P6\n2 1\n255\n\x01\x02\x03\x01\x02\x03");
    }

    #[test]
    fn ppm_with_comment_parses() {
        let bytes = b"P6\n# made by hand\n1 1\n255\n\x0a\x0b\x0c";
        let frame = Frame::from_ppm(bytes).unwrap();
        assert_eq!(frame.get(0, 0), [10, 11, 12]);
    }

    #[test]
    fn ppm_rejects_bad_input() {
        assert!(matches!(
            Frame::from_ppm(b"P5\n1 1\n255\n\x00"),
            Err(PnmError::BadMagic { .. })
        ));
        assert!(matches!(
            Frame::from_ppm(b"P6\n1 1\n65535\n"),
            Err(PnmError::MaxVal(65535))
        ));
        assert!(matches!(
            Frame::from_ppm(b"P6\n2 2\n255\n\x00\x00"),
            Err(PnmError::Truncated {
                expected: 12,
                actual: 2
            })
        ));
    }

    #[test]
    fn pgm_round_trip() {
        let mask = Mask::from_points(5, 3, &[(0, 0), (4, 2), (2, 1)]);
        let back = Mask::from_pgm(&mask.to_pgm()).unwrap();
        assert_eq!(back, mask);
    }
}

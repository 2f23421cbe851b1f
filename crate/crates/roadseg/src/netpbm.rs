//! Binary netpbm codec: P6 color and P5 gray, maxval 255 only.
//!
//! This is the interchange format for every pipeline stage and for the
//! ground-truth masks. Encoding is canonical (`P6\n<w> <h>\n255\n` + payload),
//! so decode-then-encode normalizes any valid file.

use crate::raster::{unit_to_byte, BinaryMask, GrayRaster, RgbRaster};

/// Refuse to allocate rasters beyond this pixel count from untrusted headers.
const MAX_PIXELS: usize = 1 << 27;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("malformed netpbm header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {0} (only 255)")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    /// Skips whitespace and `#` comments (comments run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    fn read_number(&mut self) -> Result<u32, CodecError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(CodecError::MalformedHeader(
                "expected decimal token".to_string(),
            ));
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii digits");
        text.parse::<u32>()
            .map_err(|_| CodecError::MalformedHeader(format!("numeric overflow in `{text}`")))
    }

    /// Consumes the single whitespace byte that terminates the header.
    fn finish_header(&mut self) -> Result<usize, CodecError> {
        if self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            Ok(self.pos + 1)
        } else {
            Err(CodecError::MalformedHeader(
                "missing whitespace after maxval".to_string(),
            ))
        }
    }
}

fn parse_header(bytes: &[u8], magic: &[u8]) -> Result<(usize, usize, usize), CodecError> {
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(CodecError::MalformedHeader(format!(
            "expected magic {}",
            String::from_utf8_lossy(magic)
        )));
    }
    let mut reader = HeaderReader::new(&bytes[2..]);
    let width = reader.read_number()? as usize;
    let height = reader.read_number()? as usize;
    let maxval = reader.read_number()?;
    if width == 0 || height == 0 {
        return Err(CodecError::MalformedHeader(
            "zero width or height".to_string(),
        ));
    }
    if width.saturating_mul(height) > MAX_PIXELS {
        return Err(CodecError::MalformedHeader(
            "image dimensions too large".to_string(),
        ));
    }
    if maxval != 255 {
        return Err(CodecError::UnsupportedMaxval(maxval));
    }
    let body = 2 + reader.finish_header()?;
    Ok((width, height, body))
}

/// Decodes a binary P6 color image.
pub fn load_ppm(bytes: &[u8]) -> Result<RgbRaster, CodecError> {
    let (width, height, body) = parse_header(bytes, b"P6")?;
    let expected = width * height * 3;
    let payload = &bytes[body..];
    if payload.len() < expected {
        return Err(CodecError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let pixels = payload[..expected]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbRaster::new(width, height, pixels))
}

/// Encodes to canonical binary P6.
pub fn save_ppm(img: &RgbRaster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.reserve(img.pixels().len() * 3);
    for p in img.pixels() {
        out.extend_from_slice(p);
    }
    out
}

/// Decodes a binary P5 gray image to unit-interval values (byte / 255).
pub fn load_pgm(bytes: &[u8]) -> Result<GrayRaster, CodecError> {
    let (width, height, body) = parse_header(bytes, b"P5")?;
    let expected = width * height;
    let payload = &bytes[body..];
    if payload.len() < expected {
        return Err(CodecError::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let values = payload[..expected]
        .iter()
        .map(|&b| f64::from(b) / 255.0)
        .collect();
    Ok(GrayRaster::new(width, height, values))
}

/// Encodes to canonical binary P5; values are clamped to [0,1] then scaled
/// by 255 and rounded half-up.
pub fn save_pgm(gray: &GrayRaster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", gray.width(), gray.height()).into_bytes();
    out.reserve(gray.values().len());
    for &v in gray.values() {
        out.push(unit_to_byte(v.clamp(0.0, 1.0)));
    }
    out
}

/// Encodes a mask as P5 with the 1 -> 255, 0 -> 0 convention.
pub fn save_mask_pgm(mask: &BinaryMask) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    out.reserve(mask.bits().len());
    for &bit in mask.bits() {
        out.push(if bit { 255 } else { 0 });
    }
    out
}

/// Reads a mask stored as P5: bytes above mid-gray are 1.
pub fn load_mask_pgm(bytes: &[u8]) -> Result<BinaryMask, CodecError> {
    let gray = load_pgm(bytes)?;
    Ok(mask_from_gray(&gray, 0.5))
}

/// Binarizes a gray plane: values strictly above `threshold` become 1.
pub fn mask_from_gray(gray: &GrayRaster, threshold: f64) -> BinaryMask {
    BinaryMask::new(
        gray.width(),
        gray.height(),
        gray.values().iter().map(|&v| v > threshold).collect(),
    )
}

//! Binary pattern images and their normalized vector form.
//!
//! Images are read from and written to portable bitmaps (PBM, `P1`/`P4`).
//! A deterministic synthetic generator stands in for externally rendered
//! code images so a dataset can be rebuilt from labels alone.

use std::fmt;

use thiserror::Error;

/// Tolerance on `Σ v² = 1` for a [`PatternVector`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum CodecError {
    #[error("PBM parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("unsupported PBM type {magic:?} at byte 0 (only P1 and P4 are accepted)")]
    UnsupportedType { magic: String },

    #[error("invalid image dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },

    #[error("pixel buffer holds {got} entries, expected {expected}")]
    PixelCount { expected: usize, got: usize },

    #[error("image {label:?} has no dark pixel and cannot be normalized")]
    AllLight { label: String },

    #[error("pattern label must not be empty")]
    EmptyLabel,

    #[error("vector length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// A binary pixel grid with the attribute-element name it encodes.
///
/// `true` is a dark pixel. Pixels are stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternImage {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    label: String,
}

impl PatternImage {
    pub fn new(
        width: usize,
        height: usize,
        bits: Vec<bool>,
        label: impl Into<String>,
    ) -> Result<Self, CodecError> {
        if width == 0 || height == 0 {
            return Err(CodecError::BadDimensions { width, height });
        }
        let expected = width
            .checked_mul(height)
            .ok_or(CodecError::BadDimensions { width, height })?;
        if bits.len() != expected {
            return Err(CodecError::PixelCount {
                expected,
                got: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
            label: label.into(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Dark flag at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn dark_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Renders the grid as text, one line per row, `█` dark and `·` light.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity((self.width * 3 + 1) * self.height);
        for row in self.bits.chunks(self.width) {
            for &dark in row {
                out.push(if dark { '█' } else { '·' });
            }
            out.push('\n');
        }
        out
    }
}

/// Unit-norm, non-negative vector form of a [`PatternImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct PatternVector {
    values: Vec<f64>,
    source_label: String,
}

impl PatternVector {
    /// Wraps raw values, normalizing them to unit length.
    pub fn from_values(values: Vec<f64>, label: impl Into<String>) -> Result<Self, CodecError> {
        let label = label.into();
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(CodecError::AllLight { label });
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
            source_label: label,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Highest component index (`len - 1`).
    pub fn max_index(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn source_label(&self) -> &str {
        &self.source_label
    }

    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Row-major dark → 1, light → 0, then scaled to unit Euclidean norm.
pub fn vectorize(image: &PatternImage) -> Result<PatternVector, CodecError> {
    let dark = image.dark_count();
    if dark == 0 {
        return Err(CodecError::AllLight {
            label: image.label.clone(),
        });
    }
    let level = 1.0 / (dark as f64).sqrt();
    Ok(PatternVector {
        values: image
            .bits
            .iter()
            .map(|&b| if b { level } else { 0.0 })
            .collect(),
        source_label: image.label.clone(),
    })
}

/// Dot product of two unit vectors.
pub fn cosine(p: &PatternVector, q: &PatternVector) -> Result<f64, CodecError> {
    dot(p.values(), q.values())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> Result<f64, CodecError> {
    if a.len() != b.len() {
        return Err(CodecError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

// ---------------------------------------------------------------------------
// Synthetic patterns

const FNV_OFFSET_BASIS: u64 = 14_695_981_039_346_656_037;
const FNV_PRIME: u64 = 1_099_511_628_211;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET_BASIS, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Clone, Copy, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Deterministic pseudo-random image for `label`.
///
/// Seeded with FNV-1a of the label bytes; each pixel takes the top bit of
/// one splitmix64 output. An all-light result is regenerated from seed + 1.
pub fn synth_pattern(label: &str, width: usize, height: usize) -> Result<PatternImage, CodecError> {
    if label.is_empty() {
        return Err(CodecError::EmptyLabel);
    }
    if width == 0 || height == 0 {
        return Err(CodecError::BadDimensions { width, height });
    }
    let mut seed = fnv1a64(label.as_bytes());
    loop {
        let mut rng = SplitMix64::new(seed);
        let bits: Vec<bool> = (0..width * height)
            .map(|_| rng.next_u64() >> 63 == 1)
            .collect();
        if bits.iter().any(|&b| b) {
            return PatternImage::new(width, height, bits, label);
        }
        seed = seed.wrapping_add(1);
    }
}

// ---------------------------------------------------------------------------
// PBM

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PbmKind {
    Ascii,
    Binary,
}

impl fmt::Display for PbmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PbmKind::Ascii => "P1",
            PbmKind::Binary => "P4",
        })
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> CodecError {
        CodecError::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.data.get(self.pos).copied()
    }

    /// Skips whitespace and `#` comments.
    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, CodecError> {
        self.skip_blank();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CodecError::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

/// Parses a `P1` or `P4` bitmap. PBM 1 (black) becomes a dark pixel.
pub fn load_pbm(bytes: &[u8], label: &str) -> Result<PatternImage, CodecError> {
    let mut cur = Cursor {
        data: bytes,
        pos: 0,
    };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing PBM magic number"));
    }
    let kind = match bytes[1] {
        b'1' => PbmKind::Ascii,
        b'4' => PbmKind::Binary,
        b'2' | b'3' | b'5' | b'6' | b'7' => {
            return Err(CodecError::UnsupportedType {
                magic: String::from_utf8_lossy(&bytes[..2]).into_owned(),
            })
        }
        _ => return Err(cur.err("missing PBM magic number")),
    };
    cur.pos = 2;
    if !matches!(cur.peek(), Some(c) if c.is_ascii_whitespace() || c == b'#') {
        return Err(cur.err(format!("expected whitespace after {kind}")));
    }
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(CodecError::BadDimensions { width, height });
    }
    let count = width
        .checked_mul(height)
        .ok_or(CodecError::BadDimensions { width, height })?;

    let bits = match kind {
        PbmKind::Ascii => {
            let mut bits = Vec::with_capacity(count);
            while bits.len() < count {
                cur.skip_blank();
                match cur.peek() {
                    Some(b'0') => bits.push(false),
                    Some(b'1') => bits.push(true),
                    Some(_) => return Err(cur.err("expected pixel value 0 or 1")),
                    None => {
                        return Err(cur.err(format!(
                            "payload ends after {} of {count} pixels",
                            bits.len()
                        )))
                    }
                }
                cur.pos += 1;
            }
            cur.skip_blank();
            if cur.pos != bytes.len() {
                return Err(cur.err("data after the last pixel"));
            }
            bits
        }
        PbmKind::Binary => {
            match cur.peek() {
                Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
                _ => return Err(cur.err("expected single whitespace before payload")),
            }
            let stride = width.div_ceil(8);
            let payload = &bytes[cur.pos..];
            let expected = stride * height;
            if payload.len() != expected {
                let offset = cur.pos + payload.len().min(expected);
                return Err(CodecError::Parse {
                    offset,
                    message: format!(
                        "payload is {} bytes, {width}x{height} needs {expected}",
                        payload.len()
                    ),
                });
            }
            let mut bits = Vec::with_capacity(count);
            for row in payload.chunks(stride) {
                bits.extend((0..width).map(|x| row[x / 8] & (0x80 >> (x % 8)) != 0));
            }
            bits
        }
    };
    PatternImage::new(width, height, bits, label)
}

/// Encodes as `P4`, rows padded to a byte boundary, MSB first.
pub fn save_pbm(image: &PatternImage) -> Vec<u8> {
    let stride = image.width.div_ceil(8);
    let mut out = format!("P4\n{} {}\n", image.width, image.height).into_bytes();
    out.reserve(stride * image.height);
    for row in image.bits.chunks(image.width) {
        let mut packed = vec![0u8; stride];
        for (x, _) in row.iter().enumerate().filter(|(_, &dark)| dark) {
            packed[x / 8] |= 0x80 >> (x % 8);
        }
        out.extend_from_slice(&packed);
    }
    out
}

//! Binary weight archive.
//!
//! Layout, all integers `u32` little-endian, all reals `f64` little-endian,
//! strings as `u32` byte length followed by UTF-8:
//!
//! ```text
//! "CBRN"  version=1
//! width height neurons_per_ball eps_w eps_v lambda_cb
//! theta_count theta*  threshold_d  ball_count name*
//! per ball, per neuron: learned(u8) label w[width*height] v[width*height]
//! link_count, per link: from to u[n*n] (row-major, target-neuron major)
//! ```
//!
//! An absent label is written with length 0.

use thiserror::Error;

use crate::model::{CbrnSystem, CrossLink, CueBall, CueNeuron, ModelError, SystemConfig};

pub const MAGIC: &[u8; 4] = b"CBRN";
pub const VERSION: u32 = 1;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ArchiveError {
    #[error("bad magic {0:02x?}, not a weight archive")]
    BadMagic(Vec<u8>),

    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),

    #[error("archive truncated at offset {offset} (reading {what})")]
    Truncated { offset: usize, what: &'static str },

    #[error("{count} trailing bytes after archive end at offset {offset}")]
    TrailingBytes { offset: usize, count: usize },

    #[error("invalid UTF-8 in {what} at offset {offset}")]
    Utf8 { offset: usize, what: &'static str },

    #[error("invalid value at offset {offset}: {message}")]
    Invalid { offset: usize, message: String },

    #[error("decoded archive is inconsistent: {0}")]
    Inconsistent(#[from] ModelError),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("count fits in u32");
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for &v in vs {
            self.f64(v);
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
}

pub fn save_weights(system: &CbrnSystem) -> Vec<u8> {
    let c = system.config();
    let len = c.pattern_len();
    let mut w = Writer(Vec::with_capacity(
        64 + system.balls().len() * c.neurons_per_ball * (16 * len + 16),
    ));
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(c.image_width);
    w.u32(c.image_height);
    w.u32(c.neurons_per_ball);
    w.f64(c.eps_w);
    w.f64(c.eps_v);
    w.f64(c.lambda_cb);
    w.u32(c.theta_series.len());
    w.f64s(&c.theta_series);
    w.f64(c.threshold_d);
    w.u32(c.chain_order.len());
    for name in &c.chain_order {
        w.str(name);
    }
    for ball in system.balls() {
        for n in &ball.neurons {
            w.u8(u8::from(n.learned));
            w.str(n.label.as_deref().unwrap_or(""));
            w.f64s(&n.w);
            w.f64s(&n.v);
        }
    }
    w.u32(system.links().len());
    for link in system.links() {
        w.str(&link.from_ball);
        w.str(&link.to_ball);
        w.f64s(link.weights());
    }
    w.0
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ArchiveError> {
        match self.pos.checked_add(n) {
            Some(end) if end <= self.data.len() => {
                let s = &self.data[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            _ => Err(ArchiveError::Truncated {
                offset: self.data.len(),
                what,
            }),
        }
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ArchiveError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<usize, ArchiveError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn f64(&mut self, what: &'static str) -> Result<f64, ArchiveError> {
        let b = self.take(8, what)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &'static str) -> Result<Vec<f64>, ArchiveError> {
        let bytes = self.take(n.saturating_mul(8), what)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn str(&mut self, what: &'static str) -> Result<String, ArchiveError> {
        let len = self.u32(what)?;
        let offset = self.pos;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| ArchiveError::Utf8 { offset, what })
    }
}

pub fn load_weights(bytes: &[u8]) -> Result<CbrnSystem, ArchiveError> {
    let mut r = Reader {
        data: bytes,
        pos: 0,
    };
    let magic = r.take(4, "magic").map_err(|_| ArchiveError::BadMagic(bytes.to_vec()))?;
    if magic != MAGIC {
        return Err(ArchiveError::BadMagic(magic.to_vec()));
    }
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let image_width = r.u32("width")?;
    let image_height = r.u32("height")?;
    let neurons_per_ball = r.u32("neurons per ball")?;
    let eps_w = r.f64("eps_w")?;
    let eps_v = r.f64("eps_v")?;
    let lambda_cb = r.f64("lambda_cb")?;
    let theta_count = r.u32("theta count")?;
    let theta_series = r.f64s(theta_count, "theta series")?;
    let threshold_d = r.f64("threshold")?;
    let ball_count = r.u32("ball count")?;
    let chain_order = (0..ball_count)
        .map(|_| r.str("ball name"))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SystemConfig {
        image_width,
        image_height,
        neurons_per_ball,
        eps_w,
        eps_v,
        lambda_cb,
        theta_series,
        threshold_d,
        chain_order,
    };
    config.validate()?;
    let len = image_width
        .checked_mul(image_height)
        .ok_or_else(|| ArchiveError::Invalid {
            offset: 8,
            message: "image size overflows".into(),
        })?;

    let mut balls = Vec::with_capacity(ball_count);
    for name in &config.chain_order {
        let mut ball = CueBall {
            attribute: name.clone(),
            neurons: Vec::with_capacity(neurons_per_ball),
        };
        for _ in 0..neurons_per_ball {
            let offset = r.pos;
            let learned = match r.u8("learned flag")? {
                0 => false,
                1 => true,
                other => {
                    return Err(ArchiveError::Invalid {
                        offset,
                        message: format!("learned flag {other}"),
                    })
                }
            };
            let label = r.str("label")?;
            let w = r.f64s(len, "w weights")?;
            let v = r.f64s(len, "v weights")?;
            ball.neurons.push(CueNeuron {
                w,
                v,
                learned,
                label: (!label.is_empty()).then_some(label),
            });
        }
        balls.push(ball);
    }

    let link_count = r.u32("link count")?;
    let mut links = Vec::with_capacity(link_count.min(64));
    for _ in 0..link_count {
        let from = r.str("link source")?;
        let to = r.str("link target")?;
        let u = r.f64s(neurons_per_ball * neurons_per_ball, "u weights")?;
        links.push(CrossLink::from_parts(from, to, neurons_per_ball, u));
    }
    if r.pos != bytes.len() {
        return Err(ArchiveError::TrailingBytes {
            offset: r.pos,
            count: bytes.len() - r.pos,
        });
    }
    Ok(CbrnSystem::from_parts(config, balls, links)?)
}

//! RGB images in `[0, 1]` and binary PPM (P6) I/O.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major, channel-interleaved RGB image with components in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::shape(
                "RgbImage::new",
                format!("{} values for a {width}x{height} RGB image", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "pixel component {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Snaps every component to the nearest 8-bit level, as a PPM round trip would.
    pub fn quantized(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(to_byte(v)) / 255.0).collect(),
        }
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| to_byte(v)));
        out
    }

    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        parse_ppm(bytes)
    }

    pub fn read_ppm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
        parse_ppm(&bytes)
    }

    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::file(path, e))
    }
}

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: "PPM",
        offset,
        msg: msg.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(parse_err(start, format!("expected {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(start, format!("{field} out of range")))
    }
}

fn parse_ppm(bytes: &[u8]) -> Result<RgbImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(parse_err(0, "missing P6 magic"));
    }
    let mut cur = HeaderCursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(parse_err(2, "expected whitespace after magic"));
    }
    cur.skip_whitespace_and_comments();
    let width_at = cur.pos;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(parse_err(width_at, format!("zero dimension {width}x{height}")));
    }
    cur.skip_whitespace_and_comments();
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(parse_err(maxval_at, format!("maxval {maxval} is not 8-bit")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(parse_err(cur.pos, "expected single whitespace before pixel data")),
    }
    let need = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| parse_err(width_at, "dimensions overflow"))?;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: {} of {need} bytes", payload.len()),
        ));
    }
    let scale = maxval as f64;
    let data = payload[..need]
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            if usize::from(b) > maxval {
                Err(parse_err(cur.pos + i, format!("sample {b} exceeds maxval {maxval}")))
            } else {
                Ok(f64::from(b) / scale)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RgbImage::new(width, height, data)
}

/// Procedural test scene: a shaded backdrop, a soft disc, a hard-edged
/// rectangle and a striped band. Deterministic in `(width, height)`.
pub fn synthetic_scene(width: usize, height: usize) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let u = (x as f64 + 0.5) / width as f64;
        let v = (y as f64 + 0.5) / height as f64;
        let mut rgb = [0.15 + 0.55 * v, 0.25 + 0.35 * u, 0.65 - 0.4 * v];

        let (dx, dy) = (u - 0.35, v - 0.4);
        let r = (dx * dx + dy * dy).sqrt();
        let disc = (1.0 - ((r - 0.2) / 0.02).tanh()) * 0.5;
        let disc_rgb = [0.95, 0.75 - 0.6 * r, 0.2];
        for c in 0..3 {
            rgb[c] = rgb[c] * (1.0 - disc) + disc_rgb[c] * disc;
        }

        if (0.6..0.9).contains(&u) && (0.55..0.85).contains(&v) {
            rgb = [0.1, 0.2 + 0.5 * u, 0.35];
        }

        if (0.08..0.22).contains(&v) {
            let s = 0.5 + 0.5 * (u * 6.0 * std::f64::consts::TAU).sin();
            rgb = [0.3 + 0.6 * s, 0.3 + 0.6 * s, 0.9 - 0.5 * s];
        }
        rgb.map(|c| c.clamp(0.0, 1.0))
    })
    .expect("scene components are clamped to [0, 1]")
}

/// [`synthetic_scene`] plus fixed per-pixel grain of amplitude `grain`, so
/// that part of the image is too fine for a low-bandwidth encoding to fit.
pub fn grainy_scene(width: usize, height: usize, grain: f64) -> RgbImage {
    let base = synthetic_scene(width, height);
    RgbImage::from_fn(width, height, |x, y| {
        let p = base.pixel(x, y);
        [0, 1, 2].map(|c| (p[c] + grain * (2.0 * pixel_hash(x, y, c) - 1.0)).clamp(0.0, 1.0))
    })
    .expect("grain is clamped to [0, 1]")
}

/// Uniform value in `[0, 1)` determined by pixel position and channel.
fn pixel_hash(x: usize, y: usize, c: usize) -> f64 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ (c as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
    h ^= h >> 29;
    h = h.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    h ^= h >> 32;
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Left half one colour, right half another.
pub fn two_tone(width: usize, height: usize) -> RgbImage {
    RgbImage::from_fn(width, height, |x, _| {
        if x < width / 2 {
            [0.9, 0.2, 0.1]
        } else {
            [0.1, 0.3, 0.8]
        }
    })
    .expect("constant colours are in range")
}

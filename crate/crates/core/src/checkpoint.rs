//! Binary checkpoint format.
//!
//! ```text
//! magic      8 bytes  "PRNFLD01"
//! u32 LE     input_dim, n_freqs, depth
//! u32 LE     hidden width × depth
//! u32 LE     skip_at, output_dim, flags
//!            flags bit 0: raw input prepended to the encoding
//!            flags bit 1: view branch present, followed by
//! u32 LE     dir_dim, dir_freqs, feature_width, view_width
//! payload    per layer in storage order: weights (fan_out × fan_in,
//!            row-major) then biases, all f32 LE
//! ```
//!
//! The header fully determines the payload length; anything shorter or
//! longer is rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mlp::{ArchSpec, Dense, MlpModel, ViewBranch};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 8] = b"PRNFLD01";

const FLAG_INCLUDE_INPUT: u32 = 1;
const FLAG_VIEW_BRANCH: u32 = 1 << 1;

/// Header bytes for `arch`.
pub fn header_len(arch: &ArchSpec) -> usize {
    let view = if arch.view_branch.is_some() { 4 } else { 0 };
    MAGIC.len() + 4 * (6 + arch.depth() + view)
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

pub fn to_bytes(model: &MlpModel) -> Vec<u8> {
    let arch = &model.arch;
    let mut out = Vec::with_capacity(header_len(arch) + 4 * model.param_count());
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, arch.input_dim);
    put_u32(&mut out, arch.n_freqs);
    put_u32(&mut out, arch.depth());
    for &w in &arch.widths {
        put_u32(&mut out, w);
    }
    put_u32(&mut out, arch.skip_at);
    put_u32(&mut out, arch.output_dim);
    let mut flags = 0;
    if arch.include_input {
        flags |= FLAG_INCLUDE_INPUT;
    }
    if arch.view_branch.is_some() {
        flags |= FLAG_VIEW_BRANCH;
    }
    put_u32(&mut out, flags as usize);
    if let Some(v) = &arch.view_branch {
        for x in [v.dir_dim, v.dir_freqs, v.feature_width, v.view_width] {
            put_u32(&mut out, x);
        }
    }
    for layer in &model.layers {
        for &w in layer.weights.data().iter().chain(&layer.biases) {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
    }
    out
}

fn parse_err(offset: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        what: "checkpoint",
        offset,
        msg: msg.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn u32(&mut self, field: &str) -> Result<usize> {
        let end = self.pos + 4;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| parse_err(self.bytes.len(), format!("truncated header reading {field}")))?;
        self.pos = end;
        Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let start = self.pos;
        let end = start + 4 * n;
        let chunk = self
            .bytes
            .get(start..end)
            .ok_or_else(|| parse_err(self.bytes.len(), "truncated payload"))?;
        self.pos = end;
        chunk
            .chunks_exact(4)
            .enumerate()
            .map(|(i, b)| {
                let v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
                if v.is_finite() {
                    Ok(f64::from(v))
                } else {
                    Err(parse_err(start + 4 * i, "non-finite parameter"))
                }
            })
            .collect()
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<MlpModel> {
    if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
        return Err(parse_err(0, "bad magic"));
    }
    let mut r = Reader {
        bytes,
        pos: MAGIC.len(),
    };
    let input_dim = r.u32("input_dim")?;
    let n_freqs = r.u32("n_freqs")?;
    let depth_at = r.pos;
    let depth = r.u32("depth")?;
    // every hidden width takes 4 header bytes; reject absurd depths before allocating
    if depth > bytes.len() / 4 {
        return Err(parse_err(depth_at, format!("depth {depth} exceeds file size")));
    }
    let widths = (0..depth)
        .map(|_| r.u32("width"))
        .collect::<Result<Vec<_>>>()?;
    let skip_at = r.u32("skip_at")?;
    let output_dim = r.u32("output_dim")?;
    let flags_at = r.pos;
    let flags = r.u32("flags")? as u32;
    if flags & !(FLAG_INCLUDE_INPUT | FLAG_VIEW_BRANCH) != 0 {
        return Err(parse_err(flags_at, format!("unknown flags {flags:#x}")));
    }
    let view_branch = if flags & FLAG_VIEW_BRANCH != 0 {
        Some(ViewBranch {
            dir_dim: r.u32("dir_dim")?,
            dir_freqs: r.u32("dir_freqs")?,
            feature_width: r.u32("feature_width")?,
            view_width: r.u32("view_width")?,
        })
    } else {
        None
    };
    let arch = ArchSpec {
        input_dim,
        n_freqs,
        include_input: flags & FLAG_INCLUDE_INPUT != 0,
        widths,
        skip_at,
        output_dim,
        view_branch,
    };
    arch.validate()
        .map_err(|e| parse_err(MAGIC.len(), format!("invalid architecture: {e}")))?;

    let shapes = arch.layer_shapes();
    let expected: usize = shapes.iter().map(|&(i, o)| 4 * (i * o + o)).sum();
    let have = bytes.len() - r.pos;
    if have != expected {
        let offset = if have < expected { bytes.len() } else { r.pos + expected };
        return Err(parse_err(
            offset,
            format!("payload is {have} bytes, header declares {expected}"),
        ));
    }
    let mut layers = Vec::with_capacity(shapes.len());
    for (fan_in, fan_out) in shapes {
        let w = r.f32s(fan_in * fan_out)?;
        let biases = r.f32s(fan_out)?;
        layers.push(Dense {
            weights: Matrix::from_vec(fan_out, fan_in, w)?,
            biases,
        });
    }
    Ok(MlpModel {
        arch,
        layers,
        provenance: vec!["checkpoint".into()],
    })
}

pub fn save(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(model)).map_err(|e| Error::file(path, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    from_bytes(&bytes)
}

//! Per-clip feature file (`.msaf`).
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MSAF"
//! 4       2     version (1)
//! 6       1     modality (0 visual, 1 acoustic, 2 linguistic)
//! 7       2     layer count L (1 when pre-aggregated)
//! 9       4     frames T
//! 13      4     feature width D
//! 17      4·LTD f32 payload, [L][T][D] row-major
//! ```
//! All integers and floats are little-endian.

use std::io::{Read, Seek, SeekFrom};
use std::path::Path;

use crate::binio::{put_f32s, Reader};
use crate::diffgraph::Tensor;
use crate::{Error, Modality, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"MSAF";
pub const FEATURE_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureHeader {
    pub modality: Modality,
    pub layers: usize,
    pub frames: usize,
    pub dim: usize,
}

impl FeatureHeader {
    pub fn payload_len(&self) -> usize {
        self.layers * self.frames * self.dim
    }

    fn encode(&self) -> Result<[u8; HEADER_LEN]> {
        let layers = u16::try_from(self.layers)
            .map_err(|_| Error::Config(format!("layer count {} exceeds u16", self.layers)))?;
        let frames = u32::try_from(self.frames)
            .map_err(|_| Error::Config(format!("frame count {} exceeds u32", self.frames)))?;
        let dim = u32::try_from(self.dim)
            .map_err(|_| Error::Config(format!("feature width {} exceeds u32", self.dim)))?;
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(FEATURE_MAGIC);
        h[4..6].copy_from_slice(&FEATURE_VERSION.to_le_bytes());
        h[6] = self.modality.index() as u8;
        h[7..9].copy_from_slice(&layers.to_le_bytes());
        h[9..13].copy_from_slice(&frames.to_le_bytes());
        h[13..17].copy_from_slice(&dim.to_le_bytes());
        Ok(h)
    }

    fn decode(r: &mut Reader<'_>) -> Result<Self> {
        if r.bytes(4, "magic")? != FEATURE_MAGIC {
            return Err(Error::format(0, "bad feature-file magic"));
        }
        let version = r.u16("version")?;
        if version != FEATURE_VERSION {
            return Err(Error::format(4, format!("unsupported feature-file version {version}")));
        }
        let tag = r.u8("modality")?;
        let modality = Modality::from_index(tag as usize)
            .ok_or_else(|| Error::format(6, format!("unknown modality tag {tag}")))?;
        let layers = r.u16("layer count")? as usize;
        let frames = r.u32("frame count")? as usize;
        let dim = r.u32("feature width")? as usize;
        for (v, what, at) in [(layers, "layer count", 7), (frames, "frame count", 9), (dim, "feature width", 13)] {
            if v == 0 {
                return Err(Error::format(at, format!("{what} is zero")));
            }
        }
        let bytes = layers
            .checked_mul(frames)
            .and_then(|n| n.checked_mul(dim))
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(HEADER_LEN));
        if bytes.is_none() {
            return Err(Error::format(7, format!("payload size {layers}x{frames}x{dim} overflows")));
        }
        Ok(FeatureHeader {
            modality,
            layers,
            frames,
            dim,
        })
    }
}

/// Serialises `[L×T×D]` or `[T×D]` (stored with L = 1).
pub fn encode_clip_features(modality: Modality, x: &Tensor<f32>) -> Result<Vec<u8>> {
    let (layers, frames, dim) = match x.shape() {
        [t, d] => (1, *t, *d),
        [l, t, d] => (*l, *t, *d),
        other => {
            return Err(Error::Dimension {
                op: "write_clip_features",
                lhs: other.to_vec(),
                rhs: vec![],
            })
        }
    };
    if let Some(i) = x.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature value at element {i}")));
    }
    let header = FeatureHeader {
        modality,
        layers,
        frames,
        dim,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * x.len());
    out.extend_from_slice(&header.encode()?);
    put_f32s(&mut out, x.data());
    Ok(out)
}

/// Parses a feature file; the tensor is always `[L×T×D]`.
pub fn decode_clip_features(bytes: &[u8]) -> Result<(FeatureHeader, Tensor<f32>)> {
    let mut r = Reader::new(bytes);
    let header = FeatureHeader::decode(&mut r)?;
    let data = r.f32s(header.payload_len(), "feature payload")?;
    if r.remaining() != 0 {
        return Err(Error::format(r.pos(), format!("{} trailing bytes", r.remaining())));
    }
    let t = Tensor::new(vec![header.layers, header.frames, header.dim], data)?;
    Ok((header, t))
}

pub fn write_clip_features(path: impl AsRef<Path>, modality: Modality, x: &Tensor<f32>) -> Result<()> {
    let bytes = encode_clip_features(modality, x)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

pub fn read_clip_features(path: impl AsRef<Path>) -> Result<(FeatureHeader, Tensor<f32>)> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    decode_clip_features(&bytes).map_err(|e| annotate(e, path.as_ref()))
}

/// Reads the header and checks the file length against it.
pub fn read_header(path: impl AsRef<Path>) -> Result<FeatureHeader> {
    let path = path.as_ref();
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = [0u8; HEADER_LEN];
    let n = read_up_to(&mut f, &mut buf).map_err(|e| Error::io(path, e))?;
    let header = FeatureHeader::decode(&mut Reader::new(&buf[..n])).map_err(|e| annotate(e, path))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let expected = (HEADER_LEN + 4 * header.payload_len()) as u64;
    if len != expected {
        return Err(annotate(
            Error::format(len.min(expected), format!("file is {len} bytes, header implies {expected}")),
            path,
        ));
    }
    Ok(header)
}

/// Reads only layer `k` (1-based) as `[T×D]`.
pub fn read_clip_layer(path: impl AsRef<Path>, k: usize) -> Result<(FeatureHeader, Tensor<f32>)> {
    let path = path.as_ref();
    let header = read_header(path)?;
    if k == 0 || k > header.layers {
        return Err(Error::Config(format!(
            "{}: layer {k} outside 1..={}",
            path.display(),
            header.layers
        )));
    }
    let per_layer = header.frames * header.dim;
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let offset = (HEADER_LEN + 4 * per_layer * (k - 1)) as u64;
    f.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(path, e))?;
    let mut buf = vec![0u8; 4 * per_layer];
    f.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    let data = Reader::new(&buf).f32s(per_layer, "layer payload")?;
    Ok((header, Tensor::new(vec![header.frames, header.dim], data)?))
}

fn read_up_to(f: &mut std::fs::File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match f.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

fn annotate(e: Error, path: &Path) -> Error {
    match e {
        Error::Format { offset, msg } => Error::Format {
            offset,
            msg: format!("{}: {msg}", path.display()),
        },
        other => other,
    }
}

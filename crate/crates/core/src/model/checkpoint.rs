//! Parameter checkpoint file.
//!
//! Layout (little-endian): magic `UEGDP\0`, version `u16`, the model
//! configuration, then tensors until end of file, each as
//! `name_len u16 | name utf-8 | rank u8 | extents u32×rank | f32 payload`.
//!
//! Configuration block: `embed_dim u32, enc_hidden u32, heads u32,
//! dec_hidden u32, dropout f64, modality mask u8, aggregation u8
//! (0 final, 1 single, 2 weighted), single-layer indices u16×3,
//! input_dims u32×3, num_layers u16×3`.

use std::path::Path;

use super::config::{Aggregation, ModalitySet, ModelConfig};
use super::params::{Layout, ParamStore};
use crate::binio::{put_f32s, Reader};
use crate::diffgraph::Tensor;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 6] = b"UEGDP\0";
pub const CHECKPOINT_VERSION: u16 = 1;

fn u16_field(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the checkpoint format")))
}

fn u32_field(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Config(format!("{what} {v} does not fit the checkpoint format")))
}

pub fn encode_checkpoint(config: &ModelConfig, params: &ParamStore<f32>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for (v, what) in [
        (config.embed_dim, "embed_dim"),
        (config.enc_hidden, "enc_hidden"),
        (config.heads, "heads"),
        (config.dec_hidden, "dec_hidden"),
    ] {
        out.extend_from_slice(&u32_field(v, what)?.to_le_bytes());
    }
    out.extend_from_slice(&config.dropout.to_le_bytes());
    out.push(config.modalities.bits());
    let (tag, ks) = match config.aggregation {
        Aggregation::FinalOutput => (0u8, [0; 3]),
        Aggregation::SingleLayer(ks) => (1, ks),
        Aggregation::WeightedSum => (2, [0; 3]),
    };
    out.push(tag);
    for k in ks {
        out.extend_from_slice(&u16_field(k, "layer index")?.to_le_bytes());
    }
    for d in config.input_dims {
        out.extend_from_slice(&u32_field(d, "input dim")?.to_le_bytes());
    }
    for l in config.num_layers {
        out.extend_from_slice(&u16_field(l, "layer count")?.to_le_bytes());
    }
    for (name, t) in params.iter() {
        out.extend_from_slice(&u16_field(name.len(), "name length")?.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank()).map_err(|_| Error::Config("tensor rank above 255".into()))?;
        out.push(rank);
        for &e in t.shape() {
            out.extend_from_slice(&u32_field(e, "extent")?.to_le_bytes());
        }
        put_f32s(&mut out, t.data());
    }
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelConfig, ParamStore<f32>)> {
    let mut r = Reader::new(bytes);
    let magic = r.bytes(6, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "bad checkpoint magic"));
    }
    let at = r.pos();
    let version = r.u16("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(at, format!("unsupported checkpoint version {version}")));
    }
    let embed_dim = r.u32("embed_dim")? as usize;
    let enc_hidden = r.u32("enc_hidden")? as usize;
    let heads = r.u32("heads")? as usize;
    let dec_hidden = r.u32("dec_hidden")? as usize;
    let dropout = r.f64("dropout")?;
    let at = r.pos();
    let modalities = ModalitySet::from_bits(r.u8("modality mask")?).map_err(|e| Error::format(at, e.to_string()))?;
    let at = r.pos();
    let tag = r.u8("aggregation")?;
    let mut ks = [0usize; 3];
    for k in &mut ks {
        *k = r.u16("layer index")? as usize;
    }
    let aggregation = match tag {
        0 => Aggregation::FinalOutput,
        1 => Aggregation::SingleLayer(ks),
        2 => Aggregation::WeightedSum,
        other => return Err(Error::format(at, format!("unknown aggregation tag {other}"))),
    };
    let mut input_dims = [0usize; 3];
    for d in &mut input_dims {
        *d = r.u32("input dim")? as usize;
    }
    let mut num_layers = [0usize; 3];
    for l in &mut num_layers {
        *l = r.u16("layer count")? as usize;
    }
    let config = ModelConfig {
        embed_dim,
        enc_hidden,
        heads,
        dec_hidden,
        dropout,
        modalities,
        aggregation,
        input_dims,
        num_layers,
    };
    let cfg_end = r.pos();
    config
        .validate()
        .map_err(|e| Error::format(cfg_end, format!("invalid configuration: {e}")))?;

    let mut named = Vec::new();
    while r.remaining() > 0 {
        let start = r.pos();
        let len = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.bytes(len, "tensor name")?)
            .map_err(|_| Error::format(start + 2, "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8("tensor rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        let n = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let n = n.ok_or_else(|| Error::format(start, format!("{name}: extent product overflows")))?;
        let data = r.f32s(n, &format!("payload of {name}"))?;
        let t = Tensor::new(shape, data).map_err(|e| Error::format(start, format!("{name}: {e}")))?;
        named.push((name, t));
    }
    let layout = Layout::new(&config);
    let params =
        ParamStore::from_tensors(&layout, named).map_err(|e| Error::format(r.pos(), e.to_string()))?;
    Ok((config, params))
}

pub fn write_checkpoint(path: impl AsRef<Path>, config: &ModelConfig, params: &ParamStore<f32>) -> Result<()> {
    let bytes = encode_checkpoint(config, params)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(ModelConfig, ParamStore<f32>)> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

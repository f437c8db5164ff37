//! Unimodal encoders and gated decoder.

mod checkpoint;
mod config;
mod params;
mod uegd;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{Aggregation, ModalitySet, ModelConfig};
pub use params::{DecoderSlots, EncoderSlots, Layout, ParamStore};
pub use uegd::{ClipInput, Forward, ModalInput, Prediction, Uegd};

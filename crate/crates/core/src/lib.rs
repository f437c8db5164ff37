//! Late-fusion multimodal sentiment regression over frozen encoder features.
//!
//! The crate is organised bottom-up:
//!
//! * [`diffgraph`] – a small define-by-run reverse-mode engine with a
//!   finite-difference checker.
//! * [`model`] – unimodal encoders (FC, self-attentive pooling, FC) feeding a
//!   sigmoid-gated decoder, plus layer aggregation over stacked hidden states.
//! * [`data`] – clip feature files, manifests, masking augmentation, batching
//!   and a synthetic generator with a planted signal.
//! * [`train`] – Adam with warmup + cosine schedule, early stopping, trials.
//! * [`eval`] – metrics, gate export, variance analysis and layer sweeps.
//! * [`cli`] – the `uegd` command line.

mod binio;
pub mod cli;
pub mod data;
pub mod diffgraph;
pub mod error;
pub mod eval;
pub mod model;
pub mod parallel;
pub mod train;

pub use error::{Error, Result};

/// Row-major f32/f64 scalar used throughout; training runs in `f32`,
/// gradient checks in `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("finite conversion")
    }
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// The three input modalities, in their canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Visual,
    Acoustic,
    Linguistic,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Visual, Modality::Acoustic, Modality::Linguistic];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Visual => "visual",
            Modality::Acoustic => "acoustic",
            Modality::Linguistic => "linguistic",
        }
    }

    pub fn short(self) -> char {
        match self {
            Modality::Visual => 'v',
            Modality::Acoustic => 'a',
            Modality::Linguistic => 'l',
        }
    }

    /// Accepts full names and single-letter abbreviations.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v" | "visual" => Ok(Modality::Visual),
            "a" | "acoustic" => Ok(Modality::Acoustic),
            "l" | "linguistic" => Ok(Modality::Linguistic),
            other => Err(Error::Config(format!("unknown modality `{other}`"))),
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

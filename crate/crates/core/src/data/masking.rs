//! Time and feature-dimension block masking for training-time augmentation.

use std::ops::Range;

use rand::Rng;

use crate::diffgraph::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskSpec {
    pub max_time_ratio: f64,
    pub max_feat_ratio: f64,
    pub enabled: bool,
}

impl Default for MaskSpec {
    fn default() -> Self {
        MaskSpec {
            max_time_ratio: 0.2,
            max_feat_ratio: 0.2,
            enabled: true,
        }
    }
}

impl MaskSpec {
    pub fn disabled() -> Self {
        MaskSpec {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn with_ratio(ratio: f64) -> Self {
        MaskSpec {
            max_time_ratio: ratio,
            max_feat_ratio: ratio,
            enabled: ratio > 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for r in [self.max_time_ratio, self.max_feat_ratio] {
            if !(0.0..1.0).contains(&r) {
                return Err(Error::Config(format!("mask ratio {r} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// One contiguous zeroed block per axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskBlocks {
    pub time: Range<usize>,
    pub feat: Range<usize>,
}

fn block<R: Rng + ?Sized>(extent: usize, ratio: f64, rng: &mut R) -> Range<usize> {
    let max_w = ((ratio * extent as f64).floor() as usize).min(extent);
    let w = rng.random_range(0..=max_w);
    let start = rng.random_range(0..=extent - w);
    start..start + w
}

/// Draws block widths uniformly in `0..=floor(ratio·extent)` and starts
/// uniformly over the valid positions.
pub fn draw_mask<R: Rng + ?Sized>(frames: usize, dim: usize, spec: &MaskSpec, rng: &mut R) -> MaskBlocks {
    if !spec.enabled {
        return MaskBlocks { time: 0..0, feat: 0..0 };
    }
    let time = block(frames, spec.max_time_ratio, rng);
    let feat = block(dim, spec.max_feat_ratio, rng);
    MaskBlocks { time, feat }
}

/// Zeroes the blocks in every layer of an `[L×T×D]` stack (or a `[T×D]` matrix).
pub fn apply_blocks(x: &mut Tensor<f32>, blocks: &MaskBlocks) {
    let shape = x.shape().to_vec();
    let (t, d) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    for layer in x.data_mut().chunks_mut(t * d) {
        for row in blocks.time.clone() {
            layer[row * d..(row + 1) * d].iter_mut().for_each(|v| *v = 0.0);
        }
        for row in layer.chunks_mut(d) {
            row[blocks.feat.clone()].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Returns a masked copy of `x: [T×D]`; identity when the spec is disabled.
pub fn apply_masking<R: Rng + ?Sized>(x: &Tensor<f32>, spec: &MaskSpec, rng: &mut R) -> Tensor<f32> {
    let mut out = x.clone();
    if !spec.enabled {
        return out;
    }
    let shape = x.shape();
    let blocks = draw_mask(shape[shape.len() - 2], shape[shape.len() - 1], spec, rng);
    apply_blocks(&mut out, &blocks);
    out
}

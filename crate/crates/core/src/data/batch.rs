use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::archive::Dataset;
use super::masking::{apply_blocks, draw_mask, MaskSpec};
use crate::diffgraph::Tensor;
use crate::model::{ClipInput, ModalInput};
use crate::{Error, Result};

/// Index batches covering `0..n` exactly once; shuffled when a seed is given.
pub fn batch_iter(
    n: usize,
    batch_size: usize,
    shuffle_seed: Option<u64>,
) -> Result<impl Iterator<Item = Vec<usize>>> {
    if n == 0 {
        return Err(Error::Data("cannot batch an empty split".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let batches: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    Ok(batches.into_iter())
}

/// Clips of one mini-batch, each modality zero-padded to the batch's
/// longest sequence with `valid_len` marking the real frames.
#[derive(Debug, Clone)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub labels: Vec<f32>,
    pub inputs: Vec<ClipInput<f32>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

fn pad_frames(input: &ModalInput<f32>, frames: usize) -> ModalInput<f32> {
    let (l, t, d) = (input.layers(), input.frames(), input.dim());
    if t == frames {
        return input.clone();
    }
    let mut data = vec![0.0f32; l * frames * d];
    for (layer, src) in input.stack.data().chunks(t * d).enumerate() {
        data[layer * frames * d..layer * frames * d + t * d].copy_from_slice(src);
    }
    ModalInput {
        stack: Tensor::new(vec![l, frames, d], data).expect("padded shape"),
        first_layer: input.first_layer,
        valid_len: input.valid_len,
    }
}

/// Builds a padded batch; with `mask` set, each clip and modality gets its
/// own masking draw (applied to all stored layers alike) before padding.
pub fn collate(
    data: &Dataset,
    indices: &[usize],
    mut mask: Option<(&MaskSpec, &mut ChaCha8Rng)>,
) -> Batch {
    let mut inputs: Vec<ClipInput<f32>> = indices.iter().map(|&i| data.inputs[i].clone()).collect();
    if let Some((spec, rng)) = mask.as_mut() {
        if spec.enabled {
            for clip in &mut inputs {
                for input in clip.modal.iter_mut().flatten() {
                    let blocks = draw_mask(input.valid_len, input.dim(), spec, &mut **rng);
                    apply_blocks(&mut input.stack, &blocks);
                }
            }
        }
    }
    for slot in 0..3 {
        let longest = inputs
            .iter()
            .filter_map(|c| c.modal[slot].as_ref().map(ModalInput::frames))
            .max();
        if let Some(frames) = longest {
            for clip in &mut inputs {
                if let Some(input) = clip.modal[slot].as_mut() {
                    *input = pad_frames(input, frames);
                }
            }
        }
    }
    Batch {
        indices: indices.to_vec(),
        labels: indices.iter().map(|&i| data.records[i].label as f32).collect(),
        inputs,
    }
}

/// Derives an independent stream seed from a base seed and a tag.
pub fn stream_seed(base: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(tag);
    rng.random()
}

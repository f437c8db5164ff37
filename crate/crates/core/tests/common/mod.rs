#![allow(dead_code)]

pub mod fusion;
pub mod grad;
pub mod oracle;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use uegd::data::{synth_generate, FeatureArchive, SynthSpec};
use uegd::diffgraph::{Tape, Tensor};
use uegd::model::{Aggregation, ClipInput, ModalInput, ModalitySet, ModelConfig, ParamStore, Uegd};
use uegd::Scalar;

pub const DIMS: [usize; 3] = [3, 4, 5];
pub const LAYERS: [usize; 3] = [3, 2, 4];

/// A model small enough for exhaustive finite differences.
pub fn tiny_config(aggregation: Aggregation) -> ModelConfig {
    ModelConfig {
        embed_dim: 4,
        enc_hidden: 6,
        heads: 2,
        dec_hidden: 5,
        dropout: 0.2,
        modalities: ModalitySet::ALL,
        aggregation,
        input_dims: DIMS,
        num_layers: LAYERS,
    }
}

pub fn random_tensor<T: Scalar>(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.sample::<f64, _>(StandardNormal))).collect();
    Tensor::new(shape, data).unwrap()
}

/// A clip holding every layer of every modality, `frames[m]` frames each.
pub fn random_clip<T: Scalar>(id: &str, frames: [usize; 3], rng: &mut ChaCha8Rng) -> ClipInput<T> {
    let modal = [0, 1, 2].map(|m| {
        let stack = random_tensor(vec![LAYERS[m], frames[m], DIMS[m]], rng);
        Some(ModalInput::full(stack).unwrap())
    });
    ClipInput { id: id.to_string(), modal }
}

/// Random parameters, with gate and logit tensors perturbed away from
/// their zero initialisation so every path carries signal.
pub fn random_params<T: Scalar>(model: &Uegd, seed: u64) -> ParamStore<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamStore::<T>::init(model.layout(), &mut rng);
    for (_, t) in params.tensors_mut() {
        for v in t.data_mut() {
            *v = *v + T::of(0.1 * rng.sample::<f64, _>(StandardNormal));
        }
    }
    params
}

/// Embeddings produced on a fresh tape in evaluation mode.
pub fn embeddings<T: Scalar>(model: &Uegd, params: &ParamStore<T>, clip: &ClipInput<T>) -> [Vec<T>; 3] {
    let mut tape = Tape::new();
    let out = model.forward(&mut tape, params, clip, None).unwrap();
    out.embeddings.map(|z| tape.value(z).to_vec())
}

pub fn synth(dir: &Path, spec: &SynthSpec) -> FeatureArchive {
    synth_generate(spec, dir).unwrap()
}

/// `|a - n| / max(|a|, |n|, 1)`, the error used by the gradient checker.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1.0)
}

/// SHA-256 over every file under `root`, in path order.
pub fn tree_digest(root: &Path) -> Vec<u8> {
    use sha2::{Digest, Sha256};
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update(std::fs::read(&f).unwrap());
    }
    h.finalize().to_vec()
}

/// The same clip with frames reordered by `order` in every layer.
pub fn permute_frames(input: &ModalInput<f32>, order: &[usize]) -> ModalInput<f32> {
    let (l, t, d) = (input.layers(), input.frames(), input.dim());
    let src = input.stack.data();
    let mut data = Vec::with_capacity(src.len());
    for layer in 0..l {
        for &f in order {
            let start = (layer * t + f) * d;
            data.extend_from_slice(&src[start..start + d]);
        }
    }
    ModalInput::full(Tensor::new(vec![l, t, d], data).unwrap()).unwrap()
}

pub fn pad_frames(input: &ModalInput<f32>, extra: usize, fill: f32) -> ModalInput<f32> {
    let (l, t, d) = (input.layers(), input.frames(), input.dim());
    let mut data = Vec::new();
    for layer in input.stack.data().chunks(t * d) {
        data.extend_from_slice(layer);
        data.extend(std::iter::repeat_n(fill, extra * d));
    }
    let mut padded = ModalInput::full(Tensor::new(vec![l, t + extra, d], data).unwrap()).unwrap();
    padded.valid_len = t;
    padded
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f32::max)
}

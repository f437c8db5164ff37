//! Structural properties of the fusion model, one seed at a time.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uegd::diffgraph::{Tape, Tensor};
use uegd::model::{Aggregation, ClipInput, ModalitySet, ParamStore, Uegd};
use uegd::Modality;

use super::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn frame_order_invariance(seed: u64, t: usize) {
    let model = Uegd::new(tiny_config(Aggregation::WeightedSum)).unwrap();
    let params: ParamStore<f32> = random_params(&model, seed);
    let clip: ClipInput<f32> = random_clip("c", [t, t + 1, t + 2], &mut rng(seed));
    let mut shuffled = clip.clone();
    for (m, slot) in shuffled.modal.iter_mut().enumerate() {
        let input = slot.as_ref().unwrap();
        let mut order: Vec<usize> = (0..input.frames()).collect();
        order.shuffle(&mut rng(seed ^ m as u64));
        *slot = Some(permute_frames(input, &order));
    }
    let a = embeddings(&model, &params, &clip);
    let b = embeddings(&model, &params, &shuffled);
    for m in 0..3 {
        let d = max_abs_diff(&a[m], &b[m]);
        assert!(d <= 1e-5, "seed {seed}: modality {m} moved by {d}");
    }
}

/// Gate weights scaled by `scale` still land strictly inside (0, 1).
pub fn gates_inside_unit_interval(seed: u64, scale: f32) {
    let model = Uegd::new(tiny_config(Aggregation::FinalOutput)).unwrap();
    let mut params: ParamStore<f32> = random_params(&model, seed);
    for (name, t) in params.tensors_mut() {
        if name.starts_with("decoder.gate") {
            t.data_mut().iter_mut().for_each(|v| *v *= scale);
        }
    }
    let clip: ClipInput<f32> = random_clip("c", [3, 2, 4], &mut rng(seed));
    let p = model.predict(&params, &clip).unwrap();
    assert!(p.gates.iter().all(|&a| a > 0.0 && a < 1.0), "seed {seed}: {:?}", p.gates);
    assert!(p.y_hat.is_finite());
}

/// An acoustic-only model gives bitwise-identical output whatever the other
/// modalities hold, and matches a manual composition with zero embeddings.
pub fn unused_modalities_bypassed(seed: u64) {
    let mut cfg = tiny_config(Aggregation::FinalOutput);
    cfg.modalities = ModalitySet::only(Modality::Acoustic);
    let model = Uegd::new(cfg).unwrap();
    let params: ParamStore<f32> = random_params(&model, seed);
    let full: ClipInput<f32> = random_clip("c", [3, 4, 5], &mut rng(seed));
    let mut bare = full.clone();
    bare.modal[0] = None;
    bare.modal[2] = None;
    let mut other: ClipInput<f32> = random_clip("c", [6, 4, 2], &mut rng(seed ^ 1));
    other.modal[1] = full.modal[1].clone();
    let p_full = model.predict(&params, &full).unwrap();
    assert_eq!(p_full, model.predict(&params, &bare).unwrap(), "seed {seed}");
    assert_eq!(p_full, model.predict(&params, &other).unwrap(), "seed {seed}");

    let mut tape = Tape::new();
    let input = full.modal[1].as_ref().unwrap();
    let x = model.layer_aggregate(&mut tape, &params, Modality::Acoustic, input).unwrap();
    let za = model.unimodal_encode(&mut tape, &params, Modality::Acoustic, x, input.valid_len, None).unwrap();
    let f = model.config().embed_dim;
    let zv = tape.constant(vec![1, f], vec![0.0; f]).unwrap();
    let zl = tape.constant(vec![1, f], vec![0.0; f]).unwrap();
    let (fused, gates) = model.gate_fuse(&mut tape, &params, [zv, za, zl]).unwrap();
    let y = model.decode(&mut tape, &params, fused, None).unwrap();
    assert!((tape.value(y)[0] as f64 - p_full.y_hat).abs() <= 1e-6, "seed {seed}");
    for (g, want) in tape.value(gates).iter().zip(p_full.gates) {
        assert!((*g as f64 - want).abs() <= 1e-6, "seed {seed}");
    }
}

/// Weighted aggregation with one logit at 1e4 behaves as the single-layer
/// model reading that layer.
pub fn saturated_weights_match_single_layer(seed: u64, ks: [usize; 3]) {
    let weighted = Uegd::new(tiny_config(Aggregation::WeightedSum)).unwrap();
    let single = Uegd::new(tiny_config(Aggregation::SingleLayer(ks))).unwrap();
    let mut wp: ParamStore<f32> = random_params(&weighted, seed);
    for m in Modality::ALL {
        let slot = weighted.layout().layer_logits[m.index()].unwrap();
        let logits = wp.get_mut(slot).data_mut();
        logits.iter_mut().for_each(|v| *v = 0.0);
        logits[ks[m.index()] - 1] = 1e4;
    }
    let named: Vec<(String, Tensor<f32>)> = wp
        .iter()
        .filter(|(n, _)| !n.starts_with("aggregate."))
        .map(|(n, t)| (n.to_string(), t.clone()))
        .collect();
    let sp = ParamStore::from_tensors(single.layout(), named).unwrap();
    let clip: ClipInput<f32> = random_clip("c", [3, 5, 2], &mut rng(seed));
    let a = weighted.predict(&wp, &clip).unwrap();
    let b = single.predict(&sp, &clip).unwrap();
    assert!((a.y_hat - b.y_hat).abs() <= 1e-5, "seed {seed}: {} vs {}", a.y_hat, b.y_hat);
    let (ea, eb) = (embeddings(&weighted, &wp, &clip), embeddings(&single, &sp, &clip));
    for m in 0..3 {
        assert!(max_abs_diff(&ea[m], &eb[m]) <= 1e-5, "seed {seed}: modality {m}");
    }
}

pub fn padding_invisible(seed: u64, extra: usize, fill: f32) {
    let model = Uegd::new(tiny_config(Aggregation::FinalOutput)).unwrap();
    let params: ParamStore<f32> = random_params(&model, seed);
    let clip: ClipInput<f32> = random_clip("c", [2, 3, 4], &mut rng(seed));
    let mut padded = clip.clone();
    for slot in padded.modal.iter_mut() {
        *slot = Some(pad_frames(slot.as_ref().unwrap(), extra, fill));
    }
    let (a, b) = (embeddings(&model, &params, &clip), embeddings(&model, &params, &padded));
    for m in 0..3 {
        assert!(max_abs_diff(&a[m], &b[m]) <= 1e-6, "seed {seed}: modality {m}");
    }
}

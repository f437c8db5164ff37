use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uegd::diffgraph::{grad_check, Tape, Tensor, Var, LAYER_NORM_EPS};
use uegd::model::{Aggregation, ClipInput, ParamStore, Uegd};
use uegd::Result;

use super::*;

pub const EPS: f64 = 1e-6;
pub const TOL: f64 = 1e-4;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weighted sum of the outputs so every output element gets its own
/// upstream gradient.
fn project(tape: &mut Tape<f64>, y: Var, seed: u64) -> Result<Var> {
    let shape = tape.shape(y).to_vec();
    let w: Tensor<f64> = random_tensor(shape.clone(), &mut rng(seed));
    let wv = tape.constant(shape, w.into_data())?;
    let flat_len = tape.value(y).len();
    let a = tape.reshape(y, vec![1, flat_len])?;
    let b = tape.reshape(wv, vec![flat_len, 1])?;
    let dot = tape.matmul(a, b)?;
    Ok(tape.sum(dot))
}

fn check<F>(name: &str, shape: Vec<usize>, seed: u64, f: F)
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let x: Tensor<f64> = random_tensor(shape, &mut rng(seed));
    let r = grad_check(|t, v| f(t, v).and_then(|y| project(t, y, seed + 1000)), &x, EPS, TOL).unwrap();
    assert!(r.passed, "{name}: {r:?}");
}

pub fn matmul_both_sides() {
    let other: Tensor<f64> = random_tensor(vec![4, 2], &mut rng(9));
    check("matmul lhs", vec![3, 4], 1, |t, x| {
        let b = t.leaf(&other);
        t.matmul(x, b)
    });
    let lhs: Tensor<f64> = random_tensor(vec![3, 4], &mut rng(10));
    check("matmul rhs", vec![4, 2], 2, |t, x| {
        let a = t.leaf(&lhs);
        t.matmul(a, x)
    });
}

pub fn affine_and_elementwise() {
    let bias: Tensor<f64> = random_tensor(vec![4], &mut rng(11));
    check("add_bias", vec![3, 4], 3, |t, x| {
        let b = t.leaf(&bias);
        t.add_bias(x, b)
    });
    let row: Tensor<f64> = random_tensor(vec![4], &mut rng(12));
    check("add_bias wrt bias", vec![4], 4, |t, b| {
        let x = t.leaf(&Tensor::new(vec![2, 4], [row.data(), row.data()].concat()).unwrap());
        t.add_bias(x, b)
    });
    let other: Tensor<f64> = random_tensor(vec![2, 3], &mut rng(13));
    check("add", vec![2, 3], 5, |t, x| {
        let o = t.leaf(&other);
        t.add(x, o)
    });
    check("scale", vec![2, 3], 6, |t, x| Ok(t.scale(x, -1.7)));
    check("sum", vec![2, 3], 7, |t, x| Ok(t.sum(x)));
    check("relu", vec![3, 5], 8, |t, x| Ok(t.relu(x)));
    check("sigmoid", vec![3, 5], 14, |t, x| Ok(t.sigmoid(x)));
    check("tanh", vec![3, 5], 15, |t, x| Ok(t.tanh(x)));
}

pub fn linear_wrt_weight_and_bias() {
    let x: Tensor<f64> = random_tensor(vec![3, 4], &mut rng(16));
    let b: Tensor<f64> = random_tensor(vec![2], &mut rng(17));
    check("linear weight", vec![4, 2], 18, |t, w| {
        let (xv, bv) = (t.leaf(&x), t.leaf(&b));
        t.linear(xv, w, bv)
    });
    let w: Tensor<f64> = random_tensor(vec![4, 2], &mut rng(19));
    check("linear bias", vec![2], 20, |t, bv| {
        let (xv, wv) = (t.leaf(&x), t.leaf(&w));
        t.linear(xv, wv, bv)
    });
}

pub fn layer_norm_all_inputs() {
    let gain: Tensor<f64> = random_tensor(vec![5], &mut rng(21));
    let bias: Tensor<f64> = random_tensor(vec![5], &mut rng(22));
    let x: Tensor<f64> = random_tensor(vec![3, 5], &mut rng(23));
    check("layer_norm x", vec![3, 5], 24, |t, xv| {
        let (g, b) = (t.leaf(&gain), t.leaf(&bias));
        t.layer_norm(xv, g, b, LAYER_NORM_EPS)
    });
    check("layer_norm gain", vec![5], 25, |t, g| {
        let (xv, b) = (t.leaf(&x), t.leaf(&bias));
        t.layer_norm(xv, g, b, LAYER_NORM_EPS)
    });
    check("layer_norm bias", vec![5], 26, |t, b| {
        let (xv, g) = (t.leaf(&x), t.leaf(&gain));
        t.layer_norm(xv, g, b, LAYER_NORM_EPS)
    });
}

pub fn dropout_with_fixed_mask() {
    check("dropout", vec![4, 6], 27, |t, x| {
        let mut r = rng(99);
        t.dropout(x, 0.3, Some(&mut r))
    });
}

pub fn softmax_mask_and_shape_ops() {
    check("softmax axis 0", vec![4, 3], 28, |t, x| t.softmax(x, 0));
    check("softmax axis 1", vec![4, 3], 29, |t, x| t.softmax(x, 1));
    check("masked softmax", vec![5, 2], 30, |t, x| {
        let m = t.mask_rows(x, 3)?;
        t.softmax(m, 0)
    });
    check("transpose", vec![2, 5], 31, |t, x| t.transpose(x));
    check("reshape", vec![2, 6], 32, |t, x| t.reshape(x, vec![3, 4]));
    let other: Tensor<f64> = random_tensor(vec![1, 4], &mut rng(33));
    check("concat_rows", vec![2, 4], 34, |t, x| {
        let o = t.leaf(&other);
        t.concat_rows(&[o, x, o])
    });
}

pub fn layer_mix_both_inputs() {
    let stack: Tensor<f64> = random_tensor(vec![3, 2, 4], &mut rng(35));
    check("layer_mix weights", vec![3], 36, |t, w| {
        let s = t.leaf(&stack);
        let sw = t.softmax(w, 0)?;
        t.layer_mix(s, sw)
    });
    let w: Tensor<f64> = random_tensor(vec![3], &mut rng(37));
    check("layer_mix stack", vec![3, 2, 4], 38, |t, s| {
        let wv = t.leaf(&w);
        t.layer_mix(s, wv)
    });
}

pub fn l1_loss_away_from_kink() {
    let x: Tensor<f64> = random_tensor(vec![1, 4], &mut rng(39));
    let target: Vec<f64> = x.data().iter().map(|v| v + 0.5).collect();
    let r = grad_check(|t, v| t.l1_loss(v, &target), &x, EPS, TOL).unwrap();
    assert!(r.passed, "{r:?}");
}

/// Summed L1 over `clips` in training mode with a fixed dropout stream.
fn model_loss(model: &Uegd, params: &ParamStore<f64>, clips: &[(ClipInput<f64>, f64)]) -> (f64, Vec<Vec<f64>>) {
    let mut tape = Tape::new();
    let mut losses = Vec::new();
    for (i, (clip, y)) in clips.iter().enumerate() {
        let mut r = rng(500 + i as u64);
        let out = model.forward(&mut tape, params, clip, Some(&mut r)).unwrap();
        losses.push(tape.l1_loss(out.y_hat, &[*y]).unwrap());
    }
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = tape.add(total, l).unwrap();
    }
    let grads = tape.backward(total).unwrap();
    let mut by_id = vec![vec![0.0; 0]; params.len()];
    for (id, g) in tape.param_grads(&grads) {
        by_id[id] = g;
    }
    (tape.value(total)[0], by_id)
}

/// Perturbs every parameter element and returns the number checked.
pub fn full_model_check(aggregation: Aggregation) -> usize {
    let model = Uegd::new(tiny_config(aggregation)).unwrap();
    let mut params: ParamStore<f64> = random_params(&model, 7);
    let mut r = rng(8);
    let clips = vec![
        (random_clip("c0", [3, 4, 2], &mut r), 1.7),
        (random_clip("c1", [2, 5, 3], &mut r), -2.2),
    ];
    let (_, analytic) = model_loss(&model, &params, &clips);
    let mut worst = (0.0f64, String::new());
    let mut checked = 0;
    for (id, grads) in analytic.iter().enumerate() {
        for j in 0..params.get(id).len() {
            let orig = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = orig + EPS;
            let (fp, _) = model_loss(&model, &params, &clips);
            params.get_mut(id).data_mut()[j] = orig - EPS;
            let (fm, _) = model_loss(&model, &params, &clips);
            params.get_mut(id).data_mut()[j] = orig;
            let numeric = (fp - fm) / (2.0 * EPS);
            let a = grads.get(j).copied().unwrap_or(0.0);
            let e = rel_err(a, numeric);
            if e > worst.0 {
                worst = (e, format!("{}[{j}]: analytic {a} numeric {numeric}", params.name(id)));
            }
            checked += 1;
        }
    }
    assert_eq!(checked, model.config().param_count());
    assert!(worst.0 < TOL, "{aggregation}: {} ({})", worst.0, worst.1);
    checked
}

/// Every primitive check, in order.
pub fn primitive_suite() {
    matmul_both_sides();
    affine_and_elementwise();
    linear_wrt_weight_and_bias();
    layer_norm_all_inputs();
    dropout_with_fixed_mask();
    softmax_mask_and_shape_ops();
    layer_mix_both_inputs();
    l1_loss_away_from_kink();
}

use rand_chacha::ChaCha8Rng;

use super::config::{Aggregation, ModelConfig};
use super::params::{Layout, ParamStore};
use crate::diffgraph::{Tape, Tensor, Var, LAYER_NORM_EPS};
use crate::{Error, Modality, Result, Scalar};

/// Feature sequence of one modality for one clip.
///
/// `stack` is `[L×T×D]`; its first slice is encoder layer `first_layer`
/// (1-based). Rows `valid_len..T` are padding.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalInput<T> {
    pub stack: Tensor<T>,
    pub first_layer: usize,
    pub valid_len: usize,
}

impl<T: Scalar> ModalInput<T> {
    /// Wraps a full `[L×T×D]` stack starting at layer 1 without padding.
    pub fn full(stack: Tensor<T>) -> Result<Self> {
        if stack.rank() != 3 {
            return Err(Error::Dimension {
                op: "modal_input",
                lhs: stack.shape().to_vec(),
                rhs: vec![],
            });
        }
        let valid_len = stack.shape()[1];
        Ok(ModalInput {
            stack,
            first_layer: 1,
            valid_len,
        })
    }

    /// A single `[T×D]` sequence, treated as a one-layer stack.
    pub fn sequence(x: Tensor<T>) -> Result<Self> {
        let mut shape = vec![1];
        shape.extend_from_slice(x.shape());
        Self::full(x.reshape(shape)?)
    }

    pub fn layers(&self) -> usize {
        self.stack.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.stack.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.stack.shape()[2]
    }
}

/// Everything the model sees of one clip; absent modalities are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipInput<T> {
    pub id: String,
    pub modal: [Option<ModalInput<T>>; 3],
}

/// Handles produced by [`Uegd::forward`].
#[derive(Debug, Clone, Copy)]
pub struct Forward {
    /// `[1×1]` prediction.
    pub y_hat: Var,
    /// `[1×3]` gate weights (visual, acoustic, linguistic).
    pub gates: Var,
    /// `[1×F]` utterance embeddings; zeros for unused modalities.
    pub embeddings: [Var; 3],
}

/// Evaluation-mode output for one clip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub y_hat: f64,
    pub gates: [f64; 3],
}

/// Unimodal encoders and gated decoder.
#[derive(Debug, Clone)]
pub struct Uegd {
    config: ModelConfig,
    layout: Layout,
}

impl Uegd {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        Ok(Uegd { config, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Reduces a layer stack to the `[T×D]` input of modality `m`'s encoder.
    pub fn layer_aggregate<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        m: Modality,
        input: &ModalInput<T>,
    ) -> Result<Var> {
        let n = input.layers();
        let pick = |tape: &mut Tape<T>, k: usize| -> Result<Var> {
            let pos = k.checked_sub(input.first_layer).filter(|&p| p < n).ok_or_else(|| {
                Error::Config(format!(
                    "{m}: layer {k} not in stored layers {}..={}",
                    input.first_layer,
                    input.first_layer + n - 1
                ))
            })?;
            let slice = input.stack.index_axis0(pos)?;
            let shape = slice.shape().to_vec();
            tape.constant(shape, slice.into_data())
        };
        match self.config.aggregation {
            Aggregation::FinalOutput => pick(tape, input.first_layer + n - 1),
            Aggregation::SingleLayer(ks) => pick(tape, ks[m.index()]),
            Aggregation::WeightedSum => {
                let slot = self.layout.layer_logits[m.index()].expect("weighted layout has logits");
                let expected = self.config.num_layers[m.index()];
                if input.first_layer != 1 || n != expected {
                    return Err(Error::Config(format!(
                        "{m}: weighted sum needs all {expected} layers, clip stores {n} from layer {}",
                        input.first_layer
                    )));
                }
                let logits = tape.param(slot, params.get(slot));
                let weights = tape.softmax(logits, 0)?;
                let stack = tape.leaf(&input.stack);
                tape.layer_mix(stack, weights)
            }
        }
    }

    /// Additive multi-head attention pooling over the valid rows of `h`.
    /// Returns the `[1×heads·H]` pooled vector and the `[T×heads]` weights.
    pub fn self_attentive_pool<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        m: Modality,
        h: Var,
        valid_len: usize,
    ) -> Result<(Var, Var)> {
        let e = self.layout.encoders[m.index()];
        let w = tape.param(e.attn_w, params.get(e.attn_w));
        let b = tape.param(e.attn_b, params.get(e.attn_b));
        let q = tape.param(e.attn_q, params.get(e.attn_q));
        let proj = tape.linear(h, w, b)?;
        let act = tape.tanh(proj);
        let scores = tape.matmul(act, q)?;
        let scores = tape.mask_rows(scores, valid_len)?;
        let attn = tape.softmax(scores, 0)?;
        let attn_t = tape.transpose(attn)?;
        let pooled = tape.matmul(attn_t, h)?;
        let width = pooled_width(tape.shape(pooled));
        let flat = tape.reshape(pooled, vec![1, width])?;
        Ok((flat, attn))
    }

    /// FC → norm → ReLU → dropout, attention pooling, then a linear FC to
    /// the `[1×F]` embedding.
    pub fn unimodal_encode<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        m: Modality,
        x: Var,
        valid_len: usize,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let e = self.layout.encoders[m.index()];
        let d = self.config.input_dims[m.index()];
        let xs = tape.shape(x);
        if xs.len() != 2 || xs[1] != d {
            return Err(Error::Dimension {
                op: "unimodal_encode",
                lhs: xs.to_vec(),
                rhs: vec![d],
            });
        }
        let w1 = tape.param(e.fc1_w, params.get(e.fc1_w));
        let b1 = tape.param(e.fc1_b, params.get(e.fc1_b));
        let g = tape.param(e.ln_g, params.get(e.ln_g));
        let beta = tape.param(e.ln_b, params.get(e.ln_b));
        let h = tape.linear(x, w1, b1)?;
        let h = tape.layer_norm(h, g, beta, LAYER_NORM_EPS)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout, rng)?;
        let (pooled, _) = self.self_attentive_pool(tape, params, m, h, valid_len)?;
        let w2 = tape.param(e.fc2_w, params.get(e.fc2_w));
        let b2 = tape.param(e.fc2_b, params.get(e.fc2_b));
        tape.linear(pooled, w2, b2)
    }

    /// Scalar sigmoid gate per modality from the concatenated embeddings,
    /// then the gated sum. Returns `([1×F] fused, [1×3] gates)`.
    pub fn gate_fuse<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        z: [Var; 3],
    ) -> Result<(Var, Var)> {
        let dslots = self.layout.decoder;
        let f = self.config.embed_dim;
        let stacked = tape.concat_rows(&z)?;
        let supervector = tape.reshape(stacked, vec![1, 3 * f])?;
        let gw = tape.param(dslots.gate_w, params.get(dslots.gate_w));
        let gb = tape.param(dslots.gate_b, params.get(dslots.gate_b));
        let logits = tape.linear(supervector, gw, gb)?;
        let gates = tape.sigmoid(logits);
        let fused = tape.matmul(gates, stacked)?;
        Ok((fused, gates))
    }

    /// FC → norm → ReLU → dropout → linear output; the prediction is not clamped.
    pub fn decode<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        fused: Var,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        let d = self.layout.decoder;
        let w = tape.param(d.fc_w, params.get(d.fc_w));
        let b = tape.param(d.fc_b, params.get(d.fc_b));
        let g = tape.param(d.ln_g, params.get(d.ln_g));
        let beta = tape.param(d.ln_b, params.get(d.ln_b));
        let h = tape.linear(fused, w, b)?;
        let h = tape.layer_norm(h, g, beta, LAYER_NORM_EPS)?;
        let h = tape.relu(h);
        let h = tape.dropout(h, self.config.dropout, rng)?;
        let ow = tape.param(d.out_w, params.get(d.out_w));
        let ob = tape.param(d.out_b, params.get(d.out_b));
        tape.linear(h, ow, ob)
    }

    /// Full forward pass. Passing `rng` selects training mode (dropout on).
    /// Encoders of modalities outside the configured set are not executed
    /// and contribute zero embeddings.
    pub fn forward<T: Scalar>(
        &self,
        tape: &mut Tape<T>,
        params: &ParamStore<T>,
        clip: &ClipInput<T>,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Forward> {
        let f = self.config.embed_dim;
        let mut z = Vec::with_capacity(3);
        for m in Modality::ALL {
            if !self.config.modalities.contains(m) {
                z.push(tape.constant(vec![1, f], vec![T::zero(); f])?);
                continue;
            }
            let input = clip.modal[m.index()].as_ref().ok_or_else(|| {
                Error::Data(format!("clip {}: missing {m} features", clip.id))
            })?;
            let x = self.layer_aggregate(tape, params, m, input)?;
            let zm = self.unimodal_encode(tape, params, m, x, input.valid_len, rng.as_deref_mut())?;
            z.push(zm);
        }
        let embeddings = [z[0], z[1], z[2]];
        let (fused, gates) = self.gate_fuse(tape, params, embeddings)?;
        let y_hat = self.decode(tape, params, fused, rng)?;
        Ok(Forward {
            y_hat,
            gates,
            embeddings,
        })
    }

    /// Evaluation-mode prediction on a fresh tape.
    pub fn predict<T: Scalar>(&self, params: &ParamStore<T>, clip: &ClipInput<T>) -> Result<Prediction> {
        let mut tape = Tape::new();
        let out = self.forward(&mut tape, params, clip, None)?;
        let g = tape.value(out.gates);
        Ok(Prediction {
            y_hat: tape.value(out.y_hat)[0].as_f64(),
            gates: [g[0].as_f64(), g[1].as_f64(), g[2].as_f64()],
        })
    }
}

fn pooled_width(shape: &[usize]) -> usize {
    shape.iter().product()
}

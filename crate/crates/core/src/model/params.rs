use rand::Rng;

use super::config::{Aggregation, ModelConfig};
use crate::diffgraph::Tensor;
use crate::{Error, Modality, Result, Scalar};

/// Parameter indices of one unimodal encoder.
#[derive(Debug, Clone, Copy)]
pub struct EncoderSlots {
    pub fc1_w: usize,
    pub fc1_b: usize,
    pub ln_g: usize,
    pub ln_b: usize,
    pub attn_w: usize,
    pub attn_b: usize,
    /// `[attn_dim × heads]`, one query column per head.
    pub attn_q: usize,
    pub fc2_w: usize,
    pub fc2_b: usize,
}

/// Parameter indices of the gated decoder.
#[derive(Debug, Clone, Copy)]
pub struct DecoderSlots {
    /// `[3F × 3]`; column m is the gate projection of modality m.
    pub gate_w: usize,
    pub gate_b: usize,
    pub fc_w: usize,
    pub fc_b: usize,
    pub ln_g: usize,
    pub ln_b: usize,
    pub out_w: usize,
    pub out_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Init {
    Xavier { fan_in: usize, fan_out: usize },
    Zeros,
    Ones,
}

#[derive(Debug, Clone)]
struct SlotSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

/// Position of every named tensor in a [`ParamStore`]; a pure function of
/// the model configuration.
#[derive(Debug, Clone)]
pub struct Layout {
    pub encoders: [EncoderSlots; 3],
    pub decoder: DecoderSlots,
    pub layer_logits: [Option<usize>; 3],
    specs: Vec<SlotSpec>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut specs = Vec::new();
        let mut add = |name: String, shape: Vec<usize>, init: Init| {
            specs.push(SlotSpec { name, shape, init });
            specs.len() - 1
        };
        let xavier = |fan_in, fan_out| Init::Xavier { fan_in, fan_out };
        let (h, f, a, r) = (cfg.enc_hidden, cfg.embed_dim, cfg.attn_dim(), cfg.heads);

        let encoders = Modality::ALL.map(|m| {
            let d = cfg.input_dims[m.index()];
            let p = format!("encoder.{}", m.name());
            EncoderSlots {
                fc1_w: add(format!("{p}.fc1.weight"), vec![d, h], xavier(d, h)),
                fc1_b: add(format!("{p}.fc1.bias"), vec![h], Init::Zeros),
                ln_g: add(format!("{p}.norm.gain"), vec![h], Init::Ones),
                ln_b: add(format!("{p}.norm.bias"), vec![h], Init::Zeros),
                attn_w: add(format!("{p}.pool.proj.weight"), vec![h, a], xavier(h, a)),
                attn_b: add(format!("{p}.pool.proj.bias"), vec![a], Init::Zeros),
                attn_q: add(format!("{p}.pool.query"), vec![a, r], xavier(a, r)),
                fc2_w: add(format!("{p}.fc2.weight"), vec![r * h, f], xavier(r * h, f)),
                fc2_b: add(format!("{p}.fc2.bias"), vec![f], Init::Zeros),
            }
        });
        let g = cfg.dec_hidden;
        let decoder = DecoderSlots {
            gate_w: add("decoder.gate.weight".into(), vec![3 * f, 3], xavier(3 * f, 1)),
            gate_b: add("decoder.gate.bias".into(), vec![3], Init::Zeros),
            fc_w: add("decoder.fc.weight".into(), vec![f, g], xavier(f, g)),
            fc_b: add("decoder.fc.bias".into(), vec![g], Init::Zeros),
            ln_g: add("decoder.norm.gain".into(), vec![g], Init::Ones),
            ln_b: add("decoder.norm.bias".into(), vec![g], Init::Zeros),
            out_w: add("decoder.out.weight".into(), vec![g, 1], xavier(g, 1)),
            out_b: add("decoder.out.bias".into(), vec![1], Init::Zeros),
        };
        let layer_logits = Modality::ALL.map(|m| match cfg.aggregation {
            Aggregation::WeightedSum => Some(add(
                format!("aggregate.{}.logits", m.name()),
                vec![cfg.num_layers[m.index()]],
                Init::Zeros,
            )),
            _ => None,
        });
        Layout {
            encoders,
            decoder,
            layer_logits,
            specs,
        }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.specs[i].name
    }

    pub fn shape(&self, i: usize) -> &[usize] {
        &self.specs[i].shape
    }

    /// Every parameter index belonging to modality `m`'s encoder.
    pub fn encoder_params(&self, m: Modality) -> Vec<usize> {
        let e = &self.encoders[m.index()];
        vec![
            e.fc1_w, e.fc1_b, e.ln_g, e.ln_b, e.attn_w, e.attn_b, e.attn_q, e.fc2_w, e.fc2_b,
        ]
    }
}

/// All trainable tensors of one model, in [`Layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    /// Xavier-uniform weights, zero biases and logits, unit norm gains.
    pub fn init<R: Rng + ?Sized>(layout: &Layout, rng: &mut R) -> Self {
        let mut names = Vec::with_capacity(layout.len());
        let mut tensors = Vec::with_capacity(layout.len());
        for spec in &layout.specs {
            let n: usize = spec.shape.iter().product();
            let data: Vec<T> = match spec.init {
                Init::Zeros => vec![T::zero(); n],
                Init::Ones => vec![T::one(); n],
                Init::Xavier { fan_in, fan_out } => {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    (0..n)
                        .map(|_| T::of(rng.random_range(-bound..bound)))
                        .collect()
                }
            };
            names.push(spec.name.clone());
            tensors.push(
                Tensor::new(spec.shape.clone(), data)
                    .expect("layout shapes are positive")
                    .with_requires_grad(true),
            );
        }
        ParamStore { names, tensors }
    }

    /// Builds a store from named tensors, checking them against `layout`.
    pub fn from_tensors(layout: &Layout, named: Vec<(String, Tensor<T>)>) -> Result<Self> {
        if named.len() != layout.len() {
            return Err(Error::Config(format!(
                "expected {} parameter tensors, found {}",
                layout.len(),
                named.len()
            )));
        }
        let mut names = Vec::with_capacity(named.len());
        let mut tensors = Vec::with_capacity(named.len());
        for (i, (name, t)) in named.into_iter().enumerate() {
            if name != layout.name(i) || t.shape() != layout.shape(i) {
                return Err(Error::Config(format!(
                    "parameter {i}: expected {} {:?}, found {name} {:?}",
                    layout.name(i),
                    layout.shape(i),
                    t.shape()
                )));
            }
            names.push(name);
            tensors.push(t.with_requires_grad(true));
        }
        Ok(ParamStore { names, tensors })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter_mut())
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.cast::<U>().with_requires_grad(true))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::ModalitySet;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(aggregation: Aggregation) -> ModelConfig {
        ModelConfig {
            embed_dim: 6,
            enc_hidden: 8,
            heads: 2,
            dec_hidden: 5,
            dropout: 0.1,
            modalities: ModalitySet::ALL,
            aggregation,
            input_dims: [3, 4, 5],
            num_layers: [2, 3, 4],
        }
    }

    #[test]
    fn store_size_follows_config() {
        for agg in [Aggregation::FinalOutput, Aggregation::WeightedSum] {
            let c = cfg(agg);
            let layout = Layout::new(&c);
            let store = ParamStore::<f32>::init(&layout, &mut ChaCha8Rng::seed_from_u64(0));
            assert_eq!(store.scalar_count(), c.param_count());
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let layout = Layout::new(&cfg(Aggregation::FinalOutput));
        let a = ParamStore::<f32>::init(&layout, &mut ChaCha8Rng::seed_from_u64(3));
        let b = ParamStore::<f32>::init(&layout, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let w = a.get(layout.encoders[0].fc1_w);
        let bound = (6.0f32 / 11.0).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= bound));
        assert!(a.get(layout.decoder.gate_b).data().iter().all(|&v| v == 0.0));
        assert!(a.get(layout.decoder.ln_g).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn from_tensors_rejects_mismatch() {
        let layout = Layout::new(&cfg(Aggregation::FinalOutput));
        let store = ParamStore::<f32>::init(&layout, &mut ChaCha8Rng::seed_from_u64(0));
        let mut named: Vec<_> = store.iter().map(|(n, t)| (n.to_string(), t.clone())).collect();
        assert!(ParamStore::from_tensors(&layout, named.clone()).is_ok());
        named[0].0 = "bogus".into();
        assert!(ParamStore::from_tensors(&layout, named.clone()).is_err());
        named.pop();
        assert!(ParamStore::from_tensors(&layout, named).is_err());
    }
}

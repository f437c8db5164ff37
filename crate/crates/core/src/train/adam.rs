use crate::diffgraph::Tensor;
use crate::{Error, Result};

/// First/second moments per parameter tensor plus the update counter.
#[derive(Debug, Clone, Default)]
pub struct OptimizerState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    moments: Vec<(Vec<f32>, Vec<f32>)>,
}

impl OptimizerState {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        OptimizerState {
            beta1,
            beta2,
            eps,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn moments(&self, i: usize) -> Option<(&[f32], &[f32])> {
        self.moments.get(i).map(|(m, v)| (m.as_slice(), v.as_slice()))
    }
}

/// One bias-corrected Adam update over every tensor, consuming and clearing
/// their gradients. Tensors without a gradient are treated as zero-gradient.
pub fn adam_step<'a, I>(params: I, state: &mut OptimizerState, lr: f64) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a mut Tensor<f32>)>,
{
    let params: Vec<(&str, &mut Tensor<f32>)> = params.into_iter().collect();
    for (name, t) in &params {
        if let Some(g) = t.grad() {
            if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::Training(format!("non-finite gradient in {name} at element {i}")));
            }
        }
    }
    state.step += 1;
    let t_step = state.step as i32;
    let bc1 = 1.0 - state.beta1.powi(t_step);
    let bc2 = 1.0 - state.beta2.powi(t_step);
    let (b1, b2) = (state.beta1 as f32, state.beta2 as f32);
    let step_size = (lr / bc1) as f32;
    let bc2_sqrt = bc2.sqrt() as f32;
    let eps = state.eps as f32;
    if state.moments.len() < params.len() {
        state.moments.resize_with(params.len(), Default::default);
    }
    for (i, (_, t)) in params.into_iter().enumerate() {
        let n = t.len();
        let (m, v) = &mut state.moments[i];
        if m.len() != n {
            *m = vec![0.0; n];
            *v = vec![0.0; n];
        }
        let grad = t.take_grad();
        let data = t.data_mut();
        for j in 0..n {
            let g = grad.as_ref().map_or(0.0, |g| g[j]);
            m[j] = b1 * m[j] + (1.0 - b1) * g;
            v[j] = b2 * v[j] + (1.0 - b2) * g * g;
            data[j] -= step_size * m[j] / (v[j].sqrt() / bc2_sqrt + eps);
        }
    }
    Ok(())
}

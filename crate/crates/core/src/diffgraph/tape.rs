use std::collections::HashMap;

use rand::Rng;

use super::Tensor;
use crate::{Error, Result, Scalar};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    /// `[M×N] + [N]`, bias broadcast over rows.
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        eps: T,
    },
    /// Element-wise product with a constant (dropout keeps its mask here).
    MulConst(Var, Vec<T>),
    Softmax {
        x: Var,
        axis: usize,
    },
    /// Rows at or beyond `valid` are replaced by -inf.
    MaskRows {
        x: Var,
        valid: usize,
    },
    Transpose(Var),
    Reshape(Var),
    ConcatRows(Vec<Var>),
    /// `Σ_l weights[l] · stack[l]` for a `[L×…]` stack.
    LayerMix {
        stack: Var,
        weights: Var,
    },
    L1Loss {
        pred: Var,
        target: Vec<T>,
    },
}

#[derive(Debug)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recording of one forward pass. Rebuilt for every pass.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: Vec<(usize, Var)>,
    param_vars: HashMap<usize, Var>,
}

/// Result of [`Tape::backward`]: one optional gradient per recorded value.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of the loss w.r.t. `v`; zeros when `v` does not reach the loss.
    pub fn wrt(&self, tape: &Tape<T>, v: Var) -> Vec<T> {
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => vec![T::zero(); tape.nodes[v.0].value.len()],
        }
    }

    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn shape2(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (1, *n),
        [m, n] => (*m, *n),
        _ => (shape[..shape.len() - 1].iter().product(), shape[shape.len() - 1]),
    }
}

fn add_into<T: Scalar>(slot: &mut Option<Vec<T>>, g: &[T]) {
    match slot {
        Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
        None => *slot = Some(g.to_vec()),
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    let y = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    // keep the output strictly inside (0, 1) at the working precision
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / T::of(2.0);
    if y < lo {
        lo
    } else if y > hi {
        hi
    } else {
        y
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, needs_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn to_tensor(&self, v: Var) -> Tensor<T> {
        let n = &self.nodes[v.0];
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape values are well formed")
    }

    /// Records a leaf; it participates in differentiation iff the tensor
    /// has `requires_grad` set.
    pub fn leaf(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad())
    }

    pub fn constant(&mut self, shape: Vec<usize>, value: Vec<T>) -> Result<Var> {
        let t = Tensor::new(shape, value)?;
        Ok(self.push(t.shape().to_vec(), t.into_data(), Op::Leaf, false))
    }

    /// Records trainable parameter `id` once per tape; later calls return
    /// the same handle so gradients from every use accumulate.
    pub fn param(&mut self, id: usize, t: &Tensor<T>) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, true);
        self.param_vars.insert(id, v);
        self.params.push((id, v));
        v
    }

    /// `(parameter id, gradient)` for every parameter recorded on this tape.
    /// Parameters the loss does not reach report zeros.
    pub fn param_grads(&self, grads: &Gradients<T>) -> Vec<(usize, Vec<T>)> {
        self.params
            .iter()
            .map(|&(id, v)| (id, grads.wrt(self, v)))
            .collect()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            let row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = av[i * k + p];
                if aip == T::zero() {
                    continue;
                }
                let brow = &bv[p * n..(p + 1) * n];
                for (o, &bpj) in row.iter_mut().zip(brow) {
                    *o = *o + aip * bpj;
                }
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), ng))
    }

    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (_, n) = shape2(self.shape(x));
        if self.value(b).len() != n {
            return Err(Error::Dimension {
                op: "add_bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let bv = self.value(b);
        let out: Vec<T> = self
            .value(x)
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(&a, &c)| a + c))
            .collect();
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(self.shape(x).to_vec(), out, Op::AddBias(x, b), ng))
    }

    /// `x · w + b` for `x: [M×K]`, `w: [K×N]`, `b: [N]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul(x, w)?;
        self.add_bias(h, b)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Dimension {
                op: "add",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| x + y)
            .collect();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, c: T) -> Var {
        let out = self.value(x).iter().map(|&v| v * c).collect();
        self.push(self.shape(x).to_vec(), out, Op::Scale(x, c), self.ng(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).iter().copied().sum();
        self.push(vec![1], vec![s], Op::Sum(x), self.ng(x))
    }

    /// NaN inputs propagate.
    pub fn relu(&mut self, x: Var) -> Var {
        let out = self
            .value(x)
            .iter()
            .map(|&v| if v < T::zero() { T::zero() } else { v })
            .collect();
        self.push(self.shape(x).to_vec(), out, Op::Relu(x), self.ng(x))
    }

    /// Output lies strictly inside (0, 1) for finite input.
    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| sigmoid(v)).collect();
        self.push(self.shape(x).to_vec(), out, Op::Sigmoid(x), self.ng(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).iter().map(|&v| v.tanh()).collect();
        self.push(self.shape(x).to_vec(), out, Op::Tanh(x), self.ng(x))
    }

    /// Normalises each row over the last axis with population variance,
    /// then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let (_, d) = shape2(self.shape(x));
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(Error::Dimension {
                op: "layer_norm",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(gain).to_vec(),
            });
        }
        let eps = T::of(eps);
        let (g, b) = (self.value(gain), self.value(bias));
        let dn = T::of(d as f64);
        let mut out = Vec::with_capacity(self.value(x).len());
        for row in self.value(x).chunks(d) {
            let mean = row.iter().copied().sum::<T>() / dn;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
            let inv = T::one() / (var + eps).sqrt();
            out.extend(
                row.iter()
                    .zip(g.iter().zip(b))
                    .map(|(&v, (&gi, &bi))| (v - mean) * inv * gi + bi),
            );
        }
        let ng = self.ng(x) || self.ng(gain) || self.ng(bias);
        Ok(self.push(
            self.shape(x).to_vec(),
            out,
            Op::LayerNorm { x, gain, bias, eps },
            ng,
        ))
    }

    /// Inverted dropout. With `rng == None` (inference) or `rate == 0` the
    /// input handle is returned unchanged.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, rng: Option<&mut R>) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let rng = match rng {
            Some(r) if rate > 0.0 => r,
            _ => return Ok(x),
        };
        let keep = T::of(1.0 / (1.0 - rate));
        let mask: Vec<T> = (0..self.value(x).len())
            .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
            .collect();
        let out = self.value(x).iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        Ok(self.push(self.shape(x).to_vec(), out, Op::MulConst(x, mask), self.ng(x)))
    }

    /// Max-stabilised softmax along `axis`.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Config(format!("softmax axis {axis} for rank {}", shape.len())));
        }
        let (outer, n, inner) = axis_split(&shape, axis);
        let xv = self.value(x);
        let mut out = vec![T::zero(); xv.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |k: usize| (o * n + k) * inner + i;
                let mx = (0..n).map(|k| xv[at(k)]).fold(T::neg_infinity(), T::max);
                let mut z = T::zero();
                for k in 0..n {
                    let e = (xv[at(k)] - mx).exp();
                    out[at(k)] = e;
                    z = z + e;
                }
                for k in 0..n {
                    out[at(k)] = out[at(k)] / z;
                }
            }
        }
        Ok(self.push(shape, out, Op::Softmax { x, axis }, self.ng(x)))
    }

    /// Replaces rows `valid..` of a `[T×K]` matrix with -inf so a following
    /// softmax over axis 0 gives them zero weight.
    pub fn mask_rows(&mut self, x: Var, valid: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 || valid == 0 || valid > shape[0] {
            return Err(Error::Config(format!("mask_rows: valid={valid} for shape {shape:?}")));
        }
        if valid == shape[0] {
            return Ok(x);
        }
        let k = shape[1];
        let mut out = self.value(x).to_vec();
        out[valid * k..].iter_mut().for_each(|v| *v = T::neg_infinity());
        Ok(self.push(shape, out, Op::MaskRows { x, valid }, self.ng(x)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if shape.len() != 2 {
            return Err(Error::Dimension {
                op: "transpose",
                lhs: shape,
                rhs: vec![],
            });
        }
        let (m, n) = (shape[0], shape[1]);
        let xv = self.value(x);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = xv[i * n + j];
            }
        }
        Ok(self.push(vec![n, m], out, Op::Transpose(x), self.ng(x)))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(x).len() {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape,
            });
        }
        let out = self.value(x).to_vec();
        Ok(self.push(shape, out, Op::Reshape(x), self.ng(x)))
    }

    /// Stacks row blocks with equal trailing width into one matrix.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let (_, width) = shape2(self.shape(parts[0]));
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, w) = shape2(self.shape(p));
            if w != width {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            rows += r;
            out.extend_from_slice(self.value(p));
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(vec![rows, width], out, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Convex (or arbitrary) combination of the leading-axis slices of `stack`.
    pub fn layer_mix(&mut self, stack: Var, weights: Var) -> Result<Var> {
        let shape = self.shape(stack).to_vec();
        let l = shape[0];
        if shape.len() < 2 || self.value(weights).len() != l {
            return Err(Error::Dimension {
                op: "layer_mix",
                lhs: shape,
                rhs: self.shape(weights).to_vec(),
            });
        }
        let inner = self.value(stack).len() / l;
        let (sv, wv) = (self.value(stack), self.value(weights));
        let mut out = vec![T::zero(); inner];
        for (layer, &w) in sv.chunks(inner).zip(wv) {
            for (o, &v) in out.iter_mut().zip(layer) {
                *o = *o + w * v;
            }
        }
        let ng = self.ng(stack) || self.ng(weights);
        Ok(self.push(shape[1..].to_vec(), out, Op::LayerMix { stack, weights }, ng))
    }

    /// Mean absolute error; the subgradient at a zero residual is 0.
    pub fn l1_loss(&mut self, pred: Var, target: &[T]) -> Result<Var> {
        let pv = self.value(pred);
        if pv.len() != target.len() {
            return Err(Error::Dimension {
                op: "l1_loss",
                lhs: self.shape(pred).to_vec(),
                rhs: vec![target.len()],
            });
        }
        let n = T::of(pv.len() as f64);
        let loss = pv.iter().zip(target).map(|(&p, &t)| (p - t).abs()).sum::<T>() / n;
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::L1Loss {
                pred,
                target: target.to_vec(),
            },
            self.ng(pred),
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.nodes[loss.0].shape
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = match grads[idx].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop(node, &g, &mut grads);
            // keep intermediate grads readable for inspection
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backprop(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    // dA = dC · Bᵀ
                    let mut da = vec![T::zero(); m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &bv[p * n..(p + 1) * n];
                            da[i * k + p] = grow.iter().zip(brow).map(|(&x, &y)| x * y).sum();
                        }
                    }
                    add_into(&mut grads[a.0], &da);
                }
                if self.ng(*b) {
                    // dB = Aᵀ · dC
                    let mut db = vec![T::zero(); k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == T::zero() {
                                continue;
                            }
                            for (d, &gj) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                *d = *d + aip * gj;
                            }
                        }
                    }
                    add_into(&mut grads[b.0], &db);
                }
            }
            Op::AddBias(x, b) => {
                if self.ng(*x) {
                    add_into(&mut grads[x.0], g);
                }
                if self.ng(*b) {
                    let n = self.value(*b).len();
                    let mut db = vec![T::zero(); n];
                    for row in g.chunks(n) {
                        db.iter_mut().zip(row).for_each(|(d, &v)| *d = *d + v);
                    }
                    add_into(&mut grads[b.0], &db);
                }
            }
            Op::Add(a, b) => {
                if self.ng(*a) {
                    add_into(&mut grads[a.0], g);
                }
                if self.ng(*b) {
                    add_into(&mut grads[b.0], g);
                }
            }
            Op::Scale(x, c) => {
                let dx: Vec<T> = g.iter().map(|&v| v * *c).collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Sum(x) => {
                let dx = vec![g[0]; self.value(*x).len()];
                add_into(&mut grads[x.0], &dx);
            }
            Op::Relu(x) => {
                let dx: Vec<T> = self
                    .value(*x)
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Sigmoid(x) => {
                let dx: Vec<T> = node
                    .value
                    .iter()
                    .zip(g)
                    .map(|(&y, &gv)| gv * y * (T::one() - y))
                    .collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Tanh(x) => {
                let dx: Vec<T> = node
                    .value
                    .iter()
                    .zip(g)
                    .map(|(&y, &gv)| gv * (T::one() - y * y))
                    .collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let xv = self.value(*x);
                let gv = self.value(*gain);
                let d = gv.len();
                let dn = T::of(d as f64);
                let mut dx = vec![T::zero(); xv.len()];
                let mut dgain = vec![T::zero(); d];
                let mut dbias = vec![T::zero(); d];
                let mut xhat = vec![T::zero(); d];
                let mut dxhat = vec![T::zero(); d];
                for (r, row) in xv.chunks(d).enumerate() {
                    let grow = &g[r * d..(r + 1) * d];
                    let mean = row.iter().copied().sum::<T>() / dn;
                    let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / dn;
                    let inv = T::one() / (var + *eps).sqrt();
                    for j in 0..d {
                        xhat[j] = (row[j] - mean) * inv;
                        dxhat[j] = grow[j] * gv[j];
                        dgain[j] = dgain[j] + grow[j] * xhat[j];
                        dbias[j] = dbias[j] + grow[j];
                    }
                    let m1 = dxhat.iter().copied().sum::<T>() / dn;
                    let m2 = dxhat.iter().zip(&xhat).map(|(&a, &b)| a * b).sum::<T>() / dn;
                    for j in 0..d {
                        dx[r * d + j] = inv * (dxhat[j] - m1 - xhat[j] * m2);
                    }
                }
                if self.ng(*x) {
                    add_into(&mut grads[x.0], &dx);
                }
                if self.ng(*gain) {
                    add_into(&mut grads[gain.0], &dgain);
                }
                if self.ng(*bias) {
                    add_into(&mut grads[bias.0], &dbias);
                }
            }
            Op::MulConst(x, mask) => {
                let dx: Vec<T> = g.iter().zip(mask).map(|(&a, &b)| a * b).collect();
                add_into(&mut grads[x.0], &dx);
            }
            Op::Softmax { x, axis } => {
                let (outer, n, inner) = axis_split(&node.shape, *axis);
                let y = &node.value;
                let mut dx = vec![T::zero(); y.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |k: usize| (o * n + k) * inner + i;
                        let dot: T = (0..n).map(|k| g[at(k)] * y[at(k)]).sum();
                        for k in 0..n {
                            dx[at(k)] = y[at(k)] * (g[at(k)] - dot);
                        }
                    }
                }
                add_into(&mut grads[x.0], &dx);
            }
            Op::MaskRows { x, valid } => {
                let k = node.shape[1];
                let mut dx = g.to_vec();
                dx[valid * k..].iter_mut().for_each(|v| *v = T::zero());
                add_into(&mut grads[x.0], &dx);
            }
            Op::Transpose(x) => {
                let (n, m) = (node.shape[0], node.shape[1]);
                let mut dx = vec![T::zero(); g.len()];
                for i in 0..m {
                    for j in 0..n {
                        dx[i * n + j] = g[j * m + i];
                    }
                }
                add_into(&mut grads[x.0], &dx);
            }
            Op::Reshape(x) => add_into(&mut grads[x.0], g),
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    if self.ng(*p) {
                        add_into(&mut grads[p.0], &g[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::LayerMix { stack, weights } => {
                let sv = self.value(*stack);
                let wv = self.value(*weights);
                let inner = g.len();
                if self.ng(*weights) {
                    let dw: Vec<T> = sv
                        .chunks(inner)
                        .map(|layer| layer.iter().zip(g).map(|(&a, &b)| a * b).sum())
                        .collect();
                    add_into(&mut grads[weights.0], &dw);
                }
                if self.ng(*stack) {
                    let ds: Vec<T> = wv
                        .iter()
                        .flat_map(|&w| g.iter().map(move |&v| v * w))
                        .collect();
                    add_into(&mut grads[stack.0], &ds);
                }
            }
            Op::L1Loss { pred, target } => {
                let n = T::of(target.len() as f64);
                let dp: Vec<T> = self
                    .value(*pred)
                    .iter()
                    .zip(target)
                    .map(|(&p, &t)| {
                        let r = p - t;
                        let s = if r > T::zero() {
                            T::one()
                        } else if r < T::zero() {
                            -T::one()
                        } else {
                            T::zero()
                        };
                        g[0] * s / n
                    })
                    .collect();
                add_into(&mut grads[pred.0], &dp);
            }
        }
    }
}

fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

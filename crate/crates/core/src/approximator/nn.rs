//! Dense layers with hand-written backpropagation, in `f64`.

use rand_distr::{Distribution, StandardNormal};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Anything made of flat `f64` tensors: parameters, gradients, optimizer moments.
pub trait ParamSet: Clone {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&values[off..off + t.len()]);
            off += t.len();
        }
        assert_eq!(off, values.len(), "flat parameter length");
    }

    fn sq_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }

    fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|x| *x *= k);
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major `[out x in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Orthogonal weights scaled by `gain`, zero bias.
    pub fn orthogonal(in_dim: usize, out_dim: usize, gain: f64, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(in_dim, out_dim);
        layer.weight = orthogonal_matrix(out_dim, in_dim, gain, rng);
        layer
    }

    #[inline]
    pub fn row(&self, o: usize) -> &[f64] {
        &self.weight[o * self.in_dim..(o + 1) * self.in_dim]
    }

    #[inline]
    pub fn forward_row(&self, o: usize, x: &[f64]) -> f64 {
        self.bias[o] + dot(self.row(o), x)
    }

    pub fn forward_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.in_dim);
        for (o, yo) in y.iter_mut().enumerate().take(self.out_dim) {
            *yo = self.forward_row(o, x);
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.out_dim];
        self.forward_into(x, &mut y);
        y
    }

    /// Accumulates parameter gradients into `grad` and, if requested, the
    /// input gradient into `gx`.
    pub fn backward(&self, x: &[f64], gy: &[f64], grad: &mut Dense, mut gx: Option<&mut [f64]>) {
        for (o, &g) in gy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad.bias[o] += g;
            let base = o * self.in_dim;
            let grow = &mut grad.weight[base..base + self.in_dim];
            for (gw, &xi) in grow.iter_mut().zip(x) {
                *gw += g * xi;
            }
            if let Some(gx) = gx.as_deref_mut() {
                for (gxi, &w) in gx.iter_mut().zip(&self.weight[base..base + self.in_dim]) {
                    *gxi += g * w;
                }
            }
        }
    }
}

impl ParamSet for Dense {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is
/// fewer), times `gain`.
pub fn orthogonal_matrix(rows: usize, cols: usize, gain: f64, rng: &mut Rng) -> Vec<f64> {
    let (m, n) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // n column vectors of length m, orthonormalized by modified Gram-Schmidt.
    let mut q: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    for j in 0..n {
        for k in 0..j {
            let (head, tail) = q.split_at_mut(j);
            let proj = dot(&head[k], &tail[0]);
            for (x, y) in tail[0].iter_mut().zip(&head[k]) {
                *x -= proj * y;
            }
        }
        let norm = dot(&q[j], &q[j]).sqrt();
        q[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[r * cols + c] = gain * if rows >= cols { q[c][r] } else { q[r][c] };
        }
    }
    out
}

/// Stack of dense layers, each followed by the same activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Layer inputs and outputs kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// `acts[0]` is the input, `acts[i + 1]` the activated output of layer `i`.
    pub acts: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty")
    }
}

impl Mlp {
    pub fn new(in_dim: usize, widths: &[usize], activation: Activation, gain: f64, rng: &mut Rng) -> Self {
        let mut layers = Vec::with_capacity(widths.len());
        let mut d = in_dim;
        for &w in widths {
            layers.push(Dense::orthogonal(d, w, gain, rng));
            d = w;
        }
        Self { layers, activation }
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn out_dim(&self, in_dim: usize) -> usize {
        self.layers.last().map_or(in_dim, |l| l.out_dim)
    }

    pub fn forward(&self, x: &[f64]) -> MlpCache {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for layer in &self.layers {
            let mut y = layer.forward(acts.last().unwrap());
            y.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            acts.push(y);
        }
        MlpCache { acts }
    }

    /// Backpropagates `gy` (gradient at the stack's output).
    pub fn backward(&self, cache: &MlpCache, gy: &[f64], grad: &mut Mlp) {
        let mut g: Vec<f64> = gy.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let out = &cache.acts[i + 1];
            for (gj, &y) in g.iter_mut().zip(out) {
                *gj *= self.activation.grad_from_output(y);
            }
            if i == 0 {
                layer.backward(&cache.acts[0], &g, &mut grad.layers[0], None);
            } else {
                let mut gx = vec![0.0; layer.in_dim];
                layer.backward(&cache.acts[i], &g, &mut grad.layers[i], Some(&mut gx));
                g = gx;
            }
        }
    }
}

impl ParamSet for Mlp {
    fn tensors(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.tensors_mut()).collect()
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    #[test]
    fn orthogonal_rows_are_orthonormal() {
        let mut rng = stream_rng(3, Stream::InitTheta, 0);
        for (rows, cols) in [(4, 9), (9, 4), (5, 5)] {
            let w = orthogonal_matrix(rows, cols, 1.0, &mut rng);
            let short = rows.min(cols);
            for i in 0..short {
                for j in 0..short {
                    let d: f64 = if rows <= cols {
                        (0..cols).map(|c| w[i * cols + c] * w[j * cols + c]).sum()
                    } else {
                        (0..rows).map(|r| w[r * cols + i] * w[r * cols + j]).sum()
                    };
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn softmax_sums_to_one() {
        let p = softmax(&[1000.0, 999.0, -5.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = log_softmax(&[0.3, -0.2]);
        let p = softmax(&[0.3, -0.2]);
        for (a, b) in lp.iter().zip(&p) {
            assert!((a.exp() - b).abs() < 1e-15);
        }
    }

    #[test]
    fn mlp_backward_matches_finite_differences() {
        let mut rng = stream_rng(9, Stream::InitTheta, 0);
        let mlp = Mlp::new(3, &[4, 2], Activation::Tanh, 1.0, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let loss = |m: &Mlp| {
            let c = m.forward(&x);
            c.output()[0] * 2.0 - c.output()[1]
        };
        let cache = mlp.forward(&x);
        let mut grad = mlp.zeros_like();
        mlp.backward(&cache, &[2.0, -1.0], &mut grad);
        let flat = mlp.flat();
        let g = grad.flat();
        for i in 0..flat.len() {
            let (mut p, mut m) = (mlp.clone(), mlp.clone());
            let mut fp = flat.clone();
            fp[i] += 1e-6;
            p.set_flat(&fp);
            fp[i] -= 2e-6;
            m.set_flat(&fp);
            let num = (loss(&p) - loss(&m)) / 2e-6;
            assert!((num - g[i]).abs() < 1e-7, "param {i}: {num} vs {}", g[i]);
        }
    }
}

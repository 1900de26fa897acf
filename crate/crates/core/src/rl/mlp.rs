//! Fully connected network with hand-written backpropagation and Adam.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Relu => z.mapv(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    /// Multiplies `grad` in place by the activation derivative at `z`.
    fn backprop(self, z: &Array2<f64>, grad: &mut Array2<f64>) {
        if self == Activation::Relu {
            Zip::from(grad).and(z).for_each(|g, &zv| {
                if zv <= 0.0 {
                    *g = 0.0;
                }
            });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Shape `(inputs, outputs)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

/// Per-layer inputs and pre-activations from a forward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Array2::zeros(l.weights.raw_dim())).collect(),
            bias: net.layers.iter().map(|l| Array1::zeros(l.bias.raw_dim())).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

impl Mlp {
    /// ReLU hidden layers and a linear output layer. Weights and biases are
    /// drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(precondition("network needs at least two non-empty layer sizes"));
        }
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound)),
                    bias: Array1::from_shape_fn(w[1], |_| rng.random_range(-bound..bound)),
                    activation: if i == last { Activation::Identity } else { Activation::Relu },
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.weights.ncols()));
        s
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Rows of `x` are samples.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = x.clone();
        for l in &self.layers {
            let z = h.dot(&l.weights) + &l.bias;
            h = l.activation.apply(&z);
        }
        h
    }

    pub fn forward_cached(&self, x: &Array2<f64>) -> ForwardCache {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for l in &self.layers {
            let z = h.dot(&l.weights) + &l.bias;
            let next = l.activation.apply(&z);
            inputs.push(h);
            pre.push(z);
            h = next;
        }
        ForwardCache { inputs, pre, output: h }
    }

    /// Given `dL/d(output)`, returns parameter gradients and `dL/d(input)`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> (Gradients, Array2<f64>) {
        let n = self.layers.len();
        let mut gw = Vec::with_capacity(n);
        let mut gb = Vec::with_capacity(n);
        let mut g = grad_out.clone();
        for (i, l) in self.layers.iter().enumerate().rev() {
            l.activation.backprop(&cache.pre[i], &mut g);
            gw.push(cache.inputs[i].t().dot(&g));
            gb.push(g.sum_axis(Axis(0)));
            g = g.dot(&l.weights.t());
        }
        gw.reverse();
        gb.reverse();
        (Gradients { weights: gw, bias: gb }, g)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(precondition("parameter vector length mismatch"));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// `self <- (1 - rho) * self + rho * source`.
    pub fn blend_from(&mut self, source: &Mlp, rho: f64) {
        for (t, s) in self.layers.iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weights).and(&s.weights).for_each(|t, &s| *t = (1.0 - rho) * *t + rho * s);
            Zip::from(&mut t.bias).and(&s.bias).for_each(|t, &s| *t = (1.0 - rho) * *t + rho * s);
        }
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let z = Gradients::zeros_like(net);
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m_w: z.weights.clone(),
            v_w: z.weights,
            m_b: z.bias.clone(),
            v_b: z.bias,
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (i, l) in net.layers.iter_mut().enumerate() {
            Zip::from(&mut l.weights)
                .and(&mut self.m_w[i])
                .and(&mut self.v_w[i])
                .and(&grads.weights[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut l.bias)
                .and(&mut self.m_b[i])
                .and(&mut self.v_b[i])
                .and(&grads.bias[i])
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

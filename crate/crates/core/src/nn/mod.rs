//! Minimal dense neural-network engine.
//!
//! Plain fully-connected nets with rectifier hidden layers, a gated
//! recurrent cell, an adaptive-moment optimizer and finite-difference
//! gradient verification. Parameters are trained in f32; reductions
//! accumulate in f64; gradient checks run on f64 shadow copies of the same
//! generic code.

mod adam;
pub mod gradcheck;
mod lstm;

pub use adam::Adam;
pub use lstm::{LstmCache, LstmCell, LstmGrads};

use rand::Rng;
use std::fmt;

/// Errors raised by the network engine.
#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    ShapeMismatch { expected: usize, got: usize, what: &'static str },
    NonFinite { param: String },
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::ShapeMismatch { expected, got, what } => {
                write!(f, "shape mismatch in {what}: expected {expected}, got {got}")
            }
            NnError::NonFinite { param } => write!(f, "non-finite value in {param}"),
        }
    }
}

impl std::error::Error for NnError {}

/// Scalar type the engine is generic over (f32 for training, f64 for checks).
pub trait Scalar: Copy + PartialOrd + fmt::Debug + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

/// Per-layer activation. Hidden layers use the rectifier; heads vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    Tanh,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "relu" => Activation::Relu,
            "identity" => Activation::Identity,
            "tanh" => Activation::Tanh,
            "softmax" => Activation::Softmax,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DenseLayer<T: Scalar> {
    pub w: Vec<T>, // row-major [out][in]
    pub b: Vec<T>,
    pub in_dim: usize,
    pub out_dim: usize,
    pub act: Activation,
}

/// Multilayer perceptron. `dims` gives layer widths input-first; all hidden
/// layers are rectified, the last layer uses `head`.
#[derive(Debug, Clone)]
pub struct DenseNet<T: Scalar> {
    pub layers: Vec<DenseLayer<T>>,
    pub head: Activation,
    pub dims: Vec<usize>,
}

/// Forward cache: per-layer input plus post-activation output.
#[derive(Debug, Clone)]
pub struct DenseCache<T: Scalar> {
    inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
}

impl<T: Scalar> DenseCache<T> {
    pub fn output(&self) -> &[T] {
        self.outputs.last().expect("cache from a net with layers")
    }
}

/// Gradients mirroring a net's layer structure.
#[derive(Debug, Clone)]
pub struct DenseGrads<T: Scalar> {
    pub dw: Vec<Vec<T>>,
    pub db: Vec<Vec<T>>,
}

impl<T: Scalar> DenseGrads<T> {
    pub fn zeros_like(net: &DenseNet<T>) -> Self {
        DenseGrads {
            dw: net.layers.iter().map(|l| vec![T::zero(); l.w.len()]).collect(),
            db: net.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &DenseGrads<T>) {
        for (a, b) in self.dw.iter_mut().zip(&other.dw) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = T::from_f64(x.to_f64() + y.to_f64());
            }
        }
        for (a, b) in self.db.iter_mut().zip(&other.db) {
            for (x, y) in a.iter_mut().zip(b) {
                *x = T::from_f64(x.to_f64() + y.to_f64());
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in self.dw.iter_mut().chain(self.db.iter_mut()) {
            for x in a.iter_mut() {
                *x = T::from_f64(x.to_f64() * k);
            }
        }
    }

    pub fn slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.dw.len() * 2);
        for (w, b) in self.dw.iter().zip(&self.db) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }
}

/// y = act(W x + b), accumulating the affine part in f64.
fn affine<T: Scalar>(w: &[T], b: &[T], x: &[T], out: &mut Vec<f64>) {
    let in_dim = x.len();
    let out_dim = b.len();
    out.clear();
    for o in 0..out_dim {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut acc = b[o].to_f64();
        for i in 0..in_dim {
            acc += row[i].to_f64() * x[i].to_f64();
        }
        out.push(acc);
    }
}

fn apply_activation<T: Scalar>(act: Activation, z: &[f64]) -> Vec<T> {
    match act {
        Activation::Identity => z.iter().map(|&v| T::from_f64(v)).collect(),
        Activation::Relu => z.iter().map(|&v| T::from_f64(v.max(0.0))).collect(),
        Activation::Tanh => z.iter().map(|&v| T::from_f64(v.tanh())).collect(),
        Activation::Softmax => {
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = z.iter().map(|&v| (v - m).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.iter().map(|&e| T::from_f64(e / sum)).collect()
        }
    }
}

/// dL/dz from dL/dy using only post-activation outputs.
fn activation_backward<T: Scalar>(act: Activation, y: &[T], dy: &[f64]) -> Vec<f64> {
    match act {
        Activation::Identity => dy.to_vec(),
        Activation::Relu => y
            .iter()
            .zip(dy)
            .map(|(&v, &d)| if v.to_f64() > 0.0 { d } else { 0.0 })
            .collect(),
        Activation::Tanh => y
            .iter()
            .zip(dy)
            .map(|(&v, &d)| {
                let t = v.to_f64();
                d * (1.0 - t * t)
            })
            .collect(),
        Activation::Softmax => {
            let dot: f64 = y.iter().zip(dy).map(|(&v, &d)| v.to_f64() * d).sum();
            y.iter().zip(dy).map(|(&v, &d)| v.to_f64() * (d - dot)).collect()
        }
    }
}

impl<T: Scalar> DenseNet<T> {
    /// Random init: uniform +-1/sqrt(fan_in) weights, zero biases.
    pub fn new<R: Rng>(dims: &[usize], head: Activation, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "a net needs at least input and output dims");
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for k in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[k], dims[k + 1]);
            let bound = 1.0 / (in_dim as f64).sqrt();
            let w = (0..in_dim * out_dim)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            let b = vec![T::zero(); out_dim];
            let act = if k + 2 == dims.len() { head } else { Activation::Relu };
            layers.push(DenseLayer { w, b, in_dim, out_dim, act });
        }
        DenseNet { layers, head, dims: dims.to_vec() }
    }

    /// All-zero parameters (forward of any input is the bias pass-through).
    pub fn zeros(dims: &[usize], head: Activation) -> Self {
        assert!(dims.len() >= 2);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for k in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[k], dims[k + 1]);
            let act = if k + 2 == dims.len() { head } else { Activation::Relu };
            layers.push(DenseLayer {
                w: vec![T::zero(); in_dim * out_dim],
                b: vec![T::zero(); out_dim],
                in_dim,
                out_dim,
                act,
            });
        }
        DenseNet { layers, head, dims: dims.to_vec() }
    }

    pub fn in_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn out_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, DenseCache<T>), NnError> {
        if x.len() != self.in_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.in_dim(),
                got: x.len(),
                what: "dense forward input",
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let mut z = Vec::new();
        for layer in &self.layers {
            affine(&layer.w, &layer.b, &cur, &mut z);
            let y = apply_activation::<T>(layer.act, &z);
            inputs.push(cur);
            outputs.push(y.clone());
            cur = y;
        }
        Ok((cur, DenseCache { inputs, outputs }))
    }

    /// Convenience forward that drops the cache.
    pub fn infer(&self, x: &[T]) -> Result<Vec<T>, NnError> {
        Ok(self.forward(x)?.0)
    }

    /// Backprop from dL/dy of the final output. Returns parameter gradients
    /// and dL/dx of the input (needed for critic-through-actor and BPTT).
    pub fn backward(&self, cache: &DenseCache<T>, dy: &[T]) -> Result<(DenseGrads<T>, Vec<T>), NnError> {
        if cache.inputs.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch {
                expected: self.layers.len(),
                got: cache.inputs.len(),
                what: "dense backward cache",
            });
        }
        if dy.len() != self.out_dim() {
            return Err(NnError::ShapeMismatch {
                expected: self.out_dim(),
                got: dy.len(),
                what: "dense backward dy",
            });
        }
        let mut grads = DenseGrads::zeros_like(self);
        let mut d: Vec<f64> = dy.iter().map(|v| v.to_f64()).collect();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.outputs[k];
            let x = &cache.inputs[k];
            let dz = activation_backward(layer.act, y, &d);
            let dw = &mut grads.dw[k];
            let db = &mut grads.db[k];
            for o in 0..layer.out_dim {
                db[o] = T::from_f64(dz[o]);
                let row = &mut dw[o * layer.in_dim..(o + 1) * layer.in_dim];
                for i in 0..layer.in_dim {
                    row[i] = T::from_f64(dz[o] * x[i].to_f64());
                }
            }
            let mut dx = vec![0.0f64; layer.in_dim];
            for o in 0..layer.out_dim {
                let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                let g = dz[o];
                for i in 0..layer.in_dim {
                    dx[i] += row[i].to_f64() * g;
                }
            }
            d = dx;
        }
        Ok((grads, d.iter().map(|&v| T::from_f64(v)).collect()))
    }

    pub fn param_slices(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &self.layers {
            out.push(l.w.as_slice());
            out.push(l.b.as_slice());
        }
        out
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for l in &mut self.layers {
            out.push(l.w.as_mut_slice());
            out.push(l.b.as_mut_slice());
        }
        out
    }

    /// Slot names aligned with `param_slices` for diagnostics.
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::with_capacity(self.layers.len() * 2);
        for k in 0..self.layers.len() {
            out.push(format!("{prefix}.layer{k}.w"));
            out.push(format!("{prefix}.layer{k}.b"));
        }
        out
    }

    /// Convert precision (used to build f64 shadow copies for checks).
    pub fn cast<U: Scalar>(&self) -> DenseNet<U> {
        DenseNet {
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    w: l.w.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                    b: l.b.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                    in_dim: l.in_dim,
                    out_dim: l.out_dim,
                    act: l.act,
                })
                .collect(),
            head: self.head,
            dims: self.dims.clone(),
        }
    }

    /// Polyak average: self = (1 - rate) * self + rate * src.
    pub fn soft_update_from(&mut self, src: &DenseNet<T>, rate: f64) {
        for (dst, s) in self.layers.iter_mut().zip(&src.layers) {
            for (a, b) in dst.w.iter_mut().zip(&s.w) {
                *a = T::from_f64((1.0 - rate) * a.to_f64() + rate * b.to_f64());
            }
            for (a, b) in dst.b.iter_mut().zip(&s.b) {
                *a = T::from_f64((1.0 - rate) * a.to_f64() + rate * b.to_f64());
            }
        }
    }
}

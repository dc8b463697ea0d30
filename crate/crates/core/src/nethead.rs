//! The cluster-assignment network: a tanh perceptron ending in a softmax over
//! `n_out` clusters, its analytic backward pass, and SGD with momentum, weight
//! decay and the cosine learning-rate schedule.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on the sum of a probability vector.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A softmax output `ŷ` over `n_out` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::Empty("probability vector"));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!("probability entries must lie in [0, 1]: {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("probabilities sum to {sum}")));
        }
        Ok(Self(p))
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        let mut p = logits.to_vec();
        softmax_in_place(&mut p);
        Self(p)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, l: usize) -> Self {
        let mut p = vec![0.0; n];
        p[l] = 1.0;
        Self(p)
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (l, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = l;
        }
    }
    best
}

/// Max-subtracted softmax.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// A feedforward network `d → hidden... → n_out` with tanh hidden units and a
/// softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterHead {
    layer_dims: Vec<usize>,
    layers: Vec<Layer>,
}

/// Intermediate activations of a batch forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[l]` the tanh output of hidden layer `l`.
    activations: Vec<Array2<f64>>,
    probs: Array2<f64>,
}

impl ForwardCache {
    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &ClusterHead) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| Layer { weights: Array2::zeros(l.weights.raw_dim()), bias: Array1::zeros(l.bias.len()) })
            .collect();
        Self { layers }
    }

    /// `self += scale * other`
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.iter().all(|v| v == 0.0)
    }

    /// All entries in layer order, weights row-major before biases.
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }
}

impl ClusterHead {
    /// Uniform fan-in initialisation `U(-1/√fan_in, 1/√fan_in)`.
    pub fn new(layer_dims: &[usize], seed: u64) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let mut r = rng::stream(seed, &[0x1A17]);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let bound = 1.0 / (w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[1], w[0]), || r.gen_range(-bound..bound)),
                    bias: Array1::from_shape_simple_fn(w[1], || r.gen_range(-bound..bound)),
                }
            })
            .collect();
        Ok(Self { layer_dims: layer_dims.to_vec(), layers })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        Self::validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer { weights: Array2::zeros((w[1], w[0])), bias: Array1::zeros(w[1]) })
            .collect();
        Ok(Self { layer_dims: layer_dims.to_vec(), layers })
    }

    /// Rebuilds a model from its dims and a flat row-major parameter list.
    pub fn from_flat(layer_dims: &[usize], params: &[f64]) -> Result<Self> {
        let mut model = Self::zeros(layer_dims)?;
        if params.len() != model.num_params() {
            return Err(Error::DimensionMismatch { expected: model.num_params(), found: params.len() });
        }
        for (dst, &src) in model.params_mut().zip(params) {
            *dst = src;
        }
        Ok(model)
    }

    fn validate_dims(layer_dims: &[usize]) -> Result<()> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::invalid(format!("layer dims must have >= 2 positive widths, got {layer_dims:?}")));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_out(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn forward(&self, x: &[f64]) -> Result<ProbVector> {
        let row = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::invalid(e.to_string()))?;
        let probs = self.forward_batch(row)?;
        Ok(ProbVector::from_raw(probs.row(0).to_vec()))
    }

    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.probs)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: x.ncols() });
        }
        let mut activations = Vec::with_capacity(self.layers.len());
        activations.push(x.to_owned());
        let last = self.layers.len() - 1;
        let mut logits = None;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = activations[l].dot(&layer.weights.t());
            z += &layer.bias;
            if l == last {
                logits = Some(z);
            } else {
                z.mapv_inplace(f64::tanh);
                activations.push(z);
            }
        }
        // Matrix products may come back column-major; softmax needs contiguous rows.
        let mut probs = logits.unwrap().as_standard_layout().into_owned();
        for mut row in probs.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("standard layout"));
        }
        Ok(ForwardCache { activations, probs })
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.forward_batch(x)?;
        Ok(probs.rows().into_iter().map(|r| argmax(r.as_slice().unwrap())).collect())
    }

    /// Gradients of `Σ_b ⟨upstream_b, ŷ_b⟩` with respect to every parameter.
    pub fn backward(&self, x: ArrayView2<'_, f64>, upstream: ArrayView2<'_, f64>) -> Result<Gradients> {
        let cache = self.forward_cached(x)?;
        self.backward_cached(&cache, upstream)
    }

    pub fn backward_cached(&self, cache: &ForwardCache, upstream: ArrayView2<'_, f64>) -> Result<Gradients> {
        if upstream.dim() != cache.probs.dim() {
            return Err(Error::DimensionMismatch { expected: cache.probs.len(), found: upstream.len() });
        }
        // Softmax Jacobian: dz = p ⊙ (g - <g, p>).
        let mut delta = &cache.probs * &upstream;
        let inner = delta.sum_axis(Axis(1));
        Zip::from(delta.rows_mut())
            .and(cache.probs.rows())
            .and(&inner)
            .for_each(|mut d, p, &s| d.scaled_add(-s, &p));

        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = &cache.activations[l];
            grads.push(Layer { weights: delta.t().dot(input), bias: delta.sum_axis(Axis(0)) });
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].weights);
                Zip::from(&mut back).and(input).for_each(|b, &a| *b *= 1.0 - a * a);
                delta = back;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

/// SGD state with the `η·cos(7πt / 16T)` schedule; `t` counts from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub eta: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub t: usize,
    pub total_steps: usize,
    pub velocity: Gradients,
}

impl OptimizerState {
    pub fn new(model: &ClusterHead, eta: f64, momentum: f64, weight_decay: f64, total_steps: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) || !(0.0..1.0).contains(&momentum) || weight_decay < 0.0 || total_steps == 0 {
            return Err(Error::invalid(format!(
                "optimizer needs eta > 0, momentum in [0,1), weight_decay >= 0, T >= 1 (eta={eta}, momentum={momentum}, wd={weight_decay}, T={total_steps})"
            )));
        }
        Ok(Self { eta, momentum, weight_decay, t: 0, total_steps, velocity: Gradients::zeros_like(model) })
    }

    pub fn lr_at(&self, t: usize) -> f64 {
        cosine_lr(self.eta, t, self.total_steps)
    }

    pub fn lr(&self) -> f64 {
        self.lr_at(self.t)
    }

    pub fn is_complete(&self) -> bool {
        self.t >= self.total_steps
    }
}

pub fn cosine_lr(eta: f64, t: usize, total_steps: usize) -> f64 {
    eta * (7.0 * std::f64::consts::PI * t as f64 / (16.0 * total_steps as f64)).cos()
}

/// One momentum step. Weight decay applies to weights, not biases.
pub fn sgd_step(model: &mut ClusterHead, grads: &Gradients, opt: &mut OptimizerState) -> Result<()> {
    if opt.is_complete() {
        return Err(Error::StepAfterCompletion { total: opt.total_steps });
    }
    if grads.layers.len() != model.layers.len() {
        return Err(Error::DimensionMismatch { expected: model.layers.len(), found: grads.layers.len() });
    }
    let lr = opt.lr();
    let (mu, wd) = (opt.momentum, opt.weight_decay);
    for ((layer, g), v) in model.layers.iter_mut().zip(&grads.layers).zip(&mut opt.velocity.layers) {
        if g.weights.dim() != layer.weights.dim() || g.bias.len() != layer.bias.len() {
            return Err(Error::DimensionMismatch { expected: layer.weights.len(), found: g.weights.len() });
        }
        Zip::from(&mut layer.weights).and(&g.weights).and(&mut v.weights).for_each(|p, &g, v| {
            *v = mu * *v + (g + wd * *p);
            *p -= lr * *v;
        });
        Zip::from(&mut layer.bias).and(&g.bias).and(&mut v.bias).for_each(|p, &g, v| {
            *v = mu * *v + g;
            *p -= lr * *v;
        });
    }
    opt.t += 1;
    Ok(())
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OptimizerRecord {
    eta: f64,
    momentum: f64,
    weight_decay: f64,
    t: usize,
    total_steps: usize,
    velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointRecord {
    version: u32,
    layer_dims: Vec<usize>,
    params: Vec<f64>,
    optimizer: Option<OptimizerRecord>,
}

/// Serialises a model (and optionally its optimizer) as versioned JSON with
/// parameters in row-major layer order.
pub fn checkpoint_to_string(model: &ClusterHead, opt: Option<&OptimizerState>) -> Result<String> {
    let record = CheckpointRecord {
        version: CHECKPOINT_VERSION,
        layer_dims: model.layer_dims.clone(),
        params: model.params().collect(),
        optimizer: opt.map(|o| OptimizerRecord {
            eta: o.eta,
            momentum: o.momentum,
            weight_decay: o.weight_decay,
            t: o.t,
            total_steps: o.total_steps,
            velocity: o.velocity.iter().collect(),
        }),
    };
    Ok(serde_json::to_string(&record)?)
}

pub fn checkpoint_from_str(text: &str) -> Result<(ClusterHead, Option<OptimizerState>)> {
    let record: CheckpointRecord = serde_json::from_str(text)?;
    if record.version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion(record.version));
    }
    let model = ClusterHead::from_flat(&record.layer_dims, &record.params)?;
    let opt = match record.optimizer {
        None => None,
        Some(o) => {
            let velocity = ClusterHead::from_flat(&record.layer_dims, &o.velocity)?;
            Some(OptimizerState {
                eta: o.eta,
                momentum: o.momentum,
                weight_decay: o.weight_decay,
                t: o.t,
                total_steps: o.total_steps,
                velocity: Gradients { layers: velocity.layers },
            })
        }
    };
    Ok((model, opt))
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ClusterHead, opt: Option<&OptimizerState>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_to_string(model, opt)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ClusterHead, Option<OptimizerState>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_str(&text)
}

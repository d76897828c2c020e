//! Dense feed-forward network with batched forward and backward passes.
//!
//! Batches are row-major `B × in` matrices, one sample per row. Each layer
//! stores its weights as an `out × in` matrix so a layer computes
//! `Z = X Wᵀ + 1 bᵀ` followed by an element-wise activation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Softplus,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            // log(1 + e^x) without overflow for large x
            Activation::Softplus => {
                if x > 30.0 {
                    x
                } else {
                    x.exp().ln_1p()
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => 1.0 / (1.0 + (-x).exp()),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "identity" => Some(Activation::Identity),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "softplus" => Some(Activation::Softplus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// Shape `(out, in)`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn input_size(&self) -> usize {
        self.weights.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.weights.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
}

/// Values recorded during a forward pass, consumed by [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<DMatrix<f64>>,
    pre_activations: Vec<DMatrix<f64>>,
}

/// Gradient of a scalar loss with respect to one layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Gradients for every layer; shapes mirror the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: DMatrix::zeros(l.output_size(), l.input_size()),
                    bias: DVector::zeros(l.output_size()),
                })
                .collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.iter().chain(g.bias.iter()).all(|&v| v == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.bias.iter()))
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

impl DenseNetwork {
    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract("network needs at least one layer".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_size() {
                return Err(Error::Contract(format!(
                    "layer {i}: bias length {} does not match output size {}",
                    layer.bias.len(),
                    layer.output_size()
                )));
            }
            if layer.input_size() == 0 || layer.output_size() == 0 {
                return Err(Error::Contract(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_size() != pair[1].input_size() {
                return Err(Error::Contract(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].output_size(),
                    i + 1,
                    pair[1].input_size()
                )));
            }
        }
        Ok(DenseNetwork { layers })
    }

    /// Glorot-uniform initialised network: `sizes = [in, h1, ..., out]`, the
    /// hidden layers use `hidden` and the last layer uses `output`.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Contract(
                "layer size list needs an input and an output size".into(),
            ));
        }
        if let Some(pos) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Contract(format!("layer size {pos} is zero")));
        }
        let n_layers = sizes.len() - 1;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights =
                    DMatrix::from_fn(fan_out, fan_in, |_, _| rng.random_range(-limit..=limit));
                DenseLayer {
                    weights,
                    bias: DVector::zeros(fan_out),
                    activation: if i + 1 == n_layers { output } else { hidden },
                }
            })
            .collect();
        DenseNetwork::from_layers(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].output_size()
    }

    /// `[in, h1, ..., out]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_size())
            .chain(self.layers.iter().map(DenseLayer::output_size))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_batch(&self, batch: &DMatrix<f64>) -> Result<()> {
        if batch.ncols() != self.input_size() {
            return Err(Error::Contract(format!(
                "batch has {} columns, network expects {}",
                batch.ncols(),
                self.input_size()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_batch(batch)?;
        let mut act = batch.clone();
        for layer in &self.layers {
            let mut z = affine(layer, &act);
            let f = layer.activation;
            z.apply(|v| *v = f.apply(*v));
            act = z;
        }
        Ok(act)
    }

    /// Forward pass that keeps what the backward pass needs.
    pub fn forward_cached(&self, batch: &DMatrix<f64>) -> Result<(DMatrix<f64>, ForwardCache)> {
        self.check_batch(batch)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut act = batch.clone();
        for layer in &self.layers {
            let z = affine(layer, &act);
            let f = layer.activation;
            let out = z.map(|v| f.apply(v));
            inputs.push(act);
            pre_activations.push(z);
            act = out;
        }
        Ok((
            act,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Backpropagates `upstream = ∂loss/∂output` (shape `B × out`).
    ///
    /// Returns the parameter gradients and `∂loss/∂input` (shape `B × in`).
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &DMatrix<f64>,
    ) -> Result<(Gradients, DMatrix<f64>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache was recorded on a different network".into(),
            ));
        }
        let batch = cache.inputs[0].nrows();
        if upstream.nrows() != batch || upstream.ncols() != self.output_size() {
            return Err(Error::Contract(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.nrows(),
                upstream.ncols(),
                batch,
                self.output_size()
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let f = layer.activation;
            if f != Activation::Identity {
                delta.zip_apply(&cache.pre_activations[i], |d, z| *d *= f.derivative(z));
            }
            let weights = delta.transpose() * &cache.inputs[i];
            let bias = DVector::from_iterator(
                delta.ncols(),
                delta.column_iter().map(|c| c.sum()),
            );
            grads.push(LayerGradient { weights, bias });
            delta = &delta * &layer.weights;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }
}

fn affine(layer: &DenseLayer, input: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = input * layer.weights.transpose();
    for mut row in z.row_iter_mut() {
        row += layer.bias.transpose();
    }
    z
}

use crate::error::{Error, Result};

use super::network::{DenseNetwork, Gradients};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    /// Plain gradient descent.
    Sgd,
    /// Adaptive-moment (Adam) updates.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub kind: OptimizerKind,
    first_moment: Gradients,
    second_moment: Gradients,
    steps: u64,
}

impl OptimizerState {
    pub fn new(net: &DenseNetwork, kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::config(
                "learning_rate",
                format!("must be a positive finite number, got {learning_rate}"),
            ));
        }
        Ok(OptimizerState {
            learning_rate,
            kind,
            first_moment: Gradients::zeros_like(net),
            second_moment: Gradients::zeros_like(net),
            steps: 0,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self) -> &Gradients {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &Gradients {
        &self.second_moment
    }
}

/// Applies one optimizer update to `net` in place.
pub fn step(net: &mut DenseNetwork, grads: &Gradients, opt: &mut OptimizerState) -> Result<()> {
    if grads.layers.len() != net.layers().len()
        || opt.first_moment.layers.len() != net.layers().len()
    {
        return Err(Error::Contract(
            "gradient layer count does not match network".into(),
        ));
    }
    for (i, (g, layer)) in grads.layers.iter().zip(net.layers()).enumerate() {
        if g.weights.shape() != layer.weights.shape() || g.bias.len() != layer.bias.len() {
            return Err(Error::Contract(format!(
                "gradient shape mismatch at layer {i}"
            )));
        }
        if !g.weights.iter().chain(g.bias.iter()).all(|v| v.is_finite()) {
            return Err(Error::Training(format!(
                "non-finite gradient in layer {i}"
            )));
        }
    }

    opt.steps += 1;
    let lr = opt.learning_rate;
    match opt.kind {
        OptimizerKind::Sgd => {
            for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
                layer.weights.zip_apply(&g.weights, |p, d| *p -= lr * d);
                layer.bias.zip_apply(&g.bias, |p, d| *p -= lr * d);
            }
        }
        OptimizerKind::Adam { beta1, beta2, eps } => {
            let t = opt.steps as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            let layers = net.layers_mut().iter_mut();
            let moments = opt
                .first_moment
                .layers
                .iter_mut()
                .zip(opt.second_moment.layers.iter_mut());
            for ((layer, g), (m, v)) in layers.zip(&grads.layers).zip(moments) {
                for (((p, &d), mm), vv) in layer
                    .weights
                    .iter_mut()
                    .zip(g.weights.iter())
                    .zip(m.weights.iter_mut())
                    .zip(v.weights.iter_mut())
                {
                    update(p, d, mm, vv);
                }
                for (((p, &d), mm), vv) in layer
                    .bias
                    .iter_mut()
                    .zip(g.bias.iter())
                    .zip(m.bias.iter_mut())
                    .zip(v.bias.iter_mut())
                {
                    update(p, d, mm, vv);
                }
            }
        }
    }

    if let Some(i) = net
        .layers()
        .iter()
        .position(|l| !l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    {
        return Err(Error::Training(format!(
            "parameters of layer {i} became non-finite"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, DenseLayer};
    use nalgebra::{DMatrix, DVector};

    fn scalar_net(w: f64) -> DenseNetwork {
        DenseNetwork::from_layers(vec![DenseLayer {
            weights: DMatrix::from_element(1, 1, w),
            bias: DVector::from_element(1, 0.0),
            activation: Activation::Identity,
        }])
        .unwrap()
    }

    fn scalar_grad(gw: f64, gb: f64) -> Gradients {
        Gradients {
            layers: vec![crate::nn::LayerGradient {
                weights: DMatrix::from_element(1, 1, gw),
                bias: DVector::from_element(1, gb),
            }],
        }
    }

    #[test]
    fn plain_descent_single_step() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(&net, OptimizerKind::Sgd, 0.1).unwrap();
        step(&mut net, &scalar_grad(2.0, 0.0), &mut opt).unwrap();
        assert!((net.layers()[0].weights[(0, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut net = scalar_net(1.25);
        let before = net.clone();
        let mut sgd = OptimizerState::new(&net, OptimizerKind::Sgd, 0.5).unwrap();
        step(&mut net, &scalar_grad(0.0, 0.0), &mut sgd).unwrap();
        assert_eq!(net, before);

        let mut adam = OptimizerState::new(&net, OptimizerKind::adam(), 0.5).unwrap();
        step(&mut net, &scalar_grad(0.0, 0.0), &mut adam).unwrap();
        assert!((net.layers()[0].weights[(0, 0)] - 1.25).abs() < 1e-12);
    }

    #[test]
    fn adam_matches_reference_update() {
        // Reference rule written out independently for a scalar parameter.
        fn reference(mut p: f64, grads: &[f64], lr: f64) -> f64 {
            let (b1, b2, eps) = (0.9_f64, 0.999_f64, 1e-8);
            let (mut m, mut v) = (0.0, 0.0);
            for (t, g) in grads.iter().enumerate() {
                m = b1 * m + (1.0 - b1) * g;
                v = b2 * v + (1.0 - b2) * g * g;
                let mh = m / (1.0 - b1.powi(t as i32 + 1));
                let vh = v / (1.0 - b2.powi(t as i32 + 1));
                p -= lr * mh / (vh.sqrt() + eps);
            }
            p
        }
        let grads = [0.5, -1.5, 2.0, 0.25];
        let mut net = scalar_net(0.3);
        let mut opt = OptimizerState::new(&net, OptimizerKind::adam(), 0.01).unwrap();
        for g in grads {
            step(&mut net, &scalar_grad(g, 0.0), &mut opt).unwrap();
        }
        let expected = reference(0.3, &grads, 0.01);
        assert!((net.layers()[0].weights[(0, 0)] - expected).abs() < 1e-15);
        // First Adam step moves by ~lr regardless of gradient scale.
        assert!((reference(0.3, &[0.5], 0.01) - 0.29).abs() < 1e-8);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let mut net = scalar_net(1.0);
        let mut opt = OptimizerState::new(&net, OptimizerKind::Sgd, 0.1).unwrap();
        let err = step(&mut net, &scalar_grad(f64::NAN, 0.0), &mut opt).unwrap_err();
        assert!(matches!(err, Error::Training(ref m) if m.contains("layer 0")));
    }

    #[test]
    fn moments_mirror_parameter_shapes() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = DenseNetwork::new(&[3, 4, 2], Activation::Tanh, Activation::Identity, &mut rng)
            .unwrap();
        let opt = OptimizerState::new(&net, OptimizerKind::adam(), 1e-3).unwrap();
        for (m, l) in opt.first_moment().layers.iter().zip(net.layers()) {
            assert_eq!(m.weights.shape(), l.weights.shape());
            assert_eq!(m.bias.len(), l.bias.len());
        }
    }
}

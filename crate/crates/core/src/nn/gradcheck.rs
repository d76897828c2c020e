//! Central finite-difference gradient checking.

use nalgebra::DMatrix;

use crate::error::Result;

use super::network::{DenseNetwork, Gradients};

/// Central-difference estimate of `∂f/∂θ` for every parameter of `net`.
pub fn numeric_gradients<F>(net: &DenseNetwork, step: f64, mut f: F) -> Gradients
where
    F: FnMut(&DenseNetwork) -> f64,
{
    let mut probe = net.clone();
    let mut out = Gradients::zeros_like(net);
    for (l, g) in out.layers.iter_mut().enumerate() {
        let (rows, cols) = g.weights.shape();
        for r in 0..rows {
            for c in 0..cols {
                let orig = probe.layers()[l].weights[(r, c)];
                probe.layers_mut()[l].weights[(r, c)] = orig + step;
                let plus = f(&probe);
                probe.layers_mut()[l].weights[(r, c)] = orig - step;
                let minus = f(&probe);
                probe.layers_mut()[l].weights[(r, c)] = orig;
                g.weights[(r, c)] = (plus - minus) / (2.0 * step);
            }
        }
        for r in 0..g.bias.len() {
            let orig = probe.layers()[l].bias[r];
            probe.layers_mut()[l].bias[r] = orig + step;
            let plus = f(&probe);
            probe.layers_mut()[l].bias[r] = orig - step;
            let minus = f(&probe);
            probe.layers_mut()[l].bias[r] = orig;
            g.bias[r] = (plus - minus) / (2.0 * step);
        }
    }
    out
}

/// Relative discrepancy `|a - b| / max(|a|, |b|, floor)`.
///
/// `floor` keeps entries where both gradients are essentially zero from
/// dominating the maximum through round-off.
#[inline]
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] over all matching entries.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients, floor: f64) -> f64 {
    analytic
        .layers
        .iter()
        .zip(&numeric.layers)
        .flat_map(|(a, n)| {
            a.weights
                .iter()
                .zip(n.weights.iter())
                .chain(a.bias.iter().zip(n.bias.iter()))
        })
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max)
}

/// Compares backpropagated gradients against central differences.
///
/// `loss` maps the network output to `(value, ∂value/∂output)`. Returns the
/// maximum relative error over all parameters; `tolerance` is the magnitude
/// below which a gradient entry is compared absolutely.
pub fn grad_check<F>(
    net: &DenseNetwork,
    loss: F,
    batch: &DMatrix<f64>,
    step: f64,
    tolerance: f64,
) -> Result<f64>
where
    F: Fn(&DMatrix<f64>) -> (f64, DMatrix<f64>),
{
    let (out, cache) = net.forward_cached(batch)?;
    let (_, upstream) = loss(&out);
    let (analytic, _) = net.backward(&cache, &upstream)?;
    let numeric = numeric_gradients(net, step, |probe| {
        // forward only fails on shape errors, already excluded above
        let out = probe.forward(batch).expect("batch shape checked");
        loss(&out).0
    });
    Ok(max_relative_error(&analytic, &numeric, tolerance))
}

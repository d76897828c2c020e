//! Plain-text parameter persistence.
//!
//! ```text
//! layers: 3 8 1
//! activations: tanh identity
//! <layer 0 weights, row-major>
//! <layer 0 bias>
//! <layer 1 weights, row-major>
//! <layer 1 bias>
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle reproduces every parameter exactly.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::network::{Activation, DenseLayer, DenseNetwork};

pub fn write_network(net: &DenseNetwork) -> String {
    let mut out = String::new();
    let sizes: Vec<String> = net.layer_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "layers: {}", sizes.join(" "));
    let acts: Vec<&str> = net.layers().iter().map(|l| l.activation.tag()).collect();
    let _ = writeln!(out, "activations: {}", acts.join(" "));
    for layer in net.layers() {
        let w: Vec<String> = layer
            .weights
            .row_iter()
            .flat_map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>())
            .collect();
        let _ = writeln!(out, "{}", w.join(" "));
        let b: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", b.join(" "));
    }
    out
}

fn parse_values(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::parse("network parameters", format!("{what}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            "network parameters",
            format!("{what}: expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

/// Reads a network from the lines of `text`.
///
/// When the `activations:` line is absent, hidden layers default to tanh and
/// the output layer to identity.
pub fn read_network(text: &str) -> Result<DenseNetwork> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::parse("network parameters", "empty input"))?;
    let sizes = header
        .strip_prefix("layers:")
        .ok_or_else(|| Error::parse("network parameters", "missing `layers:` header"))?
        .split_whitespace()
        .map(|s| {
            s.parse::<usize>()
                .map_err(|e| Error::parse("network parameters", format!("layer size: {e}")))
        })
        .collect::<Result<Vec<usize>>>()?;
    if sizes.len() < 2 {
        return Err(Error::parse("network parameters", "need at least two sizes"));
    }
    let n_layers = sizes.len() - 1;

    let mut lines = lines.peekable();
    let activations: Vec<Activation> = match lines.peek() {
        Some(l) if l.starts_with("activations:") => {
            let l = lines.next().unwrap_or_default();
            let acts = l["activations:".len()..]
                .split_whitespace()
                .map(|t| {
                    Activation::from_tag(t).ok_or_else(|| {
                        Error::parse("network parameters", format!("unknown activation `{t}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if acts.len() != n_layers {
                return Err(Error::parse(
                    "network parameters",
                    format!("{} activations for {n_layers} layers", acts.len()),
                ));
            }
            acts
        }
        _ => (0..n_layers)
            .map(|i| {
                if i + 1 == n_layers {
                    Activation::Identity
                } else {
                    Activation::Tanh
                }
            })
            .collect(),
    };

    let mut layers = Vec::with_capacity(n_layers);
    for (i, w) in sizes.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let wline = lines.next().ok_or_else(|| {
            Error::parse("network parameters", format!("missing weights of layer {i}"))
        })?;
        let weights = parse_values(wline, fan_in * fan_out, &format!("layer {i} weights"))?;
        let bline = lines.next().ok_or_else(|| {
            Error::parse("network parameters", format!("missing bias of layer {i}"))
        })?;
        let bias = parse_values(bline, fan_out, &format!("layer {i} bias"))?;
        layers.push(DenseLayer {
            weights: DMatrix::from_row_slice(fan_out, fan_in, &weights),
            bias: DVector::from_vec(bias),
            activation: activations[i],
        });
    }
    DenseNetwork::from_layers(layers)
}

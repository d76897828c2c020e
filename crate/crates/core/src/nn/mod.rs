//! Minimal dense-network substrate shared by the VAE and the energy network.

mod gradcheck;
mod io;
mod network;
mod optim;

pub use gradcheck::{grad_check, max_relative_error, numeric_gradients, relative_error};
pub use io::{read_network, write_network};
pub use network::{
    Activation, DenseLayer, DenseNetwork, ForwardCache, Gradients, LayerGradient,
};
pub use optim::{step, OptimizerKind, OptimizerState};

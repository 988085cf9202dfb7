//! Dense MLPs with hand-written backpropagation, dropout, L2 and Adam.

mod adam;
mod checkpoint;
mod gradcheck;
mod layer;
mod mlp;

pub use adam::AdamState;
pub(crate) use checkpoint::Reader as checkpoint_reader;
pub use checkpoint::{read_mlp, write_mlp, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{analytic_grad, finite_diff_check, objective, GradCheckReport, FD_STEP};
pub use layer::{Activation, DenseLayer, LayerSpec, ELU_ALPHA};
pub use mlp::{ForwardCache, Gradients, LayerGrad, Mlp};

/// Hidden layers of width `hidden[i]` with shared activation/regularization,
/// then an unregularized linear output layer of width `out`.
pub fn mlp_layers(
    hidden: &[usize],
    out: usize,
    activation: Activation,
    l2: f64,
    dropout: f64,
) -> Vec<LayerSpec> {
    hidden
        .iter()
        .map(|&w| LayerSpec {
            out: w,
            activation,
            l2,
            dropout,
        })
        .chain(std::iter::once(LayerSpec {
            out,
            activation: Activation::Linear,
            l2: 0.0,
            dropout: 0.0,
        }))
        .collect()
}

//! Minimal reverse-mode differentiable tensor kernel.
//!
//! Supplies the layers, losses, and optimizers used by the autoencoder and
//! the downstream task models, plus analytic parameter/FLOP counting and the
//! WBNN checkpoint format. CPU only, f64 throughout; gradient checks run
//! against central finite differences in the test suites.

mod checkpoint;
mod count;
mod graph;
mod layers;
mod linalg;
mod loss;
mod norm;
mod ops;
mod optim;
mod tensor;

pub use checkpoint::{
    load_network, read_header, read_network, save_network, write_header, write_network,
    WBNN_MAGIC, WBNN_VERSION,
};
pub use count::{count_params_flops, layer_params_flops};
pub use graph::{Graph, Var};
pub use layers::{Layer, LayerSpec, Mode, Network, RunningStats, BN_MOMENTUM};
pub use loss::LOG_EPS;
pub use norm::{BatchStats, BN_EPS};
pub use optim::Optimizer;
pub use tensor::Tensor;

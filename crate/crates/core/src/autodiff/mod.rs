//! Dense tensors, a reverse-mode tape, parameters and the Adam optimizer.

mod adam;
mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use gradcheck::grad_check;
pub use params::{ParamId, ParamStore, Parameter};
pub use tape::{softmax_rows, Gradients, Tape, Var, LAYER_NORM_EPS};
pub use tensor::Tensor;

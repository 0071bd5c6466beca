//! Dense tensors, tape-based reverse-mode differentiation, Adam and
//! checkpoint I/O.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod param;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, MAGIC as CHECKPOINT_MAGIC, VERSION as CHECKPOINT_VERSION};
pub use param::{Param, ParamId, ParamStore};
pub use tape::{sigmoid, softmax, EdgeConvPlan, ElementwiseOp, Gradients, Tape, Var};
pub use tensor::{matmul_raw, Tensor};

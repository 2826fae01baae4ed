//! Minimal differentiable-computation substrate: dense `f64` tensors, a
//! reverse-mode tape over a fixed op set, grouped parameters, Adam, and
//! finite-difference gradient checking.

mod adam;
mod checkpoint;
mod gradcheck;
mod graph;
pub mod layers;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use gradcheck::{forward_backward, grad_check, grad_check_params, CoordCheck, GradCheckReport, LossBuilder, MIN_COORDS_PER_PARAM};
pub use graph::{Gradients, Graph, NodeId};
pub use params::{Grads, Group, GroupFilter, ParamEntry, ParamId, ParamStore};
pub use tensor::Tensor;

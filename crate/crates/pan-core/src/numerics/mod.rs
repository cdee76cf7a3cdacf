//! Dense tensors, the reverse-mode computation graph, and gradient checking.

pub mod gradcheck;
pub mod graph;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, GroupReport};
pub use graph::{Graph, NodeId, NumericsError};
pub use tensor::Tensor;

//! Layered networks trained end to end or with replacement learning, where
//! every `k`-th stage is frozen and its parameters are replaced by a learned
//! blend `a·θᵢ₋₁ + b·θᵢ₊₁` of its neighbours.

pub mod analysis;
pub mod cli;
pub mod data;
pub mod endtoend;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod network;
pub mod replacement;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::{axpy, dot, matmul, Element, Tensor};

//! Reverse-mode automatic differentiation over [`NDArray`](crate::tensor::NDArray).

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::grad_check;
pub use params::{Gradients, ParamId, ParamStore};
pub use tape::{Tape, Var};

#[cfg(test)]
mod tests;

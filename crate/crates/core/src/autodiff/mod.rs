//! Forward-mode differentiation: A-normal form, scalar and tensorized
//! forward mode, and the gradient macro built on them.

pub mod anf;
pub mod fad;
pub mod gradient;

pub use anf::{is_anf, to_anf, to_scalar_anf};
pub use fad::{fad_scalar, fad_tensor, tangent, tangent_env, tangent_type, FadConfig, FadError};
pub use gradient::{expand_gradient, onehot};

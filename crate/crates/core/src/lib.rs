//! Sparse tensor programs as semi-ring dictionaries: a typed language,
//! forward-mode differentiation, an equality-saturation optimizer with
//! storage-format composition, and a loop-level backend.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod lang;
pub mod interp;
pub mod autodiff;
pub mod opt;
pub mod backend;

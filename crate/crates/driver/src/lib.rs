//! Command-line driver support: the kernel catalog, input generation and
//! loading, verification against finite differences, and benchmarking.

pub mod bench;
pub mod catalog;
pub mod data;
pub mod fixtures;
pub mod fuzz;
pub mod json;
pub mod mtx;
pub mod run;
pub mod sdg1;
pub mod verify;

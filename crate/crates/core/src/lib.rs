//! Homogenized interface conditions for thin, periodically perforated elastic layers.

pub mod cell_dynamic;
pub mod cell_static;
pub mod error;
pub mod fem;
pub mod grid;
pub mod harness;
pub mod macro_interface;
pub mod mesh;
pub mod micro_direct;
pub mod newmark;
pub mod tensor;

pub use error::{Error, Result};

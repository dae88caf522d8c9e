//! Entanglement entropy of finite regions in translation-invariant
//! free-fermion ground states, together with the Fermi-sea geometry that
//! controls its scaling.

pub mod cli;
pub mod config;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod jw;
pub mod kernel;
pub mod model;
pub mod quad;
pub mod scaling;

pub use error::{Error, Result};

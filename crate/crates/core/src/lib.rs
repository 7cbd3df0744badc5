//! Core library for the wirebench benchmark suite.
//!
//! Synthesizes labeled MIMO-OFDM channel data, learns compressed and
//! high-dimensional channel representations, and evaluates them on three
//! downstream tasks: LoS/NLoS classification, beam selection, and multi-user
//! power allocation.

pub mod channel;
pub mod classical;
pub mod error;
pub mod nn;
pub mod patching;
pub mod repr;
pub mod rng;
pub mod tasks;
pub(crate) mod wire;

pub use error::{CoreError, Result};

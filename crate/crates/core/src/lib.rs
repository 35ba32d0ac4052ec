//! Phasor neural networks: train with complex-superposition activations and a
//! cosine phase loss, then run the same weights as a spiking
//! resonate-and-fire network.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod network;
pub mod phasor;
pub mod temporal;
pub mod verify;

pub use error::{Error, Result};

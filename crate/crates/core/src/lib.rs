//! Spiking neural network training with synaptic boundary constraints,
//! importance-based neuron pruning and gradient-triggered regeneration.
//!
//! The crate is organised bottom-up:
//!
//! * [`lif`] holds the leaky integrate-and-fire cell and its surrogate
//!   derivative;
//! * [`network`], [`params`] and [`mask`] describe the architecture, its
//!   weights and which units and synapses are alive;
//! * [`engine`] runs the network over a time window and back-propagates
//!   through it;
//! * [`constraint`], [`pruning`] and [`regeneration`] are the three
//!   once-per-epoch structural passes;
//! * [`data`] loads IDX and frame files and generates a synthetic corpus;
//! * [`train`] ties everything into a reproducible experiment with metrics
//!   and checkpoints.

pub mod constraint;
pub mod data;
pub mod engine;
pub mod error;
mod kernels;
pub mod lif;
pub mod mask;
pub mod network;
pub mod optim;
pub mod params;
pub mod pruning;
pub mod regeneration;
pub mod train;

pub use error::{Result, SnnError};
pub use mask::StructureMask;
pub use network::{LayerSpec, Network, NetworkSpec, Shape3};
pub use params::{Gradients, Parameters};

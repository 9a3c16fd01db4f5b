//! Prediction of household object relocations from scene-graph sequences.

pub mod baselines;
pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod scene;
pub mod sim;
pub mod timecode;

pub use error::{Error, Result};

//! Gaze-guided action anticipation.
//!
//! Fixation filtering, gaze-driven video-to-graph construction,
//! edge-conditioned graph convolution with hierarchical activity and
//! action prediction, plus a synthetic household world with a symbolic
//! executor for end-to-end evaluation.

pub mod error;
pub mod numerics;
pub mod seed;

pub use error::{Error, Result};
pub mod encoders;
pub mod config;
pub mod eval;
pub mod gaze;
pub mod graphbuild;
pub mod model;
pub mod vocab;
pub mod world;

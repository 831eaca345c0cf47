//! Unsupervised segmentation of activity videos into action and object
//! topics, detection of forgotten actions, and a simulated pan/tilt camera
//! that points at the object involved.
//!
//! The model is a two-channel topic model over quantized clip features with
//! correlated stick-breaking topic weights and a pairwise relative-time
//! prior, fit by collapsed Gibbs sampling with a Metropolis-Hastings step
//! for the per-video stick variables. A trained model segments new videos,
//! flags routine steps that never happened, retrieves what the step looked
//! like during training, and localizes the object it involves.
//!
//! Start with [`pipeline::run_pipeline`] and the presets in [`presets`], or
//! the runnable examples in `examples/`.

pub mod corpus;
pub mod detection;
pub mod error;
pub mod eval;
pub mod geom;
pub mod gibbs;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod pointing;
pub mod presets;
pub mod synth;

pub use error::{Error, Result};

//! Analysis toolkit for embodied multimodal referring expressions (EMRE).
//!
//! The pipeline ingests EMRE-style records (scenes, referring expressions,
//! annotator naturalness scores), rebuilds the common-ground state each video
//! induces between the avatar and the observer, derives raw / embedding /
//! formal feature vectors from those structures, and trains and evaluates an
//! MLP that predicts the annotator judgment distribution.

pub mod common_ground;
pub mod dataset;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod features;
pub mod logic;
pub mod names;
pub mod nn;
pub mod parser;
pub mod synth;
pub mod trace;

pub use error::Error;

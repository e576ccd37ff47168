//! Style profile extraction from small speaker corpora.
//!
//! The pipeline embeds texts, groups them into topic clusters, augments the
//! speaker data with stylistically close external text, builds contrastive
//! pairs, trains a shared-weight encoder, refines pair decisions with a random
//! forest, and mean-pools encoder latents into per-speaker style profiles.

pub mod augment;
pub mod cluster;
pub mod corpus;
pub mod embedder;
pub mod error;
pub mod forest;
pub mod pairs;
pub mod profile;
pub mod seed;
pub mod siamese;
pub mod vecmath;

pub use error::{Error, Result};

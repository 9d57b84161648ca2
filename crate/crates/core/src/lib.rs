//! Simulation, reconstruction and evaluation of muon scattering tomography
//! for reinforced-concrete samples.
//!
//! The pipeline runs: [`geometry`] builds a randomised sample, [`muon_source`]
//! draws cosmic muons, [`transport`] scatters them through the slab,
//! [`detector`] quantises and fits tracks, [`reconstruction`] turns track
//! pairs into PoCA events and voxel images, and [`metrics`] scores images and
//! segmentations. [`pipeline`] ties it together behind the CLI.

pub mod config;
pub mod detector;
pub mod error;
pub mod evaluate;
pub mod geometry;
pub mod manifest;
pub mod materials;
pub mod metrics;
pub mod muon_source;
pub mod pipeline;
pub mod raw;
pub mod reconstruction;
pub mod rng;
pub mod serde_u64;
pub mod transport;

pub use error::{Error, Result};

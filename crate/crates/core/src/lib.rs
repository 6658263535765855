//! Quantum random walk model of neutron propagation through perfect-crystal
//! Bragg cavities.
//!
//! A cavity is two crystal blades separated by a free gap. Each lattice node
//! carries an up-moving and a down-moving amplitude; crystal nodes mix them
//! with a 2×2 unitary coin, free nodes pass them straight through. Columns are
//! applied one after another along the beam direction, and amplitude leaving
//! the top or bottom row is tallied as leaked.
//!
//! - [`walk`]: coin, column propagation, path-sum oracle
//! - [`physics`]: pendellösung length and the layer/coin-angle mapping
//! - [`geometry`]: cavity dimensions to lattice rows and columns
//! - [`engine`]: column loop, records, gap sweeps
//! - [`analysis`]: fits, spectra, periods, beam convolution
//! - [`checkpoint`]: binary state snapshots

pub mod analysis;
pub mod checkpoint;
pub mod engine;
mod error;
pub mod geometry;
pub mod physics;
pub mod walk;

pub use error::{Error, ResourceReport, Result};

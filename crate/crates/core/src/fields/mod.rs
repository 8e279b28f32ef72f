//! Polynomial and grid tensor fields with shared derivative and norm operators.

pub mod grid;
pub mod quadrature;
pub mod snapshot;
pub mod tensor;

pub use grid::{Grid, GridField};
pub use quadrature::{quadrature_slice, ExteriorRegion, SphericalRule};
pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};
pub use tensor::*;

//! Orthogonal-pair-free subsets of the unit sphere.
//!
//! The crate builds equal-area dyadic partitions of S², decides which pairs of
//! cells can contain orthogonal points, searches for large conflict-free cell
//! selections, and turns such selections into unions of convex geodesic
//! polygons that still avoid orthogonal pairs.

pub mod conflict;
pub mod convexify;
pub mod density;
pub mod error;
pub mod grid;
pub mod polygon;
pub mod scaling;
pub mod search;
pub mod sphere;

pub use error::{Error, Result};

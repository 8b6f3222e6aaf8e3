//! Katětov extensions over exact-rational finite metric spaces, truncated
//! Katětov towers, isometry groups, and the witness construction that
//! recovers `Iso(X_0)` as the isometry group of a finite subset `F` of the
//! tower.

// Error carries exact rationals for diagnostics; the size is deliberate.
#![allow(clippy::result_large_err)]

pub mod certificate;
pub mod cli;
pub mod error;
pub mod generate;
pub mod isometry;
pub mod katetov;
pub mod limit;
pub mod metric;
pub mod rational;
pub mod tower;
pub mod witness;

pub use error::{Error, ErrorClass, Result};
pub use isometry::{enumerate_isometries, Isometry, IsometryGroup};
pub use katetov::KatetovMap;
pub use metric::{FiniteMetricSpace, PointId, Subset};
pub use rational::Rational;
pub use tower::{Tower, TowerConfig};

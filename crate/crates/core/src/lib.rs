//! Geostatistics for compositional data through the isometric α-transformation.

pub mod error;
pub mod geostat;
pub mod metrics;
pub mod mle;
pub mod optim;
pub mod sim;
pub mod simplex;
pub mod transforms;

pub use error::{Error, Result};
pub use simplex::{Composition, CompositionalField, Location, ZeroPattern};

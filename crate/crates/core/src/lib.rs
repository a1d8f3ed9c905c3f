//! Classical and quantum relaxation times of noisy maps on the torus T^{2d}.

pub mod classical;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod map;
pub mod noise;
pub mod norm;
pub mod poly;
pub mod quad;
pub mod quantum;
pub mod relaxation;
pub mod series;

pub use error::{Error, Result};

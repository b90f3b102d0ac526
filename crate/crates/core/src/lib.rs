//! Two-stage Bayesian optimization: a random-forest global model picks a
//! subregion, and a local Gaussian process augmented with a sparse summary of
//! the observations outside it proposes the next point.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod acquisition;
pub mod baselines;
pub mod boing;
pub mod boing_plus;
pub mod error;
pub mod forest;
pub mod gp;
pub mod hyperopt;
pub mod lgpga;
pub mod linalg;
pub mod optimizer;
pub mod rng;
pub mod sobol;
pub mod space;
pub mod turbo;

pub use error::{Error, Result};
pub use rng::RngState;
pub use space::{box_volume_fraction, points_in_box, AxisBox, Dataset, Observation, SearchSpace};

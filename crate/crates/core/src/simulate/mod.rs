//! Forward samplers: Euler-Maruyama for diffusions and event-driven
//! simulation for graph walks.

mod ctmc;
mod diffusion;

pub use ctmc::ctmc_simulate;
pub use diffusion::{euler_maruyama, euler_path, SimConfig};

use crate::ensemble::{JumpPathEnsemble, PathEnsemble, SampleMatrix};
use crate::error::Result;

/// Time-`t` marginal of an ensemble.
pub trait MarginalSlice {
    type Output;
    fn marginal_slice(&self, t: f64) -> Result<Self::Output>;
}

impl MarginalSlice for PathEnsemble {
    /// Positions at the nearest grid node.
    type Output = SampleMatrix;
    fn marginal_slice(&self, t: f64) -> Result<SampleMatrix> {
        PathEnsemble::marginal_slice(self, t)
    }
}

impl MarginalSlice for JumpPathEnsemble {
    /// Normalised state histogram.
    type Output = Vec<f64>;
    fn marginal_slice(&self, t: f64) -> Result<Vec<f64>> {
        self.marginal(t)
    }
}

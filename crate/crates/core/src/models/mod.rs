//! Process specifications: Kolmogorov references, diffusion specs, closed
//! form Gaussian flows and graph walks.

mod descriptor;
mod gaussian;
mod graph;
mod kolmogorov;

pub use descriptor::{BuiltModel, DiffusionModel, DriftBuiltin, InitDescriptor, ModelDescriptor};
pub use gaussian::{bm_flow, ou_marginal_flow, Gaussian, GaussianFlow};
pub use graph::{
    biased_cycle_walk, counting_walk, forward_marginals, frozen_cycle_walk, two_state_walk, GraphWalkSpec,
    MarginalTable,
};
pub use kolmogorov::{
    double_well_reference, ou_reference, DiffusionSpec, InitialLaw, KolmogorovSpec, SigmaFn,
};

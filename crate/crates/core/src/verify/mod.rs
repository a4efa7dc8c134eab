//! Numerical checks of the reversal identities: integration by parts,
//! carré du champ and Nelson-derivative estimators, the continuity
//! equation, detailed balance and two-sample law tests.
//!
//! The test battery is finite, so a pass certifies the identities only on
//! the functions actually tried.

mod diffusion;
mod graph;
mod report;
mod stats;
mod test_function;

pub use diffusion::{
    carre_du_champ_estimate, continuity_residual, ibp_residual, nelson_forward_derivative, CarreDuChampReport,
    ContinuityReport, Generators, NelsonEstimate, ProbeBox, Stencil,
};
pub use graph::{detailed_balance_residual, graph_ibp_residual, GRAPH_TOL};
pub use report::{ResidualReport, DEFAULT_ATOL, DEFAULT_Z, MIN_SLICE};
pub use stats::{ks_one_sample, ks_per_coordinate, ks_two_sample, two_sample_energy, EnergyTest, KsTest, MIN_ENERGY_SAMPLES};
pub use test_function::TestFunction;

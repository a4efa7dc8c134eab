//! Relative entropies, Girsanov actions, the current-osmosis
//! decomposition, Fisher information and the random-walk entropy.

mod action;
mod gaussian;
mod walk;

pub use action::{
    current_osmosis_decomposition, girsanov_action, mean_stderr, pairwise_sum, ActionEstimate, EntropyReport,
    Estimate,
};
pub use gaussian::{fisher_information, free_energy, gaussian_relative_entropy, heat_flow_dissipation, FisherReport};
pub use walk::{h_fn, rw_relative_entropy};

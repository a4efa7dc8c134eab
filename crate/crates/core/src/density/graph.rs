use crate::ensemble::JumpPathEnsemble;
use crate::error::Result;
use crate::grid::TimeGrid;
use crate::models::MarginalTable;

/// Normalised histogram of cadlag states at `t`.
pub fn empirical_graph_marginal(e: &JumpPathEnsemble, t: f64) -> Result<Vec<f64>> {
    e.marginal(t)
}

/// Empirical marginals at every node of `grid`.
pub fn empirical_marginal_table(e: &JumpPathEnsemble, grid: &TimeGrid) -> Result<MarginalTable> {
    let probs = grid.nodes().iter().map(|&t| e.marginal(t.min(e.horizon))).collect::<Result<Vec<_>>>()?;
    MarginalTable::new(*grid, probs)
}

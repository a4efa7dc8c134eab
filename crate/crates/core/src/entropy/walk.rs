use crate::error::{Error, Result};
use crate::grid::{trapezoid, TimeGrid};
use crate::models::{GraphWalkSpec, MarginalTable};

/// `h(a) = a log a - a + 1` for `a > 0`, `1` at `0`, `+inf` for `a < 0`.
pub fn h_fn(a: f64) -> f64 {
    if a > 0.0 {
        a * a.ln() - a + 1.0
    } else if a == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// `H(P | R)` for a walk against the counting walk (rate one per edge,
/// counting measure at time zero):
/// `sum_x p_0 log p_0 + int_0^T sum_x p_t(x) sum_{y~x} h(j(t, x; y)) dt`.
///
/// The counting measure is not normalised, so the value may be negative.
pub fn rw_relative_entropy(spec: &GraphWalkSpec, marginals: &MarginalTable, grid: &TimeGrid) -> Result<f64> {
    if marginals.n_states() != spec.n_states() {
        return Err(Error::Parameter("marginal table does not match the graph".into()));
    }
    let p0 = marginals.at(0.0);
    let boundary: f64 = p0.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum();
    let mut series = Vec::with_capacity(grid.n_nodes());
    for t in grid.nodes() {
        let p = marginals.at(t);
        let mut s = 0.0;
        for (x, y) in spec.directed_edges() {
            let j = spec.intensity(t, x, y);
            if j < 0.0 || !j.is_finite() {
                return Err(Error::Domain(format!("intensity j({t},{x};{y}) = {j}")));
            }
            if p[x] > 0.0 {
                s += p[x] * h_fn(j);
            }
        }
        series.push(s);
    }
    Ok(boundary + trapezoid(grid, &series))
}

use crate::error::{param, Error, Result};
use crate::models::{GraphWalkSpec, MarginalTable};

/// Time-reversed graph walk.
///
/// `spec` runs in reversed time `s = T - t` with intensities
/// `j*(s, y; x) = p_t(x) j(t, x; y) / p_t(y)` and initial law `p_T`.
/// Intensities out of states with `p_t(y) = 0` are undefined and reported
/// as absent by [`ReversedWalk::backward_intensity`].
#[derive(Debug, Clone)]
pub struct ReversedWalk {
    pub spec: GraphWalkSpec,
    forward: GraphWalkSpec,
    forward_marginals: MarginalTable,
    horizon: f64,
}

impl ReversedWalk {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Marginal flow of the reversed walk, `s -> p_{T - s}`.
    pub fn marginals(&self) -> MarginalTable {
        self.forward_marginals.flipped()
    }

    /// `j*(s, y; x)`, or `None` where `p_{T-s}(y) = 0`.
    pub fn backward_intensity(&self, s: f64, y: usize, x: usize) -> Option<f64> {
        backward_rate(&self.forward, &self.forward_marginals, self.horizon - s, y, x)
    }

    /// Backward intensity indexed by forward time: `j<-_{t, y}(x)`.
    pub fn backward_at_forward_time(&self, t: f64, y: usize, x: usize) -> Option<f64> {
        backward_rate(&self.forward, &self.forward_marginals, t, y, x)
    }
}

fn backward_rate(forward: &GraphWalkSpec, marginals: &MarginalTable, t: f64, y: usize, x: usize) -> Option<f64> {
    if !forward.is_edge(y, x) {
        return Some(0.0);
    }
    let p = marginals.at(t);
    if p[y] > 0.0 {
        Some(p[x] * forward.intensity(t, x, y) / p[y])
    } else {
        None
    }
}

/// Reverses a walk from its tabulated marginal flow.
///
/// Fails when some grid time sends positive flow `p_t(x) j(t, x; y)` into
/// a state with `p_t(y) = 0`.
pub fn reversed_jump_intensities(spec: &GraphWalkSpec, marginals: &MarginalTable) -> Result<ReversedWalk> {
    if marginals.n_states() != spec.n_states() {
        return Err(param("marginal table does not match the graph"));
    }
    let grid = *marginals.grid();
    let horizon = grid.horizon();
    let mut max_out: f64 = 0.0;
    // refine 4x between nodes to bound the interpolated out-rates
    let probes: Vec<f64> = (0..=4 * grid.n_steps()).map(|k| horizon * k as f64 / (4 * grid.n_steps()) as f64).collect();
    for &t in &probes {
        let p = marginals.at(t);
        for (x, y) in spec.directed_edges() {
            let flow = p[x] * spec.intensity(t, x, y);
            if p[y] == 0.0 && flow > 0.0 {
                return Err(Error::Consistency(format!(
                    "mass flows from {x} into null state {y} at t={t}"
                )));
            }
        }
        for y in 0..spec.n_states() {
            if p[y] > 0.0 {
                let out: f64 = spec.neighbours(y).iter().map(|&x| p[x] * spec.intensity(t, x, y) / p[y]).sum();
                max_out = max_out.max(out);
            }
        }
    }
    let constant_table = (0..=grid.n_steps()).all(|i| marginals.node(i) == marginals.node(0));
    let homogeneous = spec.is_time_homogeneous() && constant_table;
    let (fwd, table) = (spec.clone(), marginals.clone());
    let reversed = spec
        .with_intensity(
            move |s, y, x| backward_rate(&fwd, &table, horizon - s, y, x).unwrap_or(0.0),
            homogeneous,
            format!("{}|reversed", spec.tag),
        )
        .with_initial(marginals.node(grid.n_steps()).to_vec())?;
    let reversed = if homogeneous { reversed } else { reversed.with_rate_bound(1.25 * max_out + 1e-12) };
    Ok(ReversedWalk { spec: reversed, forward: spec.clone(), forward_marginals: marginals.clone(), horizon })
}

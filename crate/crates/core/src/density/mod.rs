//! Marginal densities `mu_t` and scores `grad log mu_t`: exact for Gaussian
//! flows, kernel-estimated from ensembles, empirical for graph walks.

mod graph;
mod kde;

use std::sync::Arc;

pub use graph::{empirical_graph_marginal, empirical_marginal_table};
pub use kde::{kde_fit, Bandwidth, KdeFlow, KdeModel};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::models::{Gaussian, GaussianFlow, KolmogorovSpec};

/// Default relative support floor for estimated densities.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-3;

/// Evaluable flow `t -> (pdf, score)`.
///
/// Scores are trusted only where `pdf(t, x) >= floor * sup_x pdf(t, .)`.
pub trait DensityFlow: Send + Sync {
    fn dim(&self) -> usize;
    fn pdf(&self, t: f64, x: &[f64]) -> f64;
    fn log_pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.pdf(t, x).ln()
    }
    /// Unchecked `grad log pdf`.
    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn sup_pdf(&self, t: f64) -> f64;
    fn support_floor(&self) -> f64;
    fn provenance(&self) -> &str;
    /// Closed-form marginal, when there is one.
    fn gaussian_at(&self, _t: f64) -> Option<Gaussian> {
        None
    }

    fn is_supported(&self, t: f64, x: &[f64]) -> bool {
        self.pdf(t, x) >= self.support_floor() * self.sup_pdf(t)
    }

    /// Score, or a support error below the floor.
    fn checked_score(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        if !self.is_supported(t, x) {
            return Err(Error::Support(format!("pdf too small at t={t}, x={x:?}")));
        }
        self.score_into(t, x, out);
        Ok(())
    }
}

pub type SharedDensity = Arc<dyn DensityFlow>;

/// Densities of a [`GaussianFlow`], with marginals cached on a grid.
///
/// Closed-form scores are valid everywhere, so the support floor is zero
/// unless set with [`ExactGaussianDensity::with_floor`].
#[derive(Debug, Clone)]
pub struct ExactGaussianDensity {
    flow: GaussianFlow,
    floor: f64,
    cache: Option<(TimeGrid, Vec<Gaussian>)>,
}

impl ExactGaussianDensity {
    pub fn flow(&self) -> &GaussianFlow {
        &self.flow
    }

    /// Precomputes the marginals at the grid nodes; queries within `1e-12 T`
    /// of a node reuse them.
    pub fn with_grid_cache(mut self, grid: &TimeGrid) -> Result<Self> {
        let marginals = grid
            .nodes()
            .iter()
            .map(|&t| self.flow.marginal(t))
            .collect::<Result<Vec<_>>>()?;
        self.cache = Some((*grid, marginals));
        Ok(self)
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    fn marginal(&self, t: f64) -> Gaussian {
        if let Some((grid, ms)) = &self.cache {
            let s = t / grid.dt();
            let i = s.round();
            if i >= 0.0 && (i as usize) <= grid.n_steps() && (s - i).abs() * grid.dt() <= 1e-12 * grid.horizon() {
                return ms[i as usize].clone();
            }
        }
        self.flow.marginal(t).expect("Gaussian flow covariance lost positive definiteness")
    }
}

/// Exact density flow of a Gaussian flow. Errors when some marginal on
/// `[0, horizon]` is singular.
pub fn exact_flow_density(flow: &GaussianFlow) -> Result<ExactGaussianDensity> {
    for t in [0.0, 0.5, 1.0] {
        flow.marginal(t).map_err(|e| Error::Numeric(format!("singular covariance: {e}")))?;
    }
    Ok(ExactGaussianDensity { flow: flow.clone(), floor: 0.0, cache: None })
}

impl DensityFlow for ExactGaussianDensity {
    fn dim(&self) -> usize {
        self.flow.dim()
    }
    fn pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.marginal(t).pdf(x)
    }
    fn log_pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.marginal(t).log_pdf(x)
    }
    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.marginal(t).score_into(x, out)
    }
    fn sup_pdf(&self, t: f64) -> f64 {
        self.marginal(t).max_pdf()
    }
    fn support_floor(&self) -> f64 {
        self.floor
    }
    fn provenance(&self) -> &str {
        "exact-gaussian"
    }
    fn gaussian_at(&self, t: f64) -> Option<Gaussian> {
        Some(self.marginal(t))
    }
    fn is_supported(&self, t: f64, x: &[f64]) -> bool {
        let g = self.marginal(t);
        g.pdf(x) >= self.floor * g.max_pdf()
    }
}

/// `t -> mu_{T - t}`: the marginal flow of the time-reversed process.
#[derive(Clone)]
pub struct TimeReversedDensity {
    inner: SharedDensity,
    horizon: f64,
    provenance: String,
}

impl TimeReversedDensity {
    pub fn new(inner: SharedDensity, horizon: f64) -> Self {
        let provenance = format!("{}|reversed", inner.provenance());
        Self { inner, horizon, provenance }
    }
}

impl DensityFlow for TimeReversedDensity {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.inner.pdf(self.horizon - t, x)
    }
    fn log_pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.inner.log_pdf(self.horizon - t, x)
    }
    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.score_into(self.horizon - t, x, out)
    }
    fn sup_pdf(&self, t: f64) -> f64 {
        self.inner.sup_pdf(self.horizon - t)
    }
    fn support_floor(&self) -> f64 {
        self.inner.support_floor()
    }
    fn provenance(&self) -> &str {
        &self.provenance
    }
    fn gaussian_at(&self, t: f64) -> Option<Gaussian> {
        self.inner.gaussian_at(self.horizon - t)
    }
    fn is_supported(&self, t: f64, x: &[f64]) -> bool {
        self.inner.is_supported(self.horizon - t, x)
    }
}

/// `rho_t = dP_t / dm` as the quotient of a density flow by the
/// reference law of a Kolmogorov diffusion.
#[derive(Clone)]
pub struct DensityRatio {
    pub density: SharedDensity,
    pub reference: KolmogorovSpec,
}

impl DensityRatio {
    pub fn log_ratio(&self, t: f64, x: &[f64]) -> f64 {
        self.density.log_pdf(t, x) - self.reference.log_reference_density(x)
    }

    /// `grad log rho_t = score + grad U`.
    pub fn grad_log_ratio_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let mut gu = vec![0.0; out.len()];
        self.density.score_into(t, x, out);
        self.reference.grad_potential().eval_into(t, x, &mut gu);
        for (o, g) in out.iter_mut().zip(&gu) {
            *o += g;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ou_marginal_flow;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    fn half() -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 0.5)
    }

    #[test]
    fn stationary_density_at_zero() {
        let d = exact_flow_density(&ou_marginal_flow(&[0.0], &half()).unwrap()).unwrap();
        assert_abs_diff_eq!(d.pdf(0.3, &[0.0]), 0.564190, epsilon = 1e-6);
        assert_abs_diff_eq!(d.pdf(0.3, &[0.0]), std::f64::consts::PI.powf(-0.5), epsilon = 1e-15);
    }

    #[test]
    fn score_values() {
        let d = exact_flow_density(&ou_marginal_flow(&[0.0], &half()).unwrap()).unwrap();
        let mut s = [0.0];
        d.score_into(0.0, &[1.0], &mut s);
        assert_abs_diff_eq!(s[0], -2.0, epsilon = 1e-14);
        d.score_into(0.0, &[0.0], &mut s);
        assert_eq!(s[0], 0.0);
    }

    #[test]
    fn support_floor_rejects_tails() {
        let d = exact_flow_density(&ou_marginal_flow(&[0.0], &half()).unwrap())
            .unwrap()
            .with_floor(DEFAULT_SUPPORT_FLOOR);
        let mut s = [0.0];
        assert!(d.checked_score(0.0, &[0.5], &mut s).is_ok());
        // exp(-x^2) < 1e-3 beyond x = 2.63
        assert!(matches!(d.checked_score(0.0, &[3.0], &mut s), Err(Error::Support(_))));
    }

    #[test]
    fn grid_cache_agrees_with_direct_evaluation() {
        let flow = ou_marginal_flow(&[1.0], &DMatrix::from_element(1, 1, 2.0)).unwrap();
        let grid = crate::grid::make_grid(1.0, 8).unwrap();
        let plain = exact_flow_density(&flow).unwrap();
        let cached = plain.clone().with_grid_cache(&grid).unwrap();
        for t in [0.0, 0.125, 0.3, 1.0 - 0.125, 1.0] {
            assert_abs_diff_eq!(plain.pdf(t, &[0.4]), cached.pdf(t, &[0.4]), epsilon = 1e-13);
        }
    }

    #[test]
    fn reversed_density_looks_up_mirror_time() {
        let flow = ou_marginal_flow(&[1.0], &half()).unwrap();
        let d: SharedDensity = Arc::new(exact_flow_density(&flow).unwrap());
        let r = TimeReversedDensity::new(d.clone(), 1.0);
        assert_abs_diff_eq!(r.pdf(0.25, &[0.1]), d.pdf(0.75, &[0.1]));
    }
}

use rayon::prelude::*;
use serde::Serialize;

use super::gaussian::{fisher_information, gaussian_relative_entropy};
use crate::density::SharedDensity;
use crate::ensemble::PathEnsemble;
use crate::error::{param, Result};
use crate::field::{quad_form, MatrixField, VectorField};
use crate::grid::trapezoid;
use crate::models::KolmogorovSpec;
use crate::reversal::Reversal;

/// Monte-Carlo value with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }

    /// Sum of independent estimates.
    pub fn plus(self, other: Estimate) -> Self {
        Self { value: self.value + other.value, stderr: self.stderr.hypot(other.stderr) }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self { value: c * self.value, stderr: c.abs() * self.stderr }
    }
}

/// Sum in a fixed binary tree over the slice order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Mean and standard error of per-path values.
pub fn mean_stderr(v: &[f64]) -> Estimate {
    let n = v.len();
    if n == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN };
    }
    let mean = pairwise_sum(v) / n as f64;
    if n == 1 {
        return Estimate::exact(mean);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n as f64 - 1.0);
    Estimate { value: mean, stderr: (var / n as f64).sqrt() }
}

/// Girsanov kinetic action `E int_0^T |beta|_a^2 / 2 dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActionEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Paths dropped because the integrand was not finite.
    pub excluded: usize,
}

/// Trapezoid in time of `beta . a beta / 2` along each path, averaged over paths.
pub fn girsanov_action(beta: &VectorField, a: &MatrixField, e: &PathEnsemble) -> Result<ActionEstimate> {
    let d = e.dim();
    if beta.dim() != d || a.dim() != d {
        return Err(param("girsanov_action: dimension mismatch"));
    }
    let grid = *e.grid();
    let per_path: Vec<Option<f64>> = (0..e.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut b = vec![0.0; d];
            let mut am = vec![0.0; d * d];
            let vals: Vec<f64> = (0..grid.n_nodes())
                .map(|i| {
                    let t = grid.node(i);
                    let x = e.point(p, i);
                    beta.eval_into(t, x, &mut b);
                    a.eval_into(t, x, &mut am);
                    0.5 * quad_form(d, &am, &b)
                })
                .collect();
            let v = trapezoid(&grid, &vals);
            v.is_finite().then_some(v)
        })
        .collect();
    let kept: Vec<f64> = per_path.iter().flatten().copied().collect();
    let est = mean_stderr(&kept);
    Ok(ActionEstimate {
        value: est.value,
        stderr: est.stderr,
        n_paths: kept.len(),
        excluded: per_path.len() - kept.len(),
    })
}

/// Entropy bookkeeping for a Markov diffusion `P` against a Kolmogorov
/// reference `R`.
///
/// `total = H(P|R) = boundary_initial + action_fwd`, and
/// `total_backward = boundary_terminal + action_bwd` estimates the same
/// quantity through the reversed process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    /// `H(P_0 | m)`.
    pub boundary_initial: Estimate,
    /// `H(P_T | m)`.
    pub boundary_terminal: Estimate,
    pub action_fwd: Estimate,
    pub action_bwd: Estimate,
    pub action_current: Estimate,
    pub action_osmotic: Estimate,
    pub total: Estimate,
    pub total_backward: Estimate,
    /// `F(P_T) - F(P_0)` with `F = H(. | m) / 2`.
    pub free_energy_change: Estimate,
    /// `H(P | R^{P_0}) = F(P_T) - F(P_0) + action_current + action_osmotic`.
    pub relative_to_initial: Estimate,
    /// `int_0^T I_a(P_s | m) ds` from closed forms, when available; an
    /// independent route to `action_osmotic`.
    pub osmotic_from_fisher: Option<f64>,
    pub n_paths: usize,
    /// Evaluations where the density was below its support floor.
    pub below_floor: u64,
}

impl EntropyReport {
    /// `|total - total_backward|` against `z` combined standard errors plus `atol`.
    pub fn reversal_invariance_holds(&self, z: f64, atol: f64) -> bool {
        let se = self.action_fwd.stderr.hypot(self.action_bwd.stderr);
        let se = se.hypot(self.boundary_initial.stderr).hypot(self.boundary_terminal.stderr);
        (self.total.value - self.total_backward.value).abs() <= z * se + atol
    }
}

fn boundary_entropy(density: &SharedDensity, reference: &KolmogorovSpec, e: &PathEnsemble, node: usize) -> Estimate {
    let t = e.grid().node(node);
    if let (Some(mu), Some(m)) = (density.gaussian_at(t), reference.gaussian_reference()) {
        if let Ok(h) = gaussian_relative_entropy(&mu, m) {
            return Estimate::exact(h);
        }
    }
    let slice = e.slice_at(node);
    let vals: Vec<f64> = slice
        .rows()
        .map(|x| density.log_pdf(t, x) - reference.log_reference_density(x))
        .filter(|v| v.is_finite())
        .collect();
    mean_stderr(&vals)
}

fn fisher_route(density: &SharedDensity, reference: &KolmogorovSpec, e: &PathEnsemble) -> Option<f64> {
    let m = reference.gaussian_reference()?;
    let d = reference.dim();
    let a = nalgebra::DMatrix::from_row_slice(d, d, reference.diffusion().constant_value()?);
    let grid = e.grid();
    let vals = grid
        .nodes()
        .iter()
        .map(|&t| density.gaussian_at(t).and_then(|mu| fisher_information(&mu, m, &a).ok()))
        .collect::<Option<Vec<f64>>>()?;
    Some(trapezoid(grid, &vals))
}

/// Current-osmosis decomposition of `H(P | R)` for `P` with forward drift
/// `drift` and marginal flow `density`, sampled by the forward ensemble `e`.
///
/// Backward momenta come from the reversed drift; the diffusion matrix is
/// the reference's.
pub fn current_osmosis_decomposition(
    drift: &VectorField,
    density: SharedDensity,
    reference: &KolmogorovSpec,
    e: &PathEnsemble,
) -> Result<EntropyReport> {
    let d = e.dim();
    if drift.dim() != d || density.dim() != d || reference.dim() != d {
        return Err(param("decomposition: dimension mismatch"));
    }
    let grid = *e.grid();
    let horizon = grid.horizon();
    let spec = reference.as_diffusion(crate::models::InitialLaw::Point(vec![0.0; d]), "reference")?;
    let rev = Reversal::build(drift, &spec, density.clone(), horizon, reference)?;
    let a = reference.diffusion();
    let momenta = &rev.momenta;

    // per path: (fwd, bwd, cu, os) integrals of |beta|_a^2 / 2
    let per_path: Vec<[f64; 4]> = (0..e.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut bf = vec![0.0; d];
            let mut bb = vec![0.0; d];
            let mut cu = vec![0.0; d];
            let mut os = vec![0.0; d];
            let mut am = vec![0.0; d * d];
            let mut series = [
                Vec::with_capacity(grid.n_nodes()),
                Vec::with_capacity(grid.n_nodes()),
                Vec::with_capacity(grid.n_nodes()),
                Vec::with_capacity(grid.n_nodes()),
            ];
            for i in 0..grid.n_nodes() {
                let t = grid.node(i);
                let x = e.point(p, i);
                momenta.beta_fwd.eval_into(t, x, &mut bf);
                momenta.beta_bwd.eval_into(t, x, &mut bb);
                a.eval_into(t, x, &mut am);
                for k in 0..d {
                    cu[k] = 0.5 * (bf[k] - bb[k]);
                    os[k] = 0.5 * (bf[k] + bb[k]);
                }
                series[0].push(0.5 * quad_form(d, &am, &bf));
                series[1].push(0.5 * quad_form(d, &am, &bb));
                series[2].push(0.5 * quad_form(d, &am, &cu));
                series[3].push(0.5 * quad_form(d, &am, &os));
            }
            [0, 1, 2, 3].map(|k| trapezoid(&grid, &series[k]))
        })
        .collect();
    let column = |k: usize| per_path.iter().map(|v| v[k]).collect::<Vec<f64>>();
    let action_fwd = mean_stderr(&column(0));
    let action_bwd = mean_stderr(&column(1));
    let action_current = mean_stderr(&column(2));
    let action_osmotic = mean_stderr(&column(3));
    let kinetic = mean_stderr(&per_path.iter().map(|v| v[2] + v[3]).collect::<Vec<_>>());

    let boundary_initial = boundary_entropy(&density, reference, e, 0);
    let boundary_terminal = boundary_entropy(&density, reference, e, grid.n_steps());
    let free_energy_change = boundary_terminal.plus(boundary_initial.scaled(-1.0)).scaled(0.5);
    Ok(EntropyReport {
        total: boundary_initial.plus(action_fwd),
        total_backward: boundary_terminal.plus(action_bwd),
        relative_to_initial: free_energy_change.plus(kinetic),
        osmotic_from_fisher: fisher_route(&density, reference, e),
        boundary_initial,
        boundary_terminal,
        action_fwd,
        action_bwd,
        action_current,
        action_osmotic,
        free_energy_change,
        n_paths: e.n_paths(),
        below_floor: rev.reversed.diagnostics().below_floor,
    })
}

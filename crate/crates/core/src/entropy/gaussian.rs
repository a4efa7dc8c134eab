use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{param, Result};
use crate::grid::{trapezoid, TimeGrid};
use crate::models::{Gaussian, GaussianFlow};

/// `H(p | r)` in nats.
pub fn gaussian_relative_entropy(p: &Gaussian, r: &Gaussian) -> Result<f64> {
    let d = p.dim();
    if r.dim() != d {
        return Err(param("relative entropy: dimension mismatch"));
    }
    let rp = r.precision();
    let diff = r.mean() - p.mean();
    let trace = (rp * p.cov()).trace();
    let maha = diff.dot(&(rp * &diff));
    let log_det = |g: &Gaussian| 2.0 * g.cholesky_factor().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    Ok(0.5 * (trace + maha - d as f64 + log_det(r) - log_det(p)))
}

/// `I_a(mu | m) = int |grad log sqrt(dmu/dm)|_a^2 / 2 dmu` for Gaussians and
/// a constant diffusion matrix.
pub fn fisher_information(mu: &Gaussian, m: &Gaussian, a: &DMatrix<f64>) -> Result<f64> {
    let d = mu.dim();
    if m.dim() != d || a.nrows() != d || a.ncols() != d {
        return Err(param("fisher information: dimension mismatch"));
    }
    // grad log rho(x) = A x + c
    let big_a = m.precision() - mu.precision();
    let c = mu.precision() * mu.mean() - m.precision() * m.mean();
    let g_mean = &big_a * mu.mean() + c;
    let quad = (big_a.transpose() * a * &big_a * mu.cov()).trace() + g_mean.dot(&(a * &g_mean));
    Ok(quad / 8.0)
}

/// Free energy `F(mu) = H(mu | m) / 2`.
pub fn free_energy(mu: &Gaussian, m: &Gaussian) -> Result<f64> {
    Ok(gaussian_relative_entropy(mu, m)? / 2.0)
}

/// Tabulated free energy and Fisher information along a heat flow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    pub times: Vec<f64>,
    pub fisher: Vec<f64>,
    pub free_energy: Vec<f64>,
    pub free_energy_change: f64,
    pub integrated_fisher: f64,
    /// `|F(mu_T) - F(mu_0) + 2 int_0^T I ds|` with trapezoidal time quadrature.
    pub residual: f64,
}

/// Free-energy dissipation along the heat flow of the Kolmogorov reference:
/// `F(mu_t) - F(mu_0) = -2 int_0^t I_a(mu_s | m) ds`.
pub fn heat_flow_dissipation(flow: &GaussianFlow, m: &Gaussian, a: &DMatrix<f64>, grid: &TimeGrid) -> Result<FisherReport> {
    let times = grid.nodes();
    let mut fisher = Vec::with_capacity(times.len());
    let mut free = Vec::with_capacity(times.len());
    for &t in &times {
        let mu = flow.marginal(t)?;
        fisher.push(fisher_information(&mu, m, a)?);
        free.push(free_energy(&mu, m)?);
    }
    let integrated_fisher = trapezoid(grid, &fisher);
    let free_energy_change = free[free.len() - 1] - free[0];
    Ok(FisherReport {
        times,
        residual: (free_energy_change + 2.0 * integrated_fisher).abs(),
        fisher,
        free_energy: free,
        free_energy_change,
        integrated_fisher,
    })
}

impl FisherReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,fisher,free_energy\n");
        for i in 0..self.times.len() {
            s.push_str(&format!("{},{},{}\n", self.times[i], self.fisher[i], self.free_energy[i]));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad_kl(p: &Gaussian, r: &Gaussian) -> f64 {
        // oracle: 1-D Simpson quadrature of p log(p / r)
        let (a, b, n) = (-15.0, 15.0, 30_000);
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let lp = p.log_pdf(&[x]);
            lp.exp() * (lp - r.log_pdf(&[x]))
        };
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn kl_examples_match_quadrature() {
        let p = Gaussian::scalar(0.0, 0.5).unwrap();
        assert_abs_diff_eq!(gaussian_relative_entropy(&p, &p).unwrap(), 0.0, epsilon = 1e-15);
        let p = Gaussian::scalar(1.0, 0.5).unwrap();
        let r = Gaussian::scalar(0.0, 0.5).unwrap();
        let closed = gaussian_relative_entropy(&p, &r).unwrap();
        assert_abs_diff_eq!(closed, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(closed, quad_kl(&p, &r), epsilon = 1e-10);
        let p = Gaussian::scalar(0.0, 2.0).unwrap();
        let r = Gaussian::scalar(0.0, 1.0).unwrap();
        let closed = gaussian_relative_entropy(&p, &r).unwrap();
        assert_abs_diff_eq!(closed, (2.0 - 1.0 - 2f64.ln()) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(closed, 0.153426, epsilon = 1e-6);
        assert_abs_diff_eq!(closed, quad_kl(&p, &r), epsilon = 1e-10);
    }

    #[test]
    fn fisher_examples() {
        let m = Gaussian::scalar(0.0, 0.5).unwrap();
        let id = DMatrix::identity(1, 1);
        assert_abs_diff_eq!(fisher_information(&m, &m, &id).unwrap(), 0.0);
        let mu = Gaussian::scalar(1.0, 0.5).unwrap();
        assert_abs_diff_eq!(fisher_information(&mu, &m, &id).unwrap(), 0.5, epsilon = 1e-14);
        let e1 = (-1.0f64).exp();
        let mu = Gaussian::scalar(e1, 0.5).unwrap();
        assert_abs_diff_eq!(fisher_information(&mu, &m, &id).unwrap(), e1 * e1 / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fisher_information(&mu, &m, &id).unwrap(), 0.067668, epsilon = 1e-6);
    }

    #[test]
    fn fisher_matches_quadrature_for_wide_initial_law() {
        let m = Gaussian::scalar(0.0, 0.5).unwrap();
        let mu = Gaussian::scalar(0.4, 2.0).unwrap();
        let id = DMatrix::identity(1, 1);
        // grad log rho = -(x - 0.4)/2 + 2x
        let (a, b, n) = (-20.0, 20.0, 40_000);
        let h = (b - a) / n as f64;
        let f = |x: f64| {
            let g = -(x - 0.4) / 2.0 + 2.0 * x;
            mu.pdf(&[x]) * (0.5 * g).powi(2) / 2.0
        };
        let quad: f64 = (0..=n).map(|i| f(a + i as f64 * h) * if i == 0 || i == n { 0.5 } else { 1.0 }).sum::<f64>() * h;
        assert_abs_diff_eq!(fisher_information(&mu, &m, &id).unwrap(), quad, epsilon = 1e-9);
    }
}

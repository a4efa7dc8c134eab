#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use timerev::density::{exact_flow_density, SharedDensity};
use timerev::grid::TimeGrid;
use timerev::models::{ou_reference, DiffusionSpec, Gaussian, GaussianFlow, InitialLaw, KolmogorovSpec};

/// Linear diffusion with exact flow, reference and density.
pub struct Case {
    pub spec: DiffusionSpec,
    pub flow: GaussianFlow,
    pub reference: KolmogorovSpec,
    pub density: SharedDensity,
}

pub fn linear_case(theta: f64, offset: f64, init_mean: f64, init_var: f64, tag: &str) -> Case {
    let init = Gaussian::scalar(init_mean, init_var).unwrap();
    let flow = GaussianFlow::new(&init, theta, vec![offset], 1.0, tag).unwrap();
    let spec = DiffusionSpec::linear(theta, vec![offset], 1.0, InitialLaw::Gaussian(init), tag).unwrap();
    let reference = ou_reference(1).unwrap().0;
    let density: SharedDensity = Arc::new(exact_flow_density(&flow).unwrap());
    Case { spec, flow, reference, density }
}

/// OU from `N(1, 1/2)`: the reference heat flow started off equilibrium.
pub fn shifted_ou() -> Case {
    linear_case(1.0, 0.0, 1.0, 0.5, "shifted-ou")
}

pub fn stationary_ou() -> Case {
    linear_case(1.0, 0.0, 0.0, 0.5, "stationary-ou")
}

/// Brownian motion from `N(0, 1)`.
pub fn bm() -> Case {
    linear_case(0.0, 0.0, 0.0, 1.0, "bm")
}

pub fn grid(horizon: f64, n: usize) -> TimeGrid {
    TimeGrid::new(horizon, n).unwrap()
}

/// Gauss-Hermite nodes and weights for `E f(Z)`, `Z ~ N(mean, var)`
/// (Golub-Welsch on the probabilists' Hermite recurrence).
pub fn gauss_hermite(n: usize, mean: f64, var: f64) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    (0..n)
        .map(|k| {
            let w = eig.eigenvectors[(0, k)].powi(2);
            (mean + var.sqrt() * eig.eigenvalues[k], w)
        })
        .collect()
}

pub fn expect_normal(n: usize, mean: f64, var: f64, f: impl Fn(f64) -> f64) -> f64 {
    gauss_hermite(n, mean, var).into_iter().map(|(x, w)| w * f(x)).sum()
}

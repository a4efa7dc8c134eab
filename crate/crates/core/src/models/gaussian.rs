//! Multivariate normals and closed-form flows of linear diffusions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// `N(mean, cov)` with a cached Cholesky factorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 || cov.nrows() != d || cov.ncols() != d {
            return Err(param("mean/covariance dimension mismatch"));
        }
        if (&cov - cov.transpose()).abs().max() > 1e-12 * (1.0 + cov.abs().max()) {
            return Err(param("covariance is not symmetric"));
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| param("covariance is not positive definite"))?;
        let l = chol.l();
        let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::Numeric("singular covariance".into()));
        }
        let precision = chol.inverse();
        let log_norm = -0.5 * (d as f64 * (2.0 * PI).ln() + log_det);
        Ok(Self { mean, cov, chol: l, precision, log_norm })
    }

    pub fn isotropic(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(DVector::from_vec(mean), DMatrix::identity(d, d) * var)
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::isotropic(vec![mean], var)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }
    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let r = DVector::from_column_slice(x) - &self.mean;
        self.log_norm - 0.5 * r.dot(&(&self.precision * &r))
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Density at the mode.
    pub fn max_pdf(&self) -> f64 {
        self.log_norm.exp()
    }

    /// `-cov^{-1} (x - mean)`.
    pub fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            out[i] = -(0..d)
                .map(|j| self.precision[(i, j)] * (x[j] - self.mean[j]))
                .sum::<f64>();
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            out[i] = self.mean[i] + (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum::<f64>();
        }
    }
}

/// Law of `dX = (-theta X + offset) dt + sqrt(noise) dB` started from a
/// Gaussian. Covers the Ornstein-Uhlenbeck reference (`theta = 1`,
/// `noise = 1`) and Brownian motion (`theta = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFlow {
    pub init_mean: Vec<f64>,
    /// Row-major initial covariance.
    pub init_cov: Vec<f64>,
    pub theta: f64,
    pub offset: Vec<f64>,
    pub noise: f64,
    pub provenance: String,
}

impl GaussianFlow {
    pub fn new(
        init: &Gaussian,
        theta: f64,
        offset: Vec<f64>,
        noise: f64,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if offset.len() != init.dim() {
            return Err(param("offset dimension mismatch"));
        }
        if theta < 0.0 || noise < 0.0 {
            return Err(param("theta and noise must be nonnegative"));
        }
        Ok(Self {
            init_mean: init.mean().iter().copied().collect(),
            init_cov: init.cov().transpose().iter().copied().collect(),
            theta,
            offset,
            noise,
            provenance: provenance.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.init_mean.len()
    }

    pub fn mean(&self, t: f64) -> DVector<f64> {
        let m0 = DVector::from_column_slice(&self.init_mean);
        let c = DVector::from_column_slice(&self.offset);
        if self.theta == 0.0 {
            m0 + c * t
        } else {
            let centre = c / self.theta;
            &centre + (m0 - &centre) * (-self.theta * t).exp()
        }
    }

    pub fn cov(&self, t: f64) -> DMatrix<f64> {
        let d = self.dim();
        let c0 = DMatrix::from_row_slice(d, d, &self.init_cov);
        let id = DMatrix::<f64>::identity(d, d);
        if self.theta == 0.0 {
            c0 + id * (self.noise * t)
        } else {
            let decay = (-2.0 * self.theta * t).exp();
            let grow = -(-2.0 * self.theta * t).exp_m1();
            c0 * decay + id * (self.noise * grow / (2.0 * self.theta))
        }
    }

    pub fn marginal(&self, t: f64) -> Result<Gaussian> {
        Gaussian::new(self.mean(t), self.cov(t))
    }

    /// Drift `x -> -theta x + offset` that generates this flow.
    pub fn drift(&self) -> crate::field::VectorField {
        crate::field::VectorField::linear(self.theta, self.offset.clone())
    }

    /// Same dynamics restarted from `init`.
    pub fn restarted(&self, init: &Gaussian) -> Result<Self> {
        Self::new(init, self.theta, self.offset.clone(), self.noise, self.provenance.clone())
    }
}

/// Closed-form marginals of `dX = -X dt + dB` from `N(init_mean, init_cov)`.
pub fn ou_marginal_flow(init_mean: &[f64], init_cov: &DMatrix<f64>) -> Result<GaussianFlow> {
    let init = Gaussian::new(DVector::from_column_slice(init_mean), init_cov.clone())?;
    GaussianFlow::new(&init, 1.0, vec![0.0; init_mean.len()], 1.0, "OU closed form")
}

/// Brownian motion started from `N(mean, init_cov)`.
pub fn bm_flow(init_mean: &[f64], init_cov: &DMatrix<f64>) -> Result<GaussianFlow> {
    let init = Gaussian::new(DVector::from_column_slice(init_mean), init_cov.clone())?;
    GaussianFlow::new(&init, 0.0, vec![0.0; init_mean.len()], 1.0, "BM closed form")
}

//! Kolmogorov (reversible gradient) diffusions and general diffusion specs.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::gaussian::{Gaussian, GaussianFlow};
use crate::ensemble::SampleMatrix;
use crate::error::{param, Result};
use crate::field::{mat_vec, MatrixField, VectorField};

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Row-major `d x d` square root of the diffusion matrix; not necessarily
/// symmetric.
pub type SigmaFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Diffusion with generator `(-a grad U . grad + div(a grad .)) / 2`,
/// reversible with respect to `m = exp(-U) dx`.
///
/// `U` is normalised so that `m` is a probability measure.
#[derive(Clone)]
pub struct KolmogorovSpec {
    dim: usize,
    potential: Arc<ScalarFn>,
    grad_potential: VectorField,
    diffusion: MatrixField,
    div_diffusion: VectorField,
    /// Closed form of `m` when it is Gaussian.
    gaussian_reference: Option<Gaussian>,
}

impl fmt::Debug for KolmogorovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KolmogorovSpec")
            .field("dim", &self.dim)
            .field("gaussian_reference", &self.gaussian_reference.is_some())
            .finish()
    }
}

impl KolmogorovSpec {
    pub fn new<U>(
        dim: usize,
        potential: U,
        grad_potential: VectorField,
        diffusion: MatrixField,
        div_diffusion: VectorField,
    ) -> Result<Self>
    where
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if grad_potential.dim() != dim || diffusion.dim() != dim || div_diffusion.dim() != dim {
            return Err(param("Kolmogorov field dimensions disagree"));
        }
        Ok(Self {
            dim,
            potential: Arc::new(potential),
            grad_potential,
            diffusion,
            div_diffusion,
            gaussian_reference: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn diffusion(&self) -> &MatrixField {
        &self.diffusion
    }
    pub fn div_diffusion(&self) -> &VectorField {
        &self.div_diffusion
    }
    pub fn grad_potential(&self) -> &VectorField {
        &self.grad_potential
    }
    pub fn gaussian_reference(&self) -> Option<&Gaussian> {
        self.gaussian_reference.as_ref()
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        (self.potential)(x)
    }

    /// `log dm/dx = -U(x)`.
    pub fn log_reference_density(&self, x: &[f64]) -> f64 {
        -(self.potential)(x)
    }

    /// `(div a - a grad U) / 2`.
    pub fn drift(&self) -> VectorField {
        let (a, grad_u, div_a) = (
            self.diffusion.clone(),
            self.grad_potential.clone(),
            self.div_diffusion.clone(),
        );
        let d = self.dim;
        VectorField::new(d, move |t, x, out| {
            let mut am = vec![0.0; d * d];
            let mut g = vec![0.0; d];
            let mut ag = vec![0.0; d];
            a.eval_into(t, x, &mut am);
            grad_u.eval_into(t, x, &mut g);
            div_a.eval_into(t, x, out);
            mat_vec(d, &am, &g, &mut ag);
            for (o, v) in out.iter_mut().zip(&ag) {
                *o = 0.5 * (*o - v);
            }
        })
    }

    /// Box check of `x . v(x) + tr a(x) <= K (1 + |x|^2)` on a tensor grid
    /// with `per_axis` points per coordinate over `[-half_width, half_width]^d`.
    pub fn check_growth(&self, half_width: f64, per_axis: usize, k: f64) -> bool {
        let drift = self.drift();
        let d = self.dim;
        let per_axis = per_axis.max(2);
        let total = per_axis.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut v = vec![0.0; d];
        let mut am = vec![0.0; d * d];
        for idx in 0..total {
            let mut rem = idx;
            for xi in x.iter_mut() {
                let c = rem % per_axis;
                rem /= per_axis;
                *xi = -half_width + 2.0 * half_width * c as f64 / (per_axis - 1) as f64;
            }
            drift.eval_into(0.0, &x, &mut v);
            self.diffusion.eval_into(0.0, &x, &mut am);
            let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
            let tr: f64 = (0..d).map(|i| am[i * d + i]).sum();
            let norm2: f64 = x.iter().map(|a| a * a).sum();
            if dot + tr > k * (1.0 + norm2) {
                return false;
            }
        }
        true
    }

    /// Forward dynamics of this reference as a diffusion spec with the
    /// given initial law.
    pub fn as_diffusion(&self, init: InitialLaw, tag: impl Into<String>) -> Result<DiffusionSpec> {
        DiffusionSpec::new(
            self.drift(),
            self.diffusion.clone(),
            self.div_diffusion.clone(),
            None,
            init,
            tag,
        )
    }
}

/// OU reference: `U(x) = |x|^2 + (d/2) log(pi)`, `a = Id`, drift `-x`,
/// reversible law `m = N(0, Id / 2)`. The returned flow is the constant
/// stationary marginal.
pub fn ou_reference(dim: usize) -> Result<(KolmogorovSpec, GaussianFlow)> {
    if dim == 0 {
        return Err(param("dim must be at least 1"));
    }
    let shift = 0.5 * dim as f64 * PI.ln();
    let mut spec = KolmogorovSpec::new(
        dim,
        move |x| x.iter().map(|v| v * v).sum::<f64>() + shift,
        VectorField::linear(-2.0, vec![0.0; dim]),
        MatrixField::identity(dim),
        VectorField::zero(dim),
    )?;
    let m = Gaussian::isotropic(vec![0.0; dim], 0.5)?;
    spec.gaussian_reference = Some(m.clone());
    let flow = GaussianFlow::new(&m, 1.0, vec![0.0; dim], 1.0, "OU stationary")?;
    Ok((spec, flow))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Separable double well `U(x) = c sum_i (x_i^2 - 1)^2 + log Z`, `a = Id`.
pub fn double_well_reference(dim: usize, coefficient: f64) -> Result<KolmogorovSpec> {
    if dim == 0 || !(coefficient > 0.0) {
        return Err(param("double well needs dim >= 1 and a positive coefficient"));
    }
    let c = coefficient;
    let z1 = simpson(|x| (-c * (x * x - 1.0).powi(2)).exp(), -8.0, 8.0, 20_000);
    let log_z = dim as f64 * z1.ln();
    KolmogorovSpec::new(
        dim,
        move |x| c * x.iter().map(|v| (v * v - 1.0).powi(2)).sum::<f64>() + log_z,
        VectorField::new(dim, move |_, x, out| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = 4.0 * c * v * (v * v - 1.0);
            }
        }),
        MatrixField::identity(dim),
        VectorField::zero(dim),
    )
}

/// Initial law of a simulation.
#[derive(Debug, Clone)]
pub enum InitialLaw {
    Gaussian(Gaussian),
    Point(Vec<f64>),
    /// Path `p` starts at row `p mod n` of the matrix.
    Samples(SampleMatrix),
}

impl InitialLaw {
    pub fn dim(&self) -> usize {
        match self {
            InitialLaw::Gaussian(g) => g.dim(),
            InitialLaw::Point(p) => p.len(),
            InitialLaw::Samples(s) => s.dim(),
        }
    }
}

/// Martingale problem `MP(b, a)` with an initial law.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub drift: VectorField,
    pub diffusion: MatrixField,
    pub div_diffusion: VectorField,
    sigma: Option<SigmaFn>,
    pub init: InitialLaw,
    pub tag: String,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("dim", &self.dim())
            .field("tag", &self.tag)
            .field("init", &self.init)
            .finish()
    }
}

impl DiffusionSpec {
    pub fn new(
        drift: VectorField,
        diffusion: MatrixField,
        div_diffusion: VectorField,
        sigma: Option<SigmaFn>,
        init: InitialLaw,
        tag: impl Into<String>,
    ) -> Result<Self> {
        let d = drift.dim();
        if diffusion.dim() != d || div_diffusion.dim() != d || init.dim() != d {
            return Err(param("diffusion spec dimensions disagree"));
        }
        if let InitialLaw::Samples(s) = &init {
            if s.is_empty() {
                return Err(param("empty initial sample"));
            }
        }
        Ok(Self { drift, diffusion, div_diffusion, sigma, init, tag: tag.into() })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    /// Constant-coefficient spec `b(x) = -theta x + offset`, `a = noise Id`.
    pub fn linear(
        theta: f64,
        offset: Vec<f64>,
        noise: f64,
        init: InitialLaw,
        tag: impl Into<String>,
    ) -> Result<Self> {
        let d = offset.len();
        Self::new(
            VectorField::linear(theta, offset),
            MatrixField::scaled_identity(d, noise),
            VectorField::zero(d),
            None,
            init,
            tag,
        )
    }


    /// Row-major `sigma(t, x)` with `sigma sigma^T = a(t, x)`. Falls back
    /// to the lower Cholesky factor of `a`.
    pub fn sigma_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        if let Some(s) = &self.sigma {
            s(t, x, out);
            return Ok(());
        }
        if let Some(c) = self.diffusion.constant_value() {
            if d == 1 {
                out[0] = c[0].max(0.0).sqrt();
                return Ok(());
            }
        }
        let a = self.diffusion.eval(t, x);
        if a.iter().all(|v| *v == 0.0) {
            out.fill(0.0);
            return Ok(());
        }
        let l = a
            .cholesky()
            .ok_or_else(|| param(format!("diffusion matrix not positive definite at t={t}")))?
            .l();
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = l[(i, j)];
            }
        }
        Ok(())
    }

    /// Max entry of `sigma sigma^T - a` over the points.
    pub fn sigma_defect(&self, t: f64, points: &[Vec<f64>]) -> Result<f64> {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        let mut s = vec![0.0; d * d];
        for x in points {
            self.sigma_into(t, x, &mut s)?;
            let sm = DMatrix::from_row_slice(d, d, &s);
            let diff = &sm * sm.transpose() - self.diffusion.eval(t, x);
            worst = worst.max(diff.abs().max());
        }
        Ok(worst)
    }

    /// Gaussian initial law, if that is what the spec carries.
    pub fn gaussian_init(&self) -> Option<&Gaussian> {
        match &self.init {
            InitialLaw::Gaussian(g) => Some(g),
            _ => None,
        }
    }
}

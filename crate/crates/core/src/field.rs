//! Vector and symmetric-matrix valued fields on `[0, T] x R^d`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

type VecEval = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type MatEval = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// `(t, x) -> R^d`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: Arc<VecEval>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField").field("dim", &self.dim).finish()
    }
}

impl VectorField {
    /// The evaluator writes its value into the output slice of length `dim`.
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, eval: Arc::new(f) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, |_, _, out| out.fill(0.0))
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self::new(value.len(), move |_, _, out| out.copy_from_slice(&value))
    }

    /// `x -> -theta * x + offset`.
    pub fn linear(theta: f64, offset: Vec<f64>) -> Self {
        Self::new(offset.len(), move |_, x, out| {
            for ((o, xi), c) in out.iter_mut().zip(x).zip(&offset) {
                *o = -theta * xi + c;
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        (self.eval)(t, x, out)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, x, &mut out);
        out
    }

    /// Pointwise `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &VectorField, beta: f64) -> VectorField {
        assert_eq!(self.dim, other.dim, "field dimensions differ");
        let (a, b) = (self.clone(), other.clone());
        VectorField::new(self.dim, move |t, x, out| {
            let mut tmp = vec![0.0; out.len()];
            a.eval_into(t, x, out);
            b.eval_into(t, x, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o = alpha * *o + beta * v;
            }
        })
    }

    /// `(t, x) -> self(T - t, x)`.
    pub fn time_flipped(&self, horizon: f64) -> VectorField {
        let inner = self.clone();
        VectorField::new(self.dim, move |t, x, out| inner.eval_into(horizon - t, x, out))
    }
}

/// `(t, x) -> symmetric d x d matrix`, stored row-major.
///
/// Evaluator output is symmetrised, so symmetry holds exactly whatever the
/// user closure returns.
#[derive(Clone)]
pub struct MatrixField {
    dim: usize,
    constant: Option<Arc<Vec<f64>>>,
    eval: Arc<MatEval>,
}

impl fmt::Debug for MatrixField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixField")
            .field("dim", &self.dim)
            .field("constant", &self.constant.is_some())
            .finish()
    }
}

fn symmetrize(dim: usize, m: &mut [f64]) {
    for i in 0..dim {
        for j in (i + 1)..dim {
            let s = 0.5 * (m[i * dim + j] + m[j * dim + i]);
            m[i * dim + j] = s;
            m[j * dim + i] = s;
        }
    }
}

impl MatrixField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self { dim, constant: None, eval: Arc::new(f) }
    }

    pub fn constant(dim: usize, mut entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "matrix must be dim x dim");
        symmetrize(dim, &mut entries);
        let shared = Arc::new(entries);
        let inner = shared.clone();
        Self {
            dim,
            constant: Some(shared),
            eval: Arc::new(move |_, _, out: &mut [f64]| out.copy_from_slice(&inner)),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = s;
        }
        Self::constant(dim, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entries when the field does not depend on `(t, x)`.
    pub fn constant_value(&self) -> Option<&[f64]> {
        self.constant.as_deref().map(|v| v.as_slice())
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.constant {
            Some(c) => out.copy_from_slice(c),
            None => {
                (self.eval)(t, x, out);
                symmetrize(self.dim, out);
            }
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.eval_into(t, x, &mut out);
        DMatrix::from_row_slice(self.dim, self.dim, &out)
    }

    /// Lower Cholesky factor at `(t, x)`; `None` when not positive definite.
    pub fn cholesky(&self, t: f64, x: &[f64]) -> Option<DMatrix<f64>> {
        self.eval(t, x).cholesky().map(|c| c.l())
    }

    /// Checks positive (semi)definiteness on the supplied points.
    pub fn check_psd(&self, t: f64, points: &[Vec<f64>]) -> bool {
        points.iter().all(|x| {
            let m = self.eval(t, x);
            let jitter = 1e-14 * (1.0 + m.abs().max());
            (m + DMatrix::identity(self.dim, self.dim) * jitter).cholesky().is_some()
        })
    }

    pub fn time_flipped(&self, horizon: f64) -> MatrixField {
        if self.constant.is_some() {
            return self.clone();
        }
        let inner = self.clone();
        MatrixField::new(self.dim, move |t, x, out| inner.eval_into(horizon - t, x, out))
    }
}

/// `m * v` for a row-major square matrix.
#[inline]
pub(crate) fn mat_vec(dim: usize, m: &[f64], v: &[f64], out: &mut [f64]) {
    for i in 0..dim {
        out[i] = (0..dim).map(|j| m[i * dim + j] * v[j]).sum();
    }
}

/// `v . m v` for a row-major square matrix.
#[inline]
pub(crate) fn quad_form(dim: usize, m: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            s += v[i] * m[i * dim + j] * v[j];
        }
    }
    s
}

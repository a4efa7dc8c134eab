use nalgebra::DMatrix;

use crate::error::{param, Result};
use crate::field::{quad_form, MatrixField, VectorField};
use crate::models::KolmogorovSpec;

/// Forward, backward, current and osmotic velocities of a diffusion.
///
/// `v_fwd = v_cu + v_os` and `v_bwd = -v_cu + v_os`.
#[derive(Debug, Clone)]
pub struct VelocityFields {
    pub v_fwd: VectorField,
    pub v_bwd: VectorField,
    pub v_cu: VectorField,
    pub v_os: VectorField,
}

/// `v_cu = (v_fwd - v_bwd) / 2`, `v_os = (v_fwd + v_bwd) / 2`.
pub fn velocity_decomposition(v_fwd: &VectorField, v_bwd: &VectorField) -> Result<VelocityFields> {
    if v_fwd.dim() != v_bwd.dim() {
        return Err(param("velocity fields differ in dimension"));
    }
    Ok(VelocityFields {
        v_fwd: v_fwd.clone(),
        v_bwd: v_bwd.clone(),
        v_cu: v_fwd.combine(0.5, v_bwd, -0.5),
        v_os: v_fwd.combine(0.5, v_bwd, 0.5),
    })
}

/// Backward velocity at forward time `t`: the reversed drift evaluated at
/// reversed time `T - t`.
pub fn backward_velocity(reversed_drift: &VectorField, horizon: f64) -> VectorField {
    reversed_drift.time_flipped(horizon)
}

impl VelocityFields {
    /// Largest defect of the two linear relations at `(t, x)`.
    pub fn consistency_defect(&self, t: f64, x: &[f64]) -> f64 {
        let f = self.v_fwd.eval(t, x);
        let b = self.v_bwd.eval(t, x);
        let c = self.v_cu.eval(t, x);
        let o = self.v_os.eval(t, x);
        (0..f.len())
            .map(|k| (f[k] - c[k] - o[k]).abs().max((b[k] + c[k] - o[k]).abs()))
            .fold(0.0, f64::max)
    }

    /// `v_cu + v_os` and `v_os - v_cu`.
    pub fn recompose(&self) -> (VectorField, VectorField) {
        (self.v_cu.combine(1.0, &self.v_os, 1.0), self.v_os.combine(1.0, &self.v_cu, -1.0))
    }
}

/// Momenta relative to a reference `R`: `v_P - v_R = a beta`.
#[derive(Debug, Clone)]
pub struct MomentumFields {
    pub beta_fwd: VectorField,
    pub beta_bwd: VectorField,
    pub beta_cu: VectorField,
    pub beta_os: VectorField,
    pub diffusion: MatrixField,
}

/// `x -> a(t, x)^{-1} (v(t,x) - w(t,x))`.
fn scaled_difference(a: &MatrixField, v: &VectorField, w: &VectorField) -> VectorField {
    let d = v.dim();
    let inv_const = a.constant_value().map(|c| {
        DMatrix::from_row_slice(d, d, c)
            .try_inverse()
            .expect("diffusion matrix must be invertible")
    });
    let (a, v, w) = (a.clone(), v.clone(), w.clone());
    VectorField::new(d, move |t, x, out| {
        let mut vv = vec![0.0; d];
        let mut ww = vec![0.0; d];
        v.eval_into(t, x, &mut vv);
        w.eval_into(t, x, &mut ww);
        let diff = nalgebra::DVector::from_iterator(d, vv.iter().zip(&ww).map(|(p, q)| p - q));
        let sol = match &inv_const {
            Some(inv) => inv * diff,
            None => {
                let am = a.eval(t, x);
                am.cholesky()
                    .map(|c| c.solve(&diff))
                    .unwrap_or_else(|| nalgebra::DVector::from_element(d, f64::NAN))
            }
        };
        out.copy_from_slice(sol.as_slice());
    })
}

impl MomentumFields {
    /// Momenta of `P` relative to the Kolmogorov reference, whose forward
    /// and backward velocities both equal its drift (reversibility).
    pub fn relative_to_kolmogorov(vel: &VelocityFields, reference: &KolmogorovSpec) -> Result<Self> {
        if vel.v_fwd.dim() != reference.dim() {
            return Err(param("momentum: reference dimension mismatch"));
        }
        let a = reference.diffusion().clone();
        let v_ref = reference.drift();
        let beta_fwd = scaled_difference(&a, &vel.v_fwd, &v_ref);
        let beta_bwd = scaled_difference(&a, &vel.v_bwd, &v_ref);
        let beta_cu = beta_fwd.combine(0.5, &beta_bwd, -0.5);
        let beta_os = beta_fwd.combine(0.5, &beta_bwd, 0.5);
        Ok(Self { beta_fwd, beta_bwd, beta_cu, beta_os, diffusion: a })
    }

    /// `|b_fwd|_a^2/2 + |b_bwd|_a^2/2 - |b_cu|_a^2 - |b_os|_a^2` at `(t, x)`.
    pub fn parallelogram_defect(&self, t: f64, x: &[f64]) -> f64 {
        let d = x.len();
        let mut a = vec![0.0; d * d];
        self.diffusion.eval_into(t, x, &mut a);
        let n = |f: &VectorField| quad_form(d, &a, &f.eval(t, x));
        0.5 * n(&self.beta_fwd) + 0.5 * n(&self.beta_bwd) - n(&self.beta_cu) - n(&self.beta_os)
    }
}

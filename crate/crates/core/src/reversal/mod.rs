//! Time-reversed dynamics: reversed drift, Nelson velocities and momenta,
//! the osmotic identity and reversed jump intensities.

mod drift;
mod velocity;
mod walk;

pub use drift::{reversed_drift, DriftDiagnostics, DriftEval, ReversedDrift, DEFAULT_DRIFT_CAP};
pub use velocity::{backward_velocity, velocity_decomposition, MomentumFields, VelocityFields};
pub use walk::{reversed_jump_intensities, ReversedWalk};

use serde::Serialize;

use crate::density::{DensityRatio, SharedDensity};
use crate::error::Result;
use crate::field::VectorField;
use crate::models::{DiffusionSpec, KolmogorovSpec};

/// Forward/backward velocities, current/osmotic split and momenta relative
/// to a Kolmogorov reference, all built from one reversed drift.
#[derive(Debug, Clone)]
pub struct Reversal {
    pub reversed: ReversedDrift,
    pub velocities: VelocityFields,
    pub momenta: MomentumFields,
}

impl Reversal {
    pub fn build(drift: &VectorField, spec: &DiffusionSpec, density: SharedDensity, horizon: f64, reference: &KolmogorovSpec) -> Result<Self> {
        let reversed = reversed_drift(drift, &spec.diffusion, &spec.div_diffusion, density, horizon)?;
        let v_bwd = backward_velocity(&reversed.as_field(), horizon);
        let velocities = velocity_decomposition(drift, &v_bwd)?;
        let momenta = MomentumFields::relative_to_kolmogorov(&velocities, reference)?;
        Ok(Self { reversed, velocities, momenta })
    }
}

/// Summary of `beta_os - grad log sqrt(rho)` over a probe set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OsmoticResidual {
    pub max: f64,
    /// `sqrt(sum_i w_i |r_i|^2 / sum_i w_i)` with `w_i = pdf(t_i, x_i)`.
    pub weighted_l2: f64,
    pub n_probes: usize,
    pub skipped: usize,
}

/// Checks the osmotic identity `beta_os(t, x) = grad log sqrt(rho_t)(x)`
/// on `(t, x)` probes. Probes below the support floor are skipped.
pub fn osmotic_residual(ratio: &DensityRatio, momentum: &MomentumFields, probes: &[(f64, Vec<f64>)]) -> OsmoticResidual {
    let mut max: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    let mut skipped = 0;
    for (t, x) in probes {
        if !ratio.density.is_supported(*t, x) {
            skipped += 1;
            continue;
        }
        let d = x.len();
        let mut g = vec![0.0; d];
        ratio.grad_log_ratio_into(*t, x, &mut g);
        let beta = momentum.beta_os.eval(*t, x);
        let r2: f64 = beta.iter().zip(&g).map(|(b, gi)| (b - 0.5 * gi).powi(2)).sum();
        max = max.max(r2.sqrt());
        let w = ratio.density.pdf(*t, x);
        num += w * r2;
        den += w;
    }
    OsmoticResidual {
        max,
        weighted_l2: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        n_probes: probes.len() - skipped,
        skipped,
    }
}

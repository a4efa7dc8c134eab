use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::density::SharedDensity;
use crate::error::{param, Result};
use crate::field::{mat_vec, MatrixField, VectorField};
use crate::models::{DiffusionSpec, InitialLaw};

/// Default magnitude cap for reversed drifts.
pub const DEFAULT_DRIFT_CAP: f64 = 1e6;

/// Counters accumulated while evaluating a reversed drift.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct DriftDiagnostics {
    /// Evaluations where the density was below the support floor and the
    /// score term was dropped.
    pub below_floor: u64,
    /// Evaluations where the score was not finite (degenerate density).
    pub singular: u64,
    /// Evaluations clipped to the magnitude cap.
    pub capped: u64,
}

/// One evaluation of `b*_t(x)` with its flags.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEval {
    pub value: Vec<f64>,
    pub below_floor: bool,
    pub singular: bool,
    pub capped: bool,
}

struct Inner {
    drift: VectorField,
    diffusion: MatrixField,
    div_diffusion: VectorField,
    density: SharedDensity,
    horizon: f64,
    cap: f64,
    below_floor: AtomicU64,
    singular: AtomicU64,
    capped: AtomicU64,
}

/// Drift of the time-reversed diffusion,
/// `b*_t(x) = -b(T-t, x) + div a(T-t, x) + a(T-t, x) grad log mu_{T-t}(x)`.
///
/// This is the expanded form of `-b + div(mu a) / mu` for `C^1` fields.
#[derive(Clone)]
pub struct ReversedDrift {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for ReversedDrift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReversedDrift")
            .field("horizon", &self.inner.horizon)
            .field("cap", &self.inner.cap)
            .field("diagnostics", &self.diagnostics())
            .finish()
    }
}

/// Builds `b*` from the forward coefficients and the forward marginal flow.
pub fn reversed_drift(
    drift: &VectorField,
    diffusion: &MatrixField,
    div_diffusion: &VectorField,
    density: SharedDensity,
    horizon: f64,
) -> Result<ReversedDrift> {
    let d = drift.dim();
    if diffusion.dim() != d || div_diffusion.dim() != d || density.dim() != d {
        return Err(param("reversed_drift: dimension mismatch"));
    }
    if !(horizon > 0.0) {
        return Err(param("horizon must be positive"));
    }
    Ok(ReversedDrift {
        inner: Arc::new(Inner {
            drift: drift.clone(),
            diffusion: diffusion.clone(),
            div_diffusion: div_diffusion.clone(),
            density,
            horizon,
            cap: DEFAULT_DRIFT_CAP,
            below_floor: AtomicU64::new(0),
            singular: AtomicU64::new(0),
            capped: AtomicU64::new(0),
        }),
    })
}

impl ReversedDrift {
    /// Replaces the magnitude cap; counters are reset.
    pub fn with_cap(self, cap: f64) -> Self {
        let i = &self.inner;
        ReversedDrift {
            inner: Arc::new(Inner {
                drift: i.drift.clone(),
                diffusion: i.diffusion.clone(),
                div_diffusion: i.div_diffusion.clone(),
                density: i.density.clone(),
                horizon: i.horizon,
                cap,
                below_floor: AtomicU64::new(0),
                singular: AtomicU64::new(0),
                capped: AtomicU64::new(0),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.drift.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.inner.horizon
    }

    pub fn density(&self) -> &SharedDensity {
        &self.inner.density
    }

    pub fn diagnostics(&self) -> DriftDiagnostics {
        DriftDiagnostics {
            below_floor: self.inner.below_floor.load(Ordering::Relaxed),
            singular: self.inner.singular.load(Ordering::Relaxed),
            capped: self.inner.capped.load(Ordering::Relaxed),
        }
    }

    pub fn evaluate(&self, t: f64, x: &[f64]) -> DriftEval {
        let mut value = vec![0.0; self.dim()];
        let (below_floor, singular, capped) = self.eval_flags(t, x, &mut value);
        DriftEval { value, below_floor, singular, capped }
    }

    fn eval_flags(&self, t: f64, x: &[f64], out: &mut [f64]) -> (bool, bool, bool) {
        let i = &self.inner;
        let d = out.len();
        let s = i.horizon - t;
        let mut b = vec![0.0; d];
        let mut a = vec![0.0; d * d];
        let mut score = vec![0.0; d];
        i.drift.eval_into(s, x, &mut b);
        i.div_diffusion.eval_into(s, x, out);
        i.diffusion.eval_into(s, x, &mut a);
        let mut below_floor = false;
        let mut singular = false;
        if !i.density.is_supported(s, x) {
            below_floor = true;
            i.below_floor.fetch_add(1, Ordering::Relaxed);
        } else {
            i.density.score_into(s, x, &mut score);
            if score.iter().any(|v| !v.is_finite()) {
                singular = true;
                i.singular.fetch_add(1, Ordering::Relaxed);
                score.fill(0.0);
            }
        }
        let mut a_score = vec![0.0; d];
        if !below_floor && !singular {
            mat_vec(d, &a, &score, &mut a_score);
        }
        for k in 0..d {
            out[k] += a_score[k] - b[k];
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut capped = false;
        if norm > i.cap || !norm.is_finite() {
            capped = true;
            i.capped.fetch_add(1, Ordering::Relaxed);
            if norm.is_finite() {
                out.iter_mut().for_each(|v| *v *= i.cap / norm);
            } else {
                out.fill(0.0);
            }
        }
        (below_floor, singular, capped)
    }

    pub fn as_field(&self) -> VectorField {
        let me = self.clone();
        VectorField::new(self.dim(), move |t, x, out| {
            me.eval_flags(t, x, out);
        })
    }

    /// Spec of `MP(b*, a*)` with `a*_t = a(T - t)`, started from `init`
    /// (normally the forward law at `T`).
    pub fn reversed_spec(&self, init: InitialLaw, tag: impl Into<String>) -> Result<DiffusionSpec> {
        let i = &self.inner;
        DiffusionSpec::new(
            self.as_field(),
            i.diffusion.time_flipped(i.horizon),
            i.div_diffusion.time_flipped(i.horizon),
            None,
            init,
            tag,
        )
    }
}

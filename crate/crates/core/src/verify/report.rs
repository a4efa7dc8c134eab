use serde::Serialize;

use crate::entropy::mean_stderr;

/// Pass/fail decision for an estimated residual:
/// `pass = |estimate| <= z * stderr + atol`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub estimate: f64,
    pub mc_stderr: f64,
    pub n_samples: usize,
    pub z: f64,
    pub atol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Default z-score for Monte-Carlo residuals.
pub const DEFAULT_Z: f64 = 3.0;
/// Default absolute tolerance for Monte-Carlo residuals.
pub const DEFAULT_ATOL: f64 = 1e-3;

/// Slices smaller than this get a warning.
pub const MIN_SLICE: usize = 100;

impl ResidualReport {
    pub fn new(estimate: f64, mc_stderr: f64, n_samples: usize, z: f64, atol: f64) -> Self {
        let pass = estimate.is_finite() && estimate.abs() <= z * mc_stderr + atol;
        Self { estimate, mc_stderr, n_samples, z, atol, pass, warning: None }
    }

    /// Mean of per-sample residuals.
    pub fn from_samples(values: &[f64], z: f64, atol: f64) -> Self {
        let e = mean_stderr(values);
        let mut r = Self::new(e.value, if e.stderr.is_finite() { e.stderr } else { 0.0 }, values.len(), z, atol);
        if values.len() < MIN_SLICE {
            r.warning = Some(format!("only {} samples", values.len()));
        }
        r
    }

    /// Deterministic residual with tolerance `atol`.
    pub fn exact(estimate: f64, atol: f64) -> Self {
        Self::new(estimate, 0.0, 1, 0.0, atol)
    }

    pub fn with_warning(mut self, w: impl Into<String>) -> Self {
        self.warning = Some(w.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rule() {
        assert!(ResidualReport::new(0.01, 0.004, 10, 3.0, 0.0).pass);
        assert!(!ResidualReport::new(0.013, 0.004, 10, 3.0, 0.0).pass);
        assert!(!ResidualReport::new(f64::NAN, 1.0, 10, 3.0, 1.0).pass);
        assert!(ResidualReport::from_samples(&[1.0, -1.0], 3.0, 0.0).warning.is_some());
    }
}

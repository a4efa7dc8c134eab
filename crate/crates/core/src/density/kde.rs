//! Gaussian kernel density estimation with analytic scores.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use crate::ensemble::{PathEnsemble, SampleMatrix};
use crate::error::{param, Error, Result};

use super::{DensityFlow, DEFAULT_SUPPORT_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub enum Bandwidth {
    /// `sigma_d (4 / ((d + 2) n))^{1 / (d + 4)}` per coordinate.
    Silverman,
    /// Explicit per-coordinate bandwidths.
    Fixed(Vec<f64>),
}

/// Product-Gaussian-kernel estimator on one time slice.
#[derive(Debug, Clone)]
pub struct KdeModel {
    samples: SampleMatrix,
    bandwidth: Vec<f64>,
    inv_h2: Vec<f64>,
    log_norm: f64,
    sup_estimate: f64,
    floor: f64,
}

/// Number of sample points probed when estimating `sup pdf`.
const SUP_PROBES: usize = 256;

pub fn kde_fit(slice: &SampleMatrix, rule: &Bandwidth) -> Result<KdeModel> {
    let n = slice.len();
    let d = slice.dim();
    if n < 2 {
        return Err(param("KDE needs at least two samples"));
    }
    if slice.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(param("KDE samples must be finite"));
    }
    let bandwidth = match rule {
        Bandwidth::Fixed(h) => {
            if h.len() != d || h.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Bandwidth(format!("need {d} positive bandwidths, got {h:?}")));
            }
            h.clone()
        }
        Bandwidth::Silverman => {
            let cov = slice.covariance();
            let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
            let mut h = Vec::with_capacity(d);
            for k in 0..d {
                let sd = cov[k * d + k].sqrt();
                if !(sd > 0.0) {
                    return Err(Error::Bandwidth(format!(
                        "coordinate {k} has zero sample variance; supply an explicit bandwidth"
                    )));
                }
                h.push(sd * factor);
            }
            h
        }
    };
    let inv_h2 = bandwidth.iter().map(|h| 1.0 / (h * h)).collect();
    let log_norm = -bandwidth.iter().map(|h| (h * (2.0 * PI).sqrt()).ln()).sum::<f64>() - (n as f64).ln();
    let mut model = KdeModel {
        samples: slice.clone(),
        bandwidth,
        inv_h2,
        log_norm,
        sup_estimate: 0.0,
        floor: DEFAULT_SUPPORT_FLOOR,
    };
    let stride = (n / SUP_PROBES).max(1);
    let mut sup = model.pdf(&slice.mean());
    for i in (0..n).step_by(stride) {
        sup = sup.max(model.pdf(slice.row(i)));
    }
    model.sup_estimate = sup;
    Ok(model)
}

impl KdeModel {
    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    fn exponents(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let x = x.to_vec();
        self.samples.rows().map(move |r| {
            -0.5 * r
                .iter()
                .zip(&x)
                .zip(&self.inv_h2)
                .map(|((xi, q), w)| (q - xi) * (q - xi) * w)
                .sum::<f64>()
        })
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let max = self.exponents(x).fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = self.exponents(x).map(|e| (e - max).exp()).sum();
        self.log_norm + max + s.ln()
    }

    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.log_pdf(x).exp()
    }

    /// Analytic `grad pdf / pdf`, evaluated with a shifted log-sum-exp.
    pub fn score_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let max = self.exponents(x).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        out.fill(0.0);
        for (r, e) in self.samples.rows().zip(self.exponents(x)) {
            let w = (e - max).exp();
            total += w;
            for k in 0..d {
                out[k] -= w * (x[k] - r[k]) * self.inv_h2[k];
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    /// Estimate of `sup_x pdf(x)` from the mean and up to 256 sample points.
    pub fn sup_pdf(&self) -> f64 {
        self.sup_estimate
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.pdf(x) < self.floor * self.sup_estimate {
            return Err(Error::Support(format!("KDE density below floor at {x:?}")));
        }
        let mut out = vec![0.0; self.dim()];
        self.score_into(x, &mut out);
        Ok(out)
    }
}

/// Per-grid-slice KDE of an ensemble, fitted lazily. Query times snap to
/// the nearest grid node.
pub struct KdeFlow {
    ensemble: Arc<PathEnsemble>,
    rule: Bandwidth,
    floor: f64,
    models: Vec<OnceLock<Option<KdeModel>>>,
}

impl KdeFlow {
    pub fn new(ensemble: Arc<PathEnsemble>, rule: Bandwidth) -> Self {
        let models = (0..ensemble.grid().n_nodes()).map(|_| OnceLock::new()).collect();
        Self { ensemble, rule, floor: DEFAULT_SUPPORT_FLOOR, models }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    /// Fitted model at the node nearest `t`; `None` when the slice is
    /// degenerate for the bandwidth rule.
    pub fn model_at(&self, t: f64) -> Option<&KdeModel> {
        let grid = self.ensemble.grid();
        let i = (t / grid.dt()).round().clamp(0.0, grid.n_steps() as f64) as usize;
        self.models[i]
            .get_or_init(|| {
                kde_fit(&self.ensemble.slice_at(i), &self.rule)
                    .ok()
                    .map(|m| m.with_floor(self.floor))
            })
            .as_ref()
    }
}

impl DensityFlow for KdeFlow {
    fn dim(&self) -> usize {
        self.ensemble.dim()
    }
    fn pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.model_at(t).map_or(0.0, |m| m.pdf(x))
    }
    fn log_pdf(&self, t: f64, x: &[f64]) -> f64 {
        self.model_at(t).map_or(f64::NEG_INFINITY, |m| m.log_pdf(x))
    }
    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match self.model_at(t) {
            Some(m) => m.score_into(x, out),
            None => out.fill(0.0),
        }
    }
    fn sup_pdf(&self, t: f64) -> f64 {
        self.model_at(t).map_or(0.0, |m| m.sup_pdf())
    }
    fn support_floor(&self) -> f64 {
        self.floor
    }
    fn provenance(&self) -> &str {
        "kde"
    }
    fn is_supported(&self, t: f64, x: &[f64]) -> bool {
        match self.model_at(t) {
            Some(m) => m.pdf(x) >= self.floor * m.sup_pdf(),
            None => false,
        }
    }
}

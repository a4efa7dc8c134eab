use rayon::prelude::*;
use serde::Serialize;

use super::report::{ResidualReport, DEFAULT_ATOL, DEFAULT_Z};
use super::test_function::TestFunction;
use crate::density::DensityFlow;
use crate::entropy::{mean_stderr, Estimate};
use crate::ensemble::{PathEnsemble, SampleMatrix};
use crate::error::{param, Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::grid::TimeGrid;

/// Forward and backward velocities with the diffusion matrix: enough to
/// evaluate both generators on time-independent test functions.
#[derive(Debug, Clone)]
pub struct Generators {
    pub v_fwd: VectorField,
    pub v_bwd: VectorField,
    pub diffusion: MatrixField,
}

impl Generators {
    pub fn dim(&self) -> usize {
        self.v_fwd.dim()
    }

    /// `(L-> u + L<- u)(x) v(x) + Gamma(u, v)(x)` at time `t`.
    pub fn ibp_bracket(&self, t: f64, x: &[f64], u: &TestFunction, v: &TestFunction) -> f64 {
        let d = self.dim();
        let mut vf = vec![0.0; d];
        let mut vb = vec![0.0; d];
        let mut a = vec![0.0; d * d];
        let mut gu = vec![0.0; d];
        let mut gv = vec![0.0; d];
        self.v_fwd.eval_into(t, x, &mut vf);
        self.v_bwd.eval_into(t, x, &mut vb);
        self.diffusion.eval_into(t, x, &mut a);
        u.grad_into(x, &mut gu);
        v.grad_into(x, &mut gv);
        let half_tr = 0.5 * u.trace_a_hessian(&a, x);
        let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
        let lf = dot(&vf, &gu) + half_tr;
        let lb = dot(&vb, &gu) + half_tr;
        (lf + lb) * v.value(x) + carre_du_champ(&a, &gu, &gv)
    }
}

/// `grad u . a grad v`.
fn carre_du_champ(a: &[f64], gu: &[f64], gv: &[f64]) -> f64 {
    let d = gu.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += gu[i] * a[i * d + j] * gv[j];
        }
    }
    s
}

/// Monte-Carlo integration-by-parts residual
/// `E[(L-> u + L<- u)(X_t) v(X_t) + Gamma(u, v)(X_t)]` on a marginal slice.
pub fn ibp_residual(gen: &Generators, t: f64, slice: &SampleMatrix, u: &TestFunction, v: &TestFunction) -> Result<ResidualReport> {
    if slice.dim() != gen.dim() || u.dim() != gen.dim() || v.dim() != gen.dim() {
        return Err(param("ibp_residual: dimension mismatch"));
    }
    let vals: Vec<f64> = slice.rows().map(|x| gen.ibp_bracket(t, x, u, v)).collect();
    Ok(ResidualReport::from_samples(&vals, DEFAULT_Z, DEFAULT_ATOL))
}

/// Increment-based carré du champ estimate against the model value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarreDuChampReport {
    /// `E[(u(X_{t+h}) - u(X_t)) (v(X_{t+h}) - v(X_t))] / h`.
    pub increment: Estimate,
    /// `E[grad u . a grad v (X_t)]`.
    pub model: Estimate,
    /// Paired difference of the two.
    pub residual: ResidualReport,
    pub h: f64,
}

fn step_multiple(grid: &TimeGrid, h: f64) -> Result<usize> {
    let k = (h / grid.dt()).round();
    if k < 1.0 || ((k * grid.dt()) - h).abs() > 1e-9 * h.max(grid.dt()) {
        return Err(param(format!("h = {h} is not a positive multiple of dt = {}", grid.dt())));
    }
    Ok(k as usize)
}

/// Compares `h^{-1} E[du dv]` over `[t, t+h]` with `E Gamma(u, v)(X_t)`.
///
/// The estimator carries an `O(h)` bias; `atol` should cover it.
pub fn carre_du_champ_estimate(
    e: &PathEnsemble,
    diffusion: &MatrixField,
    u: &TestFunction,
    v: &TestFunction,
    t: f64,
    h: f64,
    atol: f64,
) -> Result<CarreDuChampReport> {
    let grid = e.grid();
    let i = grid.nearest_index(t)?;
    let k = step_multiple(grid, h)?;
    if i + k > grid.n_steps() {
        return Err(param("t + h exceeds the horizon"));
    }
    let d = e.dim();
    let t_i = grid.node(i);
    let pairs: Vec<(f64, f64)> = (0..e.n_paths())
        .into_par_iter()
        .map(|p| {
            let x0 = e.point(p, i);
            let x1 = e.point(p, i + k);
            let inc = (u.value(x1) - u.value(x0)) * (v.value(x1) - v.value(x0)) / h;
            let mut a = vec![0.0; d * d];
            let mut gu = vec![0.0; d];
            let mut gv = vec![0.0; d];
            diffusion.eval_into(t_i, x0, &mut a);
            u.grad_into(x0, &mut gu);
            v.grad_into(x0, &mut gv);
            (inc, carre_du_champ(&a, &gu, &gv))
        })
        .collect();
    let inc: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let model: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    Ok(CarreDuChampReport {
        increment: mean_stderr(&inc),
        model: mean_stderr(&model),
        residual: ResidualReport::from_samples(&diff, DEFAULT_Z, atol),
        h,
    })
}

/// Local estimate of the forward generator `L-> u(t, x0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NelsonEstimate {
    /// Richardson extrapolation of the two smallest step sizes.
    pub value: f64,
    /// `(h, mean increment / h, stderr)` per step size.
    pub per_h: Vec<(f64, f64, f64)>,
    /// Paths with `|X_t - x0| <= window`.
    pub n_window: usize,
}

/// Window average of `(u(X_{t+h}) - u(X_t)) / h` over paths near `x0`,
/// Richardson-extrapolated in `h`.
pub fn nelson_forward_derivative(
    e: &PathEnsemble,
    u: &TestFunction,
    t: f64,
    x0: &[f64],
    window: f64,
    h_list: &[f64],
) -> Result<NelsonEstimate> {
    if h_list.is_empty() {
        return Err(param("empty step list"));
    }
    if x0.len() != e.dim() {
        return Err(param("x0 dimension mismatch"));
    }
    let grid = e.grid();
    let i = grid.nearest_index(t)?;
    let members: Vec<usize> = (0..e.n_paths())
        .filter(|&p| {
            let x = e.point(p, i);
            x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= window
        })
        .collect();
    if members.is_empty() {
        return Err(Error::Support(format!("no paths within {window} of {x0:?} at t = {t}")));
    }
    let mut per_h = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let k = step_multiple(grid, h)?;
        if i + k > grid.n_steps() {
            return Err(param(format!("t + {h} exceeds the horizon")));
        }
        let incs: Vec<f64> = members
            .iter()
            .map(|&p| (u.value(e.point(p, i + k)) - u.value(e.point(p, i))) / h)
            .collect();
        let est = mean_stderr(&incs);
        per_h.push((h, est.value, est.stderr));
    }
    let mut sorted = per_h.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let value = if sorted.len() == 1 {
        sorted[0].1
    } else {
        let (h1, d1, _) = sorted[0];
        let (h2, d2, _) = sorted[1];
        (h2 * d1 - h1 * d2) / (h2 - h1)
    };
    Ok(NelsonEstimate { value, per_h, n_window: members.len() })
}

/// Rectangular probe lattice with `per_axis` points per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
}

impl ProbeBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() || per_axis == 0 || lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(param("invalid probe box"));
        }
        Ok(Self { lo, hi, per_axis })
    }

    pub fn cube(dim: usize, half_width: f64, per_axis: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], per_axis)
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let d = self.lo.len();
        let n = self.per_axis;
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                (0..d)
                    .map(|k| {
                        let j = idx % n;
                        idx /= n;
                        if n == 1 {
                            0.5 * (self.lo[k] + self.hi[k])
                        } else {
                            self.lo[k] + (self.hi[k] - self.lo[k]) * j as f64 / (n - 1) as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Central-difference stencil: step `delta`, order 2 or 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stencil {
    pub delta: f64,
    pub order: u8,
}

impl Stencil {
    pub fn new(delta: f64, order: u8) -> Result<Self> {
        if !(delta > 0.0) || !(order == 2 || order == 4) {
            return Err(param("stencil needs delta > 0 and order 2 or 4"));
        }
        Ok(Self { delta, order })
    }

    fn derivative(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = self.delta;
        match self.order {
            2 => (f(h) - f(-h)) / (2.0 * h),
            _ => (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub sup: f64,
    /// Mean absolute residual over probes.
    pub l1: f64,
    pub n_probes: usize,
    /// Probes below the support floor.
    pub skipped: usize,
}

/// `d/dt rho + div(rho v_cu)` by central differences on the probe lattice
/// at every grid node, with times clamped into `[2 delta, T - 2 delta]`.
pub fn continuity_residual(
    flow: &dyn DensityFlow,
    v_cu: &VectorField,
    grid: &TimeGrid,
    probes: &ProbeBox,
    stencil: Stencil,
) -> Result<ContinuityReport> {
    let d = flow.dim();
    if v_cu.dim() != d || probes.lo.len() != d {
        return Err(param("continuity_residual: dimension mismatch"));
    }
    let margin = 2.0 * stencil.delta;
    if grid.horizon() <= 2.0 * margin {
        return Err(param("stencil too wide for the horizon"));
    }
    let points = probes.points();
    let times: Vec<f64> = grid.nodes().into_iter().map(|t| t.clamp(margin, grid.horizon() - margin)).collect();
    let results: Vec<Option<f64>> = times
        .par_iter()
        .flat_map_iter(|&t| {
            points.iter().map(move |x| {
                if !flow.is_supported(t, x) {
                    return None;
                }
                let dt = stencil.derivative(|s| flow.pdf(t + s, x));
                let mut div = 0.0;
                let mut buf = vec![0.0; d];
                for k in 0..d {
                    div += stencil.derivative(|s| {
                        let mut y = x.clone();
                        y[k] += s;
                        v_cu.eval_into(t, &y, &mut buf);
                        flow.pdf(t, &y) * buf[k]
                    });
                }
                Some((dt + div).abs())
            })
        })
        .collect();
    let kept: Vec<f64> = results.iter().flatten().copied().collect();
    let sup = kept.iter().copied().fold(0.0, f64::max);
    Ok(ContinuityReport {
        sup,
        l1: if kept.is_empty() { 0.0 } else { kept.iter().sum::<f64>() / kept.len() as f64 },
        n_probes: kept.len(),
        skipped: results.len() - kept.len(),
    })
}

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ensemble::PathEnsemble;
use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;
use crate::models::{DiffusionSpec, InitialLaw};
use crate::rng;

/// Ensemble size, master seed and grid of a simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub grid: TimeGrid,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, grid: TimeGrid) -> Result<Self> {
        if n_paths == 0 {
            return Err(param("n_paths must be at least 1"));
        }
        Ok(Self { n_paths, seed, grid })
    }
}

fn draw_initial<R: Rng>(init: &InitialLaw, path: usize, rng: &mut R, out: &mut [f64]) {
    match init {
        InitialLaw::Gaussian(g) => g.sample(rng, out),
        InitialLaw::Point(p) => out.copy_from_slice(p),
        InitialLaw::Samples(s) => out.copy_from_slice(s.row(path % s.len())),
    }
}

/// Euler-Maruyama path from `x0` driven by the supplied standard normals
/// (`n_steps * dim` of them). Exposed for strong-order checks.
pub fn euler_path(spec: &DiffusionSpec, grid: &TimeGrid, x0: &[f64], normals: &[f64]) -> Result<Vec<f64>> {
    let d = spec.dim();
    let n = grid.n_steps();
    if x0.len() != d || normals.len() != n * d {
        return Err(param("euler_path: wrong buffer sizes"));
    }
    let mut out = Vec::with_capacity((n + 1) * d);
    out.extend_from_slice(x0);
    let mut scratch = Scratch::new(d);
    for i in 0..n {
        let x = out[i * d..(i + 1) * d].to_vec();
        scratch.step(spec, grid, i, &x, &normals[i * d..(i + 1) * d])
            .map_err(|_| Error::Simulation { path: 0, step: i + 1 })?;
        out.extend_from_slice(&scratch.next);
    }
    Ok(out)
}

struct Scratch {
    drift: Vec<f64>,
    sigma: Vec<f64>,
    next: Vec<f64>,
}

impl Scratch {
    fn new(d: usize) -> Self {
        Self { drift: vec![0.0; d], sigma: vec![0.0; d * d], next: vec![0.0; d] }
    }

    fn step(&mut self, spec: &DiffusionSpec, grid: &TimeGrid, i: usize, x: &[f64], xi: &[f64]) -> Result<()> {
        let d = x.len();
        let t = grid.node(i);
        let dt = grid.dt();
        let sq = dt.sqrt();
        spec.drift.eval_into(t, x, &mut self.drift);
        spec.sigma_into(t, x, &mut self.sigma)?;
        for k in 0..d {
            let noise: f64 = (0..d).map(|j| self.sigma[k * d + j] * xi[j]).sum();
            self.next[k] = x[k] + self.drift[k] * dt + sq * noise;
        }
        if self.next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite state".into()));
        }
        Ok(())
    }
}

/// Explicit Euler-Maruyama in the Ito convention.
///
/// Path `p` draws its initial point and increments from
/// `rng::stream(seed, tag, p)`, so the output is independent of the rayon
/// schedule.
pub fn euler_maruyama(spec: &DiffusionSpec, cfg: &SimConfig) -> Result<PathEnsemble> {
    let d = spec.dim();
    let grid = cfg.grid;
    let n = grid.n_steps();
    let paths: Vec<Result<Vec<f64>>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng::stream(cfg.seed, &spec.tag, p as u64);
            let mut buf = vec![0.0; (n + 1) * d];
            draw_initial(&spec.init, p, &mut rng, &mut buf[..d]);
            let mut scratch = Scratch::new(d);
            let mut xi = vec![0.0; d];
            for i in 0..n {
                for v in xi.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                let x = buf[i * d..(i + 1) * d].to_vec();
                scratch
                    .step(spec, &grid, i, &x, &xi)
                    .map_err(|_| Error::Simulation { path: p, step: i + 1 })?;
                buf[(i + 1) * d..(i + 2) * d].copy_from_slice(&scratch.next);
            }
            Ok(buf)
        })
        .collect();
    let mut data = Vec::with_capacity(cfg.n_paths * (n + 1) * d);
    for p in paths {
        data.extend(p?);
    }
    PathEnsemble::new(grid, d, cfg.seed, spec.tag.clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{MatrixField, VectorField};
    use crate::grid::make_grid;
    use crate::models::Gaussian;

    #[test]
    fn degenerate_diffusion_is_constant() {
        let spec = DiffusionSpec::new(
            VectorField::zero(1),
            MatrixField::scaled_identity(1, 0.0),
            VectorField::zero(1),
            None,
            InitialLaw::Point(vec![2.5]),
            "frozen",
        )
        .unwrap();
        let cfg = SimConfig::new(3, 1, make_grid(1.0, 10).unwrap()).unwrap();
        let e = euler_maruyama(&spec, &cfg).unwrap();
        assert!(e.as_slice().iter().all(|v| *v == 2.5));
    }

    #[test]
    fn blow_up_names_path_and_step() {
        let spec = DiffusionSpec::new(
            VectorField::new(1, |_, x, out| out[0] = x[0] * x[0] * 1e200),
            MatrixField::scaled_identity(1, 0.0),
            VectorField::zero(1),
            None,
            InitialLaw::Point(vec![1.0]),
            "boom",
        )
        .unwrap();
        let cfg = SimConfig::new(2, 1, make_grid(1.0, 10).unwrap()).unwrap();
        match euler_maruyama(&spec, &cfg) {
            Err(Error::Simulation { path: 0, step }) => assert!(step >= 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reproducible_under_any_thread_count() {
        let spec = DiffusionSpec::linear(
            1.0,
            vec![0.0, 0.0],
            1.0,
            InitialLaw::Gaussian(Gaussian::isotropic(vec![0.0, 0.0], 0.5).unwrap()),
            "ou",
        )
        .unwrap();
        let cfg = SimConfig::new(64, 99, make_grid(1.0, 20).unwrap()).unwrap();
        let a = euler_maruyama(&spec, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| euler_maruyama(&spec, &cfg).unwrap());
        let pool = rayon::ThreadPoolBuilder::new().num_threads(5).build().unwrap();
        let c = pool.install(|| euler_maruyama(&spec, &cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn zero_paths_rejected() {
        assert!(SimConfig::new(0, 1, make_grid(1.0, 2).unwrap()).is_err());
    }
}

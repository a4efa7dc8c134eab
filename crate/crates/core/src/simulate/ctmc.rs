use rand::Rng;
use rayon::prelude::*;

use crate::ensemble::{JumpEvent, JumpPath, JumpPathEnsemble};
use crate::error::{param, Error, Result};
use crate::models::GraphWalkSpec;
use crate::rng;

fn categorical<R: Rng>(weights: impl Iterator<Item = f64> + Clone, total: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last = k;
            acc += w;
            if u < acc {
                return k;
            }
        }
    }
    last
}

fn exponential<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1]
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn simulate_path<R: Rng>(spec: &GraphWalkSpec, horizon: f64, rng: &mut R) -> Result<JumpPath> {
    let p0 = spec.initial();
    let initial = categorical(p0.iter().copied(), 1.0, rng);
    let mut events = Vec::new();
    let mut x = initial;
    let mut t = 0.0;
    if spec.is_time_homogeneous() {
        loop {
            let nb = spec.neighbours(x);
            let total = spec.out_rate(0.0, x);
            if total <= 0.0 {
                break;
            }
            t += exponential(total, rng);
            if t > horizon {
                break;
            }
            let k = categorical(nb.iter().map(|&y| spec.intensity(0.0, x, y)), total, rng);
            let y = nb[k];
            events.push(JumpEvent { time: t, from: x, to: y });
            x = y;
        }
    } else {
        let bound = spec
            .rate_bound()
            .ok_or_else(|| Error::Config("time-dependent intensities need a rate bound".into()))?;
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::Config(format!("invalid rate bound {bound}")));
        }
        loop {
            t += exponential(bound, rng);
            if t > horizon {
                break;
            }
            let total = spec.out_rate(t, x);
            if total > bound * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "out-rate {total} at t={t}, state {x} exceeds thinning bound {bound}"
                )));
            }
            if rng.random::<f64>() * bound >= total {
                continue;
            }
            let nb = spec.neighbours(x);
            let k = categorical(nb.iter().map(|&y| spec.intensity(t, x, y)), total, rng);
            let y = nb[k];
            events.push(JumpEvent { time: t, from: x, to: y });
            x = y;
        }
    }
    Ok(JumpPath { initial, events })
}

/// Event-driven simulation of a graph walk on `[0, horizon]`.
///
/// Homogeneous walks use direct exponential clocks; time-dependent ones
/// use thinning against the spec's rate bound.
pub fn ctmc_simulate(spec: &GraphWalkSpec, horizon: f64, n_paths: usize, seed: u64) -> Result<JumpPathEnsemble> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(param("horizon must be positive"));
    }
    if n_paths == 0 {
        return Err(param("n_paths must be at least 1"));
    }
    for t in [0.0, horizon] {
        spec.check_intensities(t)?;
    }
    let paths: Vec<Result<JumpPath>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = rng::stream(seed, &spec.tag, p as u64);
            simulate_path(spec, horizon, &mut rng)
        })
        .collect();
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(JumpPathEnsemble { horizon, n_states: spec.n_states(), seed, paths })
}

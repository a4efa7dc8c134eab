use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::SampleMatrix;
use crate::error::{param, Result};
use crate::rng::stream;

/// Samples per side below which [`two_sample_energy`] warns.
pub const MIN_ENERGY_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTest {
    /// `2 E|a - b| - E|a - a'| - E|b - b'|` (V-statistic, so never negative).
    pub statistic: f64,
    /// `(1 + #{perm >= observed}) / (1 + n_perm)`.
    pub p_value: f64,
    pub n_perm: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Energy-distance two-sample test with a permutation null.
///
/// One-dimensional samples use a sorted pooled sample, `O(N)` per
/// permutation; higher dimensions evaluate all pairwise distances.
/// Permutation `k` draws from its own seeded stream.
pub fn two_sample_energy(a: &SampleMatrix, b: &SampleMatrix, n_perm: usize, seed: u64) -> Result<EnergyTest> {
    if a.dim() != b.dim() {
        return Err(param("two_sample_energy: dimension mismatch"));
    }
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(param("two_sample_energy: empty sample"));
    }
    // 1-D: labels indexed by position in the sorted pooled sample
    let (observed_labels, stat_fn): (Vec<bool>, Box<dyn Fn(&[bool]) -> f64 + Sync>) = if a.dim() == 1 {
        let mut pooled: Vec<(f64, bool)> = a.as_slice().iter().map(|&x| (x, true)).collect();
        pooled.extend(b.as_slice().iter().map(|&x| (x, false)));
        pooled.sort_by(|p, q| p.0.total_cmp(&q.0));
        let labels = pooled.iter().map(|p| p.1).collect();
        let sorted: Vec<f64> = pooled.iter().map(|p| p.0).collect();
        let total_within = within_sum_sorted(&sorted, None);
        let f = move |labels: &[bool]| {
            let wa = within_sum_sorted(&sorted, Some((labels, true)));
            let wb = within_sum_sorted(&sorted, Some((labels, false)));
            energy(total_within - wa - wb, wa, wb, n, m)
        };
        (labels, Box::new(f))
    } else {
        let pooled: Vec<&[f64]> = a.rows().chain(b.rows()).collect();
        let f = move |labels: &[bool]| {
            let (cross, wa, wb) = (0..pooled.len())
                .into_par_iter()
                .map(|i| {
                    let (mut c, mut wa, mut wb) = (0.0, 0.0, 0.0);
                    for j in (i + 1)..pooled.len() {
                        let dist = pooled[i].iter().zip(pooled[j]).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                        match (labels[i], labels[j]) {
                            (true, true) => wa += dist,
                            (false, false) => wb += dist,
                            _ => c += dist,
                        }
                    }
                    (c, wa, wb)
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold((0.0, 0.0, 0.0), |s, v| (s.0 + v.0, s.1 + v.1, s.2 + v.2));
            energy(cross, wa, wb, n, m)
        };
        ((0..n + m).map(|i| i < n).collect(), Box::new(f))
    };
    let statistic = stat_fn(&observed_labels);
    let tol = 1e-12 * statistic.abs().max(1e-300);
    let exceed: usize = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, "energy-permutation", k as u64);
            let mut labels = observed_labels.clone();
            labels.shuffle(&mut rng);
            (stat_fn(&labels) >= statistic - tol) as usize
        })
        .sum();
    let warning = (n < MIN_ENERGY_SAMPLES || m < MIN_ENERGY_SAMPLES)
        .then(|| format!("small samples: {n} vs {m}"));
    Ok(EnergyTest {
        statistic,
        p_value: (1 + exceed) as f64 / (1 + n_perm) as f64,
        n_perm,
        warning,
    })
}

fn energy(cross: f64, wa: f64, wb: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (2.0 * cross / (n * m) - 2.0 * wa / (n * n) - 2.0 * wb / (m * m)).max(0.0)
}

/// `sum_{i < j} (z_j - z_i)` over sorted `z`, restricted to one label.
fn within_sum_sorted(z: &[f64], subset: Option<(&[bool], bool)>) -> f64 {
    let mut count = 0.0;
    let mut prefix = 0.0;
    let mut s = 0.0;
    for (i, &x) in z.iter().enumerate() {
        if let Some((labels, want)) = subset {
            if labels[i] != want {
                continue;
            }
        }
        s += count * x - prefix;
        count += 1.0;
        prefix += x;
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Asymptotic Kolmogorov tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsTest> {
    if samples.is_empty() {
        return Err(param("ks_one_sample: empty sample"));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let d = x
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d), n: x.len() })
}

/// Two-sample Kolmogorov-Smirnov test on scalar samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(param("ks_two_sample: empty sample"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sn = ne.sqrt();
    Ok(KsTest { statistic: d, p_value: kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d), n: n + m })
}

/// Per-coordinate two-sample KS tests.
pub fn ks_per_coordinate(a: &SampleMatrix, b: &SampleMatrix) -> Result<Vec<KsTest>> {
    if a.dim() != b.dim() {
        return Err(param("ks_per_coordinate: dimension mismatch"));
    }
    (0..a.dim()).map(|k| ks_two_sample(&a.column(k), &b.column(k))).collect()
}

mod common;

use common::{bm, grid, shifted_ou, stationary_ou};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, Normal};
use timerev::density::{kde_fit, Bandwidth};
use timerev::models::{biased_cycle_walk, forward_marginals, two_state_walk, InitialLaw};
use timerev::rng::stream;
use timerev::simulate::{ctmc_simulate, euler_maruyama, euler_path, SimConfig};
use timerev::verify::ks_one_sample;

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn ou_moments_follow_the_exact_flow() {
    let c = shifted_ou();
    let e = euler_maruyama(&c.spec, &SimConfig::new(20000, 1, grid(1.0, 400)).unwrap()).unwrap();
    for i in [0, 100, 200, 400] {
        let t = e.grid().node(i);
        let (m, v) = mean_var(&e.slice_at(i).column(0));
        let g = c.flow.marginal(t).unwrap();
        let (em, ev) = (g.mean()[0], g.cov()[(0, 0)]);
        let n = e.n_paths() as f64;
        assert!((m - em).abs() < 3.0 * (ev / n).sqrt() + 1e-3, "t={t}: mean {m} vs {em}");
        assert!((v - ev).abs() < 3.0 * ev * (2.0 / n).sqrt() + 2e-3, "t={t}: var {v} vs {ev}");
    }
}

#[test]
fn brownian_variance_grows_linearly() {
    let c = bm();
    let e = euler_maruyama(&c.spec, &SimConfig::new(20000, 2, grid(2.0, 50)).unwrap()).unwrap();
    let (_, v) = mean_var(&e.slice_at(50).column(0));
    let exact = c.flow.cov(2.0)[(0, 0)];
    assert!((v - exact).abs() < 3.0 * exact * (2.0 / 20000.0f64).sqrt(), "{v} vs {exact}");
}

#[test]
fn stationary_ou_slices_pass_ks() {
    let c = stationary_ou();
    let e = euler_maruyama(&c.spec, &SimConfig::new(5000, 3, grid(1.0, 200)).unwrap()).unwrap();
    let law = Normal::new(0.0, 0.5f64.sqrt()).unwrap();
    for i in [0, 100, 200] {
        let ks = ks_one_sample(&e.slice_at(i).column(0), |x| law.cdf(x)).unwrap();
        assert!(ks.p_value > 0.001, "slice {i}: {ks:?}");
    }
}

#[test]
fn euler_has_strong_order_one_for_additive_noise() {
    let c = stationary_ou();
    let fine = 256;
    let n_paths = 400;
    let mut err = [0.0; 3];
    for p in 0..n_paths {
        let mut rng = stream(4, "strong", p);
        let z: Vec<f64> = (0..fine).map(|_| rng.sample(StandardNormal)).collect();
        let reference = euler_path(&c.spec, &grid(1.0, fine), &[0.5], &z).unwrap()[fine];
        for (k, &coarse) in [16usize, 32, 64].iter().enumerate() {
            let r = fine / coarse;
            let agg: Vec<f64> = z.chunks(r).map(|w| w.iter().sum::<f64>() / (r as f64).sqrt()).collect();
            let x = euler_path(&c.spec, &grid(1.0, coarse), &[0.5], &agg).unwrap()[coarse];
            err[k] += (x - reference).abs() / n_paths as f64;
        }
    }
    for k in 0..2 {
        let ratio = err[k] / err[k + 1];
        assert!((1.6..2.6).contains(&ratio), "ratio {ratio}, errors {err:?}");
    }
}

#[test]
fn ctmc_event_counts_are_poisson() {
    let w = biased_cycle_walk(5, 2.0, 1.0).unwrap();
    let e = ctmc_simulate(&w, 2.0, 20000, 5).unwrap();
    let counts: Vec<f64> = e.event_counts().iter().map(|&k| k as f64).collect();
    let (m, v) = mean_var(&counts);
    let lambda = 3.0 * 2.0;
    let se = (lambda / 20000.0f64).sqrt();
    assert!((m - lambda).abs() < 4.0 * se, "{m}");
    assert!((v - lambda).abs() < 0.3, "{v}");
}

#[test]
fn first_jump_time_is_exponential() {
    let w = biased_cycle_walk(4, 1.0, 1.0).unwrap();
    let e = ctmc_simulate(&w, 10.0, 5000, 6).unwrap();
    let first: Vec<f64> = e.paths.iter().map(|p| p.events[0].time).collect();
    let ks = ks_one_sample(&first, |t| 1.0 - (-2.0 * t).exp()).unwrap();
    assert!(ks.p_value > 0.001, "{ks:?}");
}

#[test]
fn thinning_matches_the_master_equation() {
    let base = two_state_walk(1.0, 1.0, vec![1.0, 0.0]).unwrap();
    let w = base
        .with_intensity(|t, x, _| if x == 0 { 1.0 + 2.0 * t } else { 0.5 }, false, "ramp")
        .with_rate_bound(3.0);
    let e = ctmc_simulate(&w, 1.0, 40000, 7).unwrap();
    let table = forward_marginals(&w, &grid(1.0, 100), 8);
    for t in [0.25, 0.5, 1.0] {
        let emp = e.marginal(t).unwrap();
        let exact = table.at(t);
        let se = (exact[0] * exact[1] / 40000.0).sqrt();
        assert!((emp[0] - exact[0]).abs() < 4.0 * se, "t={t}: {emp:?} vs {exact:?}");
    }
}

#[test]
fn ctmc_reproducible_and_seed_sensitive() {
    let w = biased_cycle_walk(4, 2.0, 1.0).unwrap();
    assert_eq!(ctmc_simulate(&w, 1.0, 100, 9).unwrap(), ctmc_simulate(&w, 1.0, 100, 9).unwrap());
    assert_ne!(ctmc_simulate(&w, 1.0, 100, 9).unwrap(), ctmc_simulate(&w, 1.0, 100, 10).unwrap());
}

#[test]
fn point_initial_law_is_respected() {
    let mut c = stationary_ou();
    c.spec.init = InitialLaw::Point(vec![1.5]);
    let e = euler_maruyama(&c.spec, &SimConfig::new(10, 1, grid(1.0, 4)).unwrap()).unwrap();
    assert!(e.slice_at(0).column(0).iter().all(|&x| x == 1.5));
}

#[test]
fn kde_score_matches_the_smoothed_exact_score() {
    // a Gaussian KDE of N(m, v) samples estimates N(m, v + h^2)
    let c = shifted_ou();
    let e = euler_maruyama(&c.spec, &SimConfig::new(20000, 8, grid(1.0, 100)).unwrap()).unwrap();
    let h = 0.25;
    let kde = kde_fit(&e.slice_at(50), &Bandwidth::Fixed(vec![h])).unwrap();
    let g = c.flow.marginal(0.5).unwrap();
    let (m, v) = (g.mean()[0], g.cov()[(0, 0)]);
    let mut exact = [0.0];
    for k in 0..=10 {
        let x = m - 1.0 + 0.2 * k as f64;
        let smoothed = -(x - m) / (v + h * h);
        let est = kde.score(&[x]).unwrap()[0];
        assert!((est - smoothed).abs() < 0.05 + 0.1 * (x - m).abs(), "x={x}: {est} vs {smoothed}");
        c.density.score_into(0.5, &[x], &mut exact);
        assert!((est - exact[0]).abs() < 0.05 + 0.3 * (x - m).abs());
    }
    let silverman = kde_fit(&e.slice_at(50), &Bandwidth::Silverman).unwrap();
    let (_, sv) = mean_var(&e.slice_at(50).column(0));
    let rule = sv.sqrt() * (4.0 / (3.0 * 20000.0f64)).powf(0.2);
    assert!((silverman.bandwidth()[0] - rule).abs() < 1e-3 * rule, "{:?} vs {rule}", silverman.bandwidth());
}

mod common;

use common::{bm, expect_normal, grid, linear_case, shifted_ou, stationary_ou, Case};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use timerev::ensemble::{PathEnsemble, SampleMatrix};
use timerev::field::{MatrixField, VectorField};
use timerev::grid::make_grid;
use timerev::models::{biased_cycle_walk, forward_marginals, GraphWalkSpec, InitialLaw};
use timerev::reversal::{reversed_jump_intensities, Reversal};
use timerev::rng::stream;
use timerev::simulate::{euler_maruyama, SimConfig};
use timerev::verify::*;

fn generators(c: &Case, horizon: f64) -> Generators {
    let rev = Reversal::build(&c.spec.drift, &c.spec, c.density.clone(), horizon, &c.reference).unwrap();
    Generators { v_fwd: rev.velocities.v_fwd, v_bwd: rev.velocities.v_bwd, diffusion: c.spec.diffusion.clone() }
}

fn normal_slice(n: usize, mean: f64, var: f64, seed: u64) -> SampleMatrix {
    let mut rng = stream(seed, "verify-test", 0);
    let v: Vec<f64> = (0..n).map(|_| mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
    SampleMatrix::from_scalars(&v)
}

fn simulate(c: &Case, init: Option<InitialLaw>, n_paths: usize, horizon: f64, n_steps: usize, seed: u64) -> PathEnsemble {
    let mut spec = c.spec.clone();
    if let Some(i) = init {
        spec.init = i;
    }
    euler_maruyama(&spec, &SimConfig::new(n_paths, seed, grid(horizon, n_steps)).unwrap()).unwrap()
}

#[test]
fn stationary_ou_ibp_examples() {
    let c = stationary_ou();
    let g = generators(&c, 1.0);
    let slice = normal_slice(20000, 0.0, 0.5, 1);
    let x = TestFunction::coordinate(1, 0);
    let x2 = TestFunction::power(1, 0, 2);
    let one = TestFunction::constant(1, 1.0);
    for (u, v) in [(&x, &x), (&x2, &x2), (&x2, &one)] {
        let r = ibp_residual(&g, 0.5, &slice, u, v).unwrap();
        assert!(r.pass, "{} {}: {r:?}", u.name(), v.name());
        assert!(r.warning.is_none());
        // Gaussian-moment oracle: the bracket integrates to zero exactly
        let exact = expect_normal(12, 0.0, 0.5, |y| g.ibp_bracket(0.5, &[y], u, v));
        assert!(exact.abs() < 1e-12, "{exact}");
    }
}

#[test]
fn ibp_battery_with_products_at_three_times() {
    let c = stationary_ou();
    let g = generators(&c, 1.0);
    let x = TestFunction::coordinate(1, 0);
    let x2 = TestFunction::power(1, 0, 2);
    let x3 = TestFunction::power(1, 0, 3);
    let bump = TestFunction::bump(vec![0.0], 2.0);
    let battery = [
        (x3.product(&bump), x.clone()),
        (x.product(&x2), bump.clone()),
        (x2.product(&bump), x2.product(&x)),
        (bump.clone(), bump.product(&x)),
    ];
    for (k, t) in [0.2, 0.5, 0.9].into_iter().enumerate() {
        let slice = normal_slice(20000, 0.0, 0.5, 10 + k as u64);
        for (u, v) in &battery {
            let r = ibp_residual(&g, t, &slice, u, v).unwrap();
            assert!(r.pass, "t={t} {} {}: {r:?}", u.name(), v.name());
        }
    }
}

#[test]
fn ibp_off_equilibrium_uses_the_backward_drift() {
    let c = shifted_ou();
    let g = generators(&c, 1.0);
    let x2 = TestFunction::power(1, 0, 2);
    let x = TestFunction::coordinate(1, 0);
    let t: f64 = 0.4;
    let m = (-t).exp();
    let exact = expect_normal(12, m, 0.5, |y| g.ibp_bracket(t, &[y], &x2, &x));
    assert!(exact.abs() < 1e-12);
    // the forward generator alone does not integrate to zero against the carré du champ
    let fwd_only = Generators { v_fwd: g.v_fwd.clone(), v_bwd: g.v_fwd.clone(), diffusion: g.diffusion.clone() };
    let wrong = expect_normal(12, m, 0.5, |y| fwd_only.ibp_bracket(t, &[y], &x2, &x));
    assert!(wrong.abs() > 0.1);
}

#[test]
fn small_slice_triggers_warning() {
    let c = stationary_ou();
    let g = generators(&c, 1.0);
    let x = TestFunction::coordinate(1, 0);
    let r = ibp_residual(&g, 0.5, &normal_slice(50, 0.0, 0.5, 3), &x, &x).unwrap();
    assert!(r.warning.is_some());
}

#[test]
fn carre_du_champ_examples() {
    let c = stationary_ou();
    let e = simulate(&c, None, 20000, 1.0, 100, 4);
    let x = TestFunction::coordinate(1, 0);
    let one = TestFunction::constant(1, 2.0);
    let r = carre_du_champ_estimate(&e, &c.spec.diffusion, &x, &x, 0.3, 0.01, 0.01).unwrap();
    assert!(r.residual.pass, "{r:?}");
    assert!((r.increment.value - 1.0).abs() < 3.0 * r.increment.stderr + 0.01);
    let z = carre_du_champ_estimate(&e, &c.spec.diffusion, &x, &one, 0.3, 0.01, 0.0).unwrap();
    assert_eq!(z.increment.value, 0.0);
    assert_eq!(z.model.value, 0.0);

    let b = bm();
    let eb = simulate(&b, None, 50000, 1.0, 100, 5);
    let x2 = TestFunction::power(1, 0, 2);
    let t = 0.5;
    let r = carre_du_champ_estimate(&eb, &b.spec.diffusion, &x2, &x2, t, 0.01, 0.0).unwrap();
    let exact = 4.0 * (1.0 + t);
    assert!((r.model.value - exact).abs() < 3.0 * r.model.stderr + 1e-9);
    // E[(dX^2)^2]/h = 4 E x^2 + O(h), bias 6 h here
    assert!((r.increment.value - exact).abs() < 3.0 * r.increment.stderr + 8.0 * 0.01, "{r:?}");
}

#[test]
fn carre_du_champ_bias_is_linear_in_h() {
    // stationary OU: E[(X_{t+h} - X_t)^2]/h = (1 - e^{-h})/h = 1 - h/2 + O(h^2)
    let c = stationary_ou();
    let e = simulate(&c, None, 100000, 0.5, 50, 6);
    let x = TestFunction::coordinate(1, 0);
    let reps: Vec<_> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&h| carre_du_champ_estimate(&e, &c.spec.diffusion, &x, &x, 0.1, h, 0.0).unwrap().increment)
        .collect();
    let est: Vec<f64> = reps.iter().map(|r| r.value).collect();
    let slope = (est[0] - est[2]) / (0.04 - 0.01);
    assert!((slope + 0.5).abs() < 0.35, "slope {slope}, {est:?}");
    for (&h, r) in [0.04f64, 0.02, 0.01].iter().zip(&reps) {
        let exact = (1.0 - (-h).exp()) / h;
        assert!((r.value - exact).abs() < 4.0 * r.stderr + 0.01, "h={h}: {r:?}");
    }
}

#[test]
fn nelson_derivative_examples() {
    let c = stationary_ou();
    let e = simulate(&c, Some(InitialLaw::Point(vec![1.0])), 100000, 0.2, 20, 7);
    let x = TestFunction::coordinate(1, 0);
    let x2 = TestFunction::power(1, 0, 2);
    let d = nelson_forward_derivative(&e, &x, 0.0, &[1.0], 0.05, &[0.1, 0.05]).unwrap();
    assert!((d.value + 1.0).abs() < 0.1, "{d:?}");
    assert_eq!(d.n_window, 100000);
    let d2 = nelson_forward_derivative(&e, &x2, 0.0, &[1.0], 0.05, &[0.1, 0.05]).unwrap();
    assert!((d2.value + 1.0).abs() < 0.1, "{d2:?}");

    let b = bm();
    let eb = simulate(&b, Some(InitialLaw::Point(vec![0.3])), 100000, 0.2, 20, 8);
    let db = nelson_forward_derivative(&eb, &x, 0.0, &[0.3], 0.05, &[0.1, 0.05]).unwrap();
    assert!(db.value.abs() < 0.1, "{db:?}");
    assert!(nelson_forward_derivative(&eb, &x, 0.0, &[5.0], 0.05, &[0.1]).is_err());
}

#[test]
fn continuity_equation_for_exact_flows() {
    let g = make_grid(1.0, 20).unwrap();
    let st = Stencil::new(1e-4, 2).unwrap();
    let probes = ProbeBox::cube(1, 3.0, 31).unwrap();

    let s = stationary_ou();
    let r = continuity_residual(s.density.as_ref(), &VectorField::zero(1), &g, &ProbeBox::cube(1, 3.0, 31).unwrap(), st).unwrap();
    assert!(r.sup < 1e-9, "{r:?}");

    let c = shifted_ou();
    let v_cu = VectorField::new(1, |t, _, out| out[0] = -(-t).exp());
    let r = continuity_residual(c.density.as_ref(), &v_cu, &g, &probes, st).unwrap();
    assert!(r.sup <= 1e-6, "{r:?}");
    assert_eq!(r.skipped, 0);

    let b = bm();
    let v_cu = VectorField::new(1, |t, x, out| out[0] = x[0] / (2.0 * (1.0 + t)));
    let r = continuity_residual(b.density.as_ref(), &v_cu, &g, &probes, st).unwrap();
    assert!(r.sup <= 1e-6, "{r:?}");

    // the reversal machinery produces the same current velocity
    let rev = Reversal::build(&b.spec.drift, &b.spec, b.density.clone(), 1.0, &b.reference).unwrap();
    let r = continuity_residual(b.density.as_ref(), &rev.velocities.v_cu, &g, &probes, st).unwrap();
    assert!(r.sup <= 1e-6, "{r:?}");

    // a wrong velocity is detected
    let r = continuity_residual(b.density.as_ref(), &VectorField::zero(1), &g, &probes, st).unwrap();
    assert!(r.sup > 1e-3);
}

#[test]
fn quartic_stencil_reduces_the_residual() {
    let c = shifted_ou();
    let v_cu = VectorField::new(1, |t, _, out| out[0] = -(-t).exp());
    let g = make_grid(1.0, 10).unwrap();
    let probes = ProbeBox::cube(1, 2.5, 21).unwrap();
    let r2 = continuity_residual(c.density.as_ref(), &v_cu, &g, &probes, Stencil::new(1e-2, 2).unwrap()).unwrap();
    let r4 = continuity_residual(c.density.as_ref(), &v_cu, &g, &probes, Stencil::new(1e-2, 4).unwrap()).unwrap();
    assert!(r4.sup < r2.sup / 100.0, "{} vs {}", r4.sup, r2.sup);
}

#[test]
fn two_dimensional_continuity() {
    let c = {
        use nalgebra::{DMatrix, DVector};
        use std::sync::Arc;
        use timerev::density::exact_flow_density;
        use timerev::models::{Gaussian, GaussianFlow};
        let init = Gaussian::new(DVector::from_vec(vec![0.5, -0.5]), DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.6])).unwrap();
        let flow = GaussianFlow::new(&init, 1.0, vec![0.2, 0.0], 1.0, "2d").unwrap();
        let spec = timerev::models::DiffusionSpec::linear(1.0, vec![0.2, 0.0], 1.0, InitialLaw::Gaussian(init), "2d").unwrap();
        let reference = timerev::models::ou_reference(2).unwrap().0;
        let density: timerev::density::SharedDensity = Arc::new(exact_flow_density(&flow).unwrap());
        Case { spec, flow, reference, density }
    };
    let rev = Reversal::build(&c.spec.drift, &c.spec, c.density.clone(), 1.0, &c.reference).unwrap();
    let g = make_grid(1.0, 5).unwrap();
    let r = continuity_residual(c.density.as_ref(), &rev.velocities.v_cu, &g, &ProbeBox::cube(2, 2.0, 7).unwrap(), Stencil::new(1e-4, 2).unwrap()).unwrap();
    assert!(r.sup <= 1e-6, "{r:?}");
    assert_eq!(r.n_probes, 6 * 49);
}

#[test]
fn energy_test_null_calibration_and_power() {
    let mut rejections = 0;
    for s in 0..10 {
        let a = normal_slice(5000, 0.0, 1.0, 100 + s);
        let b = normal_slice(5000, 0.0, 1.0, 200 + s);
        let t = two_sample_energy(&a, &b, 99, s).unwrap();
        rejections += (t.p_value < 0.01) as usize;
    }
    assert!(rejections <= 1, "{rejections} rejections out of 10");
    let t = two_sample_energy(&normal_slice(5000, 0.0, 1.0, 1), &normal_slice(5000, 1.0, 1.0, 2), 999, 3).unwrap();
    assert!(t.p_value < 0.001 + 1e-12);
    let small = two_sample_energy(&normal_slice(20, 0.0, 1.0, 1), &normal_slice(20, 0.0, 1.0, 2), 19, 3).unwrap();
    assert!(small.warning.is_some());
}

#[test]
fn detailed_balance_of_symmetric_kernel_solutions() {
    let m: [f64; 5] = [0.2, 1.0, 3.0, 0.5, 1.5];
    let edges: Vec<(usize, usize)> = vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2)];
    let w = GraphWalkSpec::new(5, &edges, move |_, x, y| (1.0 + (x * y) as f64) * (m[y] / m[x]).sqrt(), true, vec![0.2; 5], "s").unwrap();
    assert!(detailed_balance_residual(&m, &w, 0.0).unwrap() <= 1e-12);
    let b = biased_cycle_walk(4, 2.0, 1.0).unwrap();
    assert_eq!(detailed_balance_residual(&[1.0; 4], &b, 0.0).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn graph_ibp_is_exact_on_random_walks(
        n in 3usize..7,
        cw in 0.1f64..3.0,
        ccw in 0.1f64..3.0,
        p_raw in proptest::collection::vec(0.05f64..1.0, 7),
        u in proptest::collection::vec(-2.0f64..2.0, 7),
        v in proptest::collection::vec(-2.0f64..2.0, 7),
        t in 0.0f64..1.0,
    ) {
        let total: f64 = p_raw[..n].iter().sum();
        let p0: Vec<f64> = p_raw[..n].iter().map(|x| x / total).collect();
        let w = biased_cycle_walk(n, cw, ccw).unwrap().with_initial(p0).unwrap();
        let g = make_grid(1.0, 20).unwrap();
        let table = forward_marginals(&w, &g, 4);
        let r = reversed_jump_intensities(&w, &table).unwrap();
        let p = table.at(t);
        let rep = graph_ibp_residual(&w, &r, t, &p, &u[..n], &v[..n]).unwrap();
        prop_assert!(rep.estimate.abs() <= 1e-12, "{}", rep.estimate);
    }
}

#[test]
fn ks_on_flipped_marginals() {
    // flipping a stationary ensemble leaves every slice law unchanged
    let c = linear_case(1.0, 0.0, 0.0, 0.5, "ks");
    let e = simulate(&c, None, 4000, 1.0, 50, 9);
    let f = e.flip();
    let other = simulate(&c, None, 4000, 1.0, 50, 10);
    for i in [0, 25, 50] {
        let ks = ks_per_coordinate(&f.slice_at(i), &other.slice_at(i)).unwrap();
        assert!(ks[0].p_value > 0.001, "{ks:?}");
    }
    let _ = MatrixField::identity(1);
}

use std::fmt;
use std::sync::Arc;

type ValueFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Smooth test function with gradient and Hessian.
///
/// Products of test functions are test functions; see [`TestFunction::product`].
#[derive(Clone)]
pub struct TestFunction {
    dim: usize,
    name: String,
    value: Arc<ValueFn>,
    grad: Arc<VecFn>,
    /// Row-major `dim x dim`.
    hessian: Arc<VecFn>,
    support: Option<(Vec<f64>, Vec<f64>)>,
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl TestFunction {
    pub fn new<U, G, H>(dim: usize, name: impl Into<String>, value: U, grad: G, hessian: H) -> Self
    where
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            dim,
            name: name.into(),
            value: Arc::new(value),
            grad: Arc::new(grad),
            hessian: Arc::new(hessian),
            support: None,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, format!("{c}"), move |_| c, |_, g| g.fill(0.0), |_, h| h.fill(0.0))
    }

    /// `x_k^n`.
    pub fn power(dim: usize, k: usize, n: u32) -> Self {
        let nf = n as f64;
        Self::new(
            dim,
            format!("x{}^{n}", k + 1),
            move |x| x[k].powi(n as i32),
            move |x, g| {
                g.fill(0.0);
                g[k] = if n == 0 { 0.0 } else { nf * x[k].powi(n as i32 - 1) };
            },
            move |x, h| {
                h.fill(0.0);
                h[k * dim + k] = if n < 2 { 0.0 } else { nf * (nf - 1.0) * x[k].powi(n as i32 - 2) };
            },
        )
    }

    /// The coordinate `x_k`.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        Self::power(dim, k, 1).named(format!("x{}", k + 1))
    }

    /// `exp(-r^2 / (r^2 - |x - c|^2))` inside the ball of radius `r`, else 0.
    pub fn bump(center: Vec<f64>, radius: f64) -> Self {
        let dim = center.len();
        let r2 = radius * radius;
        let c1 = center.clone();
        let c2 = center.clone();
        let c3 = center.clone();
        let lo = center.iter().map(|c| c - radius).collect();
        let hi = center.iter().map(|c| c + radius).collect();
        let s = move |x: &[f64], c: &[f64]| -> f64 { x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum() };
        let mut f = Self::new(
            dim,
            "bump",
            move |x| {
                let q = s(x, &c1);
                if q < r2 { (-r2 / (r2 - q)).exp() } else { 0.0 }
            },
            move |x, g| {
                let q = s(x, &c2);
                g.fill(0.0);
                if q < r2 {
                    // d/dq phi = -r2 phi / (r2 - q)^2, dq/dx = 2 (x - c)
                    let phi = (-r2 / (r2 - q)).exp();
                    let dphi = -r2 * phi / (r2 - q).powi(2);
                    for k in 0..g.len() {
                        g[k] = dphi * 2.0 * (x[k] - c2[k]);
                    }
                }
            },
            move |x, h| {
                let q = s(x, &c3);
                h.fill(0.0);
                if q < r2 {
                    let w = r2 - q;
                    let phi = (-r2 / w).exp();
                    let d1 = -r2 * phi / (w * w);
                    // d2 = d/dq d1 = r2 phi (r2 - 2 w) / w^4
                    let d2 = r2 * phi * (r2 - 2.0 * w) / w.powi(4);
                    let d = x.len();
                    for i in 0..d {
                        for j in 0..d {
                            let yi = x[i] - c3[i];
                            let yj = x[j] - c3[j];
                            h[i * d + j] = 4.0 * d2 * yi * yj + if i == j { 2.0 * d1 } else { 0.0 };
                        }
                    }
                }
            },
        );
        f.support = Some((lo, hi));
        f
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Box outside of which the function vanishes, if compactly supported.
    pub fn support(&self) -> Option<&(Vec<f64>, Vec<f64>)> {
        self.support.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }

    pub fn hessian_into(&self, x: &[f64], out: &mut [f64]) {
        (self.hessian)(x, out)
    }

    /// `tr(a Hess u)(x)` for row-major `a`.
    pub fn trace_a_hessian(&self, a: &[f64], x: &[f64]) -> f64 {
        let d = self.dim;
        let mut h = vec![0.0; d * d];
        self.hessian_into(x, &mut h);
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| a[i * d + j] * h[j * d + i]).sum()
    }

    /// Pointwise product `u v`.
    pub fn product(&self, other: &TestFunction) -> TestFunction {
        assert_eq!(self.dim, other.dim, "test function dimensions differ");
        let d = self.dim;
        let (u1, u2, u3) = (self.clone(), self.clone(), self.clone());
        let (v1, v2, v3) = (other.clone(), other.clone(), other.clone());
        let support = match (&self.support, &other.support) {
            (Some((l1, h1)), Some((l2, h2))) => Some((
                l1.iter().zip(l2).map(|(a, b)| a.max(*b)).collect(),
                h1.iter().zip(h2).map(|(a, b)| a.min(*b)).collect(),
            )),
            (Some(s), None) | (None, Some(s)) => Some(s.clone()),
            (None, None) => None,
        };
        let mut f = TestFunction::new(
            d,
            format!("({})*({})", self.name, other.name),
            move |x| u1.value(x) * v1.value(x),
            move |x, g| {
                let mut gu = vec![0.0; d];
                let mut gv = vec![0.0; d];
                u2.grad_into(x, &mut gu);
                v2.grad_into(x, &mut gv);
                let (a, b) = (u2.value(x), v2.value(x));
                for k in 0..d {
                    g[k] = gu[k] * b + a * gv[k];
                }
            },
            move |x, h| {
                let mut gu = vec![0.0; d];
                let mut gv = vec![0.0; d];
                let mut hu = vec![0.0; d * d];
                let mut hv = vec![0.0; d * d];
                u3.grad_into(x, &mut gu);
                v3.grad_into(x, &mut gv);
                u3.hessian_into(x, &mut hu);
                v3.hessian_into(x, &mut hv);
                let (a, b) = (u3.value(x), v3.value(x));
                for i in 0..d {
                    for j in 0..d {
                        h[i * d + j] = hu[i * d + j] * b + a * hv[i * d + j] + gu[i] * gv[j] + gv[i] * gu[j];
                    }
                }
            },
        );
        f.support = support;
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: &TestFunction, x: &[f64]) {
        let d = f.dim();
        let eps = 1e-5;
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        f.grad_into(x, &mut g);
        f.hessian_into(x, &mut h);
        for k in 0..d {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[k] += eps;
            xm[k] -= eps;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "{} grad {k}: {fd} vs {}", f.name(), g[k]);
            let mut gp = vec![0.0; d];
            let mut gm = vec![0.0; d];
            f.grad_into(&xp, &mut gp);
            f.grad_into(&xm, &mut gm);
            for j in 0..d {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                let hv = h[k * d + j];
                assert!((fd - hv).abs() < 1e-5 * (1.0 + hv.abs()), "{} hess {k}{j}: {fd} vs {hv}", f.name());
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = [0.3, -0.2];
        fd_check(&TestFunction::power(2, 0, 3), &x);
        fd_check(&TestFunction::coordinate(2, 1), &x);
        fd_check(&TestFunction::bump(vec![0.1, 0.0], 1.0), &x);
        let p = TestFunction::power(2, 0, 3).product(&TestFunction::bump(vec![0.0, 0.0], 1.5));
        fd_check(&p, &x);
        fd_check(&p.product(&TestFunction::coordinate(2, 1)), &x);
    }

    #[test]
    fn bump_vanishes_outside_its_box() {
        let b = TestFunction::bump(vec![0.0], 1.0);
        assert_eq!(b.value(&[1.0]), 0.0);
        assert_eq!(b.value(&[-2.0]), 0.0);
        assert!((b.value(&[0.0]) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(b.support().unwrap(), &(vec![-1.0], vec![1.0]));
    }

    #[test]
    fn trace_with_identity_is_laplacian() {
        let f = TestFunction::power(2, 0, 2).product(&TestFunction::power(2, 1, 2));
        // Laplacian of x^2 y^2 = 2 y^2 + 2 x^2
        let x = [0.5, 2.0];
        let l = f.trace_a_hessian(&[1.0, 0.0, 0.0, 1.0], &x);
        assert!((l - (2.0 * 4.0 + 2.0 * 0.25)).abs() < 1e-12);
    }
}

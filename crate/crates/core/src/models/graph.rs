//! Continuous-time random walks on finite graphs.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;

type IntensityFn = dyn Fn(f64, usize, usize) -> f64 + Send + Sync;

/// Finite graph with symmetric adjacency and jump intensities `j(t, x; y)`
/// on its edges.
#[derive(Clone)]
pub struct GraphWalkSpec {
    neighbours: Vec<Vec<usize>>,
    intensity: Arc<IntensityFn>,
    time_homogeneous: bool,
    rate_bound: Option<f64>,
    initial: Vec<f64>,
    pub tag: String,
}

impl fmt::Debug for GraphWalkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphWalkSpec")
            .field("n_states", &self.n_states())
            .field("time_homogeneous", &self.time_homogeneous)
            .field("tag", &self.tag)
            .finish()
    }
}

fn check_distribution(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(param(format!("distribution has {} entries, graph has {n}", p.len())));
    }
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(param("distribution entries must be finite and nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(param(format!("distribution sums to {total}")));
    }
    Ok(())
}

impl GraphWalkSpec {
    /// `edges` are undirected pairs; `intensity` is only queried on edges
    /// and must be nonnegative there.
    pub fn new<F>(
        n_states: usize,
        edges: &[(usize, usize)],
        intensity: F,
        time_homogeneous: bool,
        initial: Vec<f64>,
        tag: impl Into<String>,
    ) -> Result<Self>
    where
        F: Fn(f64, usize, usize) -> f64 + Send + Sync + 'static,
    {
        if n_states == 0 {
            return Err(param("graph needs at least one state"));
        }
        let mut neighbours = vec![Vec::new(); n_states];
        for &(x, y) in edges {
            if x >= n_states || y >= n_states {
                return Err(param(format!("edge ({x},{y}) out of range")));
            }
            if x == y {
                return Err(param(format!("self-loop at {x}")));
            }
            neighbours[x].push(y);
            neighbours[y].push(x);
        }
        for nb in &mut neighbours {
            nb.sort_unstable();
            nb.dedup();
        }
        check_distribution(&initial, n_states)?;
        let spec = Self {
            neighbours,
            intensity: Arc::new(intensity),
            time_homogeneous,
            rate_bound: None,
            initial,
            tag: tag.into(),
        };
        if !spec.is_irreducible() {
            return Err(param("adjacency is not connected"));
        }
        Ok(spec)
    }

    /// Upper bound on every total out-rate, used for thinning when the
    /// intensities depend on time.
    pub fn with_rate_bound(mut self, bound: f64) -> Self {
        self.rate_bound = Some(bound);
        self
    }

    pub fn with_initial(mut self, initial: Vec<f64>) -> Result<Self> {
        check_distribution(&initial, self.n_states())?;
        self.initial = initial;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.neighbours.len()
    }
    pub fn neighbours(&self, x: usize) -> &[usize] {
        &self.neighbours[x]
    }
    pub fn initial(&self) -> &[f64] {
        &self.initial
    }
    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }
    pub fn rate_bound(&self) -> Option<f64> {
        self.rate_bound
    }

    pub fn is_edge(&self, x: usize, y: usize) -> bool {
        x < self.n_states() && self.neighbours[x].binary_search(&y).is_ok()
    }

    /// Directed edges `(x, y)` in lexicographic order.
    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        self.neighbours
            .iter()
            .enumerate()
            .flat_map(|(x, nb)| nb.iter().map(move |&y| (x, y)))
            .collect()
    }

    /// `j(t, x; y)`, zero off the edge set.
    pub fn intensity(&self, t: f64, x: usize, y: usize) -> f64 {
        if self.is_edge(x, y) {
            (self.intensity)(t, x, y)
        } else {
            0.0
        }
    }

    pub fn out_rate(&self, t: f64, x: usize) -> f64 {
        self.neighbours[x].iter().map(|&y| (self.intensity)(t, x, y)).sum()
    }

    /// Row-major generator matrix `Q(t)`; rows sum to zero.
    pub fn generator(&self, t: f64) -> Vec<f64> {
        let n = self.n_states();
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            let mut total = 0.0;
            for &y in &self.neighbours[x] {
                let r = (self.intensity)(t, x, y);
                q[x * n + y] = r;
                total += r;
            }
            q[x * n + x] = -total;
        }
        q
    }

    /// Errors on a negative or non-finite intensity at time `t`.
    pub fn check_intensities(&self, t: f64) -> Result<()> {
        for (x, y) in self.directed_edges() {
            let r = (self.intensity)(t, x, y);
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::Domain(format!("intensity j({t},{x};{y}) = {r}")));
            }
        }
        Ok(())
    }

    fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &self.neighbours[x] {
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Same graph and initial law, new intensities.
    pub fn with_intensity<F>(&self, intensity: F, time_homogeneous: bool, tag: impl Into<String>) -> Self
    where
        F: Fn(f64, usize, usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            neighbours: self.neighbours.clone(),
            intensity: Arc::new(intensity),
            time_homogeneous,
            rate_bound: None,
            initial: self.initial.clone(),
            tag: tag.into(),
        }
    }

    /// Vertex relabelling: state `x` of `self` becomes `perm[x]`.
    pub fn relabelled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n_states();
        let mut inv = vec![usize::MAX; n];
        for (x, &px) in perm.iter().enumerate() {
            if px >= n || inv[px] != usize::MAX {
                return Err(param("not a permutation"));
            }
            inv[px] = x;
        }
        if perm.len() != n {
            return Err(param("permutation length mismatch"));
        }
        let edges: Vec<(usize, usize)> = self
            .directed_edges()
            .into_iter()
            .filter(|(x, y)| x < y)
            .map(|(x, y)| (perm[x], perm[y]))
            .collect();
        let inner = self.intensity.clone();
        let initial = (0..n).map(|px| self.initial[inv[px]]).collect();
        let mut out = GraphWalkSpec::new(
            n,
            &edges,
            move |t, x, y| inner(t, inv[x], inv[y]),
            self.time_homogeneous,
            initial,
            format!("{}|relabelled", self.tag),
        )?;
        out.rate_bound = self.rate_bound;
        Ok(out)
    }
}

fn cycle_edges(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|x| (x, (x + 1) % n)).collect()
}

/// Cycle `Z_n` with clockwise rate `rate_cw` (to `x + 1`) and
/// counter-clockwise rate `rate_ccw` (to `x - 1`), uniform start.
pub fn biased_cycle_walk(n: usize, rate_cw: f64, rate_ccw: f64) -> Result<GraphWalkSpec> {
    if n < 3 {
        return Err(param("cycle needs n >= 3"));
    }
    if !(rate_cw >= 0.0 && rate_ccw >= 0.0) || rate_cw + rate_ccw == 0.0 {
        return Err(param("cycle rates must be nonnegative and not both zero"));
    }
    if !(rate_cw.is_finite() && rate_ccw.is_finite()) {
        return Err(param("cycle rates must be finite"));
    }
    GraphWalkSpec::new(
        n,
        &cycle_edges(n),
        move |_, x, y| if y == (x + 1) % n { rate_cw } else { rate_ccw },
        true,
        vec![1.0 / n as f64; n],
        format!("cycle{n}({rate_cw},{rate_ccw})"),
    )
}

/// Cycle with all rates zero; used to exercise degenerate walks.
pub fn frozen_cycle_walk(n: usize) -> Result<GraphWalkSpec> {
    if n < 3 {
        return Err(param("cycle needs n >= 3"));
    }
    GraphWalkSpec::new(n, &cycle_edges(n), |_, _, _| 0.0, true, vec![1.0 / n as f64; n], format!("frozen{n}"))
}

/// Rate-one walk along every edge; reversible for the counting measure.
pub fn counting_walk(n_states: usize, edges: &[(usize, usize)], initial: Vec<f64>) -> Result<GraphWalkSpec> {
    GraphWalkSpec::new(n_states, edges, |_, _, _| 1.0, true, initial, "counting")
}

/// Two states `0 <-> 1` with rates `j(0;1) = up`, `j(1;0) = down`.
pub fn two_state_walk(up: f64, down: f64, initial: Vec<f64>) -> Result<GraphWalkSpec> {
    if !(up >= 0.0 && down >= 0.0) {
        return Err(param("rates must be nonnegative"));
    }
    GraphWalkSpec::new(
        2,
        &[(0, 1)],
        move |_, x, _| if x == 0 { up } else { down },
        true,
        initial,
        format!("two-state({up},{down})"),
    )
}

/// Marginal laws tabulated on a grid, linearly interpolated in between.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable {
    grid: TimeGrid,
    probs: Vec<Vec<f64>>,
}

impl MarginalTable {
    pub fn new(grid: TimeGrid, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != grid.n_nodes() {
            return Err(param("one probability vector per grid node expected"));
        }
        let n = probs[0].len();
        if probs.iter().any(|p| p.len() != n) {
            return Err(param("ragged marginal table"));
        }
        Ok(Self { grid, probs })
    }

    /// Constant-in-time table.
    pub fn constant(grid: TimeGrid, p: Vec<f64>) -> Self {
        Self { grid, probs: vec![p; grid.n_nodes()] }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.probs[i]
    }

    pub fn n_states(&self) -> usize {
        self.probs[0].len()
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        let dt = self.grid.dt();
        let n = self.grid.n_steps();
        let s = (t / dt).clamp(0.0, n as f64);
        let i = (s.floor() as usize).min(n);
        let w = s - i as f64;
        if i == n || w == 0.0 {
            return self.probs[i].clone();
        }
        self.probs[i]
            .iter()
            .zip(&self.probs[i + 1])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    /// `s -> p_{T - s}`.
    pub fn flipped(&self) -> Self {
        let mut probs = self.probs.clone();
        probs.reverse();
        Self { grid: self.grid, probs }
    }
}

/// Solves `dp/dt = p Q(t)` by RK4 with `substeps` steps per grid interval.
pub fn forward_marginals(spec: &GraphWalkSpec, grid: &TimeGrid, substeps: usize) -> MarginalTable {
    let n = spec.n_states();
    let substeps = substeps.max(1);
    let h = grid.dt() / substeps as f64;
    let rhs = |t: f64, p: &[f64]| -> Vec<f64> {
        let q = spec.generator(t);
        (0..n).map(|y| (0..n).map(|x| p[x] * q[x * n + y]).sum()).collect()
    };
    let mut p = spec.initial().to_vec();
    let mut table = vec![p.clone()];
    for i in 0..grid.n_steps() {
        let t0 = grid.node(i);
        for k in 0..substeps {
            let t = t0 + k as f64 * h;
            let k1 = rhs(t, &p);
            let p2: Vec<f64> = p.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = rhs(t + 0.5 * h, &p2);
            let p3: Vec<f64> = p.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = rhs(t + 0.5 * h, &p3);
            let p4: Vec<f64> = p.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = rhs(t + h, &p4);
            for x in 0..n {
                p[x] += h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x]);
            }
        }
        table.push(p.clone());
    }
    MarginalTable { grid: *grid, probs: table }
}

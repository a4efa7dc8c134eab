//! Dense diffusion ensembles, jump-path ensembles and their on-disk formats.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;

/// `n x dim` row-major sample matrix (one row per path).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(param("sample data length is not a multiple of dim"));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(param("ragged sample rows"));
        }
        Self::new(dim, rows.concat())
    }

    /// One-dimensional samples.
    pub fn from_scalars(values: &[f64]) -> Self {
        Self { dim: 1, data: values.to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Coordinate `k` of every row.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Unbiased sample covariance, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += (r[i] - m[i]) * (r[j] - m[j]);
                }
            }
        }
        let denom = (self.len() as f64 - 1.0).max(1.0);
        c.iter_mut().for_each(|a| *a /= denom);
        c
    }
}

/// Monte-Carlo sample of discretised trajectories.
///
/// Storage is row-major `n_paths x (n_steps + 1) x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    dim: usize,
    n_paths: usize,
    seed: u64,
    model_tag: String,
    data: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(
        grid: TimeGrid,
        dim: usize,
        seed: u64,
        model_tag: impl Into<String>,
        data: Vec<f64>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(param("dim must be positive"));
        }
        let per_path = grid.n_nodes() * dim;
        if data.is_empty() || data.len() % per_path != 0 {
            return Err(param(format!(
                "tensor length {} is not a positive multiple of {per_path}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let path = pos / per_path;
            let step = (pos % per_path) / dim;
            return Err(Error::Simulation { path, step });
        }
        Ok(Self {
            grid,
            dim,
            n_paths: data.len() / per_path,
            seed,
            model_tag: model_tag.into(),
            data,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn per_path(&self) -> usize {
        self.grid.n_nodes() * self.dim
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let w = self.per_path();
        &self.data[p * w..(p + 1) * w]
    }

    /// Position of path `p` at grid node `i`.
    pub fn point(&self, p: usize, i: usize) -> &[f64] {
        let start = p * self.per_path() + i * self.dim;
        &self.data[start..start + self.dim]
    }

    /// All positions at grid node `i`.
    pub fn slice_at(&self, i: usize) -> SampleMatrix {
        let mut out = Vec::with_capacity(self.n_paths * self.dim);
        for p in 0..self.n_paths {
            out.extend_from_slice(self.point(p, i));
        }
        SampleMatrix { dim: self.dim, data: out }
    }

    /// Positions at the grid node nearest to `t`.
    pub fn marginal_slice(&self, t: f64) -> Result<SampleMatrix> {
        Ok(self.slice_at(self.grid.nearest_index(t)?))
    }

    /// The first `n` paths (all of them if `n >= n_paths`).
    pub fn first_paths(&self, n: usize) -> PathEnsemble {
        let n = n.min(self.n_paths).max(1);
        PathEnsemble {
            grid: self.grid,
            dim: self.dim,
            n_paths: n,
            seed: self.seed,
            model_tag: self.model_tag.clone(),
            data: self.data[..n * self.per_path()].to_vec(),
        }
    }

    /// Time reversal of every path: node `i` of the result is node
    /// `n_steps - i` of `self`.
    pub fn flip(&self) -> PathEnsemble {
        let d = self.dim;
        let n = self.grid.n_steps();
        let mut data = Vec::with_capacity(self.data.len());
        for p in 0..self.n_paths {
            let path = self.path(p);
            for i in 0..=n {
                let j = n - i;
                data.extend_from_slice(&path[j * d..(j + 1) * d]);
            }
        }
        let model_tag = match self.model_tag.strip_suffix("|flipped") {
            Some(orig) => orig.to_string(),
            None => format!("{}|flipped", self.model_tag),
        };
        PathEnsemble {
            grid: self.grid,
            dim: d,
            n_paths: self.n_paths,
            seed: self.seed,
            model_tag,
            data,
        }
    }

    const MAGIC: &'static [u8; 8] = b"TREVENS1";

    /// Binary container: magic, then little-endian `dim, n_paths, n_steps`
    /// (u64), `horizon` (f64), `seed` (u64), tag length (u64) and UTF-8 tag,
    /// followed by the row-major tensor as f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.n_paths as u64).to_le_bytes())?;
        w.write_all(&(self.grid.n_steps() as u64).to_le_bytes())?;
        w.write_all(&self.grid.horizon().to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.model_tag.len() as u64).to_le_bytes())?;
        w.write_all(self.model_tag.as_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut word = [0u8; 8];
        let mut next_u64 = |r: &mut R| -> Result<u64> {
            r.read_exact(&mut word)?;
            Ok(u64::from_le_bytes(word))
        };
        let dim = next_u64(&mut r)? as usize;
        let n_paths = next_u64(&mut r)? as usize;
        let n_steps = next_u64(&mut r)? as usize;
        let horizon = f64::from_bits(next_u64(&mut r)?);
        let seed = next_u64(&mut r)?;
        let tag_len = next_u64(&mut r)? as usize;
        if tag_len > 1 << 20 {
            return Err(Error::Format("model tag too long".into()));
        }
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let tag = String::from_utf8(tag).map_err(|e| Error::Format(e.to_string()))?;
        let grid = TimeGrid::new(horizon, n_steps)?;
        let count = n_paths
            .checked_mul(grid.n_nodes())
            .and_then(|v| v.checked_mul(dim))
            .ok_or_else(|| Error::Format("tensor size overflow".into()))?;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != count * 8 {
            return Err(Error::Format(format!(
                "expected {} tensor bytes, found {}",
                count * 8,
                raw.len()
            )));
        }
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PathEnsemble::new(grid, dim, seed, tag, data)
    }

    /// CSV with columns `path_id,t,x_1..x_dim`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x_{k}")).collect();
        writeln!(w, "path_id,t,{}", header.join(","))?;
        for p in 0..self.n_paths {
            for i in 0..self.grid.n_nodes() {
                write!(w, "{p},{}", self.grid.node(i))?;
                for v in self.point(p, i) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// One jump of a graph walk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub initial: usize,
    pub events: Vec<JumpEvent>,
}

impl JumpPath {
    /// Cadlag state at time `t`: an event at exactly `t` has already fired.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.events.partition_point(|e| e.time <= t);
        if k == 0 {
            self.initial
        } else {
            self.events[k - 1].to
        }
    }
}

/// Ensemble of continuous-time graph walk paths on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPathEnsemble {
    pub horizon: f64,
    pub n_states: usize,
    pub seed: u64,
    pub paths: Vec<JumpPath>,
}

impl JumpPathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Checks event ordering, chaining and that each jump is an edge.
    pub fn validate(&self, is_edge: impl Fn(usize, usize) -> bool) -> Result<()> {
        for (p, path) in self.paths.iter().enumerate() {
            let mut state = path.initial;
            let mut last = 0.0;
            for e in &path.events {
                if !(e.time > last && e.time <= self.horizon) {
                    return Err(Error::Consistency(format!(
                        "path {p}: event time {} out of order",
                        e.time
                    )));
                }
                if e.from != state || !is_edge(e.from, e.to) {
                    return Err(Error::Consistency(format!(
                        "path {p}: invalid jump {} -> {}",
                        e.from, e.to
                    )));
                }
                state = e.to;
                last = e.time;
            }
        }
        Ok(())
    }

    /// Normalised histogram of cadlag states at `t`.
    pub fn marginal(&self, t: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(param(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let mut hist = vec![0.0; self.n_states];
        for path in &self.paths {
            hist[path.state_at(t)] += 1.0;
        }
        let n = self.paths.len() as f64;
        hist.iter_mut().for_each(|h| *h /= n);
        Ok(hist)
    }

    pub fn event_counts(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.events.len()).collect()
    }
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Check, DensitySource, ExperimentConfig};
use crate::density::{
    empirical_marginal_table, exact_flow_density, Bandwidth, DensityRatio, KdeFlow, SharedDensity,
};
use crate::ensemble::{JumpPathEnsemble, PathEnsemble, SampleMatrix};
use crate::entropy::{current_osmosis_decomposition, heat_flow_dissipation, rw_relative_entropy, EntropyReport, FisherReport};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::models::{forward_marginals, BuiltModel, DiffusionModel, GraphWalkSpec, InitialLaw, MarginalTable};
use crate::reversal::{osmotic_residual, reversed_jump_intensities, Reversal, ReversedWalk};
use crate::simulate::{ctmc_simulate, euler_maruyama, SimConfig};
use crate::verify::{
    carre_du_champ_estimate, continuity_residual, detailed_balance_residual, graph_ibp_residual, ibp_residual,
    ks_per_coordinate, nelson_forward_derivative, two_sample_energy, Generators, ProbeBox, ResidualReport, Stencil,
    TestFunction, GRAPH_TOL,
};

/// Result of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub check: String,
    pub pass: bool,
    pub details: Value,
}

/// Files written so far, relative to the output directory.
#[derive(Debug, Default)]
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn files(&self) -> Vec<String> {
        let mut f = self.files.clone();
        f.sort();
        f
    }
}

fn all_pass(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.pass)
}

/// Reversed-drift and velocity probe times: quarters of the horizon.
fn probe_times(grid: &TimeGrid) -> Vec<f64> {
    (0..=4).map(|k| grid.node(grid.n_steps() * k / 4)).collect()
}

fn probe_lattice(center: &[f64], half_width: f64) -> Result<ProbeBox> {
    let d = center.len();
    let per_axis = match d {
        1 => 25,
        2 | 3 => 5,
        4..=6 => 3,
        _ => 1,
    };
    ProbeBox::new(
        center.iter().map(|c| c - half_width).collect(),
        center.iter().map(|c| c + half_width).collect(),
        per_axis,
    )
}

fn fmt_row(out: &mut String, values: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v}");
    }
}

/// Per-node mean and variance of each coordinate.
pub fn moment_table(e: &PathEnsemble) -> String {
    let d = e.dim();
    let mut s = String::from("t");
    for k in 1..=d {
        let _ = write!(s, ",mean_{k}");
    }
    for k in 1..=d {
        let _ = write!(s, ",var_{k}");
    }
    s.push('\n');
    for i in 0..e.grid().n_nodes() {
        let slice = e.slice_at(i);
        let mean = slice.mean();
        let cov = slice.covariance();
        let mut row = vec![e.grid().node(i)];
        row.extend(&mean);
        row.extend((0..d).map(|k| cov[k * d + k]));
        fmt_row(&mut s, row);
        s.push('\n');
    }
    s
}

/// Diffusion experiment state; stages are computed on demand.
pub struct DiffusionPipeline {
    pub cfg: ExperimentConfig,
    pub model: DiffusionModel,
    pub grid: TimeGrid,
    pub ensemble: Arc<PathEnsemble>,
    pub density: SharedDensity,
    pub reversal: Reversal,
}

impl DiffusionPipeline {
    pub fn new(cfg: &ExperimentConfig, model: DiffusionModel) -> Result<Self> {
        let grid = cfg.time_grid()?;
        let sim = SimConfig::new(cfg.n_paths, cfg.seed, grid)?;
        let ensemble = Arc::new(euler_maruyama(&model.spec, &sim)?);
        let density: SharedDensity = match cfg.density {
            DensitySource::Exact => {
                let flow = model.flow.as_ref().ok_or_else(|| {
                    Error::Config("density `exact` needs a linear model with a Gaussian initial law".into())
                })?;
                Arc::new(exact_flow_density(flow)?.with_grid_cache(&grid)?)
            }
            DensitySource::Kde => {
                Arc::new(KdeFlow::new(Arc::new(ensemble.first_paths(cfg.kde_samples)), Bandwidth::Silverman))
            }
        };
        let reversal = Reversal::build(&model.spec.drift, &model.spec, density.clone(), grid.horizon(), &model.reference)?;
        Ok(Self { cfg: cfg.clone(), model, grid, ensemble, density, reversal })
    }

    pub fn write_ensemble(&self, art: &mut Artifacts) -> Result<()> {
        let mut buf = Vec::new();
        self.ensemble.write_binary(&mut buf)?;
        art.write("ensemble.bin", &buf)?;
        art.write("moments.csv", moment_table(&self.ensemble).as_bytes())
    }

    fn center(&self) -> Vec<f64> {
        self.ensemble.slice_at(0).mean()
    }

    /// Reversed drift and velocity decomposition on a probe lattice.
    pub fn reversed_drift_table(&self) -> Result<String> {
        let d = self.model.spec.dim();
        let lattice = probe_lattice(&vec![0.0; d], 3.0)?.points();
        let mut s = String::from("t");
        for k in 1..=d {
            let _ = write!(s, ",x_{k}");
        }
        for name in ["b_rev", "v_fwd", "v_bwd", "v_cu", "v_os"] {
            for k in 1..=d {
                let _ = write!(s, ",{name}_{k}");
            }
        }
        s.push_str(",supported\n");
        let vel = &self.reversal.velocities;
        for t in probe_times(&self.grid) {
            for x in &lattice {
                let ev = self.reversal.reversed.evaluate(t, x);
                let mut row = vec![t];
                row.extend(x);
                row.extend(&ev.value);
                for f in [&vel.v_fwd, &vel.v_bwd, &vel.v_cu, &vel.v_os] {
                    row.extend(f.eval(t, x));
                }
                fmt_row(&mut s, row);
                let _ = writeln!(s, ",{}", u8::from(!ev.below_floor));
            }
        }
        Ok(s)
    }

    pub fn entropy(&self) -> Result<(EntropyReport, Option<FisherReport>)> {
        let sub = self.ensemble.first_paths(self.cfg.entropy_paths);
        let report = current_osmosis_decomposition(&self.model.spec.drift, self.density.clone(), &self.model.reference, &sub)?;
        let fisher = match (&self.model.flow, self.model.reference.gaussian_reference()) {
            (Some(flow), Some(m)) => {
                let a = self.constant_diffusion()?;
                Some(heat_flow_dissipation(flow, m, &a, &self.grid)?)
            }
            _ => None,
        };
        Ok((report, fisher))
    }

    fn constant_diffusion(&self) -> Result<DMatrix<f64>> {
        let d = self.model.spec.dim();
        let a = self
            .model
            .reference
            .diffusion()
            .constant_value()
            .ok_or_else(|| Error::Config("reference diffusion matrix is not constant".into()))?;
        Ok(DMatrix::from_row_slice(d, d, a))
    }

    pub fn run_check(&self, check: Check) -> Result<CheckOutcome> {
        let details = match check {
            Check::Ibp => self.check_ibp()?,
            Check::Continuity => self.check_continuity()?,
            Check::Reversal => self.check_reversal()?,
            Check::Carre => self.check_carre()?,
            Check::Nelson => self.check_nelson()?,
            Check::Dissipation => self.check_dissipation()?,
            Check::DetailedBalance => {
                return Err(Error::Config("detailed-balance applies to walks only".into()));
            }
        };
        let pass = details["pass"].as_bool().unwrap_or(false);
        Ok(CheckOutcome { check: check.name().to_string(), pass, details })
    }

    fn battery(&self) -> Vec<(TestFunction, TestFunction)> {
        let d = self.model.spec.dim();
        let x = TestFunction::coordinate(d, 0);
        let x2 = TestFunction::power(d, 0, 2);
        let x3 = TestFunction::power(d, 0, 3);
        let one = TestFunction::constant(d, 1.0);
        let bump = TestFunction::bump(self.center(), 2.5);
        vec![
            (x.clone(), x.clone()),
            (x2.clone(), x2.clone()),
            (x2.clone(), one),
            (x3.product(&bump), x.clone()),
            (x.product(&bump), x2.clone()),
            (x2.product(&x), bump),
        ]
    }

    fn check_ibp(&self) -> Result<Value> {
        let vel = &self.reversal.velocities;
        let gen = Generators {
            v_fwd: vel.v_fwd.clone(),
            v_bwd: vel.v_bwd.clone(),
            diffusion: self.model.spec.diffusion.clone(),
        };
        let mut rows = Vec::new();
        let mut pass = true;
        for k in 1..=3 {
            let i = self.grid.n_steps() * k / 4;
            let t = self.grid.node(i);
            let slice = self.ensemble.slice_at(i);
            for (u, v) in self.battery() {
                let r = ibp_residual(&gen, t, &slice, &u, &v)?;
                pass &= r.pass;
                rows.push(json!({"t": t, "u": u.name(), "v": v.name(), "report": r}));
            }
        }
        Ok(json!({"pass": pass, "reports": rows}))
    }

    fn check_continuity(&self) -> Result<Value> {
        let coarse = TimeGrid::new(self.grid.horizon(), self.grid.n_steps().min(20))?;
        let probes = probe_lattice(&self.center(), 2.0)?;
        let mut rows = Vec::new();
        let mut pass = true;
        for order in [2u8, 4] {
            let st = Stencil::new(1e-4, order)?;
            let r = continuity_residual(self.density.as_ref(), &self.reversal.velocities.v_cu, &coarse, &probes, st)?;
            let ok = r.sup <= 1e-6;
            pass &= ok;
            rows.push(json!({"stencil_order": order, "delta": st.delta, "tolerance": 1e-6, "pass": ok, "report": r}));
        }
        Ok(json!({"pass": pass, "reports": rows}))
    }

    fn check_reversal(&self) -> Result<Value> {
        let d = self.model.spec.dim();
        // osmotic identity
        let lattice = probe_lattice(&self.center(), 2.0)?.points();
        let horizon = self.grid.horizon();
        let probes: Vec<(f64, Vec<f64>)> = [0.0, 0.5 * horizon, horizon]
            .iter()
            .flat_map(|&t| lattice.iter().map(move |x| (t, x.clone())))
            .collect();
        let ratio = DensityRatio { density: self.density.clone(), reference: self.model.reference.clone() };
        let osm = osmotic_residual(&ratio, &self.reversal.momenta, &probes);
        let osm_ok = osm.max <= 1e-9;

        // reversed simulation against the flipped forward ensemble
        let n = self.cfg.n_paths.min(if d == 1 { 5000 } else { 1000 });
        let init = match self.density.gaussian_at(horizon) {
            Some(g) => InitialLaw::Gaussian(g),
            None => InitialLaw::Samples(self.ensemble.slice_at(self.grid.n_steps())),
        };
        let spec = self.reversal.reversed.reversed_spec(init, format!("{}|reversed", self.model.spec.tag))?;
        let rev = euler_maruyama(&spec, &SimConfig::new(n, self.cfg.seed, self.grid)?)?;
        let flipped = self.ensemble.first_paths(n).flip();
        let mut slices = Vec::new();
        let mut law_ok = true;
        for k in 0..=4 {
            let i = self.grid.n_steps() * k / 4;
            let a: SampleMatrix = rev.slice_at(i);
            let b: SampleMatrix = flipped.slice_at(i);
            let e = two_sample_energy(&a, &b, self.cfg.n_perm, self.cfg.seed.wrapping_add(k as u64))?;
            let ks = ks_per_coordinate(&a, &b)?;
            law_ok &= e.p_value >= 0.01;
            slices.push(json!({"s": self.grid.node(i), "energy": e, "ks": ks}));
        }
        let diag = self.reversal.reversed.diagnostics();
        Ok(json!({
            "pass": osm_ok && law_ok,
            "osmotic": {"tolerance": 1e-9, "pass": osm_ok, "report": osm},
            "law": {"alpha": 0.01, "pass": law_ok, "n_samples": n, "slices": slices},
            "drift_diagnostics": {"below_floor": diag.below_floor, "singular": diag.singular, "capped": diag.capped},
        }))
    }

    fn increment_step(&self) -> f64 {
        let k = ((0.01 / self.grid.dt()).round() as usize).max(1);
        k as f64 * self.grid.dt()
    }

    fn check_carre(&self) -> Result<Value> {
        let d = self.model.spec.dim();
        let u = TestFunction::coordinate(d, 0);
        let h = self.increment_step();
        let i = (self.grid.n_steps() / 2).min(self.grid.n_steps() - (h / self.grid.dt()).round() as usize);
        let t = self.grid.node(i);
        let atol = (5.0 * h).max(1e-3);
        let r = carre_du_champ_estimate(&self.ensemble, &self.model.spec.diffusion, &u, &u, t, h, atol)?;
        Ok(json!({"pass": r.residual.pass, "t": t, "u": u.name(), "v": u.name(), "report": r}))
    }

    fn check_nelson(&self) -> Result<Value> {
        let d = self.model.spec.dim();
        let u = TestFunction::coordinate(d, 0);
        let x0 = self.center();
        let start = self.ensemble.slice_at(0);
        let mut dist: Vec<f64> = start
            .rows()
            .map(|x| x.iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        dist.sort_by(f64::total_cmp);
        let window = dist[dist.len() / 10].max(0.05);
        let h = self.increment_step();
        let est = nelson_forward_derivative(&self.ensemble, &u, 0.0, &x0, window, &[2.0 * h, h])?;
        let exact = self.model.spec.drift.eval(0.0, &x0)[0];
        let (se1, se2) = (est.per_h[1].2, est.per_h[0].2);
        let stderr = 2.0 * se1 + se2;
        let r = ResidualReport::new(est.value - exact, stderr, est.n_window, 3.0, 2.0 * window);
        Ok(json!({"pass": r.pass, "x0": x0, "window": window, "exact": exact, "estimate": est, "report": r}))
    }

    fn check_dissipation(&self) -> Result<Value> {
        let (Some(flow), Some(m)) = (&self.model.flow, self.model.reference.gaussian_reference()) else {
            return Err(Error::Config("dissipation needs an exact Gaussian flow".into()));
        };
        let a = self.constant_diffusion()?;
        let f = heat_flow_dissipation(flow, m, &a, &self.grid)?;
        let monotone = f.free_energy.windows(2).all(|w| w[1] <= w[0] + 1e-12);
        let ok = f.residual <= 1e-5 && monotone;
        Ok(json!({
            "pass": ok,
            "tolerance": 1e-5,
            "residual": f.residual,
            "free_energy_change": f.free_energy_change,
            "integrated_fisher": f.integrated_fisher,
            "monotone": monotone,
        }))
    }
}

/// Graph-walk experiment state.
pub struct WalkPipeline {
    pub cfg: ExperimentConfig,
    pub spec: GraphWalkSpec,
    pub grid: TimeGrid,
    pub ensemble: JumpPathEnsemble,
    pub marginals: MarginalTable,
    pub reversed: ReversedWalk,
}

impl WalkPipeline {
    pub fn new(cfg: &ExperimentConfig, spec: GraphWalkSpec) -> Result<Self> {
        let grid = cfg.time_grid()?;
        let ensemble = ctmc_simulate(&spec, grid.horizon(), cfg.n_paths, cfg.seed)?;
        let marginals = match cfg.density {
            DensitySource::Exact => forward_marginals(&spec, &grid, 8),
            DensitySource::Kde => empirical_marginal_table(&ensemble, &grid)?,
        };
        let reversed = reversed_jump_intensities(&spec, &marginals)?;
        Ok(Self { cfg: cfg.clone(), spec, grid, ensemble, marginals, reversed })
    }

    pub fn write_ensemble(&self, art: &mut Artifacts) -> Result<()> {
        let mut s = String::from("path_id,t,state\n");
        for (p, path) in self.ensemble.paths.iter().enumerate() {
            let _ = writeln!(s, "{p},0,{}", path.initial);
            for ev in &path.events {
                let _ = writeln!(s, "{p},{},{}", ev.time, ev.to);
            }
        }
        art.write("jumps.csv", s.as_bytes())?;
        art.write("marginals.csv", self.marginal_table()?.as_bytes())
    }

    fn marginal_table(&self) -> Result<String> {
        let n = self.spec.n_states();
        let mut s = String::from("t");
        for x in 0..n {
            let _ = write!(s, ",p_{x}");
        }
        for x in 0..n {
            let _ = write!(s, ",empirical_{x}");
        }
        s.push('\n');
        for t in self.grid.nodes() {
            let mut row = vec![t];
            row.extend(self.marginals.at(t));
            row.extend(self.ensemble.marginal(t)?);
            fmt_row(&mut s, row);
            s.push('\n');
        }
        Ok(s)
    }

    fn table_times(&self) -> Vec<f64> {
        probe_times(&self.grid)
    }

    /// Forward and reversed intensities per directed edge and probe time,
    /// both indexed by forward time.
    pub fn reversed_intensity_table(&self) -> String {
        let mut s = String::from("from,to,t,j_fwd,j_bwd\n");
        for t in self.table_times() {
            for (x, y) in self.spec.directed_edges() {
                let jf = self.spec.intensity(t, x, y);
                let jb = self.reversed.backward_at_forward_time(t, x, y);
                let jb = jb.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(s, "{x},{y},{t},{jf},{jb}");
            }
        }
        s
    }

    pub fn entropy(&self) -> Result<Value> {
        let h = rw_relative_entropy(&self.spec, &self.marginals, &self.grid)?;
        let h_rev = rw_relative_entropy(&self.reversed.spec, &self.reversed.marginals(), &self.grid)?;
        Ok(json!({
            "relative_entropy": h,
            "relative_entropy_reversed": h_rev,
            "reversal_defect": (h - h_rev).abs(),
            "reference": "counting walk",
        }))
    }

    pub fn run_check(&self, check: Check) -> Result<CheckOutcome> {
        let details = match check {
            Check::Ibp => self.check_ibp()?,
            Check::Reversal => self.check_reversal()?,
            Check::DetailedBalance => self.check_detailed_balance()?,
            other => return Err(Error::Config(format!("check `{}` applies to diffusions only", other.name()))),
        };
        let pass = details["pass"].as_bool().unwrap_or(false);
        Ok(CheckOutcome { check: check.name().to_string(), pass, details })
    }

    fn check_ibp(&self) -> Result<Value> {
        let n = self.spec.n_states();
        let indicator = |k: usize| (0..n).map(|x| if x == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let ramp: Vec<f64> = (0..n).map(|x| x as f64).collect();
        let wave: Vec<f64> = (0..n).map(|x| (x as f64 * 1.3).sin()).collect();
        let mut funcs: Vec<Vec<f64>> = (0..n).map(indicator).collect();
        funcs.push(ramp);
        funcs.push(wave);
        let mut max_abs: f64 = 0.0;
        let mut pass = true;
        let mut count = 0;
        for t in self.table_times() {
            let p = self.marginals.at(t);
            for u in &funcs {
                for v in &funcs {
                    let r = graph_ibp_residual(&self.spec, &self.reversed, t, &p, u, v)?;
                    max_abs = max_abs.max(r.estimate.abs());
                    pass &= r.pass;
                    count += 1;
                }
            }
        }
        Ok(json!({"pass": pass, "max_abs_residual": max_abs, "n_pairs": count, "tolerance": GRAPH_TOL}))
    }

    fn check_reversal(&self) -> Result<Value> {
        let twice = reversed_jump_intensities(&self.reversed.spec, &self.reversed.marginals())?;
        let mut involution: f64 = 0.0;
        for t in self.table_times() {
            let s = self.grid.horizon() - t;
            for (x, y) in self.spec.directed_edges() {
                let back = twice.spec.intensity(s, x, y);
                involution = involution.max((back - self.spec.intensity(t, x, y)).abs());
            }
        }
        let scale = self.spec.rate_bound().unwrap_or(1.0).max(1.0);
        let inv_ok = involution <= 1e-12 * scale;

        // reversed walk simulated from p_T against p_{T - s}
        let rev = ctmc_simulate(&self.reversed.spec, self.grid.horizon(), self.cfg.n_paths, self.cfg.seed ^ 0x5eed)?;
        let mut law_ok = true;
        let mut worst: f64 = 0.0;
        let n = self.cfg.n_paths as f64;
        for s in self.table_times() {
            let emp = rev.marginal(s)?;
            let exact = self.marginals.at(self.grid.horizon() - s);
            for (e, p) in emp.iter().zip(&exact) {
                let tol = 4.0 * (p * (1.0 - p) / n).sqrt() + 1e-3;
                worst = worst.max((e - p).abs());
                law_ok &= (e - p).abs() <= tol;
            }
        }
        Ok(json!({
            "pass": inv_ok && law_ok,
            "involution": {"max_defect": involution, "pass": inv_ok},
            "law": {"max_abs_deviation": worst, "pass": law_ok, "n_paths": self.cfg.n_paths},
        }))
    }

    fn check_detailed_balance(&self) -> Result<Value> {
        let t = self.grid.node(self.grid.n_steps() / 2);
        let m = self.marginals.at(t);
        let r = detailed_balance_residual(&m, &self.spec, t)?;
        let ok = r <= GRAPH_TOL;
        Ok(json!({"pass": ok, "t": t, "residual": r, "tolerance": GRAPH_TOL}))
    }
}

pub enum Pipeline {
    Diffusion(Box<DiffusionPipeline>),
    Walk(Box<WalkPipeline>),
}

impl Pipeline {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.model.build().map_err(|e| Error::Config(format!("model: {e}")))? {
            BuiltModel::Diffusion(m) => Ok(Pipeline::Diffusion(Box::new(DiffusionPipeline::new(cfg, m)?))),
            BuiltModel::Walk(w) => Ok(Pipeline::Walk(Box::new(WalkPipeline::new(cfg, w)?))),
        }
    }

    pub fn run_check(&self, check: Check) -> Result<CheckOutcome> {
        match self {
            Pipeline::Diffusion(p) => p.run_check(check),
            Pipeline::Walk(p) => p.run_check(check),
        }
    }

    pub fn run_checks(&self, checks: &[Check]) -> Result<Vec<CheckOutcome>> {
        checks.iter().map(|&c| self.run_check(c)).collect()
    }

    /// `simulate` stage artifacts.
    pub fn write_ensemble(&self, art: &mut Artifacts) -> Result<()> {
        match self {
            Pipeline::Diffusion(p) => p.write_ensemble(art),
            Pipeline::Walk(p) => p.write_ensemble(art),
        }
    }

    /// `reverse` stage: probe table of the reversed dynamics as CSV.
    pub fn reversed_table(&self) -> Result<(String, String)> {
        match self {
            Pipeline::Diffusion(p) => Ok(("reversed_drift.csv".into(), p.reversed_drift_table()?)),
            Pipeline::Walk(p) => Ok(("reversed_intensities.csv".into(), p.reversed_intensity_table())),
        }
    }

    /// `entropy` stage: JSON report plus the Fisher table when available.
    pub fn entropy(&self) -> Result<(Value, Option<String>)> {
        match self {
            Pipeline::Diffusion(p) => {
                let (r, f) = p.entropy()?;
                Ok((serde_json::to_value(r)?, f.map(|f| f.to_csv())))
            }
            Pipeline::Walk(p) => Ok((p.entropy()?, None)),
        }
    }
}

/// Writes every stage's artifacts plus `verify.json` and `manifest.json`;
/// returns the check outcomes.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CheckOutcome>> {
    let mut art = Artifacts::new(out)?;
    let pipe = Pipeline::new(cfg)?;
    pipe.write_ensemble(&mut art)?;
    let (name, table) = pipe.reversed_table()?;
    art.write(&name, table.as_bytes())?;
    let (entropy, fisher) = pipe.entropy()?;
    art.write_json("entropy.json", &entropy)?;
    if let Some(f) = fisher {
        art.write("fisher.csv", f.as_bytes())?;
    }
    let outcomes = pipe.run_checks(&cfg.checks)?;
    art.write_json("verify.json", &verify_document(&outcomes))?;
    write_manifest(&mut art, cfg, "run", &outcomes)?;
    Ok(outcomes)
}

pub fn verify_document(outcomes: &[CheckOutcome]) -> Value {
    json!({"all_pass": all_pass(outcomes), "checks": outcomes})
}

pub fn write_manifest(art: &mut Artifacts, cfg: &ExperimentConfig, command: &str, outcomes: &[CheckOutcome]) -> Result<()> {
    let mut files = art.files();
    files.retain(|f| f != "manifest.json");
    let manifest = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": cfg.seed,
        "config": cfg,
        "artifacts": files,
        "checks": outcomes.iter().map(|o| json!({"check": o.check, "pass": o.pass})).collect::<Vec<_>>(),
    });
    art.write_json("manifest.json", &manifest)
}

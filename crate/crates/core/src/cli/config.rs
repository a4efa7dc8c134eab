use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::models::ModelDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensitySource {
    /// Closed-form marginals (Gaussian flows, master equation for walks).
    Exact,
    /// Kernel density estimates per grid slice; empirical histograms for walks.
    Kde,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Ibp,
    Continuity,
    Reversal,
    DetailedBalance,
    Carre,
    Nelson,
    Dissipation,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Ibp,
        Check::Continuity,
        Check::Reversal,
        Check::DetailedBalance,
        Check::Carre,
        Check::Nelson,
        Check::Dissipation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Ibp => "ibp",
            Check::Continuity => "continuity",
            Check::Reversal => "reversal",
            Check::DetailedBalance => "detailed-balance",
            Check::Carre => "carre",
            Check::Nelson => "nelson",
            Check::Dissipation => "dissipation",
        }
    }

    pub fn parse(s: &str) -> Result<Check> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check `{s}`")))
    }

    pub fn description(self) -> &'static str {
        match self {
            Check::Ibp => {
                "integration by parts of the carré du champ: E[(L->u + L<-u) v + Gamma(u,v)] = 0 \
                 on a battery of test functions (exact sum over states for walks)"
            }
            Check::Continuity => "continuity equation d/dt rho + div(rho v_cu) = 0 on a probe lattice (exact flows)",
            Check::Reversal => {
                "time reversal: osmotic identity beta_os = grad log sqrt(rho) and two-sample energy test \
                 of the reversed simulation against the flipped ensemble; for walks, reversed intensities \
                 and their involution"
            }
            Check::DetailedBalance => "detailed balance m(x) j(x;y) = m(y) j(y;x) for the time-t marginal (walks)",
            Check::Carre => "carré du champ as the limit of squared increments, E[du dv]/h -> E[grad u . a grad v]",
            Check::Nelson => "stochastic forward derivative E[u(X_{t+h}) - u(X_t) | X_t = x0]/h -> L->u(x0)",
            Check::Dissipation => {
                "free-energy dissipation along the reference heat flow: F(T) - F(0) = -2 int I_a (exact flows)"
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_steps: usize,
}

fn default_kde_samples() -> usize {
    2000
}

fn default_entropy_paths() -> usize {
    2000
}

fn default_n_perm() -> usize {
    199
}

/// A reproducible experiment: model, grid, Monte-Carlo budget and checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelDescriptor,
    pub grid: GridConfig,
    pub n_paths: usize,
    pub seed: u64,
    pub density: DensitySource,
    #[serde(default)]
    pub checks: Vec<Check>,
    pub output_dir: PathBuf,
    /// Paths used to fit each KDE slice.
    #[serde(default = "default_kde_samples")]
    pub kde_samples: usize,
    /// Paths used by the entropy decomposition.
    #[serde(default = "default_entropy_paths")]
    pub entropy_paths: usize,
    /// Permutations of the two-sample test.
    #[serde(default = "default_n_perm")]
    pub n_perm: usize,
}

impl ExperimentConfig {
    /// Parses and validates; every failure is a [`Error::Config`].
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.grid.horizon.is_finite() && self.grid.horizon > 0.0) {
            return bad(format!("grid.T must be positive, got {}", self.grid.horizon));
        }
        if self.grid.n_steps == 0 {
            return bad("grid.n_steps must be at least 1".into());
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if self.kde_samples < 2 || self.entropy_paths == 0 {
            return bad("kde_samples must be >= 2 and entropy_paths >= 1".into());
        }
        let walk = matches!(self.model, ModelDescriptor::Cycle { .. });
        for c in &self.checks {
            let ok = match c {
                Check::Ibp | Check::Reversal => true,
                Check::DetailedBalance => walk,
                Check::Carre | Check::Nelson => !walk,
                Check::Continuity => !walk && self.density == DensitySource::Exact,
                Check::Dissipation => {
                    matches!(self.model, ModelDescriptor::Ou { .. }) && self.density == DensitySource::Exact
                }
            };
            if !ok {
                return bad(format!("check `{}` does not apply to this model/density", c.name()));
            }
        }
        self.model.build().map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.n_steps)
    }

    pub fn is_walk(&self) -> bool {
        matches!(self.model, ModelDescriptor::Cycle { .. })
    }
}

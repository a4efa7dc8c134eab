//! JSON model documents.
//!
//! ```json
//! {"type": "ou", "dim": 1, "init": {"mean": [1.0], "cov": [[0.5]]}}
//! {"type": "bm", "dim": 1}
//! {"type": "cycle", "n": 4, "rate_cw": 2.0, "rate_ccw": 1.0}
//! {"type": "custom", "dim": 1, "drift": {"kind": "linear", "theta": 1.0, "offset": [1.0]}}
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gaussian::{Gaussian, GaussianFlow};
use super::graph::{biased_cycle_walk, GraphWalkSpec};
use super::kolmogorov::{double_well_reference, ou_reference, DiffusionSpec, InitialLaw, KolmogorovSpec};
use crate::error::{param, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InitDescriptor {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    Point { point: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftBuiltin {
    /// `b(x) = -theta x + offset`.
    Linear { theta: f64, offset: Vec<f64> },
    /// Kolmogorov drift of the separable double-well potential.
    DoubleWell { coefficient: f64 },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelDescriptor {
    /// `dX = -X dt + dB`; default start is the stationary law.
    Ou {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<InitDescriptor>,
    },
    /// Standard Brownian motion; default start `N(0, Id)`.
    Bm {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<InitDescriptor>,
    },
    Cycle {
        n: usize,
        rate_cw: f64,
        rate_ccw: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<Vec<f64>>,
    },
    Custom {
        dim: usize,
        drift: DriftBuiltin,
        #[serde(default = "unit")]
        noise: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        init: Option<InitDescriptor>,
    },
}

/// A diffusion model ready for simulation, with its entropy reference and,
/// when the dynamics are linear with a Gaussian start, the exact flow.
#[derive(Debug, Clone)]
pub struct DiffusionModel {
    pub spec: DiffusionSpec,
    pub flow: Option<GaussianFlow>,
    pub reference: KolmogorovSpec,
}

#[derive(Debug, Clone)]
pub enum BuiltModel {
    Diffusion(DiffusionModel),
    Walk(GraphWalkSpec),
}

impl InitDescriptor {
    fn build(&self, dim: usize) -> Result<InitialLaw> {
        match self {
            InitDescriptor::Gaussian { mean, cov } => {
                if mean.len() != dim || cov.len() != dim || cov.iter().any(|r| r.len() != dim) {
                    return Err(param("initial law dimension does not match model dim"));
                }
                let c = DMatrix::from_row_slice(dim, dim, &cov.concat());
                Ok(InitialLaw::Gaussian(Gaussian::new(DVector::from_column_slice(mean), c)?))
            }
            InitDescriptor::Point { point } => {
                if point.len() != dim {
                    return Err(param("initial point dimension does not match model dim"));
                }
                Ok(InitialLaw::Point(point.clone()))
            }
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(param("dim must be at least 1"))
    } else {
        Ok(())
    }
}

fn linear_model(
    dim: usize,
    theta: f64,
    offset: Vec<f64>,
    noise: f64,
    init: InitialLaw,
    tag: &str,
) -> Result<DiffusionModel> {
    let flow = match &init {
        InitialLaw::Gaussian(g) => Some(GaussianFlow::new(g, theta, offset.clone(), noise, format!("{tag} closed form"))?),
        _ => None,
    };
    let spec = DiffusionSpec::linear(theta, offset, noise, init, tag)?;
    let (reference, _) = ou_reference(dim)?;
    Ok(DiffusionModel { spec, flow, reference })
}

impl ModelDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<BuiltModel> {
        match self {
            ModelDescriptor::Ou { dim, init } => {
                check_dim(*dim)?;
                let init = match init {
                    Some(i) => i.build(*dim)?,
                    None => InitialLaw::Gaussian(Gaussian::isotropic(vec![0.0; *dim], 0.5)?),
                };
                Ok(BuiltModel::Diffusion(linear_model(*dim, 1.0, vec![0.0; *dim], 1.0, init, "ou")?))
            }
            ModelDescriptor::Bm { dim, init } => {
                check_dim(*dim)?;
                let init = match init {
                    Some(i) => i.build(*dim)?,
                    None => InitialLaw::Gaussian(Gaussian::isotropic(vec![0.0; *dim], 1.0)?),
                };
                Ok(BuiltModel::Diffusion(linear_model(*dim, 0.0, vec![0.0; *dim], 1.0, init, "bm")?))
            }
            ModelDescriptor::Cycle { n, rate_cw, rate_ccw, initial } => {
                let mut w = biased_cycle_walk(*n, *rate_cw, *rate_ccw)?;
                if let Some(p) = initial {
                    w = w.with_initial(p.clone())?;
                }
                Ok(BuiltModel::Walk(w))
            }
            ModelDescriptor::Custom { dim, drift, noise, init } => {
                check_dim(*dim)?;
                if !(*noise > 0.0 && noise.is_finite()) {
                    return Err(param("noise must be positive"));
                }
                let init = match init {
                    Some(i) => i.build(*dim)?,
                    None => InitialLaw::Gaussian(Gaussian::isotropic(vec![0.0; *dim], 0.5)?),
                };
                match drift {
                    DriftBuiltin::Linear { theta, offset } => {
                        if offset.len() != *dim {
                            return Err(param("offset dimension does not match model dim"));
                        }
                        if *theta < 0.0 {
                            return Err(param("theta must be nonnegative"));
                        }
                        Ok(BuiltModel::Diffusion(linear_model(*dim, *theta, offset.clone(), *noise, init, "linear")?))
                    }
                    DriftBuiltin::DoubleWell { coefficient } => {
                        if *noise != 1.0 {
                            return Err(param("double well is defined for unit noise"));
                        }
                        let reference = double_well_reference(*dim, *coefficient)?;
                        let spec = reference.as_diffusion(init, "double-well")?;
                        Ok(BuiltModel::Diffusion(DiffusionModel { spec, flow: None, reference }))
                    }
                }
            }
        }
    }
}

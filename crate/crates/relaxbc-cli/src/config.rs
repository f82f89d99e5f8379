//! The single JSON document every subcommand reads.

use std::collections::BTreeMap;
use std::path::Path;

use relaxbc::gkc::SamplingSpec;
use relaxbc::harness::{ExperimentSpec, GridPolicy, NormKind, ProblemRef};
use relaxbc::solver::Grid1D;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemRef,
    #[serde(default)]
    pub gkc: SamplingSpec,
    pub asymptotic: Option<AsymptoticSection>,
    pub stiff: Option<StiffSection>,
    pub experiment: Option<ExperimentSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticSection {
    pub eps: f64,
    pub times: Vec<f64>,
    /// Sampled interval `[0, x_max]`; defaults to the support plus the distance travelled.
    pub x_max: Option<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default)]
    pub svg: bool,
}

fn default_points() -> usize {
    401
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffSection {
    pub grid: Grid1D,
    pub eps: f64,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Every `stride`-th cell goes to the snapshot CSV.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub sample_times: Vec<f64>,
}

fn default_order() -> usize {
    2
}

fn default_stride() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub eps: Vec<f64>,
    #[serde(default)]
    pub grid: GridPolicy,
    pub norms: Option<Vec<NormKind>>,
    pub t_star: Option<f64>,
    pub samples: Option<usize>,
    pub refine_tol: Option<f64>,
    /// Accepted slope interval per norm; empty means no judgement.
    #[serde(default)]
    pub bands: BTreeMap<NormKind, [f64; 2]>,
    #[serde(default)]
    pub svg: bool,
}

impl RunConfig {
    /// Parse and validate; JSON errors keep serde's line and column.
    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(a) = &self.asymptotic {
            if !(a.eps > 0.0) || a.points < 2 || a.times.iter().any(|t| !(*t >= 0.0)) {
                return Err(CliError::Config("asymptotic section needs eps > 0, points >= 2 and times >= 0".into()));
            }
        }
        if let Some(s) = &self.stiff {
            if s.stride == 0 {
                return Err(CliError::Config("stiff.stride must be positive".into()));
            }
        }
        if let Some(e) = &self.experiment {
            self.experiment_spec(e).validate()?;
            if e.bands.values().any(|[lo, hi]| !(lo <= hi)) {
                return Err(CliError::Config("every band needs lo <= hi".into()));
            }
        }
        Ok(())
    }

    pub fn experiment_spec(&self, e: &ExperimentSection) -> ExperimentSpec {
        let mut spec = ExperimentSpec::new(self.problem.clone(), e.eps.clone());
        spec.grid = e.grid.clone();
        spec.gkc = self.gkc.clone();
        if let Some(n) = &e.norms {
            spec.norms = n.clone();
        }
        if let Some(t) = e.t_star {
            spec.t_star = t;
        }
        if let Some(s) = e.samples {
            spec.samples = s;
        }
        if let Some(r) = e.refine_tol {
            spec.refine_tol = r;
        }
        spec
    }

    /// SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

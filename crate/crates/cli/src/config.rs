//! The one JSON document that drives every subcommand. Flags only override
//! the output directory, the seed and the sweep parallelism, so runs stay
//! reproducible and diffable.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use relpend::integrate::IntegratorConfig;
use relpend::model::PendulumParams;
use relpend::solver::SolverConfig;

use crate::CmdError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Problem parameters; required by every subcommand except `verify`
    /// without a twist assertion.
    pub params: Option<PendulumParams>,
    pub integrator: IntegratorConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub simulate: SimulateSection,
    pub poincare_grid: PoincareGridSection,
    pub twist: TwistSection,
    pub autonomous: AutonomousSection,
    pub sweep: SweepSection,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: None,
            integrator: IntegratorConfig::default(),
            solver: SolverConfig::default(),
            seed: 7,
            output_dir: PathBuf::from("out"),
            simulate: SimulateSection::default(),
            poincare_grid: PoincareGridSection::default(),
            twist: TwistSection::default(),
            autonomous: AutonomousSection::default(),
            sweep: SweepSection::default(),
            verify: VerifySection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub q0: f64,
    pub p0: f64,
    pub t0: f64,
    /// Final time; `null` means one forcing period.
    pub t1: Option<f64>,
    pub samples: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            q0: 0.0,
            p0: 0.0,
            t0: 0.0,
            t1: None,
            samples: 101,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoincareGridSection {
    pub nq: usize,
    pub np: usize,
    pub iterations: usize,
    /// Momentum window; `null` falls back to the strip bound.
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
}

impl Default for PoincareGridSection {
    fn default() -> Self {
        Self {
            nq: 32,
            np: 32,
            iterations: 1,
            p_min: None,
            p_max: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistSection {
    pub n_grid: usize,
    pub boundary_grid: usize,
    pub p_min: Option<f64>,
    pub p_max: Option<f64>,
    /// Optional CSV of `q,p` samples of a graph curve to intersect with its
    /// image.
    pub curve_csv: Option<PathBuf>,
}

impl Default for TwistSection {
    fn default() -> Self {
        Self {
            n_grid: 32,
            boundary_grid: 64,
            p_min: None,
            p_max: None,
            curve_csv: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutonomousSection {
    pub libration_levels: usize,
    pub running_levels: usize,
    /// Upper end of the running-energy scan; `null` means `1 + 2a + 5`.
    pub e_max: Option<f64>,
}

impl Default for AutonomousSection {
    fn default() -> Self {
        Self {
            libration_levels: 50,
            running_levels: 50,
            e_max: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub cases: Vec<SweepCase>,
    pub jobs: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCase {
    pub a: f64,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "N")]
    pub winding: i64,
    #[serde(default = "one")]
    pub forcing_scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Also assert a positive twist margin for the configured parameters.
    pub assert_twist: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CmdError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CmdError::usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| {
            CmdError::usage(format!("malformed config {}: {e}", path.display()))
        })?;
        cfg.integrator
            .validate()
            .map_err(|e| CmdError::usage(format!("bad integrator config: {e}")))?;
        cfg.solver
            .validate()
            .map_err(|e| CmdError::usage(format!("bad solver config: {e}")))?;
        Ok(cfg)
    }

    pub fn require_params(&self) -> Result<&PendulumParams, CmdError> {
        self.params
            .as_ref()
            .ok_or_else(|| CmdError::usage("this subcommand needs a \"params\" section".into()))
    }
}

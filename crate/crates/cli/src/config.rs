use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pidp_core::dynamics::{Params, State, ADMISSIBILITY_TOL};
use pidp_core::rank::{DEFAULT_RANK_TOL, DEFAULT_STRATUM_TOL, GENERIC_DEPTH, STRATUM_DEPTH};
use pidp_core::sim::{ControlSchedule, DEFAULT_BLOWUP_BOUND, DEFAULT_DT};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_adm_tol")]
    pub admissibility_tol: f64,
    /// Point evaluated by `fields`.
    #[serde(default)]
    pub state: Option<State>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub recur: RecurConfig,
    #[serde(default)]
    pub cloud: CloudConfig,
}

fn default_adm_tol() -> f64 {
    ADMISSIBILITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Indented JSON instead of a single line.
    pub pretty: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("pidp-out"),
            pretty: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingKind {
    Random,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub sampling: SamplingKind,
    /// Random sampling: number of points.
    pub samples: usize,
    /// Random sampling: ω drawn from [−omega_range, omega_range]².
    pub omega_range: f64,
    /// Grid sampling: points per θ axis.
    pub theta_points: usize,
    /// Grid sampling: (ω1, ω2) slices.
    pub omega_slices: Vec<[f64; 2]>,
    pub rank_tol: f64,
    pub stratum_tol: f64,
    pub generic_depth: usize,
    pub strata_depth: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            sampling: SamplingKind::Random,
            samples: 10_000,
            omega_range: 2.0,
            theta_points: 64,
            omega_slices: vec![[0.5, -0.5]],
            rank_tol: DEFAULT_RANK_TOL,
            stratum_tol: DEFAULT_STRATUM_TOL,
            generic_depth: GENERIC_DEPTH,
            strata_depth: STRATUM_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub z0: State,
    pub t_end: f64,
    pub dt: f64,
    pub schedule: ControlSchedule,
    pub blowup_bound: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            z0: State::new(PI - 0.1, PI, 0.0, 0.0),
            t_end: 10.0,
            dt: DEFAULT_DT,
            schedule: ControlSchedule::zero(),
            blowup_bound: DEFAULT_BLOWUP_BOUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecurConfig {
    pub z0: State,
    pub eps: f64,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for RecurConfig {
    fn default() -> Self {
        Self {
            z0: State::new(PI - 0.05, PI - 0.05, 0.0, 0.0),
            eps: 0.01,
            horizon: 60.0,
            dt: DEFAULT_DT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudConfig {
    pub z0: State,
    pub n: usize,
    pub time_budget: f64,
    pub max_segments: usize,
    pub dt: f64,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            z0: State::new(0.3, -0.2, 0.5, 0.1),
            n: 200,
            time_budget: 1.0,
            max_segments: 4,
            dt: 1e-2,
        }
    }
}

/// Sets `root.a.b.c` from `a.b.c=value`; the value is parsed as JSON and
/// taken as a string if that fails.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let Some((key, raw)) = assignment.split_once('=') else {
        bail!("override {assignment:?} is not of the form key=value");
    };
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|k| k.is_empty()) {
        bail!("override key {key:?} has an empty segment");
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for (i, k) in path.iter().enumerate() {
        let Value::Object(map) = node else {
            bail!("override {key:?}: {} is not an object", path[..i].join("."));
        };
        if i + 1 == path.len() {
            map.insert(k.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(k.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("path has at least one segment")
}

/// Reads the config file (or starts from `{}`), applies overrides and parses
/// strictly. Returns the config and its fully resolved JSON form.
pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<(RunConfig, Value)> {
    let mut root = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Value::Object(Map::new()),
    };
    for o in overrides {
        apply_override(&mut root, o)?;
    }
    let cfg: RunConfig = serde_json::from_value(root).context("invalid configuration")?;
    let resolved = serde_json::to_value(&cfg).context("serializing configuration")?;
    Ok((cfg, resolved))
}

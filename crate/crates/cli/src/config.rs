//! Run configurations: JSON-loadable, flag-overridable, echoed into
//! manifests. Unknown fields are rejected.

use islab_core::dynamics::ProcessKind;
use islab_core::lattice::{BoundaryRule, LatticeBox};
use islab_core::monotone::{ParamRelation, StateOrder};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Box plus boundary rule, as serialized in config JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub d: usize,
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
    pub boundary: BoundaryRule,
}

impl BoxSpec {
    pub fn build(&self) -> Result<(LatticeBox, BoundaryRule), CliError> {
        if self.lo.len() != self.d || self.hi.len() != self.d {
            return Err(CliError::Config(format!(
                "box corners must have length d={}",
                self.d
            )));
        }
        let b = LatticeBox::new(self.lo.clone(), self.hi.clone())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok((b, self.boundary))
    }
}

/// Parse "lo..hi[,lo..hi...]" into box corners.
pub fn parse_box_ranges(s: &str) -> Result<(Vec<i64>, Vec<i64>), CliError> {
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for part in s.split(',') {
        let (a, b) = part
            .split_once("..")
            .ok_or_else(|| CliError::Config(format!("bad box range {part:?}; want lo..hi")))?;
        lo.push(
            a.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad integer {a:?}")))?,
        );
        hi.push(
            b.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad integer {b:?}")))?,
        );
    }
    if lo.is_empty() {
        return Err(CliError::Config("empty box specification".into()));
    }
    Ok((lo, hi))
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad number {x:?}")))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    /// A single fertile individual at the origin.
    Origin,
    /// Every site fertile.
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    pub kind: ProcessKind,
    pub lambda: f64,
    pub p: f64,
    #[serde(rename = "box")]
    pub box_: BoxSpec,
    pub horizon: f64,
    pub seed: u64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default = "default_origin")]
    pub init: InitialKind,
    pub out: String,
    #[serde(default)]
    pub dump_timeline: Option<String>,
}

fn default_origin() -> InitialKind {
    InitialKind::Origin
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    IsContact,
    SpontIs,
    SpontSpont,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoupleCfg {
    pub pair: PairKind,
    pub lambda: f64,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub p1: Option<f64>,
    #[serde(default)]
    pub p2: Option<f64>,
    #[serde(rename = "box")]
    pub box_: BoxSpec,
    pub horizon: f64,
    pub trials: u64,
    pub seed0: u64,
    pub out: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonoCfg {
    #[serde(default)]
    pub process: Option<ProcessKind>,
    #[serde(default)]
    pub table: Option<String>,
    pub order: StateOrder,
    #[serde(default)]
    pub relation: Option<ParamRelation>,
    #[serde(default = "default_one")]
    pub lambda: f64,
    #[serde(default = "default_half")]
    pub p: f64,
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_one() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}
fn default_dim() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercCfg {
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub m_dep: Option<i64>,
    pub height: i64,
    pub width: i64,
    #[serde(default)]
    pub trials: u64,
    #[serde(default)]
    pub seed0: u64,
    #[serde(default)]
    pub out: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockCfg {
    pub lambda: f64,
    pub p: f64,
    pub n: i64,
    pub k: i64,
    pub gamma: f64,
    pub trials: u64,
    pub inner_trials: u64,
    pub seed0: u64,
    #[serde(default = "default_one")]
    pub horizon_mult: f64,
    #[serde(default = "default_alpha1")]
    pub alpha1: f64,
    #[serde(default = "default_alpha2")]
    pub alpha2: f64,
    #[serde(default = "default_surv_horizon")]
    pub surv_horizon: f64,
    #[serde(default)]
    pub good_event: bool,
    pub out: String,
}

fn default_alpha1() -> f64 {
    2.0
}
fn default_alpha2() -> f64 {
    2.4
}
fn default_surv_horizon() -> f64 {
    12.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCfg {
    pub kind: ProcessKind,
    pub lambdas: Vec<f64>,
    pub ps: Vec<f64>,
    #[serde(rename = "box")]
    pub box_: BoxSpec,
    pub horizon: f64,
    pub trials: u64,
    pub seed0: u64,
    /// Coupled sandwich trials per cell (0 disables the audit).
    #[serde(default)]
    pub sandwich_trials: u64,
    pub out: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualityCfg {
    pub lambda: f64,
    pub t: f64,
    #[serde(rename = "box")]
    pub box_: BoxSpec,
    pub trials: u64,
    pub seed0: u64,
    #[serde(default = "default_origin")]
    pub init: InitialKind,
    #[serde(default)]
    pub out: Option<String>,
}

/// Full per-command configuration, as echoed in manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RunConfig {
    Simulate(SimulateCfg),
    Couple(CoupleCfg),
    Mono(MonoCfg),
    Perc(PercCfg),
    Block(BlockCfg),
    Sweep(SweepCfg),
    Duality(DualityCfg),
}

/// Load a config file, reporting parse errors with line and column.
pub fn load_config(path: &str) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{path}: parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

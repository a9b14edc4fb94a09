//! Command-line front end: simulate, couple, mono, perc, block, sweep,
//! duality. All flags are also settable through a JSON config file; flags
//! override the file. Exit codes: 0 success, 2 config error, 3 invariant
//! violation detected, 4 I/O error.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use config::*;
use islab_core::dynamics::ProcessKind;
use islab_core::monotone::{ParamRelation, StateOrder};
use std::process::ExitCode;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Invariant(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Invariant(m) => write!(f, "invariant violation: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "islab", version, about = "Simulation lab for contact-like spin processes with sterile blocking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one process from a timeline and write snapshots.
    Simulate(SimulateArgs),
    /// Replay a coupled pair on shared marks and count order violations.
    Couple(CoupleArgs),
    /// Check the rate-table monotonicity criterion.
    Mono(MonoArgs),
    /// Oriented site percolation sampling and thresholds.
    Perc(PercArgs),
    /// Space-time block events and the good-event estimate.
    Block(BlockArgs),
    /// Survival-proxy parameter sweep.
    Sweep(SweepArgs),
    /// Two-sided Monte Carlo check of the self-duality identity.
    Duality(DualityArgs),
}

fn load_expected(config: &Option<String>) -> Result<Option<RunConfig>, CliError> {
    config.as_deref().map(config::load_config).transpose()
}

fn box_spec(
    from_file: Option<BoxSpec>,
    box_: &Option<String>,
    boundary: &Option<String>,
) -> Result<BoxSpec, CliError> {
    let boundary = boundary.as_deref().map(parse_boundary).transpose()?;
    let mut spec = from_file;
    if let Some(s) = box_ {
        let (lo, hi) = parse_box_ranges(s)?;
        let d = lo.len();
        spec = Some(BoxSpec {
            d,
            lo,
            hi,
            boundary: boundary
                .or(spec.map(|b| b.boundary))
                .unwrap_or(islab_core::lattice::BoundaryRule::AbsorbingEmpty),
        });
    } else if let (Some(b), Some(rule)) = (&mut spec, boundary) {
        b.boundary = rule;
    }
    spec.ok_or_else(|| CliError::Config("a box is required (--box or config file)".into()))
}

macro_rules! pick {
    ($flag:expr, $file:expr) => {
        $flag.or($file)
    };
    ($flag:expr, $file:expr, $name:literal) => {
        $flag
            .or($file)
            .ok_or_else(|| CliError::Config(concat!("--", $name, " is required").into()))
    };
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<String>,
    /// Process kind: contact, is, or spont.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Box as per-axis ranges, e.g. "-50..50" or "-8..8,-8..8".
    #[arg(long = "box")]
    box_: Option<String>,
    /// Boundary rule: absorbing or periodic.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated snapshot times.
    #[arg(long)]
    snapshots: Option<String>,
    #[arg(long, value_enum)]
    init: Option<InitialKind>,
    #[arg(long)]
    out: Option<String>,
    /// Write the full mark stream to this path.
    #[arg(long)]
    dump_timeline: Option<String>,
}

impl SimulateArgs {
    fn resolve(self) -> Result<SimulateCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Simulate(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        let f = |g: fn(&SimulateCfg) -> Option<f64>| file.as_ref().and_then(g);
        Ok(SimulateCfg {
            kind: match self.kind {
                Some(s) => parse_kind(&s)?,
                None => file
                    .as_ref()
                    .map(|c| c.kind)
                    .ok_or_else(|| CliError::Config("--kind is required".into()))?,
            },
            lambda: pick!(self.lambda, f(|c| Some(c.lambda)), "lambda")?,
            p: pick!(self.p, f(|c| Some(c.p)), "p")?,
            box_: box_spec(file.as_ref().map(|c| c.box_.clone()), &self.box_, &self.boundary)?,
            horizon: pick!(self.horizon, f(|c| Some(c.horizon)), "T")?,
            seed: pick!(self.seed, file.as_ref().map(|c| c.seed), "seed")?,
            snapshots: match self.snapshots {
                Some(s) => parse_f64_list(&s)?,
                None => file.as_ref().map(|c| c.snapshots.clone()).unwrap_or_default(),
            },
            init: self
                .init
                .or(file.as_ref().map(|c| c.init))
                .unwrap_or(InitialKind::Origin),
            out: pick!(self.out, file.as_ref().map(|c| c.out.clone()), "out")?,
            dump_timeline: self
                .dump_timeline
                .or(file.and_then(|c| c.dump_timeline)),
        })
    }
}

#[derive(Args)]
struct CoupleArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long, value_enum)]
    pair: Option<PairKind>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long = "box")]
    box_: Option<String>,
    /// Boundary rule: absorbing or periodic.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

impl CoupleArgs {
    fn resolve(self) -> Result<CoupleCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Couple(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(CoupleCfg {
            pair: pick!(self.pair, file.as_ref().map(|c| c.pair), "pair")?,
            lambda: pick!(self.lambda, file.as_ref().map(|c| c.lambda), "lambda")?,
            p: self.p.or(file.as_ref().and_then(|c| c.p)),
            p1: self.p1.or(file.as_ref().and_then(|c| c.p1)),
            p2: self.p2.or(file.as_ref().and_then(|c| c.p2)),
            box_: box_spec(file.as_ref().map(|c| c.box_.clone()), &self.box_, &self.boundary)?,
            horizon: pick!(self.horizon, file.as_ref().map(|c| c.horizon), "T")?,
            trials: pick!(self.trials, file.as_ref().map(|c| c.trials), "trials")?,
            seed0: self.seed0.or(file.as_ref().map(|c| c.seed0)).unwrap_or(0),
            out: pick!(self.out, file.map(|c| c.out), "out")?,
        })
    }
}

#[derive(Args)]
struct MonoArgs {
    #[arg(long)]
    config: Option<String>,
    /// Process kind: contact, is, or spont.
    #[arg(long)]
    process: Option<String>,
    /// JSON rate-table file (alternative to --process).
    #[arg(long)]
    table: Option<String>,
    /// State order: neg-first (-1<0<1), zero-first (0<-1<1), or partial.
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    relation: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

fn parse_kind(s: &str) -> Result<ProcessKind, CliError> {
    match s {
        "contact" => Ok(ProcessKind::Contact),
        "is" => Ok(ProcessKind::IS),
        "spont" => Ok(ProcessKind::Spont),
        _ => Err(CliError::Config(format!(
            "unknown process {s:?}; want contact, is, or spont"
        ))),
    }
}

fn parse_boundary(s: &str) -> Result<islab_core::lattice::BoundaryRule, CliError> {
    match s {
        "absorbing" => Ok(islab_core::lattice::BoundaryRule::AbsorbingEmpty),
        "periodic" => Ok(islab_core::lattice::BoundaryRule::Periodic),
        _ => Err(CliError::Config(format!(
            "unknown boundary {s:?}; want absorbing or periodic"
        ))),
    }
}

fn parse_order(s: &str) -> Result<StateOrder, CliError> {
    match s {
        "neg-first" => Ok(StateOrder::NegZeroOne),
        "zero-first" => Ok(StateOrder::ZeroNegOne),
        "partial" => Ok(StateOrder::Partial),
        "zero-one" => Ok(StateOrder::ZeroOne),
        _ => Err(CliError::Config(format!(
            "unknown order {s:?}; want neg-first, zero-first, partial, or zero-one"
        ))),
    }
}

fn parse_relation(s: &str) -> Result<ParamRelation, CliError> {
    match s {
        "same-p" => Ok(ParamRelation::SameParameter),
        "p1-le-p2" => Ok(ParamRelation::LowerLeqUpper),
        _ => Err(CliError::Config(format!(
            "unknown relation {s:?}; want same-p or p1-le-p2"
        ))),
    }
}

impl MonoArgs {
    fn resolve(self) -> Result<MonoCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Mono(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(MonoCfg {
            process: match self.process {
                Some(s) => Some(parse_kind(&s)?),
                None => file.as_ref().and_then(|c| c.process),
            },
            table: self.table.or(file.as_ref().and_then(|c| c.table.clone())),
            order: match self.order {
                Some(s) => parse_order(&s)?,
                None => file
                    .as_ref()
                    .map(|c| c.order)
                    .ok_or_else(|| CliError::Config("--order is required".into()))?,
            },
            relation: match self.relation {
                Some(s) => Some(parse_relation(&s)?),
                None => file.as_ref().and_then(|c| c.relation),
            },
            lambda: self.lambda.or(file.as_ref().map(|c| c.lambda)).unwrap_or(1.0),
            p: self.p.or(file.as_ref().map(|c| c.p)).unwrap_or(0.5),
            d: self.d.or(file.as_ref().map(|c| c.d)).unwrap_or(1),
            out: self.out.or(file.and_then(|c| c.out)),
        })
    }
}

#[derive(Args)]
struct PercArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Dependence range M for threshold output.
    #[arg(long = "M")]
    m_dep: Option<i64>,
    #[arg(long)]
    height: Option<i64>,
    #[arg(long)]
    width: Option<i64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

impl PercArgs {
    fn resolve(self) -> Result<PercCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Perc(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(PercCfg {
            p: self.p.or(file.as_ref().and_then(|c| c.p)),
            gamma: self.gamma.or(file.as_ref().and_then(|c| c.gamma)),
            m_dep: self.m_dep.or(file.as_ref().and_then(|c| c.m_dep)),
            height: pick!(self.height, file.as_ref().map(|c| c.height), "height")?,
            width: pick!(self.width, file.as_ref().map(|c| c.width), "width")?,
            trials: self.trials.or(file.as_ref().map(|c| c.trials)).unwrap_or(0),
            seed0: self.seed0.or(file.as_ref().map(|c| c.seed0)).unwrap_or(0),
            out: self.out.or(file.and_then(|c| c.out)),
        })
    }
}

#[derive(Args)]
struct BlockArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long = "N")]
    n: Option<i64>,
    #[arg(long = "K")]
    k: Option<i64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    inner_trials: Option<u64>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    horizon_mult: Option<f64>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    #[arg(long)]
    surv_horizon: Option<f64>,
    /// Also estimate the good event (slower).
    #[arg(long)]
    good_event: bool,
    #[arg(long)]
    out: Option<String>,
}

impl BlockArgs {
    fn resolve(self) -> Result<BlockCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Block(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(BlockCfg {
            lambda: pick!(self.lambda, file.as_ref().map(|c| c.lambda), "lambda")?,
            p: pick!(self.p, file.as_ref().map(|c| c.p), "p")?,
            n: pick!(self.n, file.as_ref().map(|c| c.n), "N")?,
            k: pick!(self.k, file.as_ref().map(|c| c.k), "K")?,
            gamma: pick!(self.gamma, file.as_ref().map(|c| c.gamma), "gamma")?,
            trials: pick!(self.trials, file.as_ref().map(|c| c.trials), "trials")?,
            inner_trials: pick!(
                self.inner_trials,
                file.as_ref().map(|c| c.inner_trials),
                "inner-trials"
            )?,
            seed0: self.seed0.or(file.as_ref().map(|c| c.seed0)).unwrap_or(0),
            horizon_mult: self
                .horizon_mult
                .or(file.as_ref().map(|c| c.horizon_mult))
                .unwrap_or(1.0),
            alpha1: self.alpha1.or(file.as_ref().map(|c| c.alpha1)).unwrap_or(2.0),
            alpha2: self.alpha2.or(file.as_ref().map(|c| c.alpha2)).unwrap_or(2.4),
            surv_horizon: self
                .surv_horizon
                .or(file.as_ref().map(|c| c.surv_horizon))
                .unwrap_or(12.0),
            good_event: self.good_event || file.as_ref().map(|c| c.good_event).unwrap_or(false),
            out: pick!(self.out, file.map(|c| c.out), "out")?,
        })
    }
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<String>,
    /// Process kind: contact, is, or spont.
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated birth parameters.
    #[arg(long)]
    lambdas: Option<String>,
    /// Comma-separated fertility probabilities.
    #[arg(long)]
    ps: Option<String>,
    #[arg(long = "box")]
    box_: Option<String>,
    /// Boundary rule: absorbing or periodic.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    sandwich_trials: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

impl SweepArgs {
    fn resolve(self) -> Result<SweepCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Sweep(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(SweepCfg {
            kind: match self.kind {
                Some(s) => parse_kind(&s)?,
                None => file
                    .as_ref()
                    .map(|c| c.kind)
                    .ok_or_else(|| CliError::Config("--kind is required".into()))?,
            },
            lambdas: match self.lambdas {
                Some(s) => parse_f64_list(&s)?,
                None => file
                    .as_ref()
                    .map(|c| c.lambdas.clone())
                    .ok_or_else(|| CliError::Config("--lambdas is required".into()))?,
            },
            ps: match self.ps {
                Some(s) => parse_f64_list(&s)?,
                None => file
                    .as_ref()
                    .map(|c| c.ps.clone())
                    .ok_or_else(|| CliError::Config("--ps is required".into()))?,
            },
            box_: box_spec(file.as_ref().map(|c| c.box_.clone()), &self.box_, &self.boundary)?,
            horizon: pick!(self.horizon, file.as_ref().map(|c| c.horizon), "T")?,
            trials: pick!(self.trials, file.as_ref().map(|c| c.trials), "trials")?,
            seed0: self.seed0.or(file.as_ref().map(|c| c.seed0)).unwrap_or(0),
            sandwich_trials: self
                .sandwich_trials
                .or(file.as_ref().map(|c| c.sandwich_trials))
                .unwrap_or(0),
            out: pick!(self.out, file.map(|c| c.out), "out")?,
        })
    }
}

#[derive(Args)]
struct DualityArgs {
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long = "box")]
    box_: Option<String>,
    /// Boundary rule: absorbing or periodic.
    #[arg(long)]
    boundary: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long, value_enum)]
    init: Option<InitialKind>,
    #[arg(long)]
    out: Option<String>,
}

impl DualityArgs {
    fn resolve(self) -> Result<DualityCfg, CliError> {
        let file = match load_expected(&self.config)? {
            Some(RunConfig::Duality(c)) => Some(c),
            Some(_) => return Err(CliError::Config("config file is for another command".into())),
            None => None,
        };
        Ok(DualityCfg {
            lambda: pick!(self.lambda, file.as_ref().map(|c| c.lambda), "lambda")?,
            t: pick!(self.t, file.as_ref().map(|c| c.t), "t")?,
            box_: box_spec(file.as_ref().map(|c| c.box_.clone()), &self.box_, &self.boundary)?,
            trials: pick!(self.trials, file.as_ref().map(|c| c.trials), "trials")?,
            seed0: self.seed0.or(file.as_ref().map(|c| c.seed0)).unwrap_or(0),
            init: self
                .init
                .or(file.as_ref().map(|c| c.init))
                .unwrap_or(InitialKind::Origin),
            out: self.out.or(file.and_then(|c| c.out)),
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::run_simulate(a.resolve()?),
        Command::Couple(a) => commands::run_couple(a.resolve()?),
        Command::Mono(a) => commands::run_mono(a.resolve()?),
        Command::Perc(a) => commands::run_perc(a.resolve()?),
        Command::Block(a) => commands::run_block(a.resolve()?),
        Command::Sweep(a) => commands::run_sweep(a.resolve()?),
        Command::Duality(a) => commands::run_duality(a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Invariant(_) => ExitCode::from(3),
                CliError::Io(_) => ExitCode::from(4),
            }
        }
    }
}

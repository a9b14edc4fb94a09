//! Command implementations. Each runs its computation, writes outputs
//! atomically, drops a manifest, and reports invariant breaches through the
//! exit code.

use crate::config::*;
use crate::manifest::{write_atomic, write_manifest};
use crate::CliError;
use islab_core::coupling::{
    couple_is_contact, couple_spont_is, couple_spont_spont, sandwich_violations, CoupledPair,
};
use islab_core::dynamics::{evolve, survival_proxy, ProcessKind};
use islab_core::events::{generate_split_timeline, generate_timeline};
use islab_core::lattice::Configuration;
use islab_core::monotone::{builtin_tables, check_monotone, ParamRelation, RateTableSpec};
use islab_core::percolation::{
    cluster_from_origin, dependent_threshold, sample_independent, ClusterOutcome, EvenLattice,
};
use islab_core::renorm::{block_events, duality_check, good_event, BlockGeometry, HParams};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::time::Instant;

fn core_err(e: islab_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn initial(kind: InitialKind, box_: &islab_core::lattice::LatticeBox) -> Configuration {
    match kind {
        InitialKind::Origin => {
            Configuration::singleton_origin(box_.clone()).expect("origin inside box")
        }
        InitialKind::Full => Configuration::filled(box_.clone(), 1),
    }
}

fn finish(
    config: RunConfig,
    outputs: Vec<String>,
    started: Instant,
) -> Result<(), CliError> {
    if let Some(m) = write_manifest(&config, &outputs, started.elapsed().as_secs_f64())? {
        eprintln!("manifest: {m}");
    }
    Ok(())
}

pub fn run_simulate(cfg: SimulateCfg) -> Result<(), CliError> {
    let started = Instant::now();
    let (box_, rule) = cfg.box_.build()?;
    let init = initial(cfg.init, &box_);
    let timeline = generate_timeline(&box_, rule, cfg.lambda, cfg.p, cfg.horizon, cfg.seed)
        .map_err(core_err)?;
    let traj = evolve(&init, cfg.kind, &timeline, &cfg.snapshots).map_err(core_err)?;
    let mut csv = String::new();
    write!(csv, "time").unwrap();
    for i in 1..=box_.dim() {
        write!(csv, ",x{i}").unwrap();
    }
    csv.push_str(",state\n");
    for (t, c) in &traj.snapshots {
        for idx in 0..box_.volume() {
            write!(csv, "{t}").unwrap();
            for coord in box_.site_at(idx) {
                write!(csv, ",{coord}").unwrap();
            }
            writeln!(csv, ",{}", c.states()[idx]).unwrap();
        }
    }
    write_atomic(&cfg.out, csv.as_bytes())?;
    let mut outputs = vec![cfg.out.clone()];
    if let Some(dump) = &cfg.dump_timeline {
        write_atomic(dump, timeline.dump().as_bytes())?;
        outputs.push(dump.clone());
    }
    println!(
        "kind={:?} extinction={:?} fertile_at_horizon={} sterile_at_horizon={}",
        cfg.kind, traj.extinction_time, traj.fertile_at_horizon, traj.sterile_at_horizon
    );
    finish(RunConfig::Simulate(cfg), outputs, started)
}

pub fn run_couple(cfg: CoupleCfg) -> Result<(), CliError> {
    let started = Instant::now();
    let (box_, rule) = cfg.box_.build()?;
    let init = initial(InitialKind::Origin, &box_);
    let need = |x: Option<f64>, name: &str| {
        x.ok_or_else(|| CliError::Config(format!("--{name} is required for this pair")))
    };
    let rows: Vec<(u64, CoupledPair)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| -> Result<(u64, CoupledPair), CliError> {
            let seed = cfg.seed0 + i;
            let pair = match cfg.pair {
                PairKind::IsContact => {
                    let p = need(cfg.p, "p")?;
                    let t = generate_timeline(&box_, rule, cfg.lambda, p, cfg.horizon, seed)
                        .map_err(core_err)?;
                    couple_is_contact(&init, &init, &t, &[]).map_err(core_err)?
                }
                PairKind::SpontIs => {
                    let p = need(cfg.p, "p")?;
                    let t = generate_timeline(&box_, rule, cfg.lambda, p, cfg.horizon, seed)
                        .map_err(core_err)?;
                    couple_spont_is(&init, &init, &t, &[]).map_err(core_err)?
                }
                PairKind::SpontSpont => {
                    let p1 = need(cfg.p1, "p1")?;
                    let p2 = need(cfg.p2, "p2")?;
                    let s = generate_split_timeline(
                        &box_, rule, cfg.lambda, p1, p2, cfg.horizon, seed,
                    )
                    .map_err(core_err)?;
                    couple_spont_spont(&init, &init, &s, &[]).map_err(core_err)?
                }
            };
            Ok((seed, pair))
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("seed,violations,extinct_lower,extinct_upper\n");
    let mut total_violations = 0usize;
    for (seed, pair) in &rows {
        total_violations += pair.violations.len();
        let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{seed},{},{},{}",
            pair.violations.len(),
            fmt(pair.lower_extinction),
            fmt(pair.upper_extinction)
        )
        .unwrap();
    }
    write_atomic(&cfg.out, csv.as_bytes())?;
    println!(
        "pair={:?} trials={} violations={}",
        cfg.pair, cfg.trials, total_violations
    );
    let outputs = vec![cfg.out.clone()];
    finish(RunConfig::Couple(cfg), outputs, started)?;
    if total_violations > 0 {
        return Err(CliError::Invariant(format!(
            "{total_violations} pathwise order violations"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct MonoOutput {
    pass: bool,
    relation: ParamRelation,
    lambda: f64,
    p: f64,
    failures: Vec<MonoFailure>,
}

#[derive(Serialize)]
struct MonoFailure {
    inequality: String,
    alpha: i8,
    beta: i8,
    gamma: i8,
    delta: i8,
    threshold: i64,
    lhs: String,
    rhs: String,
    lhs_value: f64,
    rhs_value: f64,
}

pub fn run_mono(cfg: MonoCfg) -> Result<(), CliError> {
    let started = Instant::now();
    let table = match (&cfg.process, &cfg.table) {
        (Some(kind), None) => builtin_tables(*kind, cfg.order, cfg.d).map_err(core_err)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("reading {path}: {e}")))?;
            let spec: RateTableSpec = serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!(
                    "{path}: parse error at line {}, column {}: {e}",
                    e.line(),
                    e.column()
                ))
            })?;
            spec.build().map_err(core_err)?
        }
        _ => {
            return Err(CliError::Config(
                "give exactly one of --process or --table".into(),
            ))
        }
    };
    let relation = cfg.relation.unwrap_or(ParamRelation::SameParameter);
    let verdict = check_monotone(&table, &table, relation).map_err(core_err)?;
    let out = MonoOutput {
        pass: verdict.pass,
        relation,
        lambda: cfg.lambda,
        p: cfg.p,
        failures: verdict
            .failures
            .iter()
            .map(|f| MonoFailure {
                inequality: format!("{:?}", f.inequality),
                alpha: f.alpha,
                beta: f.beta,
                gamma: f.gamma,
                delta: f.delta,
                threshold: f.threshold,
                lhs: f.lhs_text.clone(),
                rhs: f.rhs_text.clone(),
                lhs_value: f.lhs.eval(cfg.lambda, cfg.p),
                rhs_value: f.rhs.eval(cfg.lambda, cfg.p),
            })
            .collect(),
    };
    if verdict.pass {
        println!("PASS: rate tables admit an order-preserving coupling");
    } else {
        println!("FAIL: {} inequality instance(s) violated", out.failures.len());
        for f in out.failures.iter().take(4) {
            println!(
                "  {} at (alpha,beta)=({},{}), (gamma,delta)=({},{}), threshold {}: {} > {}",
                f.inequality, f.alpha, f.beta, f.gamma, f.delta, f.threshold, f.lhs, f.rhs
            );
        }
    }
    let json = serde_json::to_string_pretty(&out).map_err(|e| CliError::Io(e.to_string()))?;
    let outputs = if let Some(path) = &cfg.out {
        write_atomic(path, json.as_bytes())?;
        vec![path.clone()]
    } else {
        println!("{json}");
        vec![]
    };
    finish(RunConfig::Mono(cfg), outputs, started)
}

pub fn run_perc(cfg: PercCfg) -> Result<(), CliError> {
    let started = Instant::now();
    if let Some(m) = cfg.m_dep {
        let (value, (base, exponent)) = dependent_threshold(m);
        let ok = cfg.gamma.map(|g| g <= value);
        println!(
            "{}",
            serde_json::json!({
                "m": m, "threshold": value, "base": base, "exponent": exponent,
                "gamma": cfg.gamma, "gamma_below_threshold": ok,
            })
        );
    }
    let mut outputs = Vec::new();
    if let Some(p) = cfg.p {
        if cfg.trials == 0 {
            return Err(CliError::Config("need --trials > 0 for sampling".into()));
        }
        let lat = EvenLattice::new(cfg.height, cfg.width).map_err(core_err)?;
        let rows: Vec<(u64, bool, usize)> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| -> Result<_, CliError> {
                let seed = cfg.seed0 + i;
                let f = sample_independent(&lat, p, seed).map_err(core_err)?;
                let c = cluster_from_origin(&f, usize::MAX);
                Ok((seed, c.outcome == ClusterOutcome::ReachedTop, c.size))
            })
            .collect::<Result<_, _>>()?;
        let mut csv = String::from("seed,reached_top,cluster_size\n");
        let mut hits = 0usize;
        for (seed, top, size) in &rows {
            hits += usize::from(*top);
            writeln!(csv, "{seed},{},{size}", u8::from(*top)).unwrap();
        }
        let out = cfg
            .out
            .clone()
            .ok_or_else(|| CliError::Config("--out is required for sampling".into()))?;
        write_atomic(&out, csv.as_bytes())?;
        outputs.push(out);
        println!(
            "p={p} height={} trials={} reach_top={}",
            cfg.height,
            cfg.trials,
            hits as f64 / cfg.trials as f64
        );
    }
    finish(RunConfig::Perc(cfg), outputs, started)
}

pub fn run_block(cfg: BlockCfg) -> Result<(), CliError> {
    let started = Instant::now();
    let geom = BlockGeometry::new(cfg.n, cfg.k, 1, cfg.alpha1, cfg.alpha2)
        .map_err(core_err)?
        .with_horizon_scale(cfg.horizon_mult)
        .map_err(core_err)?;
    let hp = HParams::new(cfg.gamma, cfg.inner_trials, cfg.surv_horizon, cfg.k);
    let rbox = geom.spatial_box();
    let mut xi = Configuration::empty(rbox);
    for x in geom.h_window().sites() {
        xi.set(&x, 1).map_err(core_err)?;
    }
    let rule = islab_core::lattice::BoundaryRule::AbsorbingEmpty;
    let report = block_events(
        &xi, &geom, cfg.lambda, cfg.p, rule, &hp, cfg.trials, cfg.seed0,
    )
    .map_err(core_err)?;
    let good = if cfg.good_event {
        Some(
            good_event(
                &xi, &geom, cfg.lambda, cfg.p, rule, &hp, cfg.trials, cfg.seed0,
            )
            .map_err(core_err)?,
        )
    } else {
        None
    };
    let json = serde_json::to_string_pretty(&serde_json::json!({
        "block_events": report,
        "good_event": good,
    }))
    .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&cfg.out, json.as_bytes())?;
    println!(
        "E1={:.4} (closed form {:.4})  E2={:.4}  E3={:.4}  E4={:.4}  E={:.4}",
        report.e1.0, report.e1_closed_form, report.e2.0, report.e3.0, report.e4.0, report.e_all.0
    );
    let failures = good.as_ref().map(|g| g.implication_failures).unwrap_or(0);
    let outputs = vec![cfg.out.clone()];
    finish(RunConfig::Block(cfg), outputs, started)?;
    if failures > 0 {
        return Err(CliError::Invariant(format!(
            "{failures} good-event implication failures"
        )));
    }
    Ok(())
}

pub fn run_sweep(cfg: SweepCfg) -> Result<(), CliError> {
    let started = Instant::now();
    if cfg.lambdas.is_empty() || cfg.ps.is_empty() {
        return Err(CliError::Config("sweep grid must be non-empty".into()));
    }
    if cfg.trials == 0 {
        return Err(CliError::Config("need --trials > 0".into()));
    }
    let (box_, rule) = cfg.box_.build()?;
    let init = initial(InitialKind::Origin, &box_);
    struct Cell {
        lambda: f64,
        p: f64,
        estimate: f64,
        stderr: f64,
        seed_base: u64,
        sandwich: usize,
    }
    let grid: Vec<(usize, f64, f64)> = cfg
        .lambdas
        .iter()
        .flat_map(|&l| cfg.ps.iter().map(move |&p| (l, p)))
        .enumerate()
        .map(|(i, (l, p))| (i, l, p))
        .collect();
    let cells: Vec<Cell> = grid
        .par_iter()
        .map(|&(idx, lambda, p)| -> Result<Cell, CliError> {
            // disjoint seed ranges per cell
            let seed_base = cfg.seed0 + idx as u64 * (cfg.trials + cfg.sandwich_trials);
            let (estimate, stderr) = survival_proxy(
                &init, cfg.kind, rule, lambda, p, cfg.horizon, cfg.trials, seed_base,
            )
            .map_err(core_err)?;
            let sandwich = if cfg.sandwich_trials > 0 {
                sandwich_violations(
                    &box_,
                    rule,
                    lambda,
                    p,
                    cfg.horizon,
                    cfg.sandwich_trials,
                    seed_base + cfg.trials,
                )
                .map_err(core_err)?
            } else {
                0
            };
            Ok(Cell {
                lambda,
                p,
                estimate,
                stderr,
                seed_base,
                sandwich,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut csv = String::from("lambda,p,estimate,stderr,trials\n");
    for c in &cells {
        writeln!(
            csv,
            "{},{},{},{},{}",
            c.lambda, c.p, c.estimate, c.stderr, cfg.trials
        )
        .unwrap();
    }
    write_atomic(&cfg.out, csv.as_bytes())?;
    let _ = cells.iter().map(|c| c.seed_base).max();
    // monotonicity in p at fixed lambda, for the process the claim holds for
    let mut mono_flags = 0usize;
    if cfg.kind == ProcessKind::Spont {
        let np = cfg.ps.len();
        for (li, _) in cfg.lambdas.iter().enumerate() {
            for pi in 1..np {
                let a = &cells[li * np + pi - 1];
                let b = &cells[li * np + pi];
                let tol = 3.0 * (a.stderr * a.stderr + b.stderr * b.stderr).sqrt();
                if b.estimate < a.estimate - tol {
                    mono_flags += 1;
                    eprintln!(
                        "monotonicity flag: lambda={} p={}->{} estimate {} -> {}",
                        a.lambda, a.p, b.p, a.estimate, b.estimate
                    );
                }
            }
        }
    }
    let sandwich_total: usize = cells.iter().map(|c| c.sandwich).sum();
    println!(
        "cells={} trials/cell={} monotonicity_flags={mono_flags} sandwich_violations={sandwich_total}",
        cells.len(),
        cfg.trials
    );
    let outputs = vec![cfg.out.clone()];
    finish(RunConfig::Sweep(cfg), outputs, started)?;
    if mono_flags > 0 || sandwich_total > 0 {
        return Err(CliError::Invariant(format!(
            "{mono_flags} monotonicity flags, {sandwich_total} sandwich violations"
        )));
    }
    Ok(())
}

pub fn run_duality(cfg: DualityCfg) -> Result<(), CliError> {
    let started = Instant::now();
    let (box_, rule) = cfg.box_.build()?;
    let zeta = initial(cfg.init, &box_);
    let report = duality_check(&zeta, cfg.lambda, cfg.t, rule, cfg.trials, cfg.seed0)
        .map_err(core_err)?;
    let json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{json}");
    let outputs = if let Some(path) = &cfg.out {
        write_atomic(path, json.as_bytes())?;
        vec![path.clone()]
    } else {
        vec![]
    };
    finish(RunConfig::Duality(cfg), outputs, started)
}

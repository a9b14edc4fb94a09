//! Coupled replays on shared mark streams, with pathwise order monitoring.
//!
//! Each coupling drives two processes by the same Poisson marks and checks
//! the sitewise order after every mark application (states are constant
//! between marks, so per-mark checking is exact). A non-empty violation
//! list falsifies the corresponding domination claim for that seed.

use crate::dynamics::{apply_mark, ProcessKind, StreamKind};
use crate::error::{Error, Result};
use crate::events::{generate_timeline, EventTimeline, MarkKind, SplitTimeline};
use crate::lattice::{BoundaryRule, Configuration, LatticeBox};
use crate::monotone::StateOrder;

/// A sitewise order breach observed during a coupled replay.
#[derive(Clone, Debug)]
pub struct Violation {
    pub time: f64,
    pub site: Vec<i64>,
    pub lower: i8,
    pub upper: i8,
}

/// Outcome of a coupled replay.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub order: StateOrder,
    pub violations: Vec<Violation>,
    /// Joint snapshots (time, lower state, upper state).
    pub snapshots: Vec<(f64, Configuration, Configuration)>,
    pub lower_extinction: Option<f64>,
    pub upper_extinction: Option<f64>,
    pub lower_final: Configuration,
    pub upper_final: Configuration,
}

fn check_initial_order(
    lower: &Configuration,
    upper: &Configuration,
    order: StateOrder,
) -> Result<()> {
    if lower.box_ != upper.box_ {
        return Err(Error::Dimension(
            "coupled configurations live on different boxes".into(),
        ));
    }
    for i in 0..lower.box_.volume() {
        let (a, b) = (lower.states()[i], upper.states()[i]);
        if !order.leq(a, b) {
            return Err(Error::InitialOrder {
                site: lower.box_.site_at(i),
                lower: a,
                upper: b,
            });
        }
    }
    Ok(())
}

/// Replay a stream of coupled marks. Each item carries the views the two
/// sides see (None when a family is invisible to that side).
pub(crate) fn replay_coupled(
    lower0: &Configuration,
    upper0: &Configuration,
    lower_kind: ProcessKind,
    upper_kind: ProcessKind,
    order: StateOrder,
    marks: impl Iterator<Item = (f64, Option<MarkKind>, Option<MarkKind>)>,
    snapshot_times: &[f64],
    check_init: bool,
) -> Result<CoupledPair> {
    if check_init {
        check_initial_order(lower0, upper0, order)?;
    }
    let box_ = lower0.box_.clone();
    let mut lo = lower0.states().to_vec();
    let mut hi = upper0.states().to_vec();
    let (mut lo_f, mut lo_s) = (lower0.fertile_count(), lower0.sterile_count());
    let (mut hi_f, mut hi_s) = (upper0.fertile_count(), upper0.sterile_count());
    let mut lo_ext = if lo_f == 0 { Some(0.0) } else { None };
    let mut hi_ext = if hi_f == 0 { Some(0.0) } else { None };
    let mut snaps: Vec<f64> = snapshot_times.to_vec();
    snaps.sort_by(f64::total_cmp);
    let mut snap_idx = 0usize;
    let mut snapshots = Vec::with_capacity(snaps.len());
    let mut violations = Vec::new();
    let snap = |states: &[i8]| {
        let mut c = Configuration::empty(box_.clone());
        c.states_mut().copy_from_slice(states);
        c
    };
    for (time, lo_mark, hi_mark) in marks {
        while snap_idx < snaps.len() && snaps[snap_idx] < time {
            snapshots.push((snaps[snap_idx], snap(&lo), snap(&hi)));
            snap_idx += 1;
        }
        let mut touched: Option<u32> = None;
        if let Some(m) = lo_mark {
            if apply_mark(lower_kind, &mut lo, m, &mut lo_f, &mut lo_s) {
                touched = Some(m.target());
                if lo_f == 0 && lo_ext.is_none() {
                    lo_ext = Some(time);
                }
            }
        }
        if let Some(m) = hi_mark {
            if apply_mark(upper_kind, &mut hi, m, &mut hi_f, &mut hi_s) {
                touched = Some(m.target());
                if hi_f == 0 && hi_ext.is_none() {
                    hi_ext = Some(time);
                }
            }
        }
        if let Some(t) = touched {
            let (a, b) = (lo[t as usize], hi[t as usize]);
            if !order.leq(a, b) {
                violations.push(Violation {
                    time,
                    site: box_.site_at(t as usize),
                    lower: a,
                    upper: b,
                });
            }
        }
    }
    while snap_idx < snaps.len() {
        snapshots.push((snaps[snap_idx], snap(&lo), snap(&hi)));
        snap_idx += 1;
    }
    Ok(CoupledPair {
        order,
        violations,
        snapshots,
        lower_extinction: lo_ext,
        upper_extinction: hi_ext,
        lower_final: snap(&lo),
        upper_final: snap(&hi),
    })
}

/// IS(λ,p) below a contact process with parameter λp, on one timeline.
/// Both share the fertile-birth arrows and the fertile death crosses; the
/// contact side ignores sterile arrows and dots.
pub fn couple_is_contact(
    eta0: &Configuration,
    zeta0: &Configuration,
    timeline: &EventTimeline,
    snapshot_times: &[f64],
) -> Result<CoupledPair> {
    if zeta0.has_sterile() {
        return Err(Error::Parameter(
            "upper contact configuration must be {0,1}-valued".into(),
        ));
    }
    replay_coupled(
        eta0,
        zeta0,
        ProcessKind::IS,
        ProcessKind::Contact,
        StateOrder::NegZeroOne,
        timeline.marks.iter().map(|m| (m.time, Some(m.kind), Some(m.kind))),
        snapshot_times,
        true,
    )
}

/// Spont(λ,p) below IS(λ,p) on one timeline (shared N1, N2, U, V).
pub fn couple_spont_is(
    xi0: &Configuration,
    eta0: &Configuration,
    timeline: &EventTimeline,
    snapshot_times: &[f64],
) -> Result<CoupledPair> {
    replay_coupled(
        xi0,
        eta0,
        ProcessKind::Spont,
        ProcessKind::IS,
        StateOrder::NegZeroOne,
        timeline.marks.iter().map(|m| (m.time, Some(m.kind), Some(m.kind))),
        snapshot_times,
        true,
    )
}

/// Spont(λ,p1) below Spont(λ,p2) on split streams.
pub fn couple_spont_spont(
    xi1_0: &Configuration,
    xi2_0: &Configuration,
    split: &SplitTimeline,
    snapshot_times: &[f64],
) -> Result<CoupledPair> {
    replay_coupled(
        xi1_0,
        xi2_0,
        ProcessKind::Spont,
        ProcessKind::Spont,
        StateOrder::NegZeroOne,
        split
            .marks
            .iter()
            .map(|m| (m.time, m.kind.lower_view(), m.kind.upper_view())),
        snapshot_times,
        true,
    )
}

/// Count order violations of the full sandwich Spont ≤ IS ≤ Contact(λp) on
/// shared timelines, over `trials` seeds from a single fertile origin.
pub fn sandwich_violations(
    box_: &LatticeBox,
    rule: BoundaryRule,
    lambda: f64,
    p: f64,
    horizon: f64,
    trials: u64,
    seed0: u64,
) -> Result<usize> {
    use rayon::prelude::*;
    let init = Configuration::singleton_origin(box_.clone())?;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let t = generate_timeline(box_, rule, lambda, p, horizon, seed0 + i)?;
            let a = couple_spont_is(&init, &init, &t, &[])?;
            let b = couple_is_contact(&init, &init, &t, &[])?;
            Ok(a.violations.len() + b.violations.len())
        })
        .sum()
}

/// Witness of a pathwise order breach for the IS basic coupling.
#[derive(Clone, Debug)]
pub struct OrderWitness {
    pub seed: u64,
    pub time: f64,
    pub site: Vec<i64>,
    pub mark: StreamKind,
    pub lower_initial: Configuration,
    pub upper_initial: Configuration,
    pub lower_after: i8,
    pub upper_after: i8,
}

/// Replay basic-coupling marks from the two-site counterexample
/// configurations for the given order until the IS/IS coupling breaks it.
/// Returns None only if the seed budget runs out.
pub fn find_order_violation_is(
    order: StateOrder,
    lambda: f64,
    p: f64,
    search_budget: u64,
) -> Result<Option<OrderWitness>> {
    let box_ = LatticeBox::line(0, 1)?;
    // x = site 0, y = site 1
    let (lower0, upper0) = match order {
        StateOrder::NegZeroOne => (
            Configuration::empty(box_.clone()),
            Configuration::from_sites(box_.clone(), &[(&[0], 1)])?,
        ),
        StateOrder::ZeroNegOne | StateOrder::Partial => (
            Configuration::from_sites(box_.clone(), &[(&[0], 1)])?,
            Configuration::from_sites(box_.clone(), &[(&[0], 1), (&[1], -1)])?,
        ),
        StateOrder::ZeroOne => {
            return Err(Error::Parameter(
                "the IS counterexamples need a three-state order".into(),
            ))
        }
    };
    for seed in 0..search_budget {
        let t = generate_timeline(&box_, BoundaryRule::AbsorbingEmpty, lambda, p, 4.0, seed)?;
        let mut lo = lower0.states().to_vec();
        let mut hi = upper0.states().to_vec();
        let (mut lf, mut ls) = (lower0.fertile_count(), lower0.sterile_count());
        let (mut hf, mut hs) = (upper0.fertile_count(), upper0.sterile_count());
        for m in &t.marks {
            let a = apply_mark(ProcessKind::IS, &mut lo, m.kind, &mut lf, &mut ls);
            let b = apply_mark(ProcessKind::IS, &mut hi, m.kind, &mut hf, &mut hs);
            if !(a || b) {
                continue;
            }
            let site = m.kind.target() as usize;
            if !order.leq(lo[site], hi[site]) {
                return Ok(Some(OrderWitness {
                    seed,
                    time: m.time,
                    site: box_.site_at(site),
                    mark: m.kind.stream_kind(),
                    lower_initial: lower0,
                    upper_initial: upper0,
                    lower_after: lo[site],
                    upper_after: hi[site],
                }));
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Coupled one-step rate tables
// ---------------------------------------------------------------------------

/// Transition rates out of the pair state (η(x), ζ(x)) for the IS/contact
/// basic coupling; `n1_lower`/`n1_upper` count fertile neighbors of x in η
/// and ζ.
pub fn coupled_rates_is_contact(
    pair: (i8, i8),
    n1_lower: usize,
    n1_upper: usize,
    lambda: f64,
    p: f64,
) -> Vec<((i8, i8), f64)> {
    let (ne, nz) = (n1_lower as f64, n1_upper as f64);
    let (bf, bs) = (lambda * p, lambda * (1.0 - p));
    match pair {
        (1, 1) => vec![((0, 0), 1.0)],
        (0, 1) => vec![((0, 0), 1.0), ((1, 1), bf * ne), ((-1, 1), bs * ne)],
        (0, 0) => vec![
            ((1, 1), bf * ne),
            ((0, 1), bf * (nz - ne)),
            ((-1, 0), bs * ne),
        ],
        (-1, 1) => vec![((0, 1), 1.0), ((-1, 0), 1.0)],
        (-1, 0) => vec![((-1, 1), bf * nz), ((0, 0), 1.0)],
        _ => vec![],
    }
}

/// Transition rates out of (ξ(x), η(x)) for the Spont/IS basic coupling.
/// `incoming` is the number of incoming edges at x (2d in the interior).
pub fn coupled_rates_spont_is(
    pair: (i8, i8),
    n1_lower: usize,
    n1_upper: usize,
    incoming: usize,
    lambda: f64,
    p: f64,
) -> Vec<((i8, i8), f64)> {
    let (nx, ne) = (n1_lower as f64, n1_upper as f64);
    let inc = incoming as f64;
    let (bf, bs) = (lambda * p, lambda * (1.0 - p));
    match pair {
        (0, 0) => vec![
            ((1, 1), bf * nx),
            ((0, 1), bf * (ne - nx)),
            ((-1, -1), bs * ne),
            ((-1, 0), bs * (inc - ne)),
        ],
        (0, 1) => vec![((0, 0), 1.0), ((-1, 1), bs * inc), ((1, 1), bf * nx)],
        (-1, 1) => vec![((-1, 0), 1.0), ((0, 1), 1.0)],
        (-1, -1) => vec![((0, 0), 1.0)],
        (-1, 0) => vec![((0, 0), 1.0), ((-1, 1), bf * ne), ((-1, -1), bs * ne)],
        (1, 1) => vec![((0, 0), 1.0)],
        _ => vec![],
    }
}

/// Transition rates out of (ξ(x), ξ̃(x)) for the split-stream coupling of
/// Spont(λ,p1) below Spont(λ,p2). The blocked-upper row uses 1-p2: the
/// upper process blocks only through its own base stream, which keeps its
/// marginal blocking rate at 2dλ(1-p2) regardless of the lower state.
pub fn coupled_rates_spont_spont(
    pair: (i8, i8),
    n1_lower: usize,
    n1_upper: usize,
    incoming: usize,
    lambda: f64,
    p1: f64,
    p2: f64,
) -> Vec<((i8, i8), f64)> {
    let (nx, nt) = (n1_lower as f64, n1_upper as f64);
    let inc = incoming as f64;
    match pair {
        (0, 0) => vec![
            ((1, 1), lambda * p1 * nx),
            ((0, 1), lambda * p2 * nt - lambda * p1 * nx),
            ((-1, -1), inc * lambda * (1.0 - p2)),
            ((-1, 0), inc * lambda * (p2 - p1)),
        ],
        (0, 1) => vec![
            ((0, 0), 1.0),
            ((-1, 1), inc * lambda * (1.0 - p1)),
            ((1, 1), lambda * p1 * nx),
        ],
        (-1, 1) => vec![((-1, 0), 1.0), ((0, 1), 1.0)],
        (-1, -1) => vec![((0, 0), 1.0)],
        (-1, 0) => vec![
            ((0, 0), 1.0),
            ((-1, 1), lambda * p2 * nt),
            ((-1, -1), inc * lambda * (1.0 - p2)),
        ],
        (1, 1) => vec![((0, 0), 1.0)],
        _ => vec![],
    }
}

/// Replay a timeline with every site except `site` frozen, and report the
/// first pair-state change at `site`. Isolates one exponential race, which
/// is what the one-step audits measure.
pub fn first_transition_at(
    site: &[i64],
    lower: &Configuration,
    upper: &Configuration,
    lower_kind: ProcessKind,
    upper_kind: ProcessKind,
    timeline: &EventTimeline,
) -> Result<Option<(i8, i8)>> {
    let idx = lower
        .box_
        .index_of(site)
        .ok_or_else(|| Error::Containment(format!("site {site:?} outside box")))? as u32;
    let mut lo = lower.states().to_vec();
    let mut hi = upper.states().to_vec();
    let (mut f1, mut s1, mut f2, mut s2) = (
        lower.fertile_count(),
        lower.sterile_count(),
        upper.fertile_count(),
        upper.sterile_count(),
    );
    for m in &timeline.marks {
        if m.kind.target() != idx {
            continue;
        }
        let a = apply_mark(lower_kind, &mut lo, m.kind, &mut f1, &mut s1);
        let b = apply_mark(upper_kind, &mut hi, m.kind, &mut f2, &mut s2);
        if a || b {
            return Ok(Some((lo[idx as usize], hi[idx as usize])));
        }
    }
    Ok(None)
}

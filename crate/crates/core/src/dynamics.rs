//! Flip semantics and trajectory evolution: apply a timeline to an initial
//! configuration under Contact(λp), IS(λ,p), or Spont(λ,p) dynamics.

use crate::error::{Error, Result};
use crate::events::{EventTimeline, LazyTimeline, Mark, MarkKind};
use crate::lattice::{BoundaryRule, Configuration};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which flip semantics a replay uses.
///
/// All three read the same mark stream. Contact ignores sterile arrows
/// entirely; IS activates a sterile arrow only from a fertile source; Spont
/// activates it regardless of the source state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Contact,
    #[serde(rename = "is")]
    IS,
    Spont,
}

/// Stream family tags, without entity payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    BirthFertile,
    BirthSterile,
    DeathFertile,
    DeathSterile,
}

impl MarkKind {
    pub fn stream_kind(&self) -> StreamKind {
        match self {
            MarkKind::BirthFertile { .. } => StreamKind::BirthFertile,
            MarkKind::BirthSterile { .. } => StreamKind::BirthSterile,
            MarkKind::DeathFertile { .. } => StreamKind::DeathFertile,
            MarkKind::DeathSterile { .. } => StreamKind::DeathSterile,
        }
    }
}

/// Pure flip rule: the new state of the mark's target site, given the source
/// site's state (`src`, ignored by death marks) and the target's state.
pub fn step_semantics(kind: ProcessKind, src: i8, dst: i8, mark: StreamKind) -> i8 {
    match mark {
        StreamKind::BirthFertile => {
            if src == 1 && dst == 0 {
                1
            } else {
                dst
            }
        }
        StreamKind::BirthSterile => match kind {
            ProcessKind::Contact => dst,
            ProcessKind::IS => {
                if src == 1 && dst == 0 {
                    -1
                } else {
                    dst
                }
            }
            ProcessKind::Spont => {
                if dst == 0 {
                    -1
                } else {
                    dst
                }
            }
        },
        StreamKind::DeathFertile => {
            if dst == 1 {
                0
            } else {
                dst
            }
        }
        StreamKind::DeathSterile => {
            if dst == -1 {
                0
            } else {
                dst
            }
        }
    }
}

/// In-place mark application. Returns true when the target state changed.
pub fn apply_mark(
    kind: ProcessKind,
    states: &mut [i8],
    mark: MarkKind,
    fertile: &mut usize,
    sterile: &mut usize,
) -> bool {
    let (src_state, target) = match mark {
        MarkKind::BirthFertile { src, dst } | MarkKind::BirthSterile { src, dst } => {
            (states[src as usize], dst)
        }
        MarkKind::DeathFertile { site } | MarkKind::DeathSterile { site } => (0, site),
    };
    let old = states[target as usize];
    let new = step_semantics(kind, src_state, old, mark.stream_kind());
    if new == old {
        return false;
    }
    match old {
        1 => *fertile -= 1,
        -1 => *sterile -= 1,
        _ => {}
    }
    match new {
        1 => *fertile += 1,
        -1 => *sterile += 1,
        _ => {}
    }
    states[target as usize] = new;
    true
}

/// Result of replaying a timeline from an initial configuration.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub kind: ProcessKind,
    /// Requested snapshots, each the state just after the last mark at or
    /// before the snapshot time.
    pub snapshots: Vec<(f64, Configuration)>,
    /// First time the fertile set became empty, if it did; 0 for an
    /// initially empty configuration.
    pub extinction_time: Option<f64>,
    pub fertile_at_horizon: usize,
    pub sterile_at_horizon: usize,
    /// Per snapshot, per axis: leftmost/rightmost fertile coordinate.
    pub fertile_extent: Vec<(f64, Vec<Option<(i64, i64)>>)>,
}

fn validate_initial(initial: &Configuration, kind: ProcessKind) -> Result<()> {
    if initial.states().iter().any(|s| !(-1..=1).contains(s)) {
        return Err(Error::Parameter("states must lie in {-1,0,1}".into()));
    }
    if kind == ProcessKind::Contact && initial.has_sterile() {
        return Err(Error::Parameter(
            "contact dynamics require a {0,1}-valued initial configuration".into(),
        ));
    }
    Ok(())
}

fn extent_per_axis(c: &Configuration) -> Vec<Option<(i64, i64)>> {
    let d = c.box_.dim();
    let mut ext: Vec<Option<(i64, i64)>> = vec![None; d];
    for x in c.fertile_sites() {
        for i in 0..d {
            ext[i] = Some(match ext[i] {
                None => (x[i], x[i]),
                Some((lo, hi)) => (lo.min(x[i]), hi.max(x[i])),
            });
        }
    }
    ext
}

/// Replay `timeline` from `initial` under the given dynamics, recording
/// snapshots at the requested times.
pub fn evolve(
    initial: &Configuration,
    kind: ProcessKind,
    timeline: &EventTimeline,
    snapshot_times: &[f64],
) -> Result<Trajectory> {
    if initial.box_ != timeline.box_ {
        return Err(Error::Dimension(
            "initial configuration and timeline live on different boxes".into(),
        ));
    }
    validate_initial(initial, kind)?;
    let mut snaps: Vec<f64> = snapshot_times.to_vec();
    snaps.sort_by(f64::total_cmp);
    if snaps
        .iter()
        .any(|&t| !(0.0..=timeline.horizon).contains(&t))
    {
        return Err(Error::Parameter(
            "snapshot times must lie in [0, horizon]".into(),
        ));
    }
    evolve_marks(
        initial,
        kind,
        timeline.marks.iter().copied(),
        &snaps,
        timeline.horizon,
    )
}

/// Shared replay core over any sorted mark stream.
pub(crate) fn evolve_marks(
    initial: &Configuration,
    kind: ProcessKind,
    marks: impl Iterator<Item = Mark>,
    sorted_snaps: &[f64],
    _horizon: f64,
) -> Result<Trajectory> {
    let mut states = initial.states().to_vec();
    let mut fertile = initial.fertile_count();
    let mut sterile = initial.sterile_count();
    let mut extinction = if fertile == 0 { Some(0.0) } else { None };
    let mut snapshots = Vec::with_capacity(sorted_snaps.len());
    let mut snap_idx = 0;
    let record_up_to = |t_next: f64,
                            snap_idx: &mut usize,
                            states: &[i8],
                            snapshots: &mut Vec<(f64, Configuration)>| {
        while *snap_idx < sorted_snaps.len() && sorted_snaps[*snap_idx] < t_next {
            let mut c = Configuration::empty(initial.box_.clone());
            c.states_mut().copy_from_slice(states);
            snapshots.push((sorted_snaps[*snap_idx], c));
            *snap_idx += 1;
        }
    };
    for m in marks {
        record_up_to(m.time, &mut snap_idx, &states, &mut snapshots);
        let changed = apply_mark(kind, &mut states, m.kind, &mut fertile, &mut sterile);
        if changed && fertile == 0 && extinction.is_none() {
            extinction = Some(m.time);
        }
        // once the fertile set is empty it stays empty; for contact nothing
        // at all can change any more
        if fertile == 0 && kind == ProcessKind::Contact && snap_idx >= sorted_snaps.len() {
            break;
        }
    }
    record_up_to(f64::INFINITY, &mut snap_idx, &states, &mut snapshots);
    let fertile_extent = snapshots
        .iter()
        .map(|(t, c)| (*t, extent_per_axis(c)))
        .collect();
    Ok(Trajectory {
        kind,
        snapshots,
        extinction_time: extinction,
        fertile_at_horizon: fertile,
        sterile_at_horizon: sterile,
        fertile_extent,
    })
}

/// Sites in state 1 at time `t`, by direct evolution.
pub fn reachable_set(
    initial: &Configuration,
    kind: ProcessKind,
    timeline: &EventTimeline,
    t: f64,
) -> Result<Vec<Vec<i64>>> {
    let traj = evolve(initial, kind, timeline, &[t])?;
    let mut sites = traj.snapshots[0].1.fertile_sites();
    sites.sort();
    Ok(sites)
}

/// Independent cross-check for contact dynamics: sites reachable at time `t`
/// through explicit active paths over the mark graph (time lines upward,
/// fertile-birth arrows across, never through a death cross).
pub fn contact_reachable_by_paths(
    initial: &Configuration,
    timeline: &EventTimeline,
    t: f64,
) -> Result<Vec<Vec<i64>>> {
    if initial.box_ != timeline.box_ {
        return Err(Error::Dimension(
            "initial configuration and timeline live on different boxes".into(),
        ));
    }
    validate_initial(initial, ProcessKind::Contact)?;
    if !(0.0..=timeline.horizon).contains(&t) {
        return Err(Error::Parameter("query time outside [0, horizon]".into()));
    }
    let n = initial.box_.volume();
    let mut crosses: Vec<Vec<f64>> = vec![Vec::new(); n];
    for m in &timeline.marks {
        if let MarkKind::DeathFertile { site } = m.kind {
            crosses[site as usize].push(m.time);
        }
    }
    // segment s of a site spans (cross[s-1], cross[s]]; earliest_reach[site][s]
    // is the first moment the segment is occupied by a path from the initial set
    let mut reach: Vec<Vec<f64>> = crosses
        .iter()
        .map(|c| vec![f64::INFINITY; c.len() + 1])
        .collect();
    for (i, &s) in initial.states().iter().enumerate() {
        if s == 1 {
            reach[i][0] = 0.0;
        }
    }
    let seg_at = |site: usize, time: f64, crosses: &[Vec<f64>]| -> usize {
        crosses[site].partition_point(|&c| c <= time)
    };
    for m in &timeline.marks {
        if m.time > t {
            break;
        }
        if let MarkKind::BirthFertile { src, dst } = m.kind {
            let (src, dst) = (src as usize, dst as usize);
            let ss = seg_at(src, m.time, &crosses);
            if reach[src][ss] <= m.time {
                let sd = seg_at(dst, m.time, &crosses);
                if m.time < reach[dst][sd] {
                    reach[dst][sd] = m.time;
                }
            }
        }
    }
    let mut out = Vec::new();
    for site in 0..n {
        let s = seg_at(site, t, &crosses);
        if reach[site][s] <= t {
            out.push(initial.box_.site_at(site));
        }
    }
    out.sort();
    Ok(out)
}

/// One survival trial: is the fertile set non-empty at the horizon?
/// Generation and replay stop at extinction.
pub fn survival_trial(
    initial: &Configuration,
    kind: ProcessKind,
    rule: BoundaryRule,
    lambda: f64,
    p: f64,
    horizon: f64,
    seed: u64,
) -> Result<bool> {
    validate_initial(initial, kind)?;
    let mut states = initial.states().to_vec();
    let mut fertile = initial.fertile_count();
    let mut sterile = initial.sterile_count();
    if fertile == 0 {
        return Ok(false);
    }
    let lazy = LazyTimeline::new(&initial.box_, rule, lambda, p, horizon, seed)?;
    for m in lazy {
        apply_mark(kind, &mut states, m.kind, &mut fertile, &mut sterile);
        if fertile == 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finite-horizon, finite-volume survival estimate over trials seeded
/// `seed0 .. seed0 + n_trials`, with its binomial standard error.
pub fn survival_proxy(
    initial: &Configuration,
    kind: ProcessKind,
    rule: BoundaryRule,
    lambda: f64,
    p: f64,
    horizon: f64,
    n_trials: u64,
    seed0: u64,
) -> Result<(f64, f64)> {
    if n_trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    let alive: usize = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            survival_trial(initial, kind, rule, lambda, p, horizon, seed0 + i)
                .map(usize::from)
                .unwrap_or(0)
        })
        .sum();
    let est = alive as f64 / n_trials as f64;
    let se = (est * (1.0 - est) / n_trials as f64).sqrt();
    Ok((est, se))
}

/// Box half-width heuristic: initial support radius plus drift margin.
pub fn spread_halfwidth(support_radius: i64, lambda_eff: f64, horizon: f64) -> i64 {
    support_radius + (lambda_eff * horizon).ceil() as i64 + 2
}

//! Space-time block construction over the Spont process: the box
//! R = [-8N,8N]^d x [0,T], the time split T = T1 + T2, the good
//! configuration set H, the block events E1..E4 and the good event, wet-site
//! extraction, and the coupled comparison with oriented percolation.

use crate::dynamics::{evolve_marks, survival_trial, ProcessKind};
use crate::error::{Error, Result};
use crate::events::{generate_timeline, MarkKind};
use crate::lattice::{translate, BoundaryRule, Configuration, LatticeBox};
use crate::percolation::{grow_cluster, m_dependent_from_blocks, Cluster, EvenLattice};
use crate::stream::{derive_seed, keyed_uniform};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

/// Derived block geometry: spatial scale N, seed box half-width K, speed
/// constants, and the induced time split and dependence range.
#[derive(Clone, Debug, Serialize)]
pub struct BlockGeometry {
    pub n: i64,
    pub k_box: i64,
    pub d: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_prime: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_total: f64,
    /// Spatial scale multiplier of R (k = 8).
    pub k_scale: i64,
    /// Time steps covered by one block (j).
    pub j_steps: i64,
    /// Dependence range M = max(k, j).
    pub m_dep: i64,
}

impl BlockGeometry {
    /// alpha1 bounds the growth speed of the ever-occupied set, alpha2 the
    /// coupling-to-full speed; both are empirical at desk scale.
    pub fn new(n: i64, k_box: i64, d: usize, alpha1: f64, alpha2: f64) -> Result<Self> {
        if n <= 0 || k_box <= 0 || k_box > n {
            return Err(Error::Parameter(format!(
                "need 0 < K <= N, got K={k_box}, N={n}"
            )));
        }
        if !(alpha1 > 0.0) || !(alpha2 > 0.0) {
            return Err(Error::Parameter("speeds must be positive".into()));
        }
        let alpha_prime = (6.0 * alpha1).min(alpha2);
        let t_total = 3.0 * n as f64 / alpha_prime;
        let t1 = n as f64 / (2.0 * alpha1);
        if t1 >= t_total {
            return Err(Error::Parameter(format!(
                "time split degenerate: T1={t1} >= T={t_total}"
            )));
        }
        let j_steps = (3.0 / alpha_prime).floor() as i64 + 1;
        Ok(BlockGeometry {
            n,
            k_box,
            d,
            alpha1,
            alpha2,
            alpha_prime,
            t1,
            t2: t_total - t1,
            t_total,
            k_scale: 8,
            j_steps,
            m_dep: j_steps.max(8),
        })
    }

    /// Scale the block horizon (exploratory knob; the geometric split T1
    /// shrinks with it when necessary).
    pub fn with_horizon_scale(mut self, mult: f64) -> Result<Self> {
        if !(mult > 0.0) {
            return Err(Error::Parameter("horizon multiplier must be > 0".into()));
        }
        self.t_total *= mult;
        if self.t1 > self.t_total {
            self.t1 = self.t_total / 2.0;
        }
        self.t2 = self.t_total - self.t1;
        Ok(self)
    }

    /// Spatial part of R: [-8N, 8N]^d.
    pub fn spatial_box(&self) -> LatticeBox {
        LatticeBox::centered(self.d, self.k_scale * self.n).expect("valid box")
    }

    /// The central window I = [-2N, 2N]^d.
    pub fn inner_window(&self) -> LatticeBox {
        LatticeBox::centered(self.d, 2 * self.n).expect("valid box")
    }

    /// The translate scan window [-N, N]^d.
    pub fn h_window(&self) -> LatticeBox {
        LatticeBox::centered(self.d, self.n).expect("valid box")
    }
}

/// Estimator knobs for H-membership.
#[derive(Clone, Debug, Serialize)]
pub struct HParams {
    /// Threshold is survival > 1 - gamma/2.
    pub gamma: f64,
    pub inner_trials: u64,
    /// Finite horizon standing in for survival forever.
    pub surv_horizon: f64,
    /// Translate scan stride (K for non-overlapping translates).
    pub stride: i64,
    /// Survival box margin as a multiple of λp per unit time.
    pub margin: f64,
}

impl HParams {
    pub fn new(gamma: f64, inner_trials: u64, surv_horizon: f64, stride: i64) -> Self {
        HParams {
            gamma,
            inner_trials,
            surv_horizon,
            stride,
            margin: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HVerdict {
    InH,
    NotInH,
    /// The confidence interval straddles the threshold.
    Undecided,
}

/// Outcome of testing a configuration against the good set H.
#[derive(Clone, Debug, Serialize)]
pub struct HMembership {
    pub verdict: HVerdict,
    /// Point-estimate decision used by downstream boolean logic.
    pub passes: bool,
    pub sterile_in_window: bool,
    #[serde(skip)]
    pub center: Option<Vec<i64>>,
    pub estimate: f64,
    pub stderr: f64,
    pub threshold: f64,
}

/// The configuration restricted to a window: unchanged inside, zero outside.
pub fn restrict_config(xi: &Configuration, window: &LatticeBox) -> Result<Configuration> {
    if !xi.box_.contains_box(window) {
        return Err(Error::Containment(
            "restriction window not contained in the configuration box".into(),
        ));
    }
    let mut out = Configuration::empty(xi.box_.clone());
    for idx in 0..xi.box_.volume() {
        let x = xi.box_.site_at(idx);
        if window.contains(&x) {
            out.states_mut()[idx] = xi.states()[idx];
        }
    }
    Ok(out)
}

fn shifted_window(base: &LatticeBox, center: &[i64], half: i64) -> Result<LatticeBox> {
    let lo: Vec<i64> = center.iter().map(|&c| c - half).collect();
    let hi: Vec<i64> = center.iter().map(|&c| c + half).collect();
    let w = LatticeBox::new(lo, hi)?;
    if !base.contains_box(&w) {
        return Err(Error::Containment("window leaves the base box".into()));
    }
    Ok(w)
}

fn scan_centers(geom: &BlockGeometry, stride: i64) -> Vec<Vec<i64>> {
    let reach = geom.n - geom.k_box;
    let axis: Vec<i64> = if reach == 0 {
        vec![0]
    } else {
        let mut v: Vec<i64> = (0..).map(|i| -reach + i * stride.max(1)).take_while(|&c| c <= reach).collect();
        if *v.last().unwrap() != reach {
            v.push(reach);
        }
        v
    };
    let mut centers: Vec<Vec<i64>> = vec![Vec::new()];
    for _ in 0..geom.d {
        centers = centers
            .into_iter()
            .flat_map(|c| {
                axis.iter().map(move |&a| {
                    let mut cc = c.clone();
                    cc.push(a);
                    cc
                })
            })
            .collect();
    }
    centers
}

/// Estimate the survival probability of Contact(λp) started from the
/// configuration restricted to a K-box around `center`, on a padded box.
fn translate_survival(
    xi: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    hp: &HParams,
    center: &[i64],
    inner_seed: u64,
) -> Result<(f64, f64)> {
    let window = shifted_window(&xi.box_, center, geom.k_box)?;
    let pad = (hp.margin * lambda * p * hp.surv_horizon).ceil() as i64 + 2;
    let reach = center.iter().map(|c| c.abs()).max().unwrap_or(0);
    let half = reach + geom.k_box + pad;
    let surv_box = LatticeBox::centered(geom.d, half)?;
    let mut init = Configuration::empty(surv_box.clone());
    let mut fertile = 0usize;
    for idx in 0..window.volume() {
        let x = window.site_at(idx);
        if xi.get(&x) == Some(1) {
            init.set(&x, 1)?;
            fertile += 1;
        }
    }
    if fertile == 0 {
        return Ok((0.0, 0.0));
    }
    let mut alive = 0u64;
    for i in 0..hp.inner_trials {
        if survival_trial(
            &init,
            ProcessKind::Contact,
            BoundaryRule::AbsorbingEmpty,
            lambda,
            p,
            hp.surv_horizon,
            inner_seed.wrapping_add(i),
        )? {
            alive += 1;
        }
    }
    let est = alive as f64 / hp.inner_trials as f64;
    let se = (est * (1.0 - est) / hp.inner_trials as f64).sqrt();
    Ok((est, se))
}

/// Test membership in H: no sterile site in the central window I, and some
/// K-box translate inside [-N,N]^d from which the contact process survives
/// with estimated probability above 1 - gamma/2.
pub fn h_membership(
    xi: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    hp: &HParams,
    seed0: u64,
) -> Result<HMembership> {
    let inner = geom.inner_window();
    if !xi.box_.contains_box(&inner) {
        return Err(Error::Containment(
            "configuration box must contain the central window".into(),
        ));
    }
    let threshold = 1.0 - hp.gamma / 2.0;
    for idx in 0..xi.box_.volume() {
        if xi.states()[idx] == -1 && inner.contains(&xi.box_.site_at(idx)) {
            return Ok(HMembership {
                verdict: HVerdict::NotInH,
                passes: false,
                sterile_in_window: true,
                center: None,
                estimate: 0.0,
                stderr: 0.0,
                threshold,
            });
        }
    }
    let mut best: Option<(f64, f64, Vec<i64>)> = None;
    for center in scan_centers(geom, hp.stride) {
        let inner_seed = derive_seed(seed0, &center);
        let (est, se) = translate_survival(xi, geom, lambda, p, hp, &center, inner_seed)?;
        if best.as_ref().map(|(b, _, _)| est > *b).unwrap_or(true) {
            best = Some((est, se, center));
        }
    }
    let (estimate, stderr, center) = best.unwrap_or((0.0, 0.0, vec![0; geom.d]));
    let passes = threshold <= 0.0 || estimate > threshold;
    let verdict = if threshold <= 0.0 || estimate - 3.0 * stderr > threshold {
        HVerdict::InH
    } else if estimate + 3.0 * stderr < threshold {
        HVerdict::NotInH
    } else {
        HVerdict::Undecided
    };
    Ok(HMembership {
        verdict,
        passes,
        sterile_in_window: false,
        center: Some(center),
        estimate,
        stderr,
        threshold,
    })
}

/// Per-event estimates over a batch of block seeds.
#[derive(Clone, Debug, Serialize)]
pub struct BlockEventReport {
    pub trials: u64,
    pub seed0: u64,
    pub e1: (f64, f64),
    pub e2: (f64, f64),
    pub e3: (f64, f64),
    pub e4: (f64, f64),
    pub e_all: (f64, f64),
    /// E together with both contact translates landing in H; lower bound
    /// for the good event on the same seeds.
    pub e_and_translates: (f64, f64),
    /// No-sterile-arrival probability from the actual edge count.
    pub e1_closed_form: f64,
    /// The same probability written with the interior per-site rate
    /// 2dλ(1-p) over (16N+1)^d sites.
    pub e1_closed_form_interior: f64,
    pub sites_outside_inner: usize,
    pub geometry: BlockGeometry,
}

struct SeedEval {
    e1: bool,
    e2: bool,
    e3: bool,
    e4: bool,
    good: Option<bool>,
    contact_minus_in_h: bool,
    contact_plus_in_h: bool,
}

fn count_oriented_edges(box_: &LatticeBox, rule: BoundaryRule) -> usize {
    crate::lattice::enumerate_edges(box_, rule).len()
}

fn eval_block_seed(
    xi: &Configuration,
    zeta0: &Configuration,
    minkowski: &[bool],
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    rule: BoundaryRule,
    hp: &HParams,
    seed: u64,
    want_good: bool,
) -> Result<SeedEval> {
    let rbox = &xi.box_;
    let timeline = generate_timeline(rbox, rule, lambda, p, geom.t_total, seed)?;
    // E1: no sterile arrival anywhere in R after time 0 (the event whose
    // probability the closed form gives; it implies no -1 ever appears)
    let e1 = timeline.count_kind(1) == 0;
    // E2: every initial sterile outside I has its death dot by T1
    let inner = geom.inner_window();
    let mut waiting: Vec<bool> = vec![false; rbox.volume()];
    let mut n_waiting = 0usize;
    for idx in 0..rbox.volume() {
        if xi.states()[idx] == -1 && !inner.contains(&rbox.site_at(idx)) {
            waiting[idx] = true;
            n_waiting += 1;
        }
    }
    for m in &timeline.marks {
        if n_waiting == 0 || m.time > geom.t1 {
            break;
        }
        if let MarkKind::DeathSterile { site } = m.kind {
            if waiting[site as usize] {
                waiting[site as usize] = false;
                n_waiting -= 1;
            }
        }
    }
    let e2 = n_waiting == 0;
    // coupled contact replay: restricted seed configuration below the full
    // box; E3 watches the boundary of I up to T1, E4 compares at T
    let full = Configuration::filled(rbox.clone(), 1);
    let boundary: Vec<bool> = (0..rbox.volume())
        .map(|idx| {
            let x = rbox.site_at(idx);
            inner.contains(&x) && x.iter().any(|&c| c.abs() == 2 * geom.n)
        })
        .collect();
    let mut e3 = true;
    let mut states_c = zeta0.states().to_vec();
    let mut states_f = full.states().to_vec();
    let (mut fc, mut sc) = (zeta0.fertile_count(), zeta0.sterile_count());
    let (mut ff, mut sf) = (full.fertile_count(), full.sterile_count());
    for m in &timeline.marks {
        crate::dynamics::apply_mark(
            ProcessKind::Contact,
            &mut states_c,
            m.kind,
            &mut fc,
            &mut sc,
        );
        crate::dynamics::apply_mark(
            ProcessKind::Contact,
            &mut states_f,
            m.kind,
            &mut ff,
            &mut sf,
        );
        if m.time <= geom.t1 {
            let t = m.kind.target() as usize;
            if boundary[t] && states_c[t] == 1 {
                e3 = false;
            }
        }
    }
    let e4 = (0..rbox.volume()).all(|i| !minkowski[i] || states_c[i] == states_f[i]);
    // membership of the contact translates, shared inner seeds with the
    // Spont translates below
    let mut zeta_t = Configuration::empty(rbox.clone());
    zeta_t.states_mut().copy_from_slice(&states_c);
    let shift = 2 * geom.n;
    let mut translate_in_h = [false; 2];
    let mut good = None;
    // the translate testing tau_{-2mN} corresponds to the level-1 slot m;
    // inner seeds are keyed by (trial seed, 1, m), the same convention
    // wet-site extraction uses, so verdicts for one slot share randomness
    for (i, m_slot) in [-1i64, 1].into_iter().enumerate() {
        let mut v = vec![0i64; geom.d];
        v[0] = -m_slot * shift;
        let shifted = translate(&zeta_t, &v, BoundaryRule::AbsorbingEmpty)?;
        let mem = h_membership(&shifted, geom, lambda, p, hp, derive_seed(seed, &[1, m_slot]))?;
        translate_in_h[i] = mem.passes;
    }
    if want_good {
        let spont = evolve_marks(
            xi,
            ProcessKind::Spont,
            timeline.marks.iter().copied(),
            &[geom.t_total],
            geom.t_total,
        )?;
        let xi_t = &spont.snapshots[0].1;
        let mut ok = true;
        for m_slot in [-1i64, 1] {
            let mut v = vec![0i64; geom.d];
            v[0] = -m_slot * shift;
            let shifted = translate(xi_t, &v, BoundaryRule::AbsorbingEmpty)?;
            let mem =
                h_membership(&shifted, geom, lambda, p, hp, derive_seed(seed, &[1, m_slot]))?;
            if !mem.passes {
                ok = false;
            }
        }
        good = Some(ok);
    }
    Ok(SeedEval {
        e1,
        e2,
        e3,
        e4,
        good,
        contact_minus_in_h: translate_in_h[0],
        contact_plus_in_h: translate_in_h[1],
    })
}

fn prepare_block(
    xi: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    hp: &HParams,
    seed0: u64,
) -> Result<(Configuration, Vec<bool>)> {
    if xi.box_ != geom.spatial_box() {
        return Err(Error::Dimension(
            "configuration must live on the block's spatial box".into(),
        ));
    }
    let mem = h_membership(xi, geom, lambda, p, hp, derive_seed(seed0, &[0]))?;
    if !mem.passes {
        return Err(Error::NotInH(format!(
            "survival estimate {} below threshold {}",
            mem.estimate, mem.threshold
        )));
    }
    let center = mem.center.expect("passing membership has a center");
    let window = shifted_window(&xi.box_, &center, geom.k_box)?;
    let zeta0 = restrict_config(xi, &window)?;
    // E4's comparison set: ([-3N,3N]^d + A(zeta0)) within the box, exact
    // Minkowski membership
    let support = zeta0.fertile_sites();
    let reach = 3 * geom.n;
    let minkowski: Vec<bool> = (0..xi.box_.volume())
        .map(|idx| {
            let x = xi.box_.site_at(idx);
            support.iter().any(|a| {
                x.iter()
                    .zip(a.iter())
                    .all(|(xc, ac)| (xc - ac).abs() <= reach)
            })
        })
        .collect();
    Ok((zeta0, minkowski))
}

/// Evaluate the block events E1..E4 over a seed batch. The configuration
/// must pass h_membership; the seed translate C is its argmax translate.
pub fn block_events(
    xi: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    rule: BoundaryRule,
    hp: &HParams,
    trials: u64,
    seed0: u64,
) -> Result<BlockEventReport> {
    let (zeta0, minkowski) = prepare_block(xi, geom, lambda, p, hp, seed0)?;
    let evals: Vec<SeedEval> = (0..trials)
        .into_par_iter()
        .map(|i| {
            eval_block_seed(
                xi, &zeta0, &minkowski, geom, lambda, p, rule, hp,
                seed0 + i, false,
            )
        })
        .collect::<Result<_>>()?;
    let frac = |f: &dyn Fn(&SeedEval) -> bool| {
        let k = evals.iter().filter(|e| f(e)).count();
        let est = k as f64 / trials as f64;
        (est, (est * (1.0 - est) / trials as f64).sqrt())
    };
    let rbox = geom.spatial_box();
    let n_edges = count_oriented_edges(&rbox, rule);
    let sterile_rate = lambda * (1.0 - p);
    let e1_closed_form = (-sterile_rate * n_edges as f64 * geom.t_total).exp();
    let sites = rbox.volume() as f64;
    let e1_interior =
        (-2.0 * geom.d as f64 * sterile_rate * sites * geom.t_total).exp();
    let inner = geom.inner_window();
    Ok(BlockEventReport {
        trials,
        seed0,
        e1: frac(&|e| e.e1),
        e2: frac(&|e| e.e2),
        e3: frac(&|e| e.e3),
        e4: frac(&|e| e.e4),
        e_all: frac(&|e| e.e1 && e.e2 && e.e3 && e.e4),
        e_and_translates: frac(&|e| {
            e.e1 && e.e2 && e.e3 && e.e4 && e.contact_minus_in_h && e.contact_plus_in_h
        }),
        e1_closed_form,
        e1_closed_form_interior: e1_interior,
        sites_outside_inner: rbox.volume() - inner.volume(),
        geometry: geom.clone(),
    })
}

/// Estimate of the good event: evolving Spont from xi on R, the time-T state
/// lands in both shifted copies of H. Also audits, per seed, the implication
/// (E and both contact translates in H) => good event.
#[derive(Clone, Debug, Serialize)]
pub struct GoodEventReport {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: u64,
    /// Seeds where the implication from the dominated contact failed
    /// (must be zero).
    pub implication_failures: u64,
    pub e_and_translates: (f64, f64),
}

pub fn good_event(
    xi: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    rule: BoundaryRule,
    hp: &HParams,
    trials: u64,
    seed0: u64,
) -> Result<GoodEventReport> {
    let (zeta0, minkowski) = prepare_block(xi, geom, lambda, p, hp, seed0)?;
    let evals: Vec<SeedEval> = (0..trials)
        .into_par_iter()
        .map(|i| {
            eval_block_seed(
                xi, &zeta0, &minkowski, geom, lambda, p, rule, hp,
                seed0 + i, true,
            )
        })
        .collect::<Result<_>>()?;
    let good = evals.iter().filter(|e| e.good == Some(true)).count();
    let est = good as f64 / trials as f64;
    let se = (est * (1.0 - est) / trials as f64).sqrt();
    let lower = evals
        .iter()
        .filter(|e| e.e1 && e.e2 && e.e3 && e.e4 && e.contact_minus_in_h && e.contact_plus_in_h)
        .count();
    let lower_est = lower as f64 / trials as f64;
    let implication_failures = evals
        .iter()
        .filter(|e| {
            e.e1 && e.e2
                && e.e3
                && e.e4
                && e.contact_minus_in_h
                && e.contact_plus_in_h
                && e.good != Some(true)
        })
        .count() as u64;
    Ok(GoodEventReport {
        estimate: est,
        stderr: se,
        trials,
        implication_failures,
        e_and_translates: (
            lower_est,
            (lower_est * (1.0 - lower_est) / trials as f64).sqrt(),
        ),
    })
}

/// Wet-site extraction from one long Spont trajectory: (m, n) is wet when
/// membership of the (m, n)-shifted state propagates to both diagonal
/// successors at level n+1.
#[derive(Clone, Debug)]
pub struct WetReport {
    pub n_levels: i64,
    /// X_n per level: wet m's with |m| <= n_levels, m+n even.
    pub levels: Vec<Vec<i64>>,
    pub membership: HashMap<(i64, i64), bool>,
    pub seed: u64,
}

impl WetReport {
    pub fn is_wet(&self, m: i64, n: i64) -> bool {
        self.levels
            .get(n as usize)
            .map(|l| l.binary_search(&m).is_ok())
            .unwrap_or(false)
    }
}

/// Simulate one Spont trajectory on a wide box and extract the wet sites of
/// the renormalized lattice up to level `n_levels`.
pub fn wet_sites(
    xi0_window: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    rule: BoundaryRule,
    hp: &HParams,
    n_levels: i64,
    seed: u64,
) -> Result<WetReport> {
    if geom.d != 1 {
        return Err(Error::Parameter(
            "wet-site extraction is implemented for d = 1".into(),
        ));
    }
    let steps = n_levels + 1;
    let spread = (lambda * p * geom.t_total * steps as f64).ceil() as i64;
    let half = 2 * geom.n * (steps + 1) + geom.n + spread.min(4 * geom.n * steps + 200);
    let wide = LatticeBox::centered(1, half)?;
    // embed the window configuration into the wide box
    let mut xi0 = Configuration::empty(wide.clone());
    for idx in 0..xi0_window.box_.volume() {
        let x = xi0_window.box_.site_at(idx);
        let s = xi0_window.states()[idx];
        if s != 0 {
            xi0.set(&x, s)?;
        }
    }
    {
        let mem0 = membership_at(&xi0, geom, lambda, p, hp, seed, 0, 0)?;
        if !mem0 {
            return Err(Error::NotInH(
                "initial configuration fails membership at the root block".into(),
            ));
        }
    }
    let snap_times: Vec<f64> = (0..=steps).map(|k| k as f64 * geom.t_total).collect();
    let timeline = generate_timeline(&wide, rule, lambda, p, geom.t_total * steps as f64, seed)?;
    let traj = evolve_marks(
        &xi0,
        ProcessKind::Spont,
        timeline.marks.iter().copied(),
        &snap_times,
        timeline.horizon,
    )?;
    let mut memo: HashMap<(i64, i64), bool> = HashMap::new();
    let member = |n: i64, m: i64, memo: &mut HashMap<(i64, i64), bool>| -> Result<bool> {
        if let Some(&v) = memo.get(&(n, m)) {
            return Ok(v);
        }
        let state = &traj.snapshots[n as usize].1;
        let v = membership_at(state, geom, lambda, p, hp, seed, n, m)?;
        memo.insert((n, m), v);
        Ok(v)
    };
    let mut levels = Vec::new();
    for n in 0..=n_levels {
        let mut wet_level = Vec::new();
        for m in -n_levels..=n_levels {
            if (m + n).rem_euclid(2) != 0 {
                continue;
            }
            let premise = member(n, m, &mut memo)?;
            let wet = if !premise {
                true
            } else {
                member(n + 1, m - 1, &mut memo)? && member(n + 1, m + 1, &mut memo)?
            };
            if wet {
                wet_level.push(m);
            }
        }
        levels.push(wet_level);
    }
    Ok(WetReport {
        n_levels,
        levels,
        membership: memo,
        seed,
    })
}

/// Membership of the (m, n) space-time slot: the level-n snapshot shifted
/// by -2mN, tested against H with inner seeds keyed by (seed, n, m) so a
/// slot's verdict is shared wherever it is consulted.
fn membership_at(
    state: &Configuration,
    geom: &BlockGeometry,
    lambda: f64,
    p: f64,
    hp: &HParams,
    seed: u64,
    n: i64,
    m: i64,
) -> Result<bool> {
    let v = vec![-2 * m * geom.n];
    let shifted = translate(state, &v, BoundaryRule::AbsorbingEmpty)?;
    let mem = h_membership(&shifted, geom, lambda, p, hp, derive_seed(seed, &[n, m]))?;
    Ok(mem.passes)
}

/// The coupled comparison field: a site opens when it is wet and its own
/// independent uniform clears `p_site`. Openness is then dominated by
/// wetness sitewise, which realizes the comparison-theorem coupling; the
/// audit checks the cluster containment A_n within X_n it implies.
#[derive(Clone, Debug)]
pub struct ComparisonAudit {
    pub cluster: Cluster,
    pub containment_violations: usize,
    pub p_site: f64,
}

pub fn comparison_against_minorant(
    wet: &WetReport,
    geom: &BlockGeometry,
    p_site: f64,
    field_seed: u64,
) -> Result<ComparisonAudit> {
    if !(0.0..=1.0).contains(&p_site) {
        return Err(Error::Parameter(format!(
            "p_site must be in [0,1], got {p_site}"
        )));
    }
    let lat = EvenLattice::new(wet.n_levels, wet.n_levels)?;
    let field = m_dependent_from_blocks(
        &lat,
        |m, n| wet.is_wet(m, n) && keyed_uniform(field_seed, 23, &[m, n]) < p_site,
        geom.m_dep,
        1.0 - p_site,
        "wet-minorant",
    );
    let cluster = grow_cluster(&field, &[0], false, usize::MAX);
    let mut violations = 0usize;
    for (n, level) in cluster.levels.iter().enumerate() {
        for &m in level {
            if !wet.is_wet(m, n as i64) {
                violations += 1;
            }
        }
    }
    Ok(ComparisonAudit {
        cluster,
        containment_violations: violations,
        p_site,
    })
}

/// Empirical speed constants for a supercritical contact process.
#[derive(Clone, Debug, Serialize)]
pub struct SpeedCalibration {
    /// 99.9th percentile of (max l-infinity reach of the ever-occupied
    /// set)/T over trials.
    pub alpha1: f64,
    /// Largest grid speed s such that the single-seed process disagrees
    /// with the full-box process inside [-sT, sT]^d on at most `eps` of
    /// surviving trials.
    pub alpha2: f64,
    pub surviving: u64,
    pub trials: u64,
    /// Disagreement frequency measured at the returned alpha2.
    pub freq_at_alpha2: f64,
}

pub fn calibrate_speeds(
    lambda_p: f64,
    d: usize,
    box_: &LatticeBox,
    rule: BoundaryRule,
    horizon: f64,
    trials: u64,
    seed0: u64,
    eps: f64,
    s_step: f64,
) -> Result<SpeedCalibration> {
    if box_.dim() != d {
        return Err(Error::Dimension("box dimension mismatch".into()));
    }
    let origin = Configuration::singleton_origin(box_.clone())?;
    let full = Configuration::filled(box_.clone(), 1);
    struct TrialOut {
        reach_ratio: f64,
        survived: bool,
        min_disagree: i64,
    }
    let outs: Vec<TrialOut> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<TrialOut> {
            let t = generate_timeline(box_, rule, lambda_p, 1.0, horizon, seed0 + i)?;
            let mut single = origin.states().to_vec();
            let mut fullv = full.states().to_vec();
            let (mut f1, mut s1, mut f2, mut s2) = (1usize, 0usize, full.fertile_count(), 0usize);
            let mut reach = 0i64;
            for m in &t.marks {
                let before = single[m.kind.target() as usize];
                crate::dynamics::apply_mark(
                    ProcessKind::Contact,
                    &mut single,
                    m.kind,
                    &mut f1,
                    &mut s1,
                );
                let target = m.kind.target() as usize;
                if before != 1 && single[target] == 1 {
                    let x = box_.site_at(target);
                    reach = reach.max(x.iter().map(|c| c.abs()).max().unwrap_or(0));
                }
                crate::dynamics::apply_mark(
                    ProcessKind::Contact,
                    &mut fullv,
                    m.kind,
                    &mut f2,
                    &mut s2,
                );
            }
            let mut min_disagree = i64::MAX;
            for idx in 0..box_.volume() {
                if single[idx] != fullv[idx] {
                    let x = box_.site_at(idx);
                    min_disagree = min_disagree.min(x.iter().map(|c| c.abs()).max().unwrap());
                }
            }
            Ok(TrialOut {
                reach_ratio: reach as f64 / horizon,
                survived: f1 > 0,
                min_disagree,
            })
        })
        .collect::<Result<_>>()?;
    let surviving = outs.iter().filter(|o| o.survived).count() as u64;
    if surviving == 0 {
        return Err(Error::CalibrationFailed(
            "all trials went extinct; calibration needs a supercritical parameter".into(),
        ));
    }
    let mut ratios: Vec<f64> = outs.iter().map(|o| o.reach_ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let idx = ((0.999 * trials as f64).ceil() as usize).clamp(1, trials as usize) - 1;
    let alpha1 = ratios[idx];
    let half = box_.hi()[0];
    let mut alpha2 = 0.0;
    let mut freq_at = 1.0;
    let mut k = 0u64;
    loop {
        let s = k as f64 * s_step;
        let radius = (s * horizon).floor() as i64;
        if radius > half {
            break;
        }
        let disagree = outs
            .iter()
            .filter(|o| o.survived && o.min_disagree <= radius)
            .count() as f64;
        let freq = disagree / surviving as f64;
        if freq <= eps {
            alpha2 = s;
            freq_at = freq;
        } else if k > 0 {
            break;
        }
        k += 1;
    }
    Ok(SpeedCalibration {
        alpha1,
        alpha2,
        surviving,
        trials,
        freq_at_alpha2: freq_at,
    })
}

/// Two-sided Monte Carlo test of the contact self-duality identity on the
/// finite box: survival from zeta at time t against the full-box process
/// intersecting A(zeta) at time t, on independent seed streams.
#[derive(Clone, Debug, Serialize)]
pub struct DualityReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    pub z: f64,
}

pub fn duality_check(
    zeta: &Configuration,
    lambda: f64,
    t: f64,
    rule: BoundaryRule,
    trials: u64,
    seed0: u64,
) -> Result<DualityReport> {
    if zeta.has_sterile() {
        return Err(Error::Parameter("duality needs a {0,1} configuration".into()));
    }
    let box_ = zeta.box_.clone();
    let lhs_hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| {
            survival_trial(
                zeta,
                ProcessKind::Contact,
                rule,
                lambda,
                1.0,
                t,
                seed0 + i,
            )
            .map(u64::from)
            .unwrap_or(0)
        })
        .sum();
    let full = Configuration::filled(box_.clone(), 1);
    let targets: Vec<usize> = (0..box_.volume())
        .filter(|&i| zeta.states()[i] == 1)
        .collect();
    let rhs_hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let timeline = generate_timeline(&box_, rule, lambda, 1.0, t, seed0 + trials + i)?;
            let traj = evolve_marks(
                &full,
                ProcessKind::Contact,
                timeline.marks.iter().copied(),
                &[t],
                t,
            )?;
            let state = &traj.snapshots[0].1;
            Ok(u64::from(
                targets.iter().any(|&j| state.states()[j] == 1),
            ))
        })
        .map(|r| r.unwrap_or(0))
        .sum();
    let (n, lhs) = (trials as f64, lhs_hits as f64 / trials as f64);
    let rhs = rhs_hits as f64 / trials as f64;
    let lhs_se = (lhs * (1.0 - lhs) / n).sqrt();
    let rhs_se = (rhs * (1.0 - rhs) / n).sqrt();
    let denom = (lhs_se * lhs_se + rhs_se * rhs_se).sqrt();
    let z = if denom > 0.0 { (lhs - rhs) / denom } else { 0.0 };
    Ok(DualityReport {
        lhs,
        lhs_se,
        rhs,
        rhs_se,
        z,
    })
}

/// The restriction lemma, checked pathwise: the Spont process driven only
/// by the region's marks stays below the full-box process at every event
/// time, at every site of the region. Returns the number of violating
/// (site, time) pairs.
pub fn restriction_violations(
    xi0: &Configuration,
    sub: &LatticeBox,
    lambda: f64,
    p: f64,
    rule: BoundaryRule,
    horizon: f64,
    seed: u64,
) -> Result<usize> {
    let full_box = &xi0.box_;
    let timeline = generate_timeline(full_box, rule, lambda, p, horizon, seed)?;
    let restricted_tl = timeline.restrict(sub, 0.0, horizon)?;
    let xi0_restricted = restrict_config(xi0, sub)?;
    for idx in 0..full_box.volume() {
        if sub.contains(&full_box.site_at(idx))
            && xi0_restricted.states()[idx] > xi0.states()[idx]
        {
            return Err(Error::InitialOrder {
                site: full_box.site_at(idx),
                lower: xi0_restricted.states()[idx],
                upper: xi0.states()[idx],
            });
        }
    }
    // re-embed restricted marks into full-box indices, replay both
    // processes, and compare on the region only
    let reindex: Vec<u32> = (0..sub.volume())
        .map(|i| full_box.index_of(&sub.site_at(i)).unwrap() as u32)
        .collect();
    let in_sub: Vec<bool> = (0..full_box.volume())
        .map(|i| sub.contains(&full_box.site_at(i)))
        .collect();
    let mut lo = xi0_restricted.states().to_vec();
    let mut hi = xi0.states().to_vec();
    let (mut lf, mut ls, mut hf, mut hs) = (
        xi0_restricted.fertile_count(),
        xi0_restricted.sterile_count(),
        xi0.fertile_count(),
        xi0.sterile_count(),
    );
    let mut violations = 0usize;
    let mut ri = restricted_tl.marks.iter().peekable();
    for m in &timeline.marks {
        if let Some(r) = ri.peek() {
            if r.time.to_bits() == m.time.to_bits() {
                let k = match r.kind {
                    MarkKind::BirthFertile { src, dst } => MarkKind::BirthFertile {
                        src: reindex[src as usize],
                        dst: reindex[dst as usize],
                    },
                    MarkKind::BirthSterile { src, dst } => MarkKind::BirthSterile {
                        src: reindex[src as usize],
                        dst: reindex[dst as usize],
                    },
                    MarkKind::DeathFertile { site } => MarkKind::DeathFertile {
                        site: reindex[site as usize],
                    },
                    MarkKind::DeathSterile { site } => MarkKind::DeathSterile {
                        site: reindex[site as usize],
                    },
                };
                crate::dynamics::apply_mark(ProcessKind::Spont, &mut lo, k, &mut lf, &mut ls);
                ri.next();
            }
        }
        crate::dynamics::apply_mark(ProcessKind::Spont, &mut hi, m.kind, &mut hf, &mut hs);
        let t = m.kind.target() as usize;
        if in_sub[t] && lo[t] > hi[t] {
            violations += 1;
        }
    }
    Ok(violations)
}

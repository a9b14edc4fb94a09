//! Two-dimensional oriented site percolation on the even lattice
//! {(m,n): m+n even, n >= 0}, with bonds (m,n) -> (m±1, n+1).

use crate::error::{Error, Result};
use crate::stream::keyed_uniform;
use serde::Serialize;
use std::collections::HashMap;

const TAG_SITE: u64 = 11;

/// The even lattice truncated to height `n_max` and width `|m| <= m_max`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvenLattice {
    pub n_max: i64,
    pub m_max: i64,
}

impl EvenLattice {
    pub fn new(n_max: i64, m_max: i64) -> Result<Self> {
        if n_max < 0 || m_max < 0 {
            return Err(Error::Parameter("lattice bounds must be nonnegative".into()));
        }
        Ok(EvenLattice { n_max, m_max })
    }

    pub fn contains(&self, m: i64, n: i64) -> bool {
        (m + n).rem_euclid(2) == 0 && (0..=self.n_max).contains(&n) && m.abs() <= self.m_max
    }

    /// m-coordinates of level `n`, left to right.
    pub fn level_sites(&self, n: i64) -> Vec<i64> {
        if !(0..=self.n_max).contains(&n) {
            return Vec::new();
        }
        let start = if (self.m_max + n).rem_euclid(2) == 0 {
            -self.m_max
        } else {
            -self.m_max + 1
        };
        (0..)
            .map(|i| start + 2 * i)
            .take_while(|&m| m <= self.m_max)
            .collect()
    }

    pub fn sites(&self) -> Vec<(i64, i64)> {
        (0..=self.n_max)
            .flat_map(|n| self.level_sites(n).into_iter().map(move |m| (m, n)))
            .collect()
    }
}

/// How a field's sites were sampled.
#[derive(Clone, Debug, Serialize)]
pub enum SamplerDescriptor {
    Independent { p: f64, seed: u64 },
    MDependent { m: i64, gamma: f64, source: String },
}

/// Open/closed marks on the even lattice.
#[derive(Clone, Debug)]
pub struct PercolationField {
    pub lattice: EvenLattice,
    open: HashMap<(i64, i64), bool>,
    pub sampler: SamplerDescriptor,
}

impl PercolationField {
    pub fn is_open(&self, m: i64, n: i64) -> bool {
        *self.open.get(&(m, n)).unwrap_or(&false)
    }

    pub fn open_fraction(&self) -> f64 {
        if self.open.is_empty() {
            return 0.0;
        }
        self.open.values().filter(|&&o| o).count() as f64 / self.open.len() as f64
    }
}

/// Independent Bernoulli(p) site marks, deterministic in the seed. The same
/// (seed, site) pair always consumes the same uniform, so fields sampled at
/// p1 < p2 from one seed are nested sitewise.
pub fn sample_independent(lattice: &EvenLattice, p: f64, seed: u64) -> Result<PercolationField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("p must be in [0,1], got {p}")));
    }
    let mut open = HashMap::new();
    for (m, n) in lattice.sites() {
        open.insert((m, n), keyed_uniform(seed, TAG_SITE, &[m, n]) < p);
    }
    Ok(PercolationField {
        lattice: lattice.clone(),
        open,
        sampler: SamplerDescriptor::Independent { p, seed },
    })
}

/// Wrap externally generated site marks (for instance wetness indicators
/// from a block construction) as a field, recording the claimed dependence
/// range M and intensity parameter gamma.
pub fn m_dependent_from_blocks(
    lattice: &EvenLattice,
    marks: impl Fn(i64, i64) -> bool,
    m: i64,
    gamma: f64,
    source: &str,
) -> PercolationField {
    let open = lattice
        .sites()
        .into_iter()
        .map(|(mm, nn)| ((mm, nn), marks(mm, nn)))
        .collect();
    PercolationField {
        lattice: lattice.clone(),
        open,
        sampler: SamplerDescriptor::MDependent {
            m,
            gamma,
            source: source.to_string(),
        },
    }
}

/// Oriented open path from `(m, 0)` to `(m', n)`: the empty path exists
/// unconditionally; a nonempty path needs every site along it open,
/// including the starting one.
pub fn open_path_exists(field: &PercolationField, from: (i64, i64), to: (i64, i64)) -> Result<bool> {
    let lat = &field.lattice;
    if from.1 != 0 {
        return Err(Error::Parameter("paths start at level 0".into()));
    }
    if !lat.contains(from.0, from.1) || !lat.contains(to.0, to.1) {
        return Err(Error::Containment("path endpoint outside lattice".into()));
    }
    if from == to {
        return Ok(true);
    }
    if !field.is_open(from.0, 0) {
        return Ok(false);
    }
    let mut frontier = vec![from.0];
    for n in 1..=to.1 {
        let mut next: Vec<i64> = Vec::new();
        for &m in &frontier {
            for mm in [m - 1, m + 1] {
                if lat.contains(mm, n) && field.is_open(mm, n) && !next.contains(&mm) {
                    next.push(mm);
                }
            }
        }
        if next.is_empty() {
            return Ok(false);
        }
        frontier = next;
    }
    Ok(frontier.contains(&to.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClusterOutcome {
    Extinct,
    ReachedTop,
    CapExceeded,
}

/// Levelwise cluster grown from an origin set.
#[derive(Clone, Debug)]
pub struct Cluster {
    pub origin: Vec<i64>,
    /// Reached sites per level, starting at level 0.
    pub levels: Vec<Vec<i64>>,
    pub size: usize,
    pub outcome: ClusterOutcome,
}

/// Grow the cluster level by level until extinction, the lattice top, or a
/// size cap. With `seeds_external` the level-0 sites are taken as reached
/// regardless of their marks (the comparison-theorem usage); otherwise they
/// must be open (the sampled-field convention).
pub fn grow_cluster(
    field: &PercolationField,
    origin: &[i64],
    seeds_external: bool,
    cap: usize,
) -> Cluster {
    let lat = &field.lattice;
    let mut level: Vec<i64> = origin
        .iter()
        .copied()
        .filter(|&m| lat.contains(m, 0) && (seeds_external || field.is_open(m, 0)))
        .collect();
    level.sort_unstable();
    level.dedup();
    let mut levels = vec![level.clone()];
    let mut size = level.len();
    let mut outcome = if level.is_empty() {
        ClusterOutcome::Extinct
    } else if lat.n_max == 0 {
        ClusterOutcome::ReachedTop
    } else {
        ClusterOutcome::CapExceeded // provisional
    };
    if !level.is_empty() && lat.n_max > 0 {
        for n in 1..=lat.n_max {
            let mut next: Vec<i64> = Vec::new();
            for &m in &levels[(n - 1) as usize] {
                for mm in [m - 1, m + 1] {
                    if lat.contains(mm, n) && field.is_open(mm, n) {
                        next.push(mm);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            size += next.len();
            let empty = next.is_empty();
            levels.push(next);
            if empty {
                outcome = ClusterOutcome::Extinct;
                break;
            }
            if size > cap {
                outcome = ClusterOutcome::CapExceeded;
                break;
            }
            if n == lat.n_max {
                outcome = ClusterOutcome::ReachedTop;
            }
        }
    }
    Cluster {
        origin: origin.to_vec(),
        levels,
        size,
        outcome,
    }
}

/// Cluster of the origin (0,0) under the sampled-field convention.
pub fn cluster_from_origin(field: &PercolationField, cap: usize) -> Cluster {
    grow_cluster(field, &[0], false, cap)
}

/// The dependent-percolation threshold 6^(-4(2M+1)), returned both as a
/// value and as the (base, exponent) pair.
pub fn dependent_threshold(m: i64) -> (f64, (u32, i64)) {
    let exponent = -4 * (2 * m + 1);
    (6f64.powi(exponent as i32), (6, exponent))
}

/// Empirical check of the M-dependence bound: for well-separated sites the
/// probability that all of them are closed is at most gamma^k, equivalently
/// P(at least one open) >= 1 - gamma^k.
pub struct MDependenceReport {
    pub all_closed_freq: f64,
    pub bound: f64,
    pub stderr: f64,
    pub within_tolerance: bool,
}

pub fn check_m_dependence(
    generate: impl Fn(u64) -> PercolationField,
    sites: &[(i64, i64)],
    gamma: f64,
    n_seeds: u64,
) -> MDependenceReport {
    let mut all_closed = 0usize;
    for seed in 0..n_seeds {
        let f = generate(seed);
        if sites.iter().all(|&(m, n)| !f.is_open(m, n)) {
            all_closed += 1;
        }
    }
    let freq = all_closed as f64 / n_seeds as f64;
    let bound = gamma.powi(sites.len() as i32);
    let stderr = (bound * (1.0 - bound) / n_seeds as f64).sqrt();
    MDependenceReport {
        all_closed_freq: freq,
        bound,
        stderr,
        within_tolerance: freq <= bound + 3.0 * stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_membership_and_levels() {
        let l = EvenLattice::new(4, 4).unwrap();
        assert!(l.contains(0, 0) && l.contains(-1, 1) && l.contains(2, 4));
        assert!(!l.contains(1, 0) && !l.contains(0, 5) && !l.contains(5, 1));
        assert_eq!(l.level_sites(0), vec![-4, -2, 0, 2, 4]);
        assert_eq!(l.level_sites(1), vec![-3, -1, 1, 3]);
    }

    #[test]
    fn degenerate_sampling() {
        let l = EvenLattice::new(6, 6).unwrap();
        let closed = sample_independent(&l, 0.0, 1).unwrap();
        assert!(l.sites().iter().all(|&(m, n)| !closed.is_open(m, n)));
        let open = sample_independent(&l, 1.0, 1).unwrap();
        assert!(l.sites().iter().all(|&(m, n)| open.is_open(m, n)));
        assert!(sample_independent(&l, 1.5, 0).is_err());
    }

    #[test]
    fn open_fraction_near_half() {
        // one large field: ~1e6 independent sites
        let l = EvenLattice::new(999, 999).unwrap();
        let f = sample_independent(&l, 0.5, 42).unwrap();
        let n = l.sites().len() as f64;
        let se = (0.25 / n).sqrt();
        assert!(
            (f.open_fraction() - 0.5).abs() < 3.0 * se,
            "fraction {} over {} sites",
            f.open_fraction(),
            n
        );
    }

    #[test]
    fn path_trivial_cases() {
        let l = EvenLattice::new(5, 5).unwrap();
        let all_open = sample_independent(&l, 1.0, 0).unwrap();
        assert!(open_path_exists(&all_open, (0, 0), (0, 0)).unwrap());
        assert!(open_path_exists(&all_open, (0, 0), (3, 5)).unwrap());
        assert!(open_path_exists(&all_open, (0, 0), (-1, 5)).unwrap());
        let all_closed = sample_independent(&l, 0.0, 0).unwrap();
        assert!(open_path_exists(&all_closed, (2, 0), (2, 0)).unwrap());
        assert!(!open_path_exists(&all_closed, (0, 0), (1, 1)).unwrap());
        assert!(open_path_exists(&all_open, (0, 0), (1, 2)).is_err()); // off-lattice
    }

    #[test]
    fn bfs_agrees_with_exhaustive_path_enumeration() {
        // height-3 cone from the origin has 2+3+4 = 9 non-origin sites plus
        // the origin: enumerate every field on those 10 sites
        let l = EvenLattice::new(3, 3).unwrap();
        let cone: Vec<(i64, i64)> = l
            .sites()
            .into_iter()
            .filter(|&(m, n)| m.abs() <= n || (m, n) == (0, 0))
            .collect();
        assert!(cone.len() <= 12);
        // recursive enumeration of oriented paths
        fn any_path(
            open: &dyn Fn(i64, i64) -> bool,
            m: i64,
            n: i64,
            target: (i64, i64),
        ) -> bool {
            if (m, n) == target {
                return true;
            }
            if n >= target.1 {
                return false;
            }
            [m - 1, m + 1]
                .into_iter()
                .any(|mm| open(mm, n + 1) && any_path(open, mm, n + 1, target))
        }
        for mask in 0u32..(1 << cone.len()) {
            let open_set: std::collections::HashSet<(i64, i64)> = cone
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &s)| s)
                .collect();
            let field = m_dependent_from_blocks(
                &l,
                |m, n| open_set.contains(&(m, n)),
                0,
                0.0,
                "exhaustive",
            );
            for &(tm, tn) in &cone {
                let brute = if (tm, tn) == (0, 0) {
                    true
                } else {
                    open_set.contains(&(0, 0))
                        && open_set.contains(&(tm, tn))
                        && any_path(&|m, n| open_set.contains(&(m, n)), 0, 0, (tm, tn))
                };
                let bfs = open_path_exists(&field, (0, 0), (tm, tn)).unwrap();
                assert_eq!(bfs, brute, "mask {mask:b} target ({tm},{tn})");
            }
        }
    }

    #[test]
    fn full_cone_growth_at_p_one() {
        let l = EvenLattice::new(10, 20).unwrap();
        let f = sample_independent(&l, 1.0, 0).unwrap();
        let c = cluster_from_origin(&f, usize::MAX);
        assert_eq!(c.outcome, ClusterOutcome::ReachedTop);
        for (n, level) in c.levels.iter().enumerate() {
            assert_eq!(level.len(), n + 1, "cone width at level {n}");
        }
    }

    #[test]
    fn closed_origin_gives_empty_cluster() {
        let l = EvenLattice::new(5, 5).unwrap();
        let f = sample_independent(&l, 0.0, 3).unwrap();
        let c = cluster_from_origin(&f, 100);
        assert_eq!(c.outcome, ClusterOutcome::Extinct);
        assert_eq!(c.size, 0);
        // externally seeded origins are exempt from the openness requirement
        let c = grow_cluster(&f, &[0], true, 100);
        assert_eq!(c.levels[0], vec![0]);
    }

    #[test]
    fn monotone_in_p_under_shared_uniforms() {
        let l = EvenLattice::new(30, 30).unwrap();
        for seed in 0..300 {
            let lo = sample_independent(&l, 0.4, seed).unwrap();
            let hi = sample_independent(&l, 0.7, seed).unwrap();
            for &(m, n) in &l.sites() {
                assert!(!lo.is_open(m, n) || hi.is_open(m, n), "seed {seed}");
            }
            let cl = cluster_from_origin(&lo, usize::MAX);
            let ch = cluster_from_origin(&hi, usize::MAX);
            for (a, b) in cl.levels.iter().zip(ch.levels.iter()) {
                assert!(a.iter().all(|m| b.contains(m)), "cluster not nested");
            }
        }
    }

    #[test]
    fn reproducible_between_seed_blocks_and_bounded_by_short_lattice() {
        let tall = EvenLattice::new(100, 200).unwrap();
        let trials = 2_000u64;
        let survived = |seed0: u64| -> f64 {
            (0..trials)
                .filter(|&i| {
                    let f = sample_independent(&tall, 0.8, seed0 + i).unwrap();
                    cluster_from_origin(&f, usize::MAX).outcome == ClusterOutcome::ReachedTop
                })
                .count() as f64
                / trials as f64
        };
        let a = survived(0);
        let b = survived(1_000_000);
        let se = (a * (1.0 - a) / trials as f64).sqrt();
        assert!((a - b).abs() < 3.0 * 1.5 * se, "blocks {a} vs {b}");
        // survival to height 100 cannot beat exact survival to height 4
        let short = EvenLattice::new(4, 4).unwrap();
        let exact = exact_survival(&short, 0.8);
        assert!(a <= exact + 3.0 * se);
    }

    /// Exhaustive-enumeration oracle: probability that the origin cluster
    /// reaches the top level, by summing over all fields on the cone.
    pub(super) fn exact_survival(l: &EvenLattice, p: f64) -> f64 {
        let cone: Vec<(i64, i64)> = l
            .sites()
            .into_iter()
            .filter(|&(m, n)| m.abs() <= n || (m, n) == (0, 0))
            .collect();
        assert!(cone.len() <= 20, "cone too large to enumerate");
        let mut total = 0.0;
        for mask in 0u64..(1 << cone.len()) {
            let open_set: std::collections::HashSet<(i64, i64)> = cone
                .iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &s)| s)
                .collect();
            // reach-top by levelwise sweep, written independently of
            // grow_cluster
            let mut frontier: Vec<i64> = if open_set.contains(&(0, 0)) {
                vec![0]
            } else {
                Vec::new()
            };
            let mut reached = !frontier.is_empty() && l.n_max == 0;
            for n in 1..=l.n_max {
                let mut next = Vec::new();
                for &m in &frontier {
                    for mm in [m - 1, m + 1] {
                        if open_set.contains(&(mm, n)) && !next.contains(&mm) {
                            next.push(mm);
                        }
                    }
                }
                frontier = next;
                if frontier.is_empty() {
                    break;
                }
                if n == l.n_max {
                    reached = true;
                }
            }
            if reached {
                let k = mask.count_ones() as i32;
                total += p.powi(k) * (1.0 - p).powi(cone.len() as i32 - k);
            }
        }
        total
    }

    #[test]
    fn monte_carlo_matches_exact_enumeration() {
        let l = EvenLattice::new(4, 4).unwrap();
        let trials = 20_000u64;
        for p in [0.3, 0.6, 0.9] {
            let exact = exact_survival(&l, p);
            let hits = (0..trials)
                .filter(|&i| {
                    let f = sample_independent(&l, p, 70_000 + i).unwrap();
                    cluster_from_origin(&f, usize::MAX).outcome == ClusterOutcome::ReachedTop
                })
                .count();
            let est = hits as f64 / trials as f64;
            let se = (exact * (1.0 - exact) / trials as f64).sqrt();
            assert!(
                (est - exact).abs() < 3.0 * se,
                "p={p}: {est} vs exact {exact}"
            );
        }
    }

    #[test]
    fn threshold_values() {
        let (v0, (base, e0)) = dependent_threshold(0);
        assert_eq!(v0, 1.0 / 1296.0);
        assert_eq!((base, e0), (6, -4));
        let (v1, (_, e1)) = dependent_threshold(1);
        assert_eq!(e1, -12);
        assert!((v1 - 6f64.powi(-12)).abs() < 1e-25);
        // exponent is linear in M with slope -8
        for m in 0..5 {
            let (_, (_, ea)) = dependent_threshold(m);
            let (_, (_, eb)) = dependent_threshold(m + 1);
            assert_eq!(eb - ea, -8);
        }
    }

    #[test]
    fn independent_marks_satisfy_m_dependence_with_gamma_one_minus_p() {
        let l = EvenLattice::new(10, 10).unwrap();
        let p = 0.6;
        let sites = [(-8, 0), (0, 4), (8, 10)]; // pairwise l-infinity > 0
        let report = check_m_dependence(
            |seed| sample_independent(&l, p, seed).unwrap(),
            &sites,
            1.0 - p,
            4_000,
        );
        assert!(
            report.within_tolerance,
            "freq {} vs bound {}",
            report.all_closed_freq, report.bound
        );
        // and the bound is tight for independent marks: freq is also not
        // far below the bound
        assert!(report.all_closed_freq > report.bound - 3.0 * report.stderr);
    }

    #[test]
    fn synthetic_m1_field_satisfies_the_bound() {
        // each site is opened by its own noise or its left parent's noise:
        // dependence range 1, open probability 1-(1-q)^2, so gamma=(1-q)^2
        let l = EvenLattice::new(12, 12).unwrap();
        let q = 0.5;
        let gamma = (1.0 - q) * (1.0 - q);
        let gen = |seed: u64| {
            m_dependent_from_blocks(
                &l,
                |m, n| {
                    let own = keyed_uniform(seed, 77, &[m, n]) < q;
                    let parent = keyed_uniform(seed, 77, &[m - 1, n - 1]) < q;
                    own || parent
                },
                1,
                gamma,
                "synthetic-or",
            )
        };
        // well-separated triple: pairwise l-infinity distance > 1
        let sites = [(-6, 0), (0, 4), (6, 10)];
        let report = check_m_dependence(gen, &sites, gamma, 4_000);
        assert!(
            report.within_tolerance,
            "freq {} vs bound {}",
            report.all_closed_freq, report.bound
        );
    }
}

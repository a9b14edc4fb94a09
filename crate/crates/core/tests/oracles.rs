//! Monte Carlo estimates against the exact finite-chain solver on small
//! boxes. The chain generator is built straight from the transition-rate
//! definitions, independent of the event-replay machinery it checks.

use islab_core::ctmc::build_generator;
use islab_core::dynamics::{evolve, survival_trial, ProcessKind};
use islab_core::events::generate_timeline;
use islab_core::lattice::{BoundaryRule, Configuration, LatticeBox};
use islab_core::renorm::duality_check;
use rayon::prelude::*;

const AB: BoundaryRule = BoundaryRule::AbsorbingEmpty;

#[test]
fn contact_three_site_hitting_probability() {
    // from a single fertile at the center of a 3-site line: probability of
    // ever occupying site 0 before the fertile set dies out
    let b = LatticeBox::line(0, 2).unwrap();
    let lambda = 1.0;
    let chain = build_generator(ProcessKind::Contact, lambda, 1.0, &b, AB).unwrap();
    let exact = chain
        .hitting_probability(&[0, 1, 0], |s| s[0] == 1, |s| s.iter().all(|&x| x != 1))
        .unwrap();
    let trials = 100_000u64;
    let init = Configuration::from_sites(b.clone(), &[(&[1], 1)]).unwrap();
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|seed| {
            // extinction on this box by t=100 is essentially sure; replay
            // and watch for site 0 turning fertile first
            let t = generate_timeline(&b, AB, lambda, 1.0, 100.0, seed).unwrap();
            let mut states = init.states().to_vec();
            let (mut f, mut s) = (1usize, 0usize);
            for m in &t.marks {
                islab_core::dynamics::apply_mark(ProcessKind::Contact, &mut states, m.kind, &mut f, &mut s);
                if states[0] == 1 {
                    return 1u64;
                }
                if f == 0 {
                    return 0u64;
                }
            }
            0
        })
        .sum();
    let est = hits as f64 / trials as f64;
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!(
        (est - exact).abs() < 3.0 * se,
        "hitting: {est} vs exact {exact} (se {se})"
    );
}

#[test]
fn is_four_site_alive_probability() {
    // 81-state chain: fertile set non-empty at T, Monte Carlo vs
    // uniformization
    let b = LatticeBox::line(0, 3).unwrap();
    let (lambda, p, horizon) = (1.5, 0.6, 3.0);
    let chain = build_generator(ProcessKind::IS, lambda, p, &b, AB).unwrap();
    let init = Configuration::from_sites(b.clone(), &[(&[1], 1)]).unwrap();
    let exact = chain.transient_probability(&[0, 1, 0, 0], horizon, 1e-12, |s| {
        s.iter().any(|&x| x == 1)
    });
    let trials = 100_000u64;
    let alive: u64 = (0..trials)
        .into_par_iter()
        .map(|seed| {
            survival_trial(&init, ProcessKind::IS, AB, lambda, p, horizon, seed)
                .map(u64::from)
                .unwrap()
        })
        .sum();
    let est = alive as f64 / trials as f64;
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!(
        (est - exact).abs() < 3.0 * se,
        "alive-at-T: {est} vs exact {exact} (se {se})"
    );
}

#[test]
fn spont_three_site_sterile_mass() {
    // cross-check the boundary convention: blocking rate is
    // (incoming edges)·λ(1-p), so the chain and the replay must agree on
    // the probability of holding a sterile site at time T
    let b = LatticeBox::line(0, 2).unwrap();
    let (lambda, p, horizon) = (2.0, 0.5, 2.0);
    let chain = build_generator(ProcessKind::Spont, lambda, p, &b, AB).unwrap();
    let exact = chain.transient_probability(&[0, 1, 0], horizon, 1e-12, |s| {
        s.iter().any(|&x| x == -1)
    });
    let init = Configuration::from_sites(b.clone(), &[(&[1], 1)]).unwrap();
    let trials = 100_000u64;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|seed| {
            let t = generate_timeline(&b, AB, lambda, p, horizon, seed).unwrap();
            let traj = evolve(&init, ProcessKind::Spont, &t, &[horizon]).unwrap();
            u64::from(traj.snapshots[0].1.has_sterile())
        })
        .sum();
    let est = hits as f64 / trials as f64;
    let se = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!(
        (est - exact).abs() < 3.0 * se,
        "sterile mass: {est} vs exact {exact} (se {se})"
    );
}

#[test]
fn duality_exact_on_three_site_chain() {
    // both sides of the self-duality identity, solved exactly on the
    // 27-state chain: equality to solver tolerance
    let b = LatticeBox::line(0, 2).unwrap();
    let (lambda, t) = (1.0, 1.0);
    let chain = build_generator(ProcessKind::Contact, lambda, 1.0, &b, AB).unwrap();
    let lhs = chain.transient_probability(&[0, 1, 0], t, 1e-13, |s| s.iter().any(|&x| x == 1));
    let rhs = chain.transient_probability(&[1, 1, 1], t, 1e-13, |s| s[1] == 1);
    assert!(
        (lhs - rhs).abs() < 1e-9,
        "duality not exact: {lhs} vs {rhs}"
    );
    // Monte Carlo agrees with the chain within 3 sigma
    let zeta = Configuration::from_sites(b, &[(&[1], 1)]).unwrap();
    let report = duality_check(&zeta, lambda, t, AB, 20_000, 3).unwrap();
    let se = (lhs * (1.0 - lhs) / 20_000f64).sqrt();
    assert!((report.lhs - lhs).abs() < 3.0 * se);
    assert!((report.rhs - rhs).abs() < 3.0 * se);
}

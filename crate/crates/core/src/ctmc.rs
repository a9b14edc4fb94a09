//! Exact continuous-time Markov chain oracle for small boxes.
//!
//! Builds the full generator of Contact/IS/Spont dynamics on a box of a few
//! sites directly from the transition-rate definitions (never through the
//! event-replay machinery, so it stays an independent check of it), and
//! solves transient distributions by uniformization and hitting
//! probabilities by linear algebra.

use crate::dynamics::ProcessKind;
use crate::error::{Error, Result};
use crate::lattice::{BoundaryRule, LatticeBox, SiteId};
use nalgebra::{DMatrix, DVector};

/// Dense generator over all 3^|box| spin configurations.
pub struct FiniteChain {
    pub box_: LatticeBox,
    pub n_states: usize,
    q: DMatrix<f64>,
}

const DIGITS: [i8; 3] = [0, 1, -1];

fn digit_of(state: i8) -> usize {
    match state {
        0 => 0,
        1 => 1,
        -1 => 2,
        _ => unreachable!("states lie in {{-1,0,1}}"),
    }
}

/// Encode per-site states as a base-3 index.
pub fn state_index(states: &[i8]) -> usize {
    states.iter().fold(0usize, |acc, &s| acc * 3 + digit_of(s))
}

/// Decode a base-3 index into per-site states.
pub fn index_state(mut idx: usize, n_sites: usize) -> Vec<i8> {
    let mut out = vec![0i8; n_sites];
    for i in (0..n_sites).rev() {
        out[i] = DIGITS[idx % 3];
        idx /= 3;
    }
    out
}

/// Build the generator for the given dynamics on a small box.
///
/// Spont's blocking rate at a site is (number of incoming edges)·λ(1-p),
/// which equals 2dλ(1-p) in the interior and under periodic boundaries;
/// this matches the event engine's finite-volume convention.
pub fn build_generator(
    kind: ProcessKind,
    lambda: f64,
    p: f64,
    box_: &LatticeBox,
    rule: BoundaryRule,
) -> Result<FiniteChain> {
    let n_sites = box_.volume();
    if n_sites > 12 {
        return Err(Error::Parameter(format!(
            "chain would have 3^{n_sites} states; use a smaller box"
        )));
    }
    let n_states = 3usize.pow(n_sites as u32);
    let neighbor_idx: Vec<Vec<usize>> = (0..n_sites)
        .map(|i| {
            crate::lattice::neighbors(box_, &SiteId(box_.site_at(i)), rule)
                .expect("site in box")
                .into_iter()
                .map(|y| box_.index_of(&y.0).expect("neighbor in box"))
                .collect()
        })
        .collect();
    let mut q = DMatrix::zeros(n_states, n_states);
    for idx in 0..n_states {
        let states = index_state(idx, n_sites);
        for i in 0..n_sites {
            let add = |new_state: i8, rate: f64, q: &mut DMatrix<f64>| {
                if rate <= 0.0 {
                    return;
                }
                let mut to = states.clone();
                to[i] = new_state;
                let j = state_index(&to);
                q[(idx, j)] += rate;
                q[(idx, idx)] -= rate;
            };
            match states[i] {
                1 | -1 => add(0, 1.0, &mut q),
                0 => {
                    let n1 = neighbor_idx[i].iter().filter(|&&j| states[j] == 1).count() as f64;
                    match kind {
                        ProcessKind::Contact => add(1, lambda * p * n1, &mut q),
                        ProcessKind::IS => {
                            add(1, lambda * p * n1, &mut q);
                            add(-1, lambda * (1.0 - p) * n1, &mut q);
                        }
                        ProcessKind::Spont => {
                            add(1, lambda * p * n1, &mut q);
                            let incoming = neighbor_idx[i].len() as f64;
                            add(-1, lambda * (1.0 - p) * incoming, &mut q);
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    Ok(FiniteChain {
        box_: box_.clone(),
        n_states,
        q,
    })
}

impl FiniteChain {
    /// Distribution at time `t` from a point mass, by uniformization.
    pub fn transient_distribution(&self, init: &[i8], t: f64, tol: f64) -> Vec<f64> {
        let n = self.n_states;
        let rate = (0..n)
            .map(|i| -self.q[(i, i)])
            .fold(0.0f64, f64::max)
            .max(1e-12);
        // jump matrix of the uniformized chain
        let mut pmat = &self.q / rate;
        for i in 0..n {
            pmat[(i, i)] += 1.0;
        }
        let mut v = DVector::zeros(n);
        v[state_index(init)] = 1.0;
        let mut acc = DVector::zeros(n);
        let lt = rate * t;
        let mut weight = (-lt).exp();
        let mut cum = 0.0;
        let mut k = 0usize;
        loop {
            acc.axpy(weight, &v, 1.0);
            cum += weight;
            if 1.0 - cum < tol || k > 200_000 {
                break;
            }
            v = pmat.tr_mul(&v);
            k += 1;
            weight *= lt / k as f64;
        }
        acc.iter().copied().collect()
    }

    /// Probability mass of all states satisfying `pred` at time `t`.
    pub fn transient_probability(
        &self,
        init: &[i8],
        t: f64,
        tol: f64,
        pred: impl Fn(&[i8]) -> bool,
    ) -> f64 {
        let dist = self.transient_distribution(init, t, tol);
        let n_sites = self.box_.volume();
        dist.iter()
            .enumerate()
            .filter(|(i, _)| pred(&index_state(*i, n_sites)))
            .map(|(_, &w)| w)
            .sum()
    }

    /// Probability of visiting a `target` state strictly before any
    /// `taboo` state, starting from `init`. States where the chain halts
    /// without being target or taboo count as misses.
    pub fn hitting_probability(
        &self,
        init: &[i8],
        target: impl Fn(&[i8]) -> bool,
        taboo: impl Fn(&[i8]) -> bool,
    ) -> Result<f64> {
        let n = self.n_states;
        let n_sites = self.box_.volume();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            let s = index_state(i, n_sites);
            if target(&s) {
                a[(i, i)] = 1.0;
                b[i] = 1.0;
            } else if taboo(&s) || -self.q[(i, i)] <= 0.0 {
                a[(i, i)] = 1.0;
            } else {
                let r = -self.q[(i, i)];
                a[(i, i)] = 1.0;
                for j in 0..n {
                    if j != i && self.q[(i, j)] != 0.0 {
                        a[(i, j)] -= self.q[(i, j)] / r;
                    }
                }
            }
        }
        let lu = a.lu();
        let h = lu
            .solve(&b)
            .ok_or_else(|| Error::Parameter("singular hitting system".into()))?;
        Ok(h[state_index(init)])
    }
}

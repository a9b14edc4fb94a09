//! Finite axis-aligned boxes of Z^d, neighbor enumeration, translations, and
//! spin configurations over box sites.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How neighbor lookups behave at the box boundary.
///
/// `AbsorbingEmpty` treats everything outside the box as permanently empty
/// and non-reproducing; `Periodic` wraps coordinates modulo the side lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryRule {
    #[serde(rename = "absorbing")]
    AbsorbingEmpty,
    Periodic,
}

/// A site of Z^d, by absolute coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteId(pub Vec<i64>);

/// Finite box `[lo, hi]` (inclusive) in Z^d, with row-major linear indexing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct LatticeBox {
    d: usize,
    lo: Vec<i64>,
    hi: Vec<i64>,
    sides: Vec<i64>,
    strides: Vec<usize>,
    volume: usize,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    d: usize,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl TryFrom<BoxRepr> for LatticeBox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        if r.lo.len() != r.d || r.hi.len() != r.d {
            return Err(Error::Dimension(format!(
                "box corners must have length d={}",
                r.d
            )));
        }
        LatticeBox::new(r.lo, r.hi)
    }
}

impl From<LatticeBox> for BoxRepr {
    fn from(b: LatticeBox) -> Self {
        BoxRepr {
            d: b.d,
            lo: b.lo,
            hi: b.hi,
        }
    }
}

impl LatticeBox {
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Dimension(
                "box corners must be non-empty vectors of equal length".into(),
            ));
        }
        let d = lo.len();
        let mut sides = Vec::with_capacity(d);
        for i in 0..d {
            if lo[i] > hi[i] {
                return Err(Error::Parameter(format!(
                    "lower corner exceeds upper corner on axis {i}: {} > {}",
                    lo[i], hi[i]
                )));
            }
            sides.push(hi[i] - lo[i] + 1);
        }
        let mut volume: usize = 1;
        for &s in &sides {
            let s = usize::try_from(s).map_err(|_| Error::Overflow("side too large".into()))?;
            volume = volume
                .checked_mul(s)
                .ok_or_else(|| Error::Overflow("box volume overflows usize".into()))?;
        }
        // row-major: last axis varies fastest
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * sides[i + 1] as usize;
        }
        Ok(LatticeBox {
            d,
            lo,
            hi,
            sides,
            strides,
            volume,
        })
    }

    /// 1-D convenience constructor.
    pub fn line(lo: i64, hi: i64) -> Result<Self> {
        Self::new(vec![lo], vec![hi])
    }

    /// Centered hypercube `[-r, r]^d`.
    pub fn centered(d: usize, r: i64) -> Result<Self> {
        Self::new(vec![-r; d], vec![r; d])
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        x.len() == self.d && (0..self.d).all(|i| self.lo[i] <= x[i] && x[i] <= self.hi[i])
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        other.d == self.d && self.contains(&other.lo) && self.contains(&other.hi)
    }

    /// Linear index of a contained site.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let mut idx = 0usize;
        for i in 0..self.d {
            idx += (x[i] - self.lo[i]) as usize * self.strides[i];
        }
        Some(idx)
    }

    /// Coordinates of a linear index.
    pub fn site_at(&self, mut idx: usize) -> Vec<i64> {
        debug_assert!(idx < self.volume);
        let mut x = vec![0i64; self.d];
        for i in 0..self.d {
            x[i] = self.lo[i] + (idx / self.strides[i]) as i64;
            idx %= self.strides[i];
        }
        x
    }

    /// Wrap coordinates into the box modulo side lengths.
    pub fn wrap(&self, x: &[i64]) -> Vec<i64> {
        (0..self.d)
            .map(|i| {
                let s = self.sides[i];
                self.lo[i] + (((x[i] - self.lo[i]) % s) + s) % s
            })
            .collect()
    }

    pub fn sites(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.volume).map(|i| self.site_at(i))
    }
}

/// All neighbors of `x` at l1-distance 1, under the boundary rule.
///
/// `AbsorbingEmpty` omits out-of-box sites; `Periodic` wraps and always
/// returns exactly `2d` sites.
pub fn neighbors(b: &LatticeBox, x: &SiteId, rule: BoundaryRule) -> Result<Vec<SiteId>> {
    if !b.contains(&x.0) {
        return Err(Error::Containment(format!("site {:?} outside box", x.0)));
    }
    let mut out = Vec::with_capacity(2 * b.dim());
    for i in 0..b.dim() {
        for step in [-1i64, 1] {
            let mut y = x.0.clone();
            y[i] += step;
            match rule {
                BoundaryRule::AbsorbingEmpty => {
                    if b.contains(&y) {
                        out.push(SiteId(y));
                    }
                }
                BoundaryRule::Periodic => {
                    let w = b.wrap(&y);
                    // a side of length 1 would wrap a neighbor onto x itself
                    if w != x.0 {
                        out.push(SiteId(w));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All oriented edges `(x, y)` with `y` a neighbor of `x`; each ordered pair
/// appears exactly once.
pub fn enumerate_edges(b: &LatticeBox, rule: BoundaryRule) -> Vec<(SiteId, SiteId)> {
    let mut out = Vec::new();
    for x in b.sites() {
        let x = SiteId(x);
        for y in neighbors(b, &x, rule).expect("site from box iteration") {
            out.push((x.clone(), y));
        }
    }
    // periodic wrap on a 2-site axis reaches the same neighbor from both sides
    out.sort();
    out.dedup();
    out
}

/// Spin state in `{-1, 0, 1}` over the sites of a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub box_: LatticeBox,
    states: Vec<i8>,
}

impl Configuration {
    /// All-zero configuration.
    pub fn empty(box_: LatticeBox) -> Self {
        let n = box_.volume();
        Configuration {
            box_,
            states: vec![0; n],
        }
    }

    /// Every site set to `state`.
    pub fn filled(box_: LatticeBox, state: i8) -> Self {
        assert!((-1..=1).contains(&state));
        let n = box_.volume();
        Configuration {
            box_,
            states: vec![state; n],
        }
    }

    /// Configuration with the listed sites set to the given states, zero
    /// elsewhere. Errors on out-of-box sites or values outside {-1,0,1}.
    pub fn from_sites(box_: LatticeBox, sites: &[(&[i64], i8)]) -> Result<Self> {
        let mut c = Configuration::empty(box_);
        for (x, s) in sites {
            if !(-1..=1).contains(s) {
                return Err(Error::Parameter(format!("state {s} outside {{-1,0,1}}")));
            }
            let idx = c
                .box_
                .index_of(x)
                .ok_or_else(|| Error::Containment(format!("site {x:?} outside box")))?;
            c.states[idx] = *s;
        }
        Ok(c)
    }

    /// Single fertile individual at the origin.
    pub fn singleton_origin(box_: LatticeBox) -> Result<Self> {
        let origin = vec![0i64; box_.dim()];
        Self::from_sites(box_, &[(&origin, 1)])
    }

    pub fn states(&self) -> &[i8] {
        &self.states
    }

    pub fn states_mut(&mut self) -> &mut [i8] {
        &mut self.states
    }

    pub fn get(&self, x: &[i64]) -> Option<i8> {
        self.box_.index_of(x).map(|i| self.states[i])
    }

    pub fn set(&mut self, x: &[i64], s: i8) -> Result<()> {
        let idx = self
            .box_
            .index_of(x)
            .ok_or_else(|| Error::Containment(format!("site {x:?} outside box")))?;
        self.states[idx] = s;
        Ok(())
    }

    /// Number of sites in state 1.
    pub fn fertile_count(&self) -> usize {
        self.states.iter().filter(|&&s| s == 1).count()
    }

    pub fn sterile_count(&self) -> usize {
        self.states.iter().filter(|&&s| s == -1).count()
    }

    /// Sites in state 1, as coordinates.
    pub fn fertile_sites(&self) -> Vec<Vec<i64>> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 1)
            .map(|(i, _)| self.box_.site_at(i))
            .collect()
    }

    pub fn has_sterile(&self) -> bool {
        self.states.iter().any(|&s| s == -1)
    }
}

/// Translation by `v`: `(translate c)(x) = c(x - v)`, with sites pulled from
/// outside the box read as 0 (`AbsorbingEmpty`) or wrapped (`Periodic`).
pub fn translate(c: &Configuration, v: &[i64], rule: BoundaryRule) -> Result<Configuration> {
    if v.len() != c.box_.dim() {
        return Err(Error::Dimension(format!(
            "translation vector length {} != box dimension {}",
            v.len(),
            c.box_.dim()
        )));
    }
    let mut out = Configuration::empty(c.box_.clone());
    for idx in 0..c.box_.volume() {
        let x = c.box_.site_at(idx);
        let src: Vec<i64> = (0..v.len()).map(|i| x[i] - v[i]).collect();
        let s = match rule {
            BoundaryRule::AbsorbingEmpty => c.get(&src).unwrap_or(0),
            BoundaryRule::Periodic => c.get(&c.box_.wrap(&src)).expect("wrapped site in box"),
        };
        out.states[idx] = s;
    }
    Ok(out)
}

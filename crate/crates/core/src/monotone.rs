//! Rate-table monotonicity criterion for two-state-interaction spin systems
//! on {-1,0,1}.
//!
//! A process is described by birth rates R[α][β][k] (site y moves up k ranks
//! because its neighbor x sits at rank α), spontaneous birth rates P[β][k],
//! and the mirrored death-side rates. One system dominates another iff two
//! families of sum inequalities hold over all comparable rank pairs and
//! thresholds; the checker enumerates them all and reports every failing
//! instance. States are re-encoded as ranks of the chosen order before the
//! increments are read off, and rates stay symbolic in (λ, p) so verdicts
//! hold for every parameter value at once.

use crate::dynamics::ProcessKind;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Order on {-1,0,1} used both for rank encoding and for sitewise
/// configuration comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateOrder {
    /// -1 < 0 < 1
    NegZeroOne,
    /// 0 < -1 < 1
    ZeroNegOne,
    /// 0 < 1 and -1 < 1, with 0 and -1 incomparable (ranks as in NegZeroOne)
    Partial,
    /// 0 < 1 on two states (contact tables)
    ZeroOne,
}

impl StateOrder {
    pub fn n_ranks(&self) -> usize {
        match self {
            StateOrder::ZeroOne => 2,
            _ => 3,
        }
    }

    /// Rank -> original state label.
    pub fn labels(&self) -> &'static [i8] {
        match self {
            StateOrder::NegZeroOne | StateOrder::Partial => &[-1, 0, 1],
            StateOrder::ZeroNegOne => &[0, -1, 1],
            StateOrder::ZeroOne => &[0, 1],
        }
    }

    pub fn rank_of(&self, label: i8) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }

    /// Comparable-and-ordered relation on ranks.
    pub fn rank_leq(&self, a: usize, b: usize) -> bool {
        match self {
            StateOrder::Partial => a == b || b == 2,
            _ => a <= b,
        }
    }

    /// Comparable-and-ordered relation on state labels.
    pub fn leq(&self, a: i8, b: i8) -> bool {
        match (self.rank_of(a), self.rank_of(b)) {
            (Some(ra), Some(rb)) => self.rank_leq(ra, rb),
            _ => false,
        }
    }
}

/// Nonnegative linear rate expression `konst + lam_p·λp + lam_q·λ(1-p)`,
/// in the table's own parameter p.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RateExpr {
    pub konst: f64,
    pub lam_p: f64,
    pub lam_q: f64,
}

impl RateExpr {
    pub const ZERO: RateExpr = RateExpr {
        konst: 0.0,
        lam_p: 0.0,
        lam_q: 0.0,
    };

    pub fn constant(c: f64) -> Self {
        RateExpr {
            konst: c,
            ..Self::ZERO
        }
    }

    /// c·λp
    pub fn lam_p(c: f64) -> Self {
        RateExpr {
            lam_p: c,
            ..Self::ZERO
        }
    }

    /// c·λ(1-p)
    pub fn lam_q(c: f64) -> Self {
        RateExpr {
            lam_q: c,
            ..Self::ZERO
        }
    }

    /// c·λ = c·λp + c·λ(1-p)
    pub fn lam(c: f64) -> Self {
        RateExpr {
            lam_p: c,
            lam_q: c,
            ..Self::ZERO
        }
    }

    pub fn add(self, other: RateExpr) -> RateExpr {
        RateExpr {
            konst: self.konst + other.konst,
            lam_p: self.lam_p + other.lam_p,
            lam_q: self.lam_q + other.lam_q,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.konst == 0.0 && self.lam_p == 0.0 && self.lam_q == 0.0
    }

    pub fn eval(&self, lambda: f64, p: f64) -> f64 {
        self.konst + self.lam_p * lambda * p + self.lam_q * lambda * (1.0 - p)
    }

    /// Human-readable form, with `sub` naming the parameter (p, p1, p2).
    pub fn render(&self, sub: &str) -> String {
        let mut terms = Vec::new();
        let coef = |c: f64, sym: &str| {
            if c == 1.0 {
                sym.to_string()
            } else {
                format!("{c}{sym}")
            }
        };
        if self.konst != 0.0 {
            terms.push(format!("{}", self.konst));
        }
        if self.lam_p != 0.0 && self.lam_p == self.lam_q {
            terms.push(coef(self.lam_p, "λ"));
        } else {
            if self.lam_p != 0.0 {
                terms.push(coef(self.lam_p, &format!("λ{sub}")));
            }
            if self.lam_q != 0.0 {
                terms.push(coef(self.lam_q, &format!("λ(1-{sub})")));
            }
        }
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }
}

/// Which side of a comparison a table sits on; fixes how its parameter
/// relates to the other table's.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Lower,
    Upper,
}

/// Relation between the two tables' p parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamRelation {
    /// Both tables share one p.
    SameParameter,
    /// Lower table's p1 ≤ upper table's p2.
    LowerLeqUpper,
}

/// Canonical coordinates over the cone basis (1, λp1, λ(p2-p1), λ(1-p2)).
/// Componentwise dominance in this basis is equivalent to the inequality
/// holding for every λ > 0 and admissible (p1, p2).
fn canonical(e: RateExpr, role: Role, rel: ParamRelation) -> [f64; 4] {
    match (rel, role) {
        (ParamRelation::SameParameter, _) => [e.konst, e.lam_p, 0.0, e.lam_q],
        (ParamRelation::LowerLeqUpper, Role::Lower) => [e.konst, e.lam_p, e.lam_q, e.lam_q],
        (ParamRelation::LowerLeqUpper, Role::Upper) => [e.konst, e.lam_p, e.lam_p, e.lam_q],
    }
}

fn dominated(lhs: [f64; 4], rhs: [f64; 4]) -> bool {
    const EPS: f64 = 1e-12;
    lhs.iter().zip(rhs.iter()).all(|(a, b)| *a <= *b + EPS)
}

/// Borrello-style rate description of one process, encoded in the ranks of
/// a state order.
#[derive(Clone, Debug)]
pub struct RateTable {
    pub order: StateOrder,
    pub process: Option<ProcessKind>,
    n: usize,
    birth: Vec<RateExpr>,
    sp_birth: Vec<RateExpr>,
    death: Vec<RateExpr>,
    sp_death: Vec<RateExpr>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Birth,
    Death,
}

impl RateTable {
    pub fn zero(order: StateOrder) -> Self {
        let n = order.n_ranks();
        RateTable {
            order,
            process: None,
            n,
            birth: vec![RateExpr::ZERO; n * n * 3],
            sp_birth: vec![RateExpr::ZERO; n * 3],
            death: vec![RateExpr::ZERO; n * n * 3],
            sp_death: vec![RateExpr::ZERO; n * 3],
        }
    }

    fn it(&self, a: usize, b: usize, k: usize) -> usize {
        (a * self.n + b) * 3 + k
    }

    /// Interaction birth rate: y moves up k ranks due to x at rank `alpha`.
    pub fn set_birth(&mut self, alpha: i8, beta: i8, k: usize, e: RateExpr) {
        let (a, b) = self.ranks(alpha, beta);
        let i = self.it(a, b, k);
        self.birth[i] = e;
    }

    /// Interaction death rate: x moves down k ranks due to y at rank `beta`.
    pub fn set_death(&mut self, alpha: i8, beta: i8, k: usize, e: RateExpr) {
        let (a, b) = self.ranks(alpha, beta);
        let i = self.it(a, b, k);
        self.death[i] = e;
    }

    pub fn set_sp_birth(&mut self, beta: i8, k: usize, e: RateExpr) {
        let b = self.order.rank_of(beta).expect("state in order");
        self.sp_birth[b * 3 + k] = e;
    }

    pub fn set_sp_death(&mut self, alpha: i8, k: usize, e: RateExpr) {
        let a = self.order.rank_of(alpha).expect("state in order");
        self.sp_death[a * 3 + k] = e;
    }

    fn ranks(&self, alpha: i8, beta: i8) -> (usize, usize) {
        (
            self.order.rank_of(alpha).expect("state in order"),
            self.order.rank_of(beta).expect("state in order"),
        )
    }

    pub fn birth_rate(&self, alpha: i8, beta: i8, k: usize) -> RateExpr {
        let (a, b) = self.ranks(alpha, beta);
        self.birth[self.it(a, b, k)]
    }

    pub fn death_rate(&self, alpha: i8, beta: i8, k: usize) -> RateExpr {
        let (a, b) = self.ranks(alpha, beta);
        self.death[self.it(a, b, k)]
    }

    pub fn sp_birth_rate(&self, beta: i8, k: usize) -> RateExpr {
        let b = self.order.rank_of(beta).expect("state in order");
        self.sp_birth[b * 3 + k]
    }

    pub fn sp_death_rate(&self, alpha: i8, k: usize) -> RateExpr {
        let a = self.order.rank_of(alpha).expect("state in order");
        self.sp_death[a * 3 + k]
    }

    fn pi_birth(&self, a: usize, b: usize, k: usize) -> RateExpr {
        self.birth[self.it(a, b, k)].add(self.sp_birth[b * 3 + k])
    }

    fn pi_death(&self, a: usize, b: usize, k: usize) -> RateExpr {
        self.death[self.it(a, b, k)].add(self.sp_death[a * 3 + k])
    }

    fn pi_sum_birth(&self, a: usize, b: usize, threshold: i64) -> RateExpr {
        (1..3)
            .filter(|&k| (k as i64) > threshold)
            .fold(RateExpr::ZERO, |acc, k| acc.add(self.pi_birth(a, b, k)))
    }

    fn pi_sum_death(&self, a: usize, b: usize, threshold: i64) -> RateExpr {
        (1..3)
            .filter(|&k| (k as i64) > threshold)
            .fold(RateExpr::ZERO, |acc, k| acc.add(self.pi_death(a, b, k)))
    }

    /// Evaluate every entry at numeric (λ, p), producing a constant table.
    pub fn eval(&self, lambda: f64, p: f64) -> RateTable {
        let conv = |v: &[RateExpr]| {
            v.iter()
                .map(|e| RateExpr::constant(e.eval(lambda, p)))
                .collect()
        };
        RateTable {
            order: self.order,
            process: self.process,
            n: self.n,
            birth: conv(&self.birth),
            sp_birth: conv(&self.sp_birth),
            death: conv(&self.death),
            sp_death: conv(&self.sp_death),
        }
    }
}

/// Σ over k > threshold of Π for the given side and (α, β) state labels.
pub fn pi_sums(table: &RateTable, alpha: i8, beta: i8, side: Side, threshold: i64) -> RateExpr {
    let (a, b) = table.ranks(alpha, beta);
    match side {
        Side::Birth => table.pi_sum_birth(a, b, threshold),
        Side::Death => table.pi_sum_death(a, b, threshold),
    }
}

/// Built-in symbolic rate table of a process under the given order; `d` is
/// the lattice dimension (only Spont's blocking rate 2dλ(1-p) uses it).
pub fn builtin_tables(kind: ProcessKind, order: StateOrder, d: usize) -> Result<RateTable> {
    let mut t = RateTable::zero(order);
    t.process = Some(kind);
    let two_d = 2.0 * d as f64;
    match (kind, order) {
        (ProcessKind::Contact, StateOrder::ZeroOne) => {
            t.set_birth(1, 0, 1, RateExpr::lam(1.0));
            t.set_sp_death(1, 1, RateExpr::constant(1.0));
        }
        (ProcessKind::Contact, StateOrder::NegZeroOne | StateOrder::Partial) => {
            t.set_birth(1, 0, 1, RateExpr::lam(1.0));
            t.set_sp_death(1, 1, RateExpr::constant(1.0));
        }
        (ProcessKind::Contact, StateOrder::ZeroNegOne) => {
            t.set_birth(1, 0, 2, RateExpr::lam(1.0));
            t.set_sp_death(1, 2, RateExpr::constant(1.0));
        }
        (ProcessKind::IS, StateOrder::NegZeroOne | StateOrder::Partial) => {
            t.set_birth(1, 0, 1, RateExpr::lam_p(1.0));
            t.set_death(0, 1, 1, RateExpr::lam_q(1.0));
            t.set_sp_death(1, 1, RateExpr::constant(1.0));
            t.set_sp_birth(-1, 1, RateExpr::constant(1.0));
        }
        (ProcessKind::IS, StateOrder::ZeroNegOne) => {
            t.set_birth(1, 0, 2, RateExpr::lam_p(1.0));
            t.set_birth(1, 0, 1, RateExpr::lam_q(1.0));
            t.set_sp_death(1, 2, RateExpr::constant(1.0));
            t.set_sp_death(-1, 1, RateExpr::constant(1.0));
        }
        (ProcessKind::Spont, StateOrder::NegZeroOne | StateOrder::Partial) => {
            t.set_birth(1, 0, 1, RateExpr::lam_p(1.0));
            t.set_sp_death(0, 1, RateExpr::lam_q(two_d));
            t.set_sp_death(1, 1, RateExpr::constant(1.0));
            t.set_sp_birth(-1, 1, RateExpr::constant(1.0));
        }
        (ProcessKind::Spont, StateOrder::ZeroNegOne) => {
            t.set_birth(1, 0, 2, RateExpr::lam_p(1.0));
            t.set_sp_birth(0, 1, RateExpr::lam_q(two_d));
            t.set_sp_death(1, 2, RateExpr::constant(1.0));
            t.set_sp_death(-1, 1, RateExpr::constant(1.0));
        }
        (kind, StateOrder::ZeroOne) => {
            return Err(Error::Parameter(format!(
                "{kind:?} needs a three-state order"
            )));
        }
    }
    Ok(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Inequality {
    I1,
    I2,
}

/// One failing inequality instance, reported in original state labels.
#[derive(Clone, Debug, Serialize)]
pub struct FailureWitness {
    pub inequality: Inequality,
    pub alpha: i8,
    pub beta: i8,
    pub gamma: i8,
    pub delta: i8,
    /// The free threshold (j for I1, h for I2).
    pub threshold: i64,
    pub lhs: RateExpr,
    pub rhs: RateExpr,
    pub lhs_text: String,
    pub rhs_text: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityVerdict {
    pub pass: bool,
    pub relation: ParamRelation,
    pub failures: Vec<FailureWitness>,
}

/// Enumerate inequalities (I1)/(I2) over all comparable rank pairs and
/// thresholds in {0,1,2}; increments beyond the rank diameter contribute
/// empty sums on both sides.
pub fn check_monotone(
    lower: &RateTable,
    upper: &RateTable,
    relation: ParamRelation,
) -> Result<MonotonicityVerdict> {
    if lower.order != upper.order {
        return Err(Error::Parameter(
            "tables must be encoded under the same state order".into(),
        ));
    }
    let order = lower.order;
    let n = lower.n;
    let labels = order.labels();
    let (p_lo, p_hi) = match relation {
        ParamRelation::SameParameter => ("p", "p"),
        ParamRelation::LowerLeqUpper => ("p1", "p2"),
    };
    let mut failures = Vec::new();
    for a in 0..n {
        for b in 0..n {
            for g in 0..n {
                for dd in 0..n {
                    if !(order.rank_leq(a, g) && order.rank_leq(b, dd)) {
                        continue;
                    }
                    for th in 0..=2i64 {
                        // (I1): lower births from (a,b) vs upper births from (g,dd)
                        let lhs = lower.pi_sum_birth(a, b, th + (dd as i64 - b as i64));
                        let rhs = upper.pi_sum_birth(g, dd, th);
                        if !dominated(
                            canonical(lhs, Role::Lower, relation),
                            canonical(rhs, Role::Upper, relation),
                        ) {
                            failures.push(FailureWitness {
                                inequality: Inequality::I1,
                                alpha: labels[a],
                                beta: labels[b],
                                gamma: labels[g],
                                delta: labels[dd],
                                threshold: th,
                                lhs,
                                rhs,
                                lhs_text: lhs.render(p_lo),
                                rhs_text: rhs.render(p_hi),
                            });
                        }
                        // (I2): upper deaths from (g,dd) vs lower deaths from (a,b)
                        let lhs = upper.pi_sum_death(g, dd, th + (g as i64 - a as i64));
                        let rhs = lower.pi_sum_death(a, b, th);
                        if !dominated(
                            canonical(lhs, Role::Upper, relation),
                            canonical(rhs, Role::Lower, relation),
                        ) {
                            failures.push(FailureWitness {
                                inequality: Inequality::I2,
                                alpha: labels[a],
                                beta: labels[b],
                                gamma: labels[g],
                                delta: labels[dd],
                                threshold: th,
                                lhs,
                                rhs,
                                lhs_text: lhs.render(p_hi),
                                rhs_text: rhs.render(p_lo),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(MonotonicityVerdict {
        pass: failures.is_empty(),
        relation,
        failures,
    })
}

/// Numeric rate table as parsed from JSON (states given as labels).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateTableSpec {
    pub order: StateOrder,
    #[serde(default)]
    pub birth: Vec<RateEntry>,
    #[serde(default)]
    pub sp_birth: Vec<SpontEntry>,
    #[serde(default)]
    pub death: Vec<RateEntry>,
    #[serde(default)]
    pub sp_death: Vec<SpontEntry>,
}

#[derive(Deserialize)]
pub struct RateEntry {
    pub alpha: i8,
    pub beta: i8,
    pub k: usize,
    pub rate: f64,
}

#[derive(Deserialize)]
pub struct SpontEntry {
    pub state: i8,
    pub k: usize,
    pub rate: f64,
}

impl RateTableSpec {
    pub fn build(&self) -> Result<RateTable> {
        let mut t = RateTable::zero(self.order);
        let check = |s: i8, k: usize, r: f64| -> Result<()> {
            if self.order.rank_of(s).is_none() {
                return Err(Error::Parameter(format!("state {s} not in order")));
            }
            if k == 0 || k > 2 {
                return Err(Error::Parameter(format!("increment k={k} outside 1..=2")));
            }
            if r < 0.0 {
                return Err(Error::Parameter(format!("negative rate {r}")));
            }
            Ok(())
        };
        for e in &self.birth {
            check(e.alpha, e.k, e.rate)?;
            check(e.beta, e.k, e.rate)?;
            t.set_birth(e.alpha, e.beta, e.k, RateExpr::constant(e.rate));
        }
        for e in &self.death {
            check(e.alpha, e.k, e.rate)?;
            check(e.beta, e.k, e.rate)?;
            t.set_death(e.alpha, e.beta, e.k, RateExpr::constant(e.rate));
        }
        for e in &self.sp_birth {
            check(e.state, e.k, e.rate)?;
            t.set_sp_birth(e.state, e.k, RateExpr::constant(e.rate));
        }
        for e in &self.sp_death {
            check(e.state, e.k, e.rate)?;
            t.set_sp_death(e.state, e.k, RateExpr::constant(e.rate));
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_table(order: StateOrder) -> RateTable {
        builtin_tables(ProcessKind::IS, order, 1).unwrap()
    }

    #[test]
    fn order_relations() {
        let o = StateOrder::NegZeroOne;
        assert!(o.leq(-1, 0) && o.leq(0, 1) && !o.leq(1, 0));
        let o = StateOrder::ZeroNegOne;
        assert!(o.leq(0, -1) && o.leq(-1, 1) && !o.leq(-1, 0));
        let o = StateOrder::Partial;
        assert!(o.leq(0, 1) && o.leq(-1, 1));
        assert!(!o.leq(0, -1) && !o.leq(-1, 0));
    }

    #[test]
    fn builtin_is_reproduces_first_encoding() {
        let t = is_table(StateOrder::NegZeroOne);
        assert_eq!(t.birth_rate(1, 0, 1), RateExpr::lam_p(1.0));
        assert_eq!(t.death_rate(0, 1, 1), RateExpr::lam_q(1.0));
        assert_eq!(t.sp_death_rate(1, 1), RateExpr::constant(1.0));
        assert_eq!(t.sp_birth_rate(-1, 1), RateExpr::constant(1.0));
        // nothing else set
        assert!(t.birth_rate(1, 0, 2).is_zero());
        assert!(t.death_rate(0, 1, 2).is_zero());
    }

    #[test]
    fn builtin_is_reproduces_second_encoding() {
        let t = is_table(StateOrder::ZeroNegOne);
        assert_eq!(t.birth_rate(1, 0, 2), RateExpr::lam_p(1.0));
        assert_eq!(t.birth_rate(1, 0, 1), RateExpr::lam_q(1.0));
        assert_eq!(t.sp_death_rate(1, 2), RateExpr::constant(1.0));
        assert_eq!(t.sp_death_rate(-1, 1), RateExpr::constant(1.0));
    }

    #[test]
    fn builtin_contact_two_states() {
        let t = builtin_tables(ProcessKind::Contact, StateOrder::ZeroOne, 1).unwrap();
        assert_eq!(t.birth_rate(1, 0, 1), RateExpr::lam(1.0));
        assert_eq!(t.sp_death_rate(1, 1), RateExpr::constant(1.0));
    }

    #[test]
    fn pi_sums_examples() {
        let zero = RateTable::zero(StateOrder::NegZeroOne);
        assert!(pi_sums(&zero, 1, 0, Side::Birth, 0).is_zero());
        // under -1<0<1 the sterile birth sits on the death side, so the
        // birth-side sum at (1,0) is λp alone
        let t1 = is_table(StateOrder::NegZeroOne);
        assert_eq!(pi_sums(&t1, 1, 0, Side::Birth, 0), RateExpr::lam_p(1.0));
        // under 0<-1<1 both birth entries stack up to λ
        let t2 = is_table(StateOrder::ZeroNegOne);
        assert_eq!(pi_sums(&t2, 1, 0, Side::Birth, 0), RateExpr::lam(1.0));
        assert_eq!(pi_sums(&t2, 1, 0, Side::Birth, 1), RateExpr::lam_p(1.0));
        // Spont death side at a fertile site: just the unit death
        let s = builtin_tables(ProcessKind::Spont, StateOrder::NegZeroOne, 1).unwrap();
        for beta in [-1, 0, 1] {
            assert_eq!(
                pi_sums(&s, 1, beta, Side::Death, 0),
                RateExpr::constant(1.0)
            );
        }
    }

    #[test]
    fn is_fails_under_neg_zero_one_with_exact_witness() {
        let t = is_table(StateOrder::NegZeroOne);
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        assert!(!v.pass);
        let w = v
            .failures
            .iter()
            .find(|f| {
                f.inequality == Inequality::I2
                    && (f.alpha, f.beta, f.gamma, f.delta) == (0, 0, 0, 1)
                    && f.threshold == 0
            })
            .expect("the documented witness");
        assert_eq!(w.lhs, RateExpr::lam_q(1.0));
        assert_eq!(w.rhs, RateExpr::ZERO);
        assert_eq!(w.lhs_text, "λ(1-p)");
        assert_eq!(w.rhs_text, "0");
    }

    #[test]
    fn is_fails_under_zero_neg_one_with_exact_witness() {
        let t = is_table(StateOrder::ZeroNegOne);
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        assert!(!v.pass);
        let w = v
            .failures
            .iter()
            .find(|f| {
                f.inequality == Inequality::I1
                    && (f.alpha, f.beta, f.gamma, f.delta) == (1, 0, 1, -1)
                    && f.threshold == 0
            })
            .expect("the documented witness");
        assert_eq!(w.lhs, RateExpr::lam_p(1.0));
        assert_eq!(w.rhs, RateExpr::ZERO);
        assert_eq!(w.lhs_text, "λp");
    }

    #[test]
    fn is_fails_under_partial_order() {
        let t = is_table(StateOrder::Partial);
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        assert!(!v.pass);
    }

    #[test]
    fn spont_pair_passes_and_is_attractive() {
        let s = builtin_tables(ProcessKind::Spont, StateOrder::NegZeroOne, 1).unwrap();
        let v = check_monotone(&s, &s, ParamRelation::LowerLeqUpper).unwrap();
        assert!(v.pass, "failures: {:?}", v.failures);
        let v = check_monotone(&s, &s, ParamRelation::SameParameter).unwrap();
        assert!(v.pass);
        // higher dimension changes only the blocking coefficient, not the verdict
        let s3 = builtin_tables(ProcessKind::Spont, StateOrder::NegZeroOne, 3).unwrap();
        assert!(check_monotone(&s3, &s3, ParamRelation::LowerLeqUpper)
            .unwrap()
            .pass);
    }

    #[test]
    fn contact_self_check_passes() {
        // attractiveness of the contact process, on its own state space and
        // under the natural three-state embedding
        for order in [StateOrder::NegZeroOne, StateOrder::ZeroOne] {
            let t = builtin_tables(ProcessKind::Contact, order, 1).unwrap();
            let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
            assert!(v.pass, "{order:?}: {:?}", v.failures);
            // and monotone in p (the table does not involve 1-p terms)
            let v = check_monotone(&t, &t, ParamRelation::LowerLeqUpper).unwrap();
            assert!(v.pass, "{order:?}");
        }
        // under 0<-1<1 the embedding itself breaks: a fertile death moves
        // 1 -> 0 below a frozen -1, so the checker must refuse it
        let t = builtin_tables(ProcessKind::Contact, StateOrder::ZeroNegOne, 1).unwrap();
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        assert!(!v.pass);
    }

    #[test]
    fn spont_hand_enumeration_at_fixed_parameters() {
        // independent numeric re-evaluation of all 36 (α,β,γ,δ) instances
        // at (λ,p1,p2) = (1, 0.3, 0.7): write out both Π sums directly from
        // the process definition, no RateExpr machinery
        let (lambda, p1, p2, d) = (1.0f64, 0.3f64, 0.7f64, 1usize);
        let two_d = 2.0 * d as f64;
        // rank encoding -1,0,1 -> 0,1,2
        let birth = |p: f64, a: usize, b: usize, k: usize| -> f64 {
            let mut r = 0.0;
            if a == 2 && b == 1 && k == 1 {
                r += lambda * p; // fertile birth
            }
            if b == 0 && k == 1 {
                r += 1.0; // sterile death moves up
            }
            r
        };
        let death = |p: f64, a: usize, _b: usize, k: usize| -> f64 {
            let mut r = 0.0;
            if a == 2 && k == 1 {
                r += 1.0; // fertile death
            }
            if a == 1 && k == 1 {
                r += two_d * lambda * (1.0 - p); // spontaneous blocking
            }
            r
        };
        let mut instances = 0;
        for a in 0..3 {
            for b in 0..3 {
                for g in a..3 {
                    for dd in b..3 {
                        instances += 1;
                        for th in 0..=2i64 {
                            let lhs: f64 = (1..3)
                                .filter(|&k| (k as i64) > th + (dd as i64 - b as i64))
                                .map(|k| birth(p1, a, b, k))
                                .sum();
                            let rhs: f64 =
                                (1..3).filter(|&k| (k as i64) > th).map(|k| birth(p2, g, dd, k)).sum();
                            assert!(lhs <= rhs + 1e-12, "(I1) at {a},{b},{g},{dd},{th}");
                            let lhs: f64 = (1..3)
                                .filter(|&k| (k as i64) > th + (g as i64 - a as i64))
                                .map(|k| death(p2, g, dd, k))
                                .sum();
                            let rhs: f64 =
                                (1..3).filter(|&k| (k as i64) > th).map(|k| death(p1, a, b, k)).sum();
                            assert!(lhs <= rhs + 1e-12, "(I2) at {a},{b},{g},{dd},{th}");
                        }
                    }
                }
            }
        }
        assert_eq!(instances, 36);
    }

    #[test]
    fn failure_witness_reevaluates_numerically() {
        // the reported lhs/rhs, summed independently at sample parameters,
        // reproduce lhs > rhs
        let t = is_table(StateOrder::NegZeroOne);
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        for w in &v.failures {
            for (lambda, p) in [(1.0, 0.5), (2.0, 0.1), (0.3, 0.9)] {
                let lhs = w.lhs.eval(lambda, p);
                let rhs = w.rhs.eval(lambda, p);
                assert!(
                    lhs > rhs - 1e-12,
                    "stale witness at λ={lambda}, p={p}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn numeric_tables_catch_lambda_non_monotonicity() {
        // at fixed p, comparing λ1 < λ2 numerically finds a failing
        // inequality for both IS and Spont
        for kind in [ProcessKind::IS, ProcessKind::Spont] {
            let t = builtin_tables(kind, StateOrder::NegZeroOne, 1).unwrap();
            let lo = t.eval(1.0, 0.5);
            let hi = t.eval(2.0, 0.5);
            let v = check_monotone(&lo, &hi, ParamRelation::SameParameter).unwrap();
            assert!(!v.pass, "{kind:?} should not be monotone in λ");
        }
        // the contact process is monotone in λ
        let t = builtin_tables(ProcessKind::Contact, StateOrder::ZeroOne, 1).unwrap();
        let lo = t.eval(1.0, 1.0);
        let hi = t.eval(2.0, 1.0);
        assert!(check_monotone(&lo, &hi, ParamRelation::SameParameter)
            .unwrap()
            .pass);
    }

    #[test]
    fn spec_round_trip_from_json() {
        let json = r#"{
            "order": "neg-zero-one",
            "birth": [{"alpha": 1, "beta": 0, "k": 1, "rate": 2.0}],
            "sp_death": [{"state": 1, "k": 1, "rate": 1.0}]
        }"#;
        let spec: RateTableSpec = serde_json::from_str(json).unwrap();
        let t = spec.build().unwrap();
        assert_eq!(t.birth_rate(1, 0, 1), RateExpr::constant(2.0));
        let v = check_monotone(&t, &t, ParamRelation::SameParameter).unwrap();
        assert!(v.pass);
    }

    #[test]
    fn render_is_readable() {
        assert_eq!(RateExpr::lam_q(1.0).render("p"), "λ(1-p)");
        assert_eq!(RateExpr::lam(1.0).render("p"), "λ");
        assert_eq!(RateExpr::lam_q(2.0).render("p1"), "2λ(1-p1)");
        assert_eq!(RateExpr::ZERO.render("p"), "0");
    }
}

//! Discrete-time brute force: incentive compatibility with one-period
//! deviations, the three slack improvements, and undominated sets.
//!
//! Periods are `0..H`; flow and reward are constant from period `H-1` on.
//! Everything is generic over [`Scalar`] so fixtures can be checked in exact
//! rational arithmetic.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::{FromPrimitive, One, ToPrimitive, Zero};
use thiserror::Error;

use crate::frontier::{Frontier, TechnologyPair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid discrete mechanism: {0}")]
    Invalid(String),
    #[error("no slack delay constraint to improve")]
    NothingToImprove,
    #[error("improvement case {0:?} does not apply at the first slack period")]
    CaseNotApplicable(SlackCase),
    #[error("mechanism is not incentive compatible")]
    NotIncentiveCompatible,
    #[error("frontier undefined at {0}")]
    OffDomain(f64),
    #[error("enumeration of {0} mechanisms exceeds the budget of {ENUMERATION_BUDGET}")]
    BudgetExceeded(u128),
}

/// Arithmetic the oracle needs.
pub trait Scalar:
    Clone
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;
    /// Comparison slack: zero for exact types.
    fn tol() -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn tol() -> Self {
        1e-12
    }
}

impl Scalar for BigRational {
    /// Exact: every finite double is a dyadic rational.
    fn from_f64(v: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(v).expect("finite value")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn tol() -> Self {
        Zero::zero()
    }
}

fn exceeds<S: Scalar>(a: &S, b: &S) -> bool {
    a.clone() - b.clone() > S::tol()
}

fn at_least<S: Scalar>(a: &S, b: &S) -> bool {
    b.clone() - a.clone() <= S::tol()
}

fn min_s<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

fn max_s<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

/// Frontier value; exact on piecewise-linear frontiers.
pub fn frontier_value<S: Scalar>(f: &Frontier, u: &S) -> Result<S, OracleError> {
    let uf = u.to_f64();
    match f.breakpoints() {
        Some(points) => {
            let first = S::from_f64(points[0].0);
            let last = S::from_f64(points[points.len() - 1].0);
            if *u < first || *u > last {
                return Err(OracleError::OffDomain(uf));
            }
            for w in points.windows(2) {
                let (a, b) = (S::from_f64(w[0].0), S::from_f64(w[1].0));
                if *u <= b {
                    let (va, vb) = (S::from_f64(w[0].1), S::from_f64(w[1].1));
                    return Ok(va.clone() + (vb - va) * (u.clone() - a.clone()) / (b - a));
                }
            }
            Ok(S::from_f64(points[points.len() - 1].1))
        }
        None => f
            .value(uf)
            .map(S::from_f64)
            .map_err(|_| OracleError::OffDomain(uf)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMechanism<S> {
    pub beta: S,
    /// Flow per period; the last entry is paid forever after.
    pub x: Vec<S>,
    /// Disclosure reward per period; the last entry applies forever after.
    pub x1: Vec<S>,
}

impl<S: Scalar> DiscreteMechanism<S> {
    pub fn new(beta: S, x: Vec<S>, x1: Vec<S>) -> Result<Self, OracleError> {
        if x.is_empty() || x.len() != x1.len() {
            return Err(OracleError::Invalid(format!(
                "flow has {} periods, reward {}",
                x.len(),
                x1.len()
            )));
        }
        if !(beta > S::zero() && beta < S::one()) {
            return Err(OracleError::Invalid(format!("beta={:?}", beta)));
        }
        if x.iter().chain(&x1).any(|v| *v < S::zero()) {
            return Err(OracleError::Invalid("negative level".into()));
        }
        Ok(Self { beta, x, x1 })
    }

    /// `X1 := X0`.
    pub fn indifferent(beta: S, x: Vec<S>) -> Result<Self, OracleError> {
        let probe = Self::new(beta, x.clone(), x.clone())?;
        let x1 = probe.continuation();
        Self::new(probe.beta, x, x1)
    }

    pub fn horizon(&self) -> usize {
        self.x.len()
    }

    /// `X0_s`, the present value of the remaining flow.
    pub fn continuation(&self) -> Vec<S> {
        let h = self.x.len();
        let mut out = vec![S::zero(); h];
        out[h - 1] = self.x[h - 1].clone();
        for s in (0..h - 1).rev() {
            out[s] = (S::one() - self.beta.clone()) * self.x[s].clone() + self.beta.clone() * out[s + 1].clone();
        }
        out
    }

    fn reward_next(&self, s: usize) -> S {
        self.x1[(s + 1).min(self.x1.len() - 1)].clone()
    }

    /// `X1_s - (1-beta) x_s - beta X1_{s+1}`.
    pub fn delay_slack(&self, s: usize) -> S {
        self.x1[s].clone()
            - (S::one() - self.beta.clone()) * self.x[s].clone()
            - self.beta.clone() * self.reward_next(s)
    }

    pub fn to_f64(&self) -> DiscreteMechanism<f64> {
        DiscreteMechanism {
            beta: self.beta.to_f64(),
            x: self.x.iter().map(Scalar::to_f64).collect(),
            x1: self.x1.iter().map(Scalar::to_f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteIc {
    pub ok: bool,
    pub delay_violations: Vec<usize>,
    pub nondisclosure_violations: Vec<usize>,
    pub slack_periods: Vec<usize>,
}

pub fn ic_discrete<S: Scalar>(m: &DiscreteMechanism<S>) -> DiscreteIc {
    let x0 = m.continuation();
    let mut out = DiscreteIc {
        ok: true,
        delay_violations: Vec::new(),
        nondisclosure_violations: Vec::new(),
        slack_periods: Vec::new(),
    };
    for s in 0..m.horizon() {
        let slack = m.delay_slack(s);
        if exceeds(&S::zero(), &slack) {
            out.delay_violations.push(s);
        } else if exceeds(&slack, &S::zero()) {
            out.slack_periods.push(s);
        }
        if !at_least(&m.x1[s], &x0[s]) {
            out.nondisclosure_violations.push(s);
        }
    }
    out.ok = out.delay_violations.is_empty() && out.nondisclosure_violations.is_empty();
    out
}

/// When the breakthrough happens, in periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Breakthrough {
    At(usize),
    Never,
}

/// `sum_{s<tau} (1-beta) beta^s F0(x_s) + beta^tau F1(X1_tau)`.
pub fn discrete_payoff<S: Scalar>(
    m: &DiscreteMechanism<S>,
    pair: &TechnologyPair,
    when: Breakthrough,
) -> Result<S, OracleError> {
    let h = m.horizon();
    let one_minus = S::one() - m.beta.clone();
    let mut total = S::zero();
    let mut disc = S::one();
    let stop = match when {
        Breakthrough::At(t) => t,
        Breakthrough::Never => usize::MAX,
    };
    let head = stop.min(h - 1);
    for s in 0..head {
        total = total + one_minus.clone() * disc.clone() * frontier_value(&pair.f0, &m.x[s])?;
        disc = disc * m.beta.clone();
    }
    // disc = beta^head
    match when {
        Breakthrough::At(t) if t < h - 1 => {
            Ok(total + disc * frontier_value(&pair.f1, &m.x1[t])?)
        }
        Breakthrough::At(t) => {
            let mut tail = S::one();
            for _ in 0..(t - head) {
                tail = tail * m.beta.clone();
            }
            let f0 = frontier_value(&pair.f0, &m.x[h - 1])?;
            let f1 = frontier_value(&pair.f1, &m.x1[h - 1])?;
            Ok(total + disc.clone() * (S::one() - tail.clone()) * f0 + disc * tail * f1)
        }
        Breakthrough::Never => Ok(total + disc * frontier_value(&pair.f0, &m.x[h - 1])?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackCase {
    /// Lower `X1_t` toward `u1`.
    LowerReward,
    /// Raise `x_t` toward `u1`.
    RaiseFlow,
    /// Raise `X1_{t+1}` toward `u1`.
    RaiseNextReward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Improvement<S> {
    pub mechanism: DiscreteMechanism<S>,
    pub case: SlackCase,
    pub period: usize,
    /// Breakthrough under which the payoff rises strictly.
    pub witness: Breakthrough,
}

/// Applies the first applicable case at the first slack period.
pub fn improve_slack<S: Scalar>(
    m: &DiscreteMechanism<S>,
    pair: &TechnologyPair,
) -> Result<Improvement<S>, OracleError> {
    for case in [SlackCase::LowerReward, SlackCase::RaiseFlow, SlackCase::RaiseNextReward] {
        match improve_slack_case(m, pair, case) {
            Err(OracleError::CaseNotApplicable(_)) => continue,
            other => return other,
        }
    }
    Err(OracleError::NothingToImprove)
}

pub fn improve_slack_case<S: Scalar>(
    m: &DiscreteMechanism<S>,
    pair: &TechnologyPair,
    case: SlackCase,
) -> Result<Improvement<S>, OracleError> {
    let ic = ic_discrete(m);
    if !ic.ok {
        return Err(OracleError::NotIncentiveCompatible);
    }
    let Some(&t) = ic.slack_periods.first() else {
        return Err(OracleError::NothingToImprove);
    };
    let h = m.horizon();
    let sigma = m.delay_slack(t);
    let u1 = S::from_f64(pair.u1);
    let mut out = m.clone();
    let witness = match case {
        SlackCase::LowerReward => {
            if !exceeds(&m.x1[t], &u1) {
                return Err(OracleError::CaseNotApplicable(case));
            }
            out.x1[t] = max_s(u1, m.x1[t].clone() - sigma);
            Breakthrough::At(t)
        }
        SlackCase::RaiseFlow => {
            if !exceeds(&u1, &m.x[t]) {
                return Err(OracleError::CaseNotApplicable(case));
            }
            let step = sigma / (S::one() - m.beta.clone());
            out.x[t] = min_s(u1, m.x[t].clone() + step);
            if t + 1 < h {
                Breakthrough::At(t + 1)
            } else {
                Breakthrough::Never
            }
        }
        SlackCase::RaiseNextReward => {
            let next = (t + 1).min(h - 1);
            if next == t || !exceeds(&u1, &m.x1[next]) {
                return Err(OracleError::CaseNotApplicable(case));
            }
            let step = sigma / m.beta.clone();
            out.x1[next] = min_s(u1, m.x1[next].clone() + step);
            Breakthrough::At(next)
        }
    };
    Ok(Improvement {
        mechanism: out,
        case,
        period: t,
        witness,
    })
}

/// Point masses at each period plus no breakthrough.
pub fn point_mass_family(h: usize) -> Vec<Breakthrough> {
    let mut v: Vec<Breakthrough> = (0..h).map(Breakthrough::At).collect();
    v.push(Breakthrough::Never);
    v
}

pub const ENUMERATION_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanEntry {
    pub x: Vec<f64>,
    pub x1: Vec<f64>,
    pub x0: Vec<f64>,
    pub payoffs: Vec<f64>,
    pub max_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub enumerated: u128,
    pub incentive_compatible: usize,
    /// Sorted lexicographically by `(x, x1)`.
    pub undominated: Vec<ScanEntry>,
    /// Largest `|X1_t - X0_t|` among undominated mechanisms.
    pub indifference: f64,
    pub family: Vec<Breakthrough>,
}

const PAYOFF_TOL: f64 = 1e-12;

fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(p, q)| *p >= *q - PAYOFF_TOL) && a.iter().zip(b).any(|(p, q)| *p > *q + PAYOFF_TOL)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (p, q) in a.iter().zip(b) {
        match p.total_cmp(q) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Enumerates every IC mechanism on the grids and returns the
/// Pareto-undominated ones over `family`.
pub fn undominated_scan(
    pair: &TechnologyPair,
    horizon: usize,
    x_grid: &[f64],
    reward_grid: &[f64],
    family: &[Breakthrough],
) -> Result<ScanReport, OracleError> {
    if horizon == 0 || x_grid.is_empty() || reward_grid.is_empty() {
        return Err(OracleError::Invalid("empty horizon or grid".into()));
    }
    let nx = x_grid.len() as u128;
    let nr = reward_grid.len() as u128;
    let total = nx
        .checked_pow(horizon as u32)
        .and_then(|a| nr.checked_pow(horizon as u32).and_then(|b| a.checked_mul(b)))
        .unwrap_or(u128::MAX);
    if total > ENUMERATION_BUDGET {
        return Err(OracleError::BudgetExceeded(total));
    }
    let beta = (-pair.r).exp();
    let mut candidates: Vec<ScanEntry> = Vec::new();
    let mut xi = vec![0usize; horizon];
    loop {
        let x: Vec<f64> = xi.iter().map(|&i| x_grid[i]).collect();
        let mut ri = vec![0usize; horizon];
        loop {
            let x1: Vec<f64> = ri.iter().map(|&i| reward_grid[i]).collect();
            let m = DiscreteMechanism::new(beta, x.clone(), x1.clone())?;
            if ic_discrete(&m).ok {
                let payoffs = family
                    .iter()
                    .map(|&b| discrete_payoff(&m, pair, b))
                    .collect::<Result<Vec<_>, _>>();
                if let Ok(payoffs) = payoffs {
                    let x0 = m.continuation();
                    let max_gap = x1.iter().zip(&x0).fold(0.0f64, |g, (a, b)| g.max((a - b).abs()));
                    candidates.push(ScanEntry {
                        x: x.clone(),
                        x1,
                        x0,
                        payoffs,
                        max_gap,
                    });
                }
            }
            if !advance(&mut ri, reward_grid.len()) {
                break;
            }
        }
        if !advance(&mut xi, x_grid.len()) {
            break;
        }
    }
    let incentive_compatible = candidates.len();

    // Anything dominated is dominated by a kept entry with a larger sum.
    candidates.sort_by(|a, b| {
        let sa: f64 = a.payoffs.iter().sum();
        let sb: f64 = b.payoffs.iter().sum();
        sb.total_cmp(&sa)
            .then_with(|| lex_cmp(&a.x, &b.x))
            .then_with(|| lex_cmp(&a.x1, &b.x1))
    });
    let mut kept: Vec<ScanEntry> = Vec::new();
    for c in candidates {
        if !kept.iter().any(|k| dominates(&k.payoffs, &c.payoffs)) {
            kept.push(c);
        }
    }
    let snapshot: Vec<Vec<f64>> = kept.iter().map(|k| k.payoffs.clone()).collect();
    kept.retain(|k| !snapshot.iter().any(|p| dominates(p, &k.payoffs)));
    kept.sort_by(|a, b| lex_cmp(&a.x, &b.x).then_with(|| lex_cmp(&a.x1, &b.x1)));
    let indifference = kept.iter().fold(0.0f64, |g, k| g.max(k.max_gap));
    Ok(ScanReport {
        enumerated: total,
        incentive_compatible,
        undominated: kept,
        indifference,
        family: family.to_vec(),
    })
}

fn advance(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

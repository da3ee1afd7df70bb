//! Step-flow mechanisms: continuation values, incentive compatibility,
//! payoffs and the front-loading transform.
//!
//! A mechanism pays the agent a right-continuous step flow `x` before
//! disclosure and a reward `X1_t` on disclosure at `t`. Its continuation
//! value `X_t = r ∫_t^∞ e^{-r(s-t)} x_s ds` is computed exactly per cell.
//! The reward is either the continuation value itself (`Reward::Derived`,
//! the indifference form) or explicit per-cell constants.

use thiserror::Error;

use crate::deadline::{Deadline, DeadlineSpec};
use crate::distribution::BreakthroughDist;
use crate::frontier::{Extended, FrontierError, TechnologyPair};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("invalid mechanism: {0}")]
    Invalid(String),
    #[error("continuation value X_0={x0} exceeds the old peak u0={u0}")]
    AboveOldPeak { x0: f64, u0: f64 },
    #[error("payoff is -inf: reward outside the new frontier's domain at t={0}")]
    OffDomain(f64),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
}

/// Disclosure reward of a mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum Reward {
    /// `X1 = X`: the agent is indifferent about when to disclose.
    Derived,
    /// One constant per grid cell.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mechanism {
    r: f64,
    grid: Vec<f64>,
    levels: Vec<f64>,
    reward: Reward,
    values: Vec<f64>,
}

/// `1 - e^{-r d}` without cancellation.
pub(crate) fn one_minus_discount(r: f64, d: f64) -> f64 {
    -(-r * d).exp_m1()
}

impl Mechanism {
    /// `grid` starts at 0 and increases strictly; `levels[i]` is paid on
    /// `[grid[i], grid[i+1])`, the last level forever after.
    pub fn new(r: f64, grid: Vec<f64>, levels: Vec<f64>, reward: Reward) -> Result<Self, MechanismError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(MechanismError::Invalid(format!("discount rate {r}")));
        }
        if grid.is_empty() || grid.len() != levels.len() {
            return Err(MechanismError::Invalid(format!(
                "grid has {} points but {} levels",
                grid.len(),
                levels.len()
            )));
        }
        if grid[0] != 0.0 {
            return Err(MechanismError::Invalid("grid must start at t=0".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|t| !t.is_finite()) {
            return Err(MechanismError::Invalid("grid must be finite and strictly increasing".into()));
        }
        if levels.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(MechanismError::Invalid("levels must be finite and non-negative".into()));
        }
        if let Reward::Explicit(rw) = &reward {
            if rw.len() != levels.len() || rw.iter().any(|v| !v.is_finite()) {
                return Err(MechanismError::Invalid(
                    "explicit reward needs one finite value per cell".into(),
                ));
            }
        }
        let n = levels.len();
        let mut values = vec![0.0; n];
        values[n - 1] = levels[n - 1];
        for i in (0..n - 1).rev() {
            let w = one_minus_discount(r, grid[i + 1] - grid[i]);
            values[i] = w * levels[i] + (1.0 - w) * values[i + 1];
        }
        Ok(Self {
            r,
            grid,
            levels,
            reward,
            values,
        })
    }

    /// Constant flow `c` forever.
    pub fn constant(r: f64, c: f64) -> Result<Self, MechanismError> {
        Self::new(r, vec![0.0], vec![c], Reward::Derived)
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn reward(&self) -> &Reward {
        &self.reward
    }

    /// Continuation values at the grid points.
    pub fn grid_values(&self) -> &[f64] {
        &self.values
    }

    fn cell(&self, t: f64) -> usize {
        self.grid.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn flow(&self, t: f64) -> f64 {
        self.levels[self.cell(t)]
    }

    pub fn continuation_value(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let i = self.cell(t);
        if i + 1 == self.levels.len() {
            return self.levels[i];
        }
        let w = one_minus_discount(self.r, self.grid[i + 1] - t);
        w * self.levels[i] + (1.0 - w) * self.values[i + 1]
    }

    pub fn disclosure_reward(&self, t: f64) -> f64 {
        match &self.reward {
            Reward::Derived => self.continuation_value(t),
            Reward::Explicit(rw) => rw[self.cell(t.max(0.0))],
        }
    }

    /// Same flow with the reward replaced by the continuation value.
    pub fn with_derived_reward(&self) -> Self {
        Self {
            reward: Reward::Derived,
            ..self.clone()
        }
    }

    /// Levels capped at `cap` (the old peak).
    pub fn capped(&self, cap: f64) -> Result<Self, MechanismError> {
        let levels = self.levels.iter().map(|&x| x.min(cap)).collect();
        Self::new(self.r, self.grid.clone(), levels, self.reward.clone())
    }

    /// Whether the flow is `high` then `low` with at most one switch.
    pub fn is_deadline_form(&self, high: f64, low: f64, tol: f64) -> bool {
        let mut seen_low = false;
        for &x in &self.levels {
            if (x - low).abs() <= tol {
                seen_low = true;
            } else if (x - high).abs() <= tol {
                if seen_low {
                    return false;
                }
            } else {
                return false;
            }
        }
        true
    }

    /// Rows `(t, x_t, X_t, X1_t)` at the grid points and the extra times.
    pub fn sample_rows(&self, extra_times: &[f64]) -> Vec<MechanismRow> {
        let mut times: Vec<f64> = self
            .grid
            .iter()
            .copied()
            .chain(extra_times.iter().copied().filter(|t| *t >= 0.0 && t.is_finite()))
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        times
            .into_iter()
            .map(|t| MechanismRow {
                t,
                flow: self.flow(t),
                value: self.continuation_value(t),
                reward: self.disclosure_reward(t),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismRow {
    pub t: f64,
    pub flow: f64,
    pub value: f64,
    pub reward: f64,
}

/// Which incentive constraint fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcClause {
    /// Never disclosing beats disclosing now: `X1_t < X_t`.
    NonDisclosure,
    /// Delaying disclosure beats disclosing now: `h` increases.
    Delay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcViolation {
    pub time: f64,
    pub clause: IcClause,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcReport {
    pub ic: bool,
    /// `h(t) = e^{-rt} (X1_t - X_t)` at each grid point.
    pub h_values: Vec<(f64, f64)>,
    pub violation: Option<IcViolation>,
}

pub const IC_TOL: f64 = 1e-12;

/// Incentive-compatibility check.
///
/// With explicit per-cell rewards `h` is smooth inside a cell with
/// `h'(t) = -r e^{-rt} (X1 - x)`, so it is decreasing there iff `X1 >= x`;
/// across cell boundaries it jumps by the change in `X1`. Non-negativity is
/// checked at both ends of each cell, which bounds the cell's minimum.
pub fn ic_check(m: &Mechanism) -> IcReport {
    let r = m.r;
    let n = m.levels.len();
    let rewards: Vec<f64> = match &m.reward {
        Reward::Derived => m.values.clone(),
        Reward::Explicit(rw) => rw.clone(),
    };
    let derived = matches!(m.reward, Reward::Derived);
    let h_values: Vec<(f64, f64)> = m
        .grid
        .iter()
        .zip(&rewards)
        .zip(&m.values)
        .map(|((&t, &x1), &x0)| (t, if derived { 0.0 } else { (-r * t).exp() * (x1 - x0) }))
        .collect();
    if derived {
        return IcReport {
            ic: true,
            h_values,
            violation: None,
        };
    }

    let fail = |time: f64, clause: IcClause, detail: String| IcReport {
        ic: false,
        h_values: h_values.clone(),
        violation: Some(IcViolation {
            time,
            clause,
            detail,
        }),
    };

    for i in 0..n {
        let s = m.grid[i];
        let x1 = rewards[i];
        let gap_start = x1 - m.values[i];
        if gap_start < -IC_TOL {
            return fail(
                s,
                IcClause::NonDisclosure,
                format!("reward {x1} below continuation value {}", m.values[i]),
            );
        }
        if x1 < m.levels[i] - IC_TOL {
            return fail(
                s,
                IcClause::Delay,
                format!("reward {x1} below flow {} inside the cell", m.levels[i]),
            );
        }
        if i + 1 < n {
            let end = m.grid[i + 1];
            let gap_end = x1 - m.values[i + 1];
            if gap_end < -IC_TOL {
                return fail(
                    end,
                    IcClause::NonDisclosure,
                    format!("reward {x1} below continuation value {} before t={end}", m.values[i + 1]),
                );
            }
            if rewards[i + 1] > x1 + IC_TOL {
                return fail(
                    end,
                    IcClause::Delay,
                    format!("reward rises from {x1} to {}", rewards[i + 1]),
                );
            }
        }
    }
    IcReport {
        ic: true,
        h_values,
        violation: None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomPayoff {
    pub t: f64,
    pub mass: f64,
    pub pre: f64,
    pub post: Extended,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffBreakdown {
    pub total: Extended,
    pub pre_disclosure: f64,
    pub post_disclosure: Extended,
    pub rows: Vec<AtomPayoff>,
    /// Breakthrough times at which the reward left the new frontier's domain.
    pub off_domain: Vec<f64>,
}

impl PayoffBreakdown {
    pub fn total_finite(&self) -> Result<f64, MechanismError> {
        match self.total {
            Extended::Finite(v) => Ok(v),
            _ => Err(MechanismError::OffDomain(self.off_domain.first().copied().unwrap_or(f64::NAN))),
        }
    }
}

/// Discounted pre-disclosure payoff `r ∫_0^t e^{-rs} F0(x_s) ds`.
pub(crate) fn pre_disclosure_value(m: &Mechanism, pair: &TechnologyPair, t: f64) -> Result<f64, MechanismError> {
    let mut acc = 0.0;
    for i in 0..m.levels.len() {
        let a = m.grid[i];
        if a >= t {
            break;
        }
        let b = m.grid.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
        let weight = (-m.r * a).exp() * one_minus_discount(m.r, b - a);
        acc += weight * pair.f0.value(m.levels[i])?;
    }
    Ok(acc)
}

/// Principal's expected payoff under `g`, atom by atom.
pub fn payoff(m: &Mechanism, pair: &TechnologyPair, g: &BreakthroughDist) -> Result<PayoffBreakdown, MechanismError> {
    let mut rows = Vec::with_capacity(g.len());
    let mut off_domain = Vec::new();
    let mut pre_total = 0.0;
    let mut post_total = 0.0;
    for &(t, mass) in g.atoms() {
        let pre = pre_disclosure_value(m, pair, t)?;
        let reward = m.disclosure_reward(t);
        let post = match pair.f1.eval(reward) {
            Extended::Finite(v) => {
                let discounted = (-m.r * t).exp() * v;
                post_total += mass * discounted;
                Extended::Finite(discounted)
            }
            other => {
                off_domain.push(t);
                other
            }
        };
        pre_total += mass * pre;
        rows.push(AtomPayoff {
            t,
            mass,
            pre,
            post,
            reward,
        });
    }
    let (total, post_disclosure) = if off_domain.is_empty() {
        (Extended::Finite(pre_total + post_total), Extended::Finite(post_total))
    } else {
        (Extended::NegInf, Extended::NegInf)
    };
    Ok(PayoffBreakdown {
        total,
        pre_disclosure: pre_total,
        post_disclosure,
        rows,
        off_domain,
    })
}

/// Output of [`front_load`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontLoaded {
    pub spec: DeadlineSpec,
    /// `f0` is not affine on `[u_star, u0]`, so the deadline need not dominate.
    pub not_affine: bool,
}

/// Tolerance for treating `f0` as affine on `[u_star, u0]`.
pub const AFFINE_TOL: f64 = 1e-9;

/// Deadline mechanism whose initial continuation value is `max(X_0, u_star)`.
pub fn front_load(m: &Mechanism, pair: &TechnologyPair) -> Result<FrontLoaded, MechanismError> {
    let x0 = m.continuation_value(0.0);
    let (u0, u_star) = (pair.u0, pair.u_star);
    if x0 > u0 + IC_TOL {
        return Err(MechanismError::AboveOldPeak { x0, u0 });
    }
    let target = x0.max(u_star);
    let deadline = if target >= u0 {
        Deadline::Never
    } else if target <= u_star {
        Deadline::At(0.0)
    } else {
        Deadline::At(-((u0 - target) / (u0 - u_star)).ln() / pair.r)
    };
    let not_affine = pair.affine_gap()? > AFFINE_TOL;
    Ok(FrontLoaded {
        spec: DeadlineSpec::new(deadline, pair),
        not_affine,
    })
}

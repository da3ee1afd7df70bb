//! Deadline mechanisms and the choice of deadline.
//!
//! A deadline mechanism pays `u0` until the deadline `T` and `u_star`
//! afterwards; its continuation value rises from `u_star` at `T` toward
//! `u0` the earlier one looks. The payoff `pi(T)` has one-sided derivatives
//! whose sign is that of the brackets
//!
//! ```text
//! b+(T) = [1 - G(T)]  alpha + sum_{t_k <= T} p_k F1+(X^T_{t_k})
//! b-(T) = [1 - G(T-)] alpha + sum_{t_k <  T} p_k F1-(X^T_{t_k})
//! ```
//!
//! and an optimal finite deadline satisfies `b+(T) <= 0 <= b-(T)`.

use thiserror::Error;

use crate::distribution::BreakthroughDist;
use crate::frontier::{Derivs, FrontierError, TechnologyPair};
use crate::mechanism::{one_minus_discount, Mechanism, MechanismError, Reward, AFFINE_TOL};
use crate::numeric::{bisect_predicate, linspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeadlineError {
    #[error("no conflict of interest: u1={u1} is not below u0={u0}")]
    NoConflict { u1: f64, u0: f64 },
    #[error("negative deadline {0}")]
    Negative(f64),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deadline {
    At(f64),
    Never,
}

impl Deadline {
    pub fn finite(self) -> Option<f64> {
        match self {
            Deadline::At(t) => Some(t),
            Deadline::Never => None,
        }
    }
}

/// A deadline together with the constants of the pair it was built for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadlineSpec {
    pub deadline: Deadline,
    pub u0: f64,
    pub u_star: f64,
    pub r: f64,
}

impl DeadlineSpec {
    pub fn new(deadline: Deadline, pair: &TechnologyPair) -> Self {
        Self {
            deadline,
            u0: pair.u0,
            u_star: pair.u_star,
            r: pair.r,
        }
    }

    pub fn at(t: f64, pair: &TechnologyPair) -> Result<Self, DeadlineError> {
        if !(t >= 0.0) {
            return Err(DeadlineError::Negative(t));
        }
        Ok(Self::new(Deadline::At(t), pair))
    }

    /// Continuation value (and disclosure reward) at `t`.
    pub fn reward_at(&self, t: f64) -> f64 {
        match self.deadline {
            Deadline::Never => self.u0,
            Deadline::At(deadline) if t < deadline => {
                let w = one_minus_discount(self.r, deadline - t);
                w * self.u0 + (1.0 - w) * self.u_star
            }
            Deadline::At(_) => self.u_star,
        }
    }

    pub fn mechanism(&self) -> Result<Mechanism, MechanismError> {
        match self.deadline {
            Deadline::Never => Mechanism::constant(self.r, self.u0),
            Deadline::At(t) if t <= 0.0 => Mechanism::constant(self.r, self.u_star),
            Deadline::At(t) => Mechanism::new(
                self.r,
                vec![0.0, t],
                vec![self.u0, self.u_star],
                Reward::Derived,
            ),
        }
    }
}

/// Latest deadline at which the initial continuation value equals `u1`.
pub fn t_underline(pair: &TechnologyPair) -> Result<f64, DeadlineError> {
    let (u0, u1, u_star) = (pair.u0, pair.u1, pair.u_star);
    if u1 >= u0 {
        return Err(DeadlineError::NoConflict { u1, u0 });
    }
    if u1 <= u_star {
        return Ok(0.0);
    }
    Ok(-((u0 - u1) / (u0 - u_star)).ln() / pair.r)
}

/// Kinks of a piecewise-linear `f1` closer than this to a continuation
/// value are treated as hit exactly.
pub const KINK_SNAP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocReport {
    pub alpha: f64,
    /// `e^{-rT} K b+(T)` with `K = u0 - u_star`; `None` for `T = ∞`.
    pub pi_plus: Option<f64>,
    /// `e^{-rT} K b-(T)`; `None` for `T = ∞`.
    pub pi_minus: Option<f64>,
    pub bracket_plus: Option<f64>,
    pub bracket_minus: f64,
    pub satisfied: bool,
}

/// Payoff of the deadline mechanism together with its one-sided derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiDerivs {
    pub pi: f64,
    pub foc: FocReport,
}

fn one_sided(d: Derivs, upper: bool, u: f64) -> Result<f64, FrontierError> {
    if upper {
        d.d_plus.finite_at(u)
    } else {
        d.d_minus.finite_at(u)
    }
}

struct Evaluator<'a> {
    pair: &'a TechnologyPair,
    g: &'a BreakthroughDist,
    alpha: f64,
}

impl<'a> Evaluator<'a> {
    fn new(pair: &'a TechnologyPair, g: &'a BreakthroughDist) -> Result<Self, DeadlineError> {
        Ok(Self {
            pair,
            g,
            alpha: pair.alpha()?,
        })
    }

    fn spec(&self, t: f64) -> DeadlineSpec {
        DeadlineSpec::new(Deadline::At(t), self.pair)
    }

    /// `b+(T)` (`plus = true`) or `b-(T)`.
    fn bracket(&self, deadline: f64, plus: bool) -> Result<f64, DeadlineError> {
        let spec = self.spec(deadline);
        let mut acc = 0.0;
        let mut tail = 0.0;
        for &(t, p) in self.g.atoms() {
            let included = if plus { t <= deadline } else { t < deadline };
            if included {
                let x = spec.reward_at(t);
                let d = self.pair.f1.derivs_snapped(x, KINK_SNAP);
                acc += p * one_sided(d, plus, x)?;
            } else {
                tail += p;
            }
        }
        Ok(tail * self.alpha + acc)
    }

    fn bracket_at_infinity(&self) -> Result<f64, DeadlineError> {
        let u0 = self.pair.u0;
        Ok(one_sided(self.pair.f1.eval_derivs(u0), false, u0)?)
    }

    fn pi(&self, deadline: Deadline) -> Result<f64, DeadlineError> {
        let spec = DeadlineSpec::new(deadline, self.pair);
        let r = self.pair.r;
        let v_high = self.pair.f0.value(self.pair.u0)?;
        let v_low = self.pair.f0.value(self.pair.u_star)?;
        let mut total = 0.0;
        for &(t, p) in self.g.atoms() {
            let switch = deadline.finite().map_or(t, |d| d.min(t));
            let high = one_minus_discount(r, switch);
            let low = (-r * switch).exp() * one_minus_discount(r, t - switch);
            let x = spec.reward_at(t);
            let post = (-r * t).exp() * self.pair.f1.eval(x).finite_at(x)?;
            total += p * (high * v_high + low * v_low + post);
        }
        Ok(total)
    }

    fn report(&self, deadline: Deadline, tol: f64) -> Result<PiDerivs, DeadlineError> {
        let pi = self.pi(deadline)?;
        let k = self.pair.u0 - self.pair.u_star;
        let foc = match deadline {
            Deadline::At(t) => {
                let bp = self.bracket(t, true)?;
                let bm = self.bracket(t, false)?;
                let scale = (-self.pair.r * t).exp() * k;
                FocReport {
                    alpha: self.alpha,
                    pi_plus: Some(scale * bp),
                    pi_minus: Some(scale * bm),
                    bracket_plus: Some(bp),
                    bracket_minus: bm,
                    satisfied: bp <= tol && bm >= -tol,
                }
            }
            Deadline::Never => FocReport {
                alpha: self.alpha,
                pi_plus: None,
                pi_minus: None,
                bracket_plus: None,
                bracket_minus: self.bracket_at_infinity()?,
                satisfied: false,
            },
        };
        Ok(PiDerivs { pi, foc })
    }
}

/// Payoff and first-order-condition brackets of a deadline under `g`.
pub fn pi_and_derivs(
    spec: &DeadlineSpec,
    pair: &TechnologyPair,
    g: &BreakthroughDist,
    tol: f64,
) -> Result<PiDerivs, DeadlineError> {
    Evaluator::new(pair, g)?.report(spec.deadline, tol)
}

/// `e^{rT} pi+(T) / K`, i.e. the right bracket, for a sweep of deadlines.
pub fn bracket_plus(pair: &TechnologyPair, g: &BreakthroughDist, deadline: f64) -> Result<f64, DeadlineError> {
    Evaluator::new(pair, g)?.bracket(deadline, true)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadlineSolution {
    pub t_star: Deadline,
    pub t_underline: f64,
    pub pi: f64,
    pub foc: FocReport,
    /// Deadlines satisfying the first-order condition that were compared.
    pub candidates: Vec<f64>,
    /// `f0` is not affine on `[u_star, u0]`: the result is the best deadline
    /// mechanism, which need not be optimal overall.
    pub best_in_class_only: bool,
    pub anomaly: Option<String>,
}

/// Best deadline for `g`.
///
/// Between consecutive atom times the right bracket is decreasing in `T`,
/// so each such piece holds at most one down-crossing, found by bisection.
/// When `f0` is affine the bracket is decreasing everywhere and the search
/// reduces to one bisection on `[t_underline, T_hi]`; otherwise every
/// crossing is a candidate and the one with the highest payoff wins.
pub fn optimize_deadline(
    pair: &TechnologyPair,
    g: &BreakthroughDist,
    tol: f64,
) -> Result<DeadlineSolution, DeadlineError> {
    let eval = Evaluator::new(pair, g)?;
    let t_low = t_underline(pair)?;
    let best_in_class_only = pair.affine_gap()? > AFFINE_TOL;

    let mut t_hi = g.last_time().max(0.0) + t_low + 1.0;
    let mut grow = 0;
    while eval.bracket(t_hi, true)? > 0.0 && grow < 60 {
        t_hi = 2.0 * t_hi + 1.0;
        grow += 1;
    }

    let mut cuts: Vec<f64> = vec![t_low];
    cuts.extend(g.times().into_iter().filter(|&t| t > t_low && t < t_hi));
    cuts.push(t_hi);

    let mut candidates = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let start = eval.bracket(a, true)?;
        if start <= 0.0 {
            if a == t_low || eval.bracket(a, false)? >= 0.0 {
                candidates.push(a);
            }
            continue;
        }
        let is_last = b == t_hi;
        let end = if is_last {
            eval.bracket(b, true)?
        } else {
            eval.bracket(b, false)?
        };
        if end <= 0.0 {
            let tol_t = 1e-14 * b.max(1.0);
            let mut failure = None;
            let br = bisect_predicate(a, b, tol_t, |t| match eval.bracket(t, true) {
                Ok(v) => v <= 0.0,
                Err(e) => {
                    failure.get_or_insert(e);
                    true
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            // on a smooth crossing b-(hi) can sit a rounding error below 0
            let pick = if eval.bracket(br.hi, false)? < 0.0 {
                let lo = eval.report(Deadline::At(br.lo), tol)?.foc;
                let ok = lo.pi_plus.is_some_and(|p| p <= tol) && lo.pi_minus.is_some_and(|m| m >= 0.0);
                if ok {
                    br.lo
                } else {
                    br.hi
                }
            } else {
                br.hi
            };
            candidates.push(pick);
        }
    }
    candidates.dedup();

    let mut best: Option<(f64, f64)> = None;
    for &t in &candidates {
        let v = eval.pi(Deadline::At(t))?;
        if best.map_or(true, |(_, bv)| v > bv) {
            best = Some((t, v));
        }
    }

    match best {
        Some((t, _)) => {
            let rep = eval.report(Deadline::At(t), tol)?;
            Ok(DeadlineSolution {
                t_star: Deadline::At(t),
                t_underline: t_low,
                pi: rep.pi,
                foc: rep.foc,
                candidates,
                best_in_class_only,
                anomaly: None,
            })
        }
        None => {
            let at_inf = eval.pi(Deadline::Never)?;
            let probes = linspace(t_low, t_hi, 200);
            let mut best_probe = (t_low, f64::NEG_INFINITY);
            for &t in &probes {
                let v = eval.pi(Deadline::At(t))?;
                if v > best_probe.1 {
                    best_probe = (t, v);
                }
            }
            if best_probe.1 >= at_inf - tol {
                let rep = eval.report(Deadline::At(best_probe.0), tol)?;
                return Ok(DeadlineSolution {
                    t_star: Deadline::At(best_probe.0),
                    t_underline: t_low,
                    pi: rep.pi,
                    foc: rep.foc,
                    candidates,
                    best_in_class_only,
                    anomaly: Some("no first-order crossing found; best probed deadline returned".into()),
                });
            }
            let rep = eval.report(Deadline::Never, tol)?;
            Ok(DeadlineSolution {
                t_star: Deadline::Never,
                t_underline: t_low,
                pi: rep.pi,
                foc: rep.foc,
                candidates,
                best_in_class_only,
                anomaly: Some(format!(
                    "infinite deadline beats every probed finite deadline up to T={t_hi}"
                )),
            })
        }
    }
}

/// Deadline payoff `pi(T)` under `g`.
pub fn deadline_payoff(pair: &TechnologyPair, g: &BreakthroughDist, deadline: Deadline) -> Result<f64, DeadlineError> {
    Evaluator::new(pair, g)?.pi(deadline)
}

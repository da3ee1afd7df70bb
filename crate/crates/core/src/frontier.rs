//! Utility-possibility frontiers and the structural constants of a
//! technology pair.
//!
//! A frontier maps agent utility `u` to the highest attainable principal
//! utility. Two representations are supported: concave piecewise-linear
//! frontiers (the concavification of finitely many allocations) and
//! parametric frontiers given by an evaluator and, optionally, its analytic
//! derivative.
//!
//! Values outside the effective domain are the sentinel [`Extended::NegInf`];
//! one-sided slopes at the domain boundary are infinite sentinels. Sentinels
//! never silently enter arithmetic: converting one to `f64` is an error.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{bisect_predicate, bisect_root, golden_section_max, linspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrontierError {
    #[error("invalid frontier: {0}")]
    InvalidFrontier(String),
    #[error("frontier has no unique peak: maximised at both u={first} and u={second}")]
    NonUniquePeak { first: f64, second: f64 },
    #[error("arithmetic on a non-finite frontier value at u={u} ({value})")]
    SentinelArithmetic { u: f64, value: Extended },
    #[error("discount rate must be positive, got {0}")]
    InvalidRate(f64),
}

/// Extended-real value returned by frontier queries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInf,
    NegInf,
    /// One-sided slope requested off the domain.
    Undefined,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// The finite value, or a [`FrontierError::SentinelArithmetic`] tagged with `u`.
    pub fn finite_at(self, u: f64) -> Result<f64, FrontierError> {
        match self {
            Extended::Finite(v) => Ok(v),
            other => Err(FrontierError::SentinelArithmetic { u, value: other }),
        }
    }

    // Ordering key only; never used for arithmetic.
    fn order_key(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInf => Some(f64::INFINITY),
            Extended::NegInf => Some(f64::NEG_INFINITY),
            Extended::Undefined => None,
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => write!(f, "{v}"),
            Extended::PosInf => write!(f, "+inf"),
            Extended::NegInf => write!(f, "-inf"),
            Extended::Undefined => write!(f, "undefined"),
        }
    }
}

/// Value and one-sided slopes at a point. At an interior point the
/// supergradient interval is `[d_plus, d_minus]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivs {
    pub value: Extended,
    pub d_plus: Extended,
    pub d_minus: Extended,
}

/// Concave piecewise-linear frontier on `[points[0].0, points[last].0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    points: Vec<(f64, f64)>,
}

impl PiecewiseLinear {
    /// Concave upper envelope of `points`, restricted to their u-range.
    pub fn build(points: &[(f64, f64)]) -> Result<Self, FrontierError> {
        if points.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
            return Err(FrontierError::InvalidFrontier(
                "breakpoints must be finite".into(),
            ));
        }
        let mut sorted: Vec<(f64, f64)> = points.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        // equal u: the first after sorting carries the largest v
        sorted.dedup_by(|later, earlier| later.0 == earlier.0);
        if sorted.len() < 2 {
            return Err(FrontierError::InvalidFrontier(
                "need at least two distinct agent-utility values".into(),
            ));
        }

        let mut hull: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for p in sorted {
            while hull.len() >= 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                // drop b unless a -> b -> p turns strictly clockwise
                let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
                if cross >= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        Ok(Self { points: hull })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    fn lo(&self) -> f64 {
        self.points[0].0
    }

    fn hi(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    fn value(&self, u: f64) -> Extended {
        if !(u >= self.lo() && u <= self.hi()) {
            return Extended::NegInf;
        }
        let idx = self.points.partition_point(|p| p.0 <= u);
        if idx == 0 {
            return Extended::Finite(self.points[0].1);
        }
        let (u_a, v_a) = self.points[idx - 1];
        if u == u_a || idx == self.points.len() {
            return Extended::Finite(v_a);
        }
        let (u_b, v_b) = self.points[idx];
        Extended::Finite(v_a + (v_b - v_a) * (u - u_a) / (u_b - u_a))
    }

    fn derivs(&self, u: f64) -> Derivs {
        let value = self.value(u);
        if !value.is_finite() {
            return Derivs {
                value,
                d_plus: Extended::Undefined,
                d_minus: Extended::Undefined,
            };
        }
        let slopes = self.slopes();
        let n = self.points.len();
        // index of the segment whose closed-left interval contains u
        let at = self.points.partition_point(|p| p.0 <= u) - 1;
        let on_breakpoint = self.points[at].0 == u;
        let d_plus = if at == n - 1 {
            Extended::NegInf
        } else {
            Extended::Finite(slopes[at])
        };
        let d_minus = if on_breakpoint {
            if at == 0 {
                Extended::PosInf
            } else {
                Extended::Finite(slopes[at - 1])
            }
        } else {
            Extended::Finite(slopes[at])
        };
        Derivs {
            value,
            d_plus,
            d_minus,
        }
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Frontier given by an evaluator on `[lo, hi]`.
#[derive(Clone)]
pub struct Parametric {
    label: String,
    lo: f64,
    hi: f64,
    value: RealFn,
    derivative: Option<RealFn>,
}

impl fmt::Debug for Parametric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Parametric")
            .field("label", &self.label)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("analytic_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// Relative step for central differences when no analytic derivative exists.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

impl Parametric {
    pub fn new<V>(label: impl Into<String>, lo: f64, hi: f64, value: V) -> Result<Self, FrontierError>
    where
        V: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FrontierError::InvalidFrontier(format!(
                "parametric domain [{lo}, {hi}] is empty or unbounded"
            )));
        }
        Ok(Self {
            label: label.into(),
            lo,
            hi,
            value: Arc::new(value),
            derivative: None,
        })
    }

    pub fn with_derivative<D>(mut self, derivative: D) -> Self
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn slope(&self, u: f64) -> f64 {
        if let Some(d) = &self.derivative {
            return d(u);
        }
        let h = FD_RELATIVE_STEP * u.abs().max(1.0);
        let a = (u - h).max(self.lo);
        let b = (u + h).min(self.hi);
        ((self.value)(b) - (self.value)(a)) / (b - a)
    }

    fn derivs(&self, u: f64) -> Derivs {
        if !(u >= self.lo && u <= self.hi) {
            return Derivs {
                value: Extended::NegInf,
                d_plus: Extended::Undefined,
                d_minus: Extended::Undefined,
            };
        }
        let value = Extended::Finite((self.value)(u));
        let slope = Extended::Finite(self.slope(u));
        Derivs {
            value,
            d_plus: if u == self.hi { Extended::NegInf } else { slope },
            d_minus: if u == self.lo { Extended::PosInf } else { slope },
        }
    }
}

#[derive(Debug, Clone)]
pub enum Frontier {
    Piecewise(PiecewiseLinear),
    Parametric(Parametric),
}

impl Frontier {
    pub fn piecewise(points: &[(f64, f64)]) -> Result<Self, FrontierError> {
        PiecewiseLinear::build(points).map(Frontier::Piecewise)
    }

    pub fn domain(&self) -> (f64, f64) {
        match self {
            Frontier::Piecewise(p) => (p.lo(), p.hi()),
            Frontier::Parametric(p) => (p.lo, p.hi),
        }
    }

    pub fn contains(&self, u: f64) -> bool {
        let (lo, hi) = self.domain();
        u >= lo && u <= hi
    }

    pub fn eval(&self, u: f64) -> Extended {
        match self {
            Frontier::Piecewise(p) => p.value(u),
            Frontier::Parametric(p) => p.derivs(u).value,
        }
    }

    /// Finite value or a sentinel error.
    pub fn value(&self, u: f64) -> Result<f64, FrontierError> {
        self.eval(u).finite_at(u)
    }

    pub fn eval_derivs(&self, u: f64) -> Derivs {
        match self {
            Frontier::Piecewise(p) => p.derivs(u),
            Frontier::Parametric(p) => p.derivs(u),
        }
    }

    /// Derivative of a differentiable frontier; right derivative at kinks.
    pub fn derivative(&self, u: f64) -> Result<f64, FrontierError> {
        match self {
            Frontier::Parametric(p) if self.contains(u) => Ok(p.slope(u)),
            _ => self.eval_derivs(u).d_plus.finite_at(u),
        }
    }

    /// One-sided slopes with kink snapping: a point within `snap` of a
    /// breakpoint is treated as lying on it. Used where `u` is the result of
    /// floating-point arithmetic that should land on a kink.
    pub fn derivs_snapped(&self, u: f64, snap: f64) -> Derivs {
        if let Frontier::Piecewise(p) = self {
            if let Some(&(bu, _)) = p
                .points()
                .iter()
                .min_by(|a, b| (a.0 - u).abs().total_cmp(&(b.0 - u).abs()))
            {
                if (bu - u).abs() <= snap {
                    return p.derivs(bu);
                }
            }
        }
        self.eval_derivs(u)
    }

    /// `c[0] + c[1] u + c[2] u^2` on `[lo, hi]` with its analytic derivative.
    pub fn quadratic(
        label: impl Into<String>,
        c: [f64; 3],
        lo: f64,
        hi: f64,
    ) -> Result<Self, FrontierError> {
        if c.iter().any(|v| !v.is_finite()) {
            return Err(FrontierError::InvalidFrontier("non-finite coefficient".into()));
        }
        let p = Parametric::new(label, lo, hi, move |u| c[0] + u * (c[1] + u * c[2]))?
            .with_derivative(move |u| c[1] + 2.0 * c[2] * u);
        Ok(Frontier::Parametric(p))
    }

    pub fn breakpoints(&self) -> Option<&[(f64, f64)]> {
        match self {
            Frontier::Piecewise(p) => Some(p.points()),
            Frontier::Parametric(_) => None,
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, Frontier::Parametric(_))
    }

    /// The unique maximiser.
    pub fn peak(&self) -> Result<f64, FrontierError> {
        match self {
            Frontier::Piecewise(p) => {
                let pts = p.points();
                let mut best = 0;
                for (i, pt) in pts.iter().enumerate() {
                    if pt.1 > pts[best].1 {
                        best = i;
                    }
                }
                if let Some(other) = pts
                    .iter()
                    .enumerate()
                    .find(|(i, pt)| *i != best && pt.1 == pts[best].1)
                {
                    let (a, b) = (pts[best].0.min(other.1 .0), pts[best].0.max(other.1 .0));
                    return Err(FrontierError::NonUniquePeak { first: a, second: b });
                }
                Ok(pts[best].0)
            }
            Frontier::Parametric(p) => {
                let (lo, hi) = (p.lo, p.hi);
                let d_lo = p.slope(lo);
                let d_hi = p.slope(hi);
                if d_lo <= 0.0 {
                    return Ok(lo);
                }
                if d_hi >= 0.0 {
                    return Ok(hi);
                }
                if p.derivative.is_some() {
                    let root = bisect_root(lo, hi, 1e-15, 0.0, |u| p.slope(u))
                        .expect("slope changes sign on the domain");
                    Ok(root)
                } else {
                    Ok(golden_section_max(lo, hi, 1e-12, |u| (p.value)(u)))
                }
            }
        }
    }
}

/// Whether the supergradient intervals of `f0` and `f1` intersect at `u`,
/// and if not which side `f0`'s interval lies on.
fn supergradient_relation(f0: &Frontier, f1: &Frontier, u: f64) -> Option<std::cmp::Ordering> {
    let a = f0.eval_derivs(u);
    let b = f1.eval_derivs(u);
    let (a_plus, a_minus) = (a.d_plus.order_key()?, a.d_minus.order_key()?);
    let (b_plus, b_minus) = (b.d_plus.order_key()?, b.d_minus.order_key()?);
    if a_plus > b_minus {
        Some(std::cmp::Ordering::Greater)
    } else if a_minus < b_plus {
        Some(std::cmp::Ordering::Less)
    } else {
        Some(std::cmp::Ordering::Equal)
    }
}

/// Tolerance in `u` for the bisection locating `u_star` on smooth frontiers.
pub const U_STAR_TOL: f64 = 1e-10;

/// Rightmost agent utility at or below the new peak where the two
/// frontiers share a supergradient.
///
/// The search runs over `[lo, min(u1, u0)]`: to the right of `u1` the old
/// frontier's slopes are positive and the new one's negative, so a shared
/// supergradient there can only be the degenerate kink of `f0` at `u0`.
pub fn u_star(f0: &Frontier, f1: &Frontier) -> Result<f64, FrontierError> {
    let u0 = f0.peak()?;
    let u1 = f1.peak()?;
    let lo = f0.domain().0.max(f1.domain().0);
    let hi = u1.min(u0);
    if hi <= lo {
        return Ok(lo);
    }
    let shared = |u: f64| supergradient_relation(f0, f1, u) == Some(std::cmp::Ordering::Equal);

    if let (Some(b0), Some(b1)) = (f0.breakpoints(), f1.breakpoints()) {
        let mut candidates: Vec<f64> = b0
            .iter()
            .chain(b1.iter())
            .map(|p| p.0)
            .filter(|&u| u >= lo && u <= hi)
            .chain([lo, hi])
            .collect();
        candidates.sort_by(|a, b| b.total_cmp(a));
        candidates.dedup();
        return Ok(candidates.into_iter().find(|&u| shared(u)).unwrap_or(lo));
    }

    if shared(hi) {
        return Ok(hi);
    }
    // f0 steeper than f1 just left of hi; find where that stops holding.
    let steeper =
        |u: f64| supergradient_relation(f0, f1, u) == Some(std::cmp::Ordering::Greater);
    let grid = linspace(lo, hi, 2001);
    for w in grid.windows(2).rev() {
        if !steeper(w[0]) {
            let b = bisect_predicate(w[0], w[1], U_STAR_TOL, steeper);
            return Ok(b.lo);
        }
    }
    Ok(lo)
}

/// Largest excess of `f0` over its chord between `(u_star, f0(u_star))` and
/// `(u0, f0(u0))`.
pub fn affine_gap(f0: &Frontier, u_star: f64, u0: f64) -> Result<f64, FrontierError> {
    let v_star = f0.value(u_star)?;
    let v0 = f0.value(u0)?;
    if u0 <= u_star {
        return Ok(0.0);
    }
    let chord = |u: f64| v_star + (v0 - v_star) * (u - u_star) / (u0 - u_star);
    let excess = |u: f64| -> Result<f64, FrontierError> { Ok(f0.value(u)? - chord(u)) };

    let mut best = 0.0_f64;
    match f0.breakpoints() {
        Some(points) => {
            for &(u, _) in points.iter().filter(|p| p.0 > u_star && p.0 < u0) {
                best = best.max(excess(u)?);
            }
        }
        None => {
            let n = (((u0 - u_star) / 1e-4).ceil() as usize).max(2) + 1;
            let grid = linspace(u_star, u0, n);
            let mut arg = u_star;
            for &u in &grid {
                let e = excess(u)?;
                if e > best {
                    best = e;
                    arg = u;
                }
            }
            let step = (u0 - u_star) / (n - 1) as f64;
            let a = (arg - step).max(u_star);
            let b = (arg + step).min(u0);
            let refined = golden_section_max(a, b, 1e-13, |u| excess(u).unwrap_or(f64::NEG_INFINITY));
            best = best.max(excess(refined)?);
        }
    }
    Ok(best)
}

/// Old and new frontiers with their structural constants.
#[derive(Debug, Clone)]
pub struct TechnologyPair {
    pub f0: Frontier,
    pub f1: Frontier,
    pub u0: f64,
    pub u1: f64,
    pub u_star: f64,
    pub r: f64,
}

impl TechnologyPair {
    pub fn new(f0: Frontier, f1: Frontier, r: f64) -> Result<Self, FrontierError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(FrontierError::InvalidRate(r));
        }
        let u0 = f0.peak()?;
        let u1 = f1.peak()?;
        let u_star = u_star(&f0, &f1)?;
        Ok(Self {
            f0,
            f1,
            u0,
            u1,
            u_star,
            r,
        })
    }

    /// Slope of the chord of `f0` between `u_star` and `u0`.
    pub fn alpha(&self) -> Result<f64, FrontierError> {
        let num = self.f0.value(self.u0)? - self.f0.value(self.u_star)?;
        Ok(num / (self.u0 - self.u_star))
    }

    pub fn affine_gap(&self) -> Result<f64, FrontierError> {
        affine_gap(&self.f0, self.u_star, self.u0)
    }

    pub fn validate(&self) -> ModelReport {
        validate_model(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelReport {
    pub checks: Vec<Check>,
}

impl ModelReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const CHECK_CONCAVE_F0: &str = "f0 concave";
pub const CHECK_CONCAVE_F1: &str = "f1 concave";
pub const CHECK_CONFLICT: &str = "u1 < u0";
pub const CHECK_DOMINATES: &str = "f1 >= f0";
pub const CHECK_U_STAR_RANGE: &str = "0 <= u_star <= u1";
pub const CHECK_STRICT_LOCAL_MAX: &str = "u_star strict local max of f1 - f0";

/// Offset used to probe `f1 - f0` on either side of `u_star`.
pub const SADDLE_PROBE: f64 = 1e-4;

fn concavity_check(name: &'static str, f: &Frontier) -> Check {
    if !f.is_parametric() {
        return Check {
            name,
            passed: true,
            witness: None,
            detail: "piecewise-linear envelope".into(),
        };
    }
    let (lo, hi) = f.domain();
    let grid = linspace(lo, hi, 401);
    let h = grid[1] - grid[0];
    for w in grid.windows(3) {
        let second = f.value(w[0]).unwrap_or(f64::NAN) - 2.0 * f.value(w[1]).unwrap_or(f64::NAN)
            + f.value(w[2]).unwrap_or(f64::NAN);
        if !(second <= 1e-12 * h.max(1.0)) {
            return Check {
                name,
                passed: false,
                witness: Some(w[1]),
                detail: format!("second difference {second:e} > 0"),
            };
        }
    }
    Check {
        name,
        passed: true,
        witness: None,
        detail: "second differences non-positive on 401-point grid".into(),
    }
}

/// Checks every model assumption on the pair, reporting a witness for
/// each failure.
pub fn validate_model(pair: &TechnologyPair) -> ModelReport {
    let mut checks = vec![
        concavity_check(CHECK_CONCAVE_F0, &pair.f0),
        concavity_check(CHECK_CONCAVE_F1, &pair.f1),
    ];

    checks.push(Check {
        name: CHECK_CONFLICT,
        passed: pair.u1 < pair.u0,
        witness: (pair.u1 >= pair.u0).then_some(pair.u1),
        detail: format!("u1={} u0={}", pair.u1, pair.u0),
    });

    let (lo0, hi0) = pair.f0.domain();
    let (lo1, hi1) = pair.f1.domain();
    let (lo, hi) = (lo0.max(lo1), hi0.min(hi1));
    let mut probes = linspace(lo, hi, 401);
    for f in [&pair.f0, &pair.f1] {
        if let Some(points) = f.breakpoints() {
            probes.extend(points.iter().map(|p| p.0).filter(|&u| u >= lo && u <= hi));
        }
    }
    probes.sort_by(f64::total_cmp);
    let witness = probes.iter().copied().find(|&u| {
        match (pair.f0.value(u), pair.f1.value(u)) {
            (Ok(a), Ok(b)) => b < a - 1e-12,
            _ => true,
        }
    });
    checks.push(Check {
        name: CHECK_DOMINATES,
        passed: witness.is_none(),
        witness,
        detail: format!("checked {} points on [{lo}, {hi}]", probes.len()),
    });

    let in_range = pair.u_star >= 0.0 && pair.u_star <= pair.u1;
    checks.push(Check {
        name: CHECK_U_STAR_RANGE,
        passed: in_range,
        witness: (!in_range).then_some(pair.u_star),
        detail: format!("u_star={}", pair.u_star),
    });

    checks.push(strict_local_max_check(pair));
    ModelReport { checks }
}

fn strict_local_max_check(pair: &TechnologyPair) -> Check {
    let gap = |u: f64| -> Option<f64> {
        Some(pair.f1.value(u).ok()? - pair.f0.value(u).ok()?)
    };
    let u = pair.u_star;
    let name = CHECK_STRICT_LOCAL_MAX;
    let Some(at) = gap(u) else {
        return Check {
            name,
            passed: false,
            witness: Some(u),
            detail: "f1 - f0 undefined at u_star".into(),
        };
    };
    let right = gap(u + SADDLE_PROBE);
    let decreasing_right = right.map_or(true, |v| v < at);
    let lo = pair.f0.domain().0.max(pair.f1.domain().0);
    let left_ok = if u - SADDLE_PROBE < lo {
        true
    } else {
        gap(u - SADDLE_PROBE).map_or(true, |v| v <= at + 1e-15)
    };
    let passed = decreasing_right && left_ok;
    let detail = if passed {
        "f1 - f0 peaks at u_star".to_string()
    } else if !decreasing_right {
        "f1 - f0 not strictly decreasing right of u_star (suspected saddle or flat maximum)".into()
    } else {
        "f1 - f0 decreasing into u_star from the left (suspected saddle)".into()
    };
    Check {
        name,
        passed,
        witness: (!passed).then_some(u),
        detail,
    }
}

//! Unemployment insurance: frontiers built from consumption utility
//! `phi(C) = C^a`, labour disutility `kappa(L) = L^b`, wage `w` and the
//! shadow value of public funds, plus the benefit/tax schedules a mechanism
//! implies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deadline::{optimize_deadline, DeadlineError};
use crate::distribution::BreakthroughDist;
use crate::euler::{solve_with, EulerError, SolveOptions};
use crate::frontier::{Check, Frontier, FrontierError, ModelReport, Parametric, TechnologyPair};
use crate::mechanism::Mechanism;
use crate::numeric::{golden_section_max, linspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InsuranceError {
    #[error("invalid primitives: {0}")]
    InvalidPrimitives(String),
    #[error("labour maximiser did not settle for u={0}")]
    InnerDiverged(f64),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Deadline(#[from] DeadlineError),
    #[error(transparent)]
    Euler(#[from] EulerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UiPrimitives {
    pub a: f64,
    pub b: f64,
    pub w: f64,
    pub shadow: f64,
    #[serde(default = "default_rate")]
    pub r: f64,
}

fn default_rate() -> f64 {
    1.0
}

impl UiPrimitives {
    pub fn validate(&self) -> Result<(), InsuranceError> {
        let bad = |what: &str| Err(InsuranceError::InvalidPrimitives(what.to_string()));
        if !(self.a > 0.0 && self.a < 1.0) {
            return bad("a must lie in (0, 1)");
        }
        if !(self.b > 1.0 && self.b.is_finite()) {
            return bad("b must exceed 1");
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return bad("w must be positive");
        }
        if !(self.shadow > 0.0 && self.shadow.is_finite()) {
            return bad("shadow must be positive");
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return bad("r must be positive");
        }
        Ok(())
    }

    /// Consumption at the old peak, `(shadow / a)^{1/(a-1)}`.
    pub fn c0(&self) -> f64 {
        (self.shadow / self.a).powf(1.0 / (self.a - 1.0))
    }

    pub fn u0(&self) -> f64 {
        self.c0().powf(self.a)
    }

    pub fn u_hi(&self) -> f64 {
        2.0 * self.u0()
    }

    /// `(1 - a) u0`, the bound on `phi(C) - phi'(C) C`.
    pub fn eps_linear(&self) -> f64 {
        (1.0 - self.a) * self.u0()
    }

    pub fn benefit(&self, x: f64) -> f64 {
        x.max(0.0).powf(1.0 / self.a)
    }

    pub fn f0(&self, u: f64) -> f64 {
        u - self.shadow * u.powf(1.0 / self.a)
    }

    pub fn f0_derivative(&self, u: f64) -> f64 {
        1.0 - self.shadow / self.a * u.powf(1.0 / self.a - 1.0)
    }

    fn objective(&self, u: f64, l: f64) -> f64 {
        self.w * l - (u + l.powf(self.b)).powf(1.0 / self.a)
    }

    fn objective_slope(&self, u: f64, l: f64) -> f64 {
        let inner = u + l.powf(self.b);
        self.w - inner.powf(1.0 / self.a - 1.0) * self.b * l.powf(self.b - 1.0) / self.a
    }

    /// Labour and consumption maximising `wL - C` subject to
    /// `phi(C) - kappa(L) = u`.
    pub fn accept(&self, u: f64) -> Result<Acceptance, InsuranceError> {
        let mut hi = 1.0;
        let mut grown = 0;
        while self.objective_slope(u, hi) >= 0.0 {
            hi *= 2.0;
            grown += 1;
            if grown > 200 || !hi.is_finite() {
                return Err(InsuranceError::InnerDiverged(u));
            }
        }
        let l = golden_section_max(0.0, hi, 1e-10, |l| self.objective(u, l));
        let c = (u + l.powf(self.b)).powf(1.0 / self.a);
        Ok(Acceptance {
            labour: l,
            consumption: c,
            tax: self.w * l - c,
        })
    }

    pub fn f1(&self, u: f64) -> Result<f64, InsuranceError> {
        Ok(u + self.shadow * self.accept(u)?.tax)
    }

    /// Envelope derivative `1 - (shadow/a) (u + L*^b)^{1/a - 1}`.
    pub fn f1_derivative(&self, u: f64) -> Result<f64, InsuranceError> {
        let acc = self.accept(u)?;
        let inner = u + acc.labour.powf(self.b);
        Ok(1.0 - self.shadow / self.a * inner.powf(1.0 / self.a - 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub labour: f64,
    pub consumption: f64,
    pub tax: f64,
}

pub fn build_frontiers(p: &UiPrimitives) -> Result<TechnologyPair, InsuranceError> {
    p.validate()?;
    let hi = p.u_hi();
    // fail now rather than inside a frontier evaluator
    for u in linspace(0.0, hi, 9) {
        p.accept(u)?;
    }
    let (q0, q0d, q1, q1d) = (*p, *p, *p, *p);
    let f0 = Parametric::new("insurance f0", 0.0, hi, move |u| q0.f0(u))?
        .with_derivative(move |u| q0d.f0_derivative(u));
    let f1 = Parametric::new("insurance f1", 0.0, hi, move |u| q1.f1(u).unwrap_or(f64::NAN))?
        .with_derivative(move |u| q1d.f1_derivative(u).unwrap_or(f64::NAN));
    Ok(TechnologyPair::new(
        Frontier::Parametric(f0),
        Frontier::Parametric(f1),
        p.r,
    )?)
}

pub const CHECK_UI_CONCAVE: &str = "f0 strictly concave";
pub const CHECK_UI_GAP: &str = "f1 - f0 strictly decreasing";
pub const CHECK_UI_U_STAR: &str = "u_star = 0";

/// Grid checks of the insurance frontiers' shape.
pub fn assumption_checks(pair: &TechnologyPair) -> ModelReport {
    let (lo, hi) = pair.f0.domain();
    let grid = linspace(lo, hi, 200);
    let f0: Vec<f64> = grid.iter().map(|&u| pair.f0.value(u).unwrap_or(f64::NAN)).collect();
    let gap: Vec<f64> = grid
        .iter()
        .zip(&f0)
        .map(|(&u, v0)| pair.f1.value(u).unwrap_or(f64::NAN) - v0)
        .collect();
    let concave_witness = (1..grid.len() - 1)
        .find(|&i| !(f0[i - 1] - 2.0 * f0[i] + f0[i + 1] < 0.0))
        .map(|i| grid[i]);
    let gap_witness = (1..grid.len()).find(|&i| !(gap[i] < gap[i - 1])).map(|i| grid[i]);
    ModelReport {
        checks: vec![
            Check {
                name: CHECK_UI_CONCAVE,
                passed: concave_witness.is_none(),
                witness: concave_witness,
                detail: "negative second differences on 200-point grid".into(),
            },
            Check {
                name: CHECK_UI_GAP,
                passed: gap_witness.is_none(),
                witness: gap_witness,
                detail: "decreasing on 200-point grid".into(),
            },
            Check {
                name: CHECK_UI_U_STAR,
                passed: pair.u_star == 0.0,
                witness: (pair.u_star != 0.0).then_some(pair.u_star),
                detail: format!("u_star={}", pair.u_star),
            },
        ],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleRow {
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub benefit: f64,
    pub consumption: f64,
    pub labour: f64,
    pub tax: f64,
}

/// Benefits before acceptance and the acceptance contract at each time.
pub fn schedule(p: &UiPrimitives, m: &Mechanism, extra_times: &[f64]) -> Result<Vec<ScheduleRow>, InsuranceError> {
    m.sample_rows(extra_times)
        .into_iter()
        .map(|row| {
            let acc = p.accept(row.reward)?;
            Ok(ScheduleRow {
                t: row.t,
                x: row.flow,
                value: row.reward,
                benefit: p.benefit(row.flow),
                consumption: acc.consumption,
                labour: acc.labour,
                tax: acc.tax,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareRow {
    pub shadow: f64,
    pub pi_deadline: f64,
    pub pi_star: f64,
    pub ratio: f64,
    pub eps_linear: f64,
    pub affine_gap: f64,
    /// `pi_star - pi_deadline <= affine_gap + 1e-8`.
    pub gap_ok: bool,
}

pub const GAP_SLACK: f64 = 1e-8;

pub fn welfare_sweep(
    template: &UiPrimitives,
    shadows: &[f64],
    g: &BreakthroughDist,
    tol: f64,
) -> Result<Vec<WelfareRow>, InsuranceError> {
    if shadows.windows(2).any(|w| w[1] >= w[0]) || shadows.iter().any(|&s| s <= 0.0) {
        return Err(InsuranceError::InvalidPrimitives(
            "shadows must be positive and decreasing".into(),
        ));
    }
    let opts = SolveOptions {
        allow_boundary_u_star: true,
        ..SolveOptions::default()
    };
    shadows
        .iter()
        .map(|&shadow| {
            let p = UiPrimitives { shadow, ..*template };
            let pair = build_frontiers(&p)?;
            let deadline = optimize_deadline(&pair, g, tol)?;
            let star = solve_with(&pair, g, &opts)?;
            let affine_gap = pair.affine_gap()?;
            Ok(WelfareRow {
                shadow,
                pi_deadline: deadline.pi,
                pi_star: star.payoff,
                ratio: deadline.pi / star.payoff,
                eps_linear: p.eps_linear(),
                affine_gap,
                gap_ok: star.payoff - deadline.pi <= affine_gap + GAP_SLACK,
            })
        })
        .collect()
}

/// Primitives used by the examples and tests.
pub fn reference_primitives() -> UiPrimitives {
    UiPrimitives {
        a: 0.5,
        b: 2.0,
        w: 1.0,
        shadow: 0.5,
        r: 1.0,
    }
}

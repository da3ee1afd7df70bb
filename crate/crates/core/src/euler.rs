//! General optimal mechanism for finite-support breakthrough distributions.
//!
//! For atoms `t_1 < … < t_K` and a terminal level `lambda`, the backward
//! recursion
//!
//! ```text
//! x_K = X_K = lambda
//! x_k = (F0')^{-1}( E[F1'(X_tau) | tau > t_k] )
//! X_k = (1 - e^{-r(t_{k+1} - t_k)}) x_k + e^{-r(t_{k+1} - t_k)} X_{k+1}
//! ```
//!
//! builds a candidate; `lambda*` is the root of `psi(lambda) = E F1'(X_tau)`.

use thiserror::Error;

use crate::distribution::{order_checks, BreakthroughDist, DistributionError, Family};
use crate::frontier::{Check, FrontierError, ModelReport, TechnologyPair};
use crate::mechanism::{one_minus_discount, payoff, Mechanism, MechanismError, Reward};
use crate::numeric::{bisect_root, linspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("pair is not simple, failed: {}", .failed.join(", "))]
    NotSimple { failed: Vec<String> },
    #[error("breakthrough distribution has an atom at t={0}; the Euler path needs G(0)=0")]
    AtomAtZero(f64),
    #[error("psi does not change sign on [u_star, u0]: psi(u_star)={psi_lo}, psi(u0)={psi_hi}")]
    BracketFailure { psi_lo: f64, psi_hi: f64 },
    #[error("distributions must share a support")]
    UnequalSupport,
    #[error("terminal level {0} outside [u_star, u0]")]
    LambdaOutOfRange(f64),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

pub const CHECK_DIFFERENTIABLE: &str = "frontiers differentiable";
pub const CHECK_STRICT_F0: &str = "f0 strictly concave";
pub const CHECK_STRICT_F1: &str = "f1 strictly concave";
pub const CHECK_U_STAR_POSITIVE: &str = "u_star > 0";
pub const CHECK_BOUNDED_DERIVATIVES: &str = "bounded derivatives";

const GATE_GRID: usize = 201;
const GATE_SECOND_DIFF: f64 = -1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop bisecting once `|psi| <=` this.
    pub psi_tol: f64,
    /// Stop bisecting once the bracket is this narrow.
    pub lambda_tol: f64,
    /// Accept `u_star` sitting on the left edge of the domain (including 0).
    /// The bracket `psi(u_star) >= 0 >= psi(u0)` is still enforced.
    pub allow_boundary_u_star: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            psi_tol: 1e-10,
            lambda_tol: 1e-12,
            allow_boundary_u_star: false,
        }
    }
}

fn strict_concavity(name: &'static str, f: &crate::frontier::Frontier) -> Check {
    let (lo, hi) = f.domain();
    let grid = linspace(lo, hi, GATE_GRID);
    for w in grid.windows(3) {
        let second = match (f.value(w[0]), f.value(w[1]), f.value(w[2])) {
            (Ok(a), Ok(b), Ok(c)) => a - 2.0 * b + c,
            _ => f64::NAN,
        };
        if !(second < GATE_SECOND_DIFF) {
            return Check {
                name,
                passed: false,
                witness: Some(w[1]),
                detail: format!("second difference {second:e}"),
            };
        }
    }
    Check {
        name,
        passed: true,
        witness: None,
        detail: format!("second differences below {GATE_SECOND_DIFF:e} on {GATE_GRID}-point grid"),
    }
}

/// Numerical check of the hypotheses the backward recursion needs.
pub fn simple_gate(pair: &TechnologyPair, allow_boundary_u_star: bool) -> ModelReport {
    let smooth = pair.f0.is_parametric() && pair.f1.is_parametric();
    let mut checks = vec![Check {
        name: CHECK_DIFFERENTIABLE,
        passed: smooth,
        witness: None,
        detail: if smooth {
            "both frontiers parametric".into()
        } else {
            "piecewise-linear frontier has kinks; use the deadline path".into()
        },
    }];
    if smooth {
        checks.push(strict_concavity(CHECK_STRICT_F0, &pair.f0));
        checks.push(strict_concavity(CHECK_STRICT_F1, &pair.f1));
    }

    let at_edge = pair.u_star <= pair.f0.domain().0.max(pair.f1.domain().0);
    let positive = pair.u_star > 0.0 || (allow_boundary_u_star && at_edge);
    checks.push(Check {
        name: CHECK_U_STAR_POSITIVE,
        passed: positive,
        witness: (!positive).then_some(pair.u_star),
        detail: if pair.u_star > 0.0 {
            format!("u_star={}", pair.u_star)
        } else if positive {
            "u_star on the domain edge, accepted with psi bracket check".into()
        } else {
            format!("u_star={} is not positive", pair.u_star)
        },
    });

    if smooth {
        let mut bad = None;
        for f in [&pair.f0, &pair.f1] {
            let (lo, hi) = f.domain();
            for u in [lo, pair.u_star, pair.u0, hi] {
                match f.derivative(u) {
                    Ok(d) if d.is_finite() => {}
                    _ => {
                        bad.get_or_insert(u);
                    }
                }
            }
        }
        checks.push(Check {
            name: CHECK_BOUNDED_DERIVATIVES,
            passed: bad.is_none(),
            witness: bad,
            detail: "derivatives at the domain ends, u_star and u0".into(),
        });
    }
    ModelReport { checks }
}

fn require_simple(pair: &TechnologyPair, allow_boundary: bool) -> Result<(), EulerError> {
    let report = simple_gate(pair, allow_boundary);
    if report.all_passed() {
        Ok(())
    } else {
        Err(EulerError::NotSimple {
            failed: report.failures().map(|c| c.name.to_string()).collect(),
        })
    }
}

/// `(F0')^{-1}(c)`, clamped into `[u_star, u0]`.
pub fn inv_deriv_f0(pair: &TechnologyPair, c: f64) -> Result<f64, EulerError> {
    let (lo, hi) = (pair.u_star, pair.u0);
    let d_lo = pair.f0.derivative(lo)?;
    let d_hi = pair.f0.derivative(hi)?;
    if c >= d_lo {
        return Ok(lo);
    }
    if c <= d_hi {
        return Ok(hi);
    }
    let mut failure = None;
    let root = bisect_root(lo, hi, 1e-15, 0.0, |u| match pair.f0.derivative(u) {
        Ok(d) => d - c,
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(root.unwrap_or(lo))
}

/// Levels `u_k` and rewards `X_k` at the atoms for a terminal level.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    pub lambda: f64,
    pub times: Vec<f64>,
    pub levels: Vec<f64>,
    pub rewards: Vec<f64>,
}

fn check_support(g: &BreakthroughDist) -> Result<(), EulerError> {
    match g.atoms().first() {
        Some(&(t, _)) if t <= 0.0 => Err(EulerError::AtomAtZero(t)),
        Some(_) => Ok(()),
        None => Err(DistributionError::EmptyDistribution.into()),
    }
}

pub fn backward_pass(pair: &TechnologyPair, g: &BreakthroughDist, lambda: f64) -> Result<BackwardPass, EulerError> {
    check_support(g)?;
    if !(lambda >= pair.u_star - 1e-15 && lambda <= pair.u0 + 1e-15) {
        return Err(EulerError::LambdaOutOfRange(lambda));
    }
    let atoms = g.atoms();
    let k = atoms.len();
    let mut levels = vec![lambda; k];
    let mut rewards = vec![lambda; k];
    // running sums of p_j and p_j F1'(X_j) over j > i
    let mut mass = atoms[k - 1].1;
    let mut weighted = atoms[k - 1].1 * pair.f1.derivative(lambda)?;
    for i in (0..k - 1).rev() {
        let x = inv_deriv_f0(pair, weighted / mass)?;
        let w = one_minus_discount(pair.r, atoms[i + 1].0 - atoms[i].0);
        levels[i] = x;
        rewards[i] = w * x + (1.0 - w) * rewards[i + 1];
        mass += atoms[i].1;
        weighted += atoms[i].1 * pair.f1.derivative(rewards[i])?;
    }
    Ok(BackwardPass {
        lambda,
        times: g.times(),
        levels,
        rewards,
    })
}

/// `psi(lambda) = E F1'(X_tau)` along the backward pass.
pub fn psi(pair: &TechnologyPair, g: &BreakthroughDist, lambda: f64) -> Result<f64, EulerError> {
    let pass = backward_pass(pair, g, lambda)?;
    psi_of(pair, g, &pass.rewards)
}

fn psi_of(pair: &TechnologyPair, g: &BreakthroughDist, rewards: &[f64]) -> Result<f64, EulerError> {
    let d: Result<Vec<f64>, FrontierError> = rewards.iter().map(|&x| pair.f1.derivative(x)).collect();
    Ok(g.expect(&d?)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerResiduals {
    /// `[1 - G(t_k)] F0'(u_k) + sum_{j <= k} p_j F1'(X_j)`.
    pub per_atom: Vec<f64>,
    /// `E F1'(X_tau)`.
    pub initial: f64,
    /// `F0'(u_k) - E(F1'(X_tau) | tau > t_k)`, absent at the last atom.
    pub forward: Vec<Option<f64>>,
}

impl EulerResiduals {
    pub fn max_abs(&self) -> f64 {
        self.per_atom
            .iter()
            .chain(std::iter::once(&self.initial))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootCandidate {
    pub lambda: f64,
    pub psi: f64,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EulerSolution {
    pub lambda_star: f64,
    pub times: Vec<f64>,
    /// `u_k`, paid on `[t_k, t_{k+1})`; `u0` is paid before `t_1`.
    pub levels: Vec<f64>,
    /// `X_k`, the continuation value at `t_k`.
    pub rewards: Vec<f64>,
    pub mechanism: Mechanism,
    pub residuals: EulerResiduals,
    pub psi_at_root: f64,
    pub payoff: f64,
    /// Every bracketed root of `psi`; more than one only when `psi` is not
    /// monotone.
    pub roots: Vec<RootCandidate>,
    pub psi_monotone: bool,
}

impl EulerSolution {
    pub fn x0(&self) -> f64 {
        self.mechanism.continuation_value(0.0)
    }
}

/// Residuals of the Euler equation for the stored levels and rewards.
pub fn euler_residuals(sol: &EulerSolution, pair: &TechnologyPair, g: &BreakthroughDist) -> Result<EulerResiduals, EulerError> {
    residuals_of(pair, g, &sol.levels, &sol.rewards)
}

fn residuals_of(
    pair: &TechnologyPair,
    g: &BreakthroughDist,
    levels: &[f64],
    rewards: &[f64],
) -> Result<EulerResiduals, EulerError> {
    let atoms = g.atoms();
    if levels.len() != atoms.len() || rewards.len() != atoms.len() {
        return Err(DistributionError::LengthMismatch {
            expected: atoms.len(),
            got: levels.len().min(rewards.len()),
        }
        .into());
    }
    let d1: Vec<f64> = rewards
        .iter()
        .map(|&x| pair.f1.derivative(x))
        .collect::<Result<_, _>>()?;
    let mut per_atom = Vec::with_capacity(atoms.len());
    let mut forward = Vec::with_capacity(atoms.len());
    let mut acc = 0.0;
    for (i, &(t, p)) in atoms.iter().enumerate() {
        acc += p * d1[i];
        let d0 = pair.f0.derivative(levels[i])?;
        per_atom.push(g.survival(t) * d0 + acc);
        forward.push(match g.cond_expect(t, &d1) {
            Ok(e) => Some(d0 - e),
            Err(_) => None,
        });
    }
    Ok(EulerResiduals {
        per_atom,
        initial: g.expect(&d1)?,
        forward,
    })
}

fn assemble(pair: &TechnologyPair, g: &BreakthroughDist, pass: BackwardPass) -> Result<(Mechanism, f64), EulerError> {
    let mut grid = Vec::with_capacity(pass.times.len() + 1);
    let mut levels = Vec::with_capacity(pass.times.len() + 1);
    grid.push(0.0);
    levels.push(pair.u0);
    grid.extend(&pass.times);
    levels.extend(&pass.levels);
    let m = Mechanism::new(pair.r, grid, levels, Reward::Derived)?;
    let value = payoff(&m, pair, g)?.total_finite()?;
    Ok((m, value))
}

const PSI_SCAN: usize = 50;

pub fn solve(pair: &TechnologyPair, g: &BreakthroughDist) -> Result<EulerSolution, EulerError> {
    solve_with(pair, g, &SolveOptions::default())
}

pub fn solve_with(pair: &TechnologyPair, g: &BreakthroughDist, opts: &SolveOptions) -> Result<EulerSolution, EulerError> {
    require_simple(pair, opts.allow_boundary_u_star)?;
    check_support(g)?;
    let (lo, hi) = (pair.u_star, pair.u0);
    let psi_lo = psi(pair, g, lo)?;
    let psi_hi = psi(pair, g, hi)?;
    if psi_lo < 0.0 || psi_hi > 0.0 {
        return Err(EulerError::BracketFailure { psi_lo, psi_hi });
    }

    let grid = linspace(lo, hi, PSI_SCAN);
    let values: Vec<f64> = grid.iter().map(|&l| psi(pair, g, l)).collect::<Result<_, _>>()?;
    let psi_monotone = values.windows(2).all(|w| w[1] <= w[0] + 1e-12);

    let mut lambdas: Vec<f64> = Vec::new();
    for i in 0..grid.len() - 1 {
        let (a, b) = (grid[i], grid[i + 1]);
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            lambdas.push(a);
        } else if fb != 0.0 && (fa > 0.0) != (fb > 0.0) {
            let mut failure = None;
            let root = bisect_root(a, b, opts.lambda_tol, opts.psi_tol, |l| match psi(pair, g, l) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            });
            if let Some(e) = failure {
                return Err(e);
            }
            lambdas.extend(root);
        }
    }
    if values[grid.len() - 1] == 0.0 {
        lambdas.push(hi);
    }
    if lambdas.is_empty() {
        return Err(EulerError::BracketFailure { psi_lo, psi_hi });
    }

    let mut best: Option<(usize, f64, BackwardPass, Mechanism)> = None;
    let mut roots = Vec::with_capacity(lambdas.len());
    for (i, &l) in lambdas.iter().enumerate() {
        let pass = backward_pass(pair, g, l)?;
        let value_psi = psi_of(pair, g, &pass.rewards)?;
        let (m, value) = assemble(pair, g, pass.clone())?;
        roots.push(RootCandidate {
            lambda: l,
            psi: value_psi,
            payoff: value,
        });
        if best.as_ref().map_or(true, |b| value > b.1) {
            best = Some((i, value, pass, m));
        }
    }
    let (idx, value, pass, mechanism) = best.expect("at least one root");
    let residuals = residuals_of(pair, g, &pass.levels, &pass.rewards)?;
    Ok(EulerSolution {
        lambda_star: pass.lambda,
        psi_at_root: roots[idx].psi,
        times: pass.times,
        levels: pass.levels,
        rewards: pass.rewards,
        mechanism,
        residuals,
        payoff: value,
        roots,
        psi_monotone,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSolution {
    pub m: usize,
    pub solution: EulerSolution,
    pub half: Option<EulerSolution>,
    /// Sup-norm distance of `X` between the `m` and `m/2` solutions on
    /// `probe_times`.
    pub self_convergence_gap: Option<f64>,
    pub probe_times: Vec<f64>,
}

/// Probe grid used for self-convergence; depends on the family only.
pub fn probe_grid(family: &Family) -> Vec<f64> {
    linspace(0.0, family.quantile(0.95), 101)
}

pub fn solve_general(pair: &TechnologyPair, family: &Family, m: usize) -> Result<GeneralSolution, EulerError> {
    solve_general_with(pair, family, m, &SolveOptions::default())
}

pub fn solve_general_with(
    pair: &TechnologyPair,
    family: &Family,
    m: usize,
    opts: &SolveOptions,
) -> Result<GeneralSolution, EulerError> {
    if family.has_atom_at_zero() {
        return Err(EulerError::AtomAtZero(0.0));
    }
    let g = BreakthroughDist::discretize(family, m)?;
    let solution = solve_with(pair, &g, opts)?;
    let probe_times = probe_grid(family);
    let (half, gap) = if m >= 2 {
        let g_half = BreakthroughDist::discretize(family, m / 2)?;
        let half = solve_with(pair, &g_half, opts)?;
        let gap = probe_times.iter().fold(0.0f64, |acc, &t| {
            let d = solution.mechanism.continuation_value(t) - half.mechanism.continuation_value(t);
            acc.max(d.abs())
        });
        (Some(half), Some(gap))
    } else {
        (None, None)
    };
    Ok(GeneralSolution {
        m,
        solution,
        half,
        self_convergence_gap: gap,
        probe_times,
    })
}

pub const COMPARE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub t: f64,
    pub x: f64,
    pub x_dag: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeStatics {
    pub mlr: bool,
    pub fosd: bool,
    pub x_ge: bool,
    pub witness: Option<f64>,
    pub rows: Vec<CompareRow>,
}

/// Solves under `g` and `g_dag` and compares the continuation values.
pub fn comparative_statics_check(
    pair: &TechnologyPair,
    g: &BreakthroughDist,
    g_dag: &BreakthroughDist,
) -> Result<ComparativeStatics, EulerError> {
    if !g.same_support(g_dag) {
        return Err(EulerError::UnequalSupport);
    }
    let order = order_checks(g, g_dag);
    let sol = solve(pair, g)?;
    let sol_dag = solve(pair, g_dag)?;
    let mut times = vec![0.0];
    times.extend(g.times());
    times.extend(linspace(0.0, 1.5 * g.last_time(), 100));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let rows: Vec<CompareRow> = times
        .iter()
        .map(|&t| CompareRow {
            t,
            x: sol.mechanism.continuation_value(t),
            x_dag: sol_dag.mechanism.continuation_value(t),
        })
        .collect();
    let witness = rows.iter().find(|r| r.x < r.x_dag - COMPARE_TOL).map(|r| r.t);
    Ok(ComparativeStatics {
        mlr: order.mlr,
        fosd: order.fosd,
        x_ge: witness.is_none(),
        witness,
        rows,
    })
}

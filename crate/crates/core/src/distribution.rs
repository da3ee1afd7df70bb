//! Finite-support breakthrough-time distributions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::ordered_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("distribution has no positive mass")]
    EmptyDistribution,
    #[error("invalid atom ({time}, {mass}): times must be finite and >= 0, masses finite and >= 0")]
    InvalidAtom { time: f64, mass: f64 },
    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),
    #[error("no atom after t={0}: conditional expectation undefined")]
    ConditioningOnNull(f64),
    #[error("expected {expected} per-atom values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Atoms closer than this are merged onto the earlier time.
pub const TIME_SNAP: f64 = 1e-12;

/// Normalised distribution with strictly increasing atom times.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakthroughDist {
    atoms: Vec<(f64, f64)>,
}

impl BreakthroughDist {
    /// Sorts, merges equal (snapped) times and normalises.
    pub fn from_atoms(pairs: &[(f64, f64)]) -> Result<Self, DistributionError> {
        for &(time, mass) in pairs {
            if !(time.is_finite() && time >= 0.0 && mass.is_finite() && mass >= 0.0) {
                return Err(DistributionError::InvalidAtom { time, mass });
            }
        }
        let mut sorted: Vec<(f64, f64)> = pairs.iter().copied().filter(|p| p.1 > 0.0).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
        for (t, p) in sorted {
            match atoms.last_mut() {
                Some(last) if t - last.0 <= TIME_SNAP => last.1 += p,
                _ => atoms.push((t, p)),
            }
        }
        let total = ordered_sum(atoms.iter().map(|a| a.1));
        if atoms.is_empty() || !(total > 0.0) {
            return Err(DistributionError::EmptyDistribution);
        }
        for a in &mut atoms {
            a.1 /= total;
        }
        Ok(Self { atoms })
    }

    pub fn point(t: f64) -> Result<Self, DistributionError> {
        Self::from_atoms(&[(t, 1.0)])
    }

    /// `m` equal-mass atoms at the mid-quantiles `(i - 0.5) / m`.
    pub fn discretize(family: &Family, m: usize) -> Result<Self, DistributionError> {
        family.validate()?;
        if m == 0 {
            return Err(DistributionError::InvalidFamily("atom count must be >= 1".into()));
        }
        let mass = 1.0 / m as f64;
        let atoms: Vec<(f64, f64)> = (1..=m)
            .map(|i| (family.quantile((i as f64 - 0.5) / m as f64), mass))
            .collect();
        Self::from_atoms(&atoms)
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn times(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.0).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.1).collect()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `G(t)`: mass on `[0, t]`.
    pub fn cdf(&self, t: f64) -> f64 {
        ordered_sum(self.atoms.iter().filter(|a| a.0 <= t).map(|a| a.1)).min(1.0)
    }

    /// `G(t-)`: mass on `[0, t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        ordered_sum(self.atoms.iter().filter(|a| a.0 < t).map(|a| a.1)).min(1.0)
    }

    /// Mass strictly after `t`, summed directly rather than as `1 - G(t)`.
    pub fn survival(&self, t: f64) -> f64 {
        ordered_sum(self.atoms.iter().filter(|a| a.0 > t).map(|a| a.1))
    }

    /// `E(phi(tau) | tau > t)` for per-atom values `phi`.
    pub fn cond_expect(&self, t: f64, phi: &[f64]) -> Result<f64, DistributionError> {
        if phi.len() != self.atoms.len() {
            return Err(DistributionError::LengthMismatch {
                expected: self.atoms.len(),
                got: phi.len(),
            });
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, v) in self.atoms.iter().zip(phi) {
            if a.0 > t {
                num += a.1 * v;
                den += a.1;
            }
        }
        if den <= 0.0 {
            return Err(DistributionError::ConditioningOnNull(t));
        }
        Ok(num / den)
    }

    /// `E(phi(tau))`.
    pub fn expect(&self, phi: &[f64]) -> Result<f64, DistributionError> {
        if phi.len() != self.atoms.len() {
            return Err(DistributionError::LengthMismatch {
                expected: self.atoms.len(),
                got: phi.len(),
            });
        }
        Ok(ordered_sum(self.atoms.iter().zip(phi).map(|(a, v)| a.1 * v)))
    }

    pub fn same_support(&self, other: &Self) -> bool {
        self.atoms.len() == other.atoms.len()
            && self.atoms.iter().zip(&other.atoms).all(|(a, b)| a.0 == b.0)
    }
}

/// Parametric breakthrough-time family, discretised before use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Family {
    Exponential { rate: f64 },
    Weibull { shape: f64, scale: f64 },
    Point { t: f64 },
}

impl Family {
    fn validate(&self) -> Result<(), DistributionError> {
        let ok = match *self {
            Family::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Family::Weibull { shape, scale } => {
                shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()
            }
            Family::Point { t } => t >= 0.0 && t.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(DistributionError::InvalidFamily(format!("{self:?}")))
        }
    }

    /// Inverse CDF at `q` in `(0, 1)`.
    pub fn quantile(&self, q: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => -(-q).ln_1p() / rate,
            Family::Weibull { shape, scale } => scale * (-(-q).ln_1p()).powf(1.0 / shape),
            Family::Point { t } => t,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Family::Exponential { rate } => {
                if t < 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
            Family::Weibull { shape, scale } => {
                if t < 0.0 {
                    0.0
                } else {
                    -(-(t / scale).powf(shape)).exp_m1()
                }
            }
            Family::Point { t: at } => {
                if t >= at {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// True when the family puts mass at zero.
    pub fn has_atom_at_zero(&self) -> bool {
        matches!(*self, Family::Point { t } if t == 0.0)
    }
}

/// Result of the stochastic-order comparison of `G` against `G_dag`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    /// `G` first-order stochastically dominates `G_dag`.
    pub fosd: bool,
    /// `G` dominates `G_dag` in the likelihood-ratio order.
    pub mlr: bool,
    /// Why `mlr` is false when the comparison was not possible.
    pub mlr_reason: Option<String>,
}

const ORDER_TOL: f64 = 1e-12;

pub fn order_checks(g: &BreakthroughDist, g_dag: &BreakthroughDist) -> OrderReport {
    let mut times: Vec<f64> = g.times().into_iter().chain(g_dag.times()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let fosd = times
        .iter()
        .all(|&t| g.cdf(t) <= g_dag.cdf(t) + ORDER_TOL);

    let (mlr, mlr_reason) = if !g.same_support(g_dag) {
        (false, Some("supports differ".to_string()))
    } else {
        let ratios: Vec<f64> = g
            .atoms
            .iter()
            .zip(&g_dag.atoms)
            .map(|(a, b)| a.1 / b.1)
            .collect();
        let increasing = ratios
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - ORDER_TOL) - ORDER_TOL);
        (increasing, None)
    };
    OrderReport {
        fosd,
        mlr,
        mlr_reason,
    }
}

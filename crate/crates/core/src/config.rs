//! Run configuration: JSON schema, parsing and validation into solver
//! inputs. Everything here fails with [`ConfigError`] before any output is
//! written.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::distribution::{BreakthroughDist, Family};
use crate::frontier::{Frontier, FrontierError, TechnologyPair};
use crate::insurance::{build_frontiers, InsuranceError, UiPrimitives};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
}

pub const COMMANDS: [&str; 8] = [
    "analyze",
    "solve-deadline",
    "solve-euler",
    "verify",
    "compare-statics",
    "ui-schedule",
    "ui-sweep",
    "oracle",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    SolveDeadline,
    SolveEuler,
    Verify,
    CompareStatics,
    UiSchedule,
    UiSweep,
    Oracle,
}

impl Command {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        Ok(match name {
            "analyze" => Command::Analyze,
            "solve-deadline" => Command::SolveDeadline,
            "solve-euler" => Command::SolveEuler,
            "verify" => Command::Verify,
            "compare-statics" => Command::CompareStatics,
            "ui-schedule" => Command::UiSchedule,
            "ui-sweep" => Command::UiSweep,
            "oracle" => Command::Oracle,
            other => return Err(ConfigError::UnknownCommand(other.to_string())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::SolveDeadline => "solve-deadline",
            Command::SolveEuler => "solve-euler",
            Command::Verify => "verify",
            Command::CompareStatics => "compare-statics",
            Command::UiSchedule => "ui-schedule",
            Command::UiSweep => "ui-sweep",
            Command::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub root: f64,
    pub residual: f64,
    pub payoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            root: 1e-10,
            residual: 1e-8,
            payoff: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub root: Option<f64>,
    pub residual: Option<f64>,
    pub payoff: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FrontierSpec {
    Piecewise { points: Vec<[f64; 2]> },
    Quadratic { coeffs: [f64; 3], domain: [f64; 2] },
}

impl FrontierSpec {
    fn build(&self, label: &str) -> Result<Frontier, FrontierError> {
        match self {
            FrontierSpec::Piecewise { points } => {
                let pts: Vec<(f64, f64)> = points.iter().map(|p| (p[0], p[1])).collect();
                Frontier::piecewise(&pts)
            }
            FrontierSpec::Quadratic { coeffs, domain } => Frontier::quadratic(label, *coeffs, domain[0], domain[1]),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct InsuranceSpec {
    #[allow(dead_code)]
    kind: String,
    a: f64,
    b: f64,
    w: f64,
    shadow: f64,
}

#[derive(Debug, Clone)]
pub enum Technology {
    Pair { f0: FrontierSpec, f1: FrontierSpec },
    Insurance(UiPrimitives),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DistributionSpec {
    Atoms { atoms: Vec<[f64; 2]> },
    Family { family: Family, m: usize },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<BreakthroughDist, ConfigError> {
        let d = match self {
            DistributionSpec::Atoms { atoms } => {
                let pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a[0], a[1])).collect();
                BreakthroughDist::from_atoms(&pairs)
            }
            DistributionSpec::Family { family, m } => BreakthroughDist::discretize(family, *m),
        };
        d.map_err(|e| ConfigError::Invalid(format!("distribution: {e}")))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum DeadlineValue {
    At(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MechanismSpec {
    Deadline {
        deadline: DeadlineValue,
    },
    Steps {
        grid: Vec<f64>,
        levels: Vec<f64>,
        #[serde(default)]
        reward: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommandOptions {
    pub horizon: Option<usize>,
    pub x_grid: Option<Vec<f64>>,
    pub reward_grid: Option<Vec<f64>>,
    pub shadows: Option<Vec<f64>>,
    /// For `ui-schedule`: "deadline" (default) or "euler".
    pub schedule_of: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Option<String>,
    technology: Value,
    r: Option<f64>,
    distribution: Option<DistributionSpec>,
    distribution_dag: Option<DistributionSpec>,
    mechanism: Option<MechanismSpec>,
    #[serde(default)]
    options: CommandOptions,
    #[serde(default)]
    tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub technology: Technology,
    pub r: f64,
    pub distribution: Option<DistributionSpec>,
    pub distribution_dag: Option<DistributionSpec>,
    pub mechanism: Option<MechanismSpec>,
    pub options: CommandOptions,
    pub tolerances: Tolerances,
}

/// Values given on the command line; they override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<String>,
    pub tol_root: Option<f64>,
    pub tol_residual: Option<f64>,
    pub tol_payoff: Option<f64>,
    pub horizon: Option<usize>,
    pub x_grid: Option<Vec<f64>>,
    pub reward_grid: Option<Vec<f64>>,
}

fn positive(name: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path, overrides: &Overrides) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, overrides)
    }

    pub fn from_json(text: &str, overrides: &Overrides) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;

        let command = match (&overrides.command, &raw.command) {
            (Some(a), Some(b)) if a != b => {
                return Err(ConfigError::Invalid(format!(
                    "command `{a}` on the command line conflicts with `{b}` in the config"
                )))
            }
            (Some(a), _) => Command::parse(a)?,
            (None, Some(b)) => Command::parse(b)?,
            (None, None) => return Err(ConfigError::Invalid("no command given".into())),
        };

        let r = positive("r", raw.r.unwrap_or(1.0))?;
        let technology = parse_technology(&raw.technology, r)?;

        let base = Tolerances::default();
        let tolerances = Tolerances {
            root: positive("tolerances.root", overrides.tol_root.or(raw.tolerances.root).unwrap_or(base.root))?,
            residual: positive(
                "tolerances.residual",
                overrides.tol_residual.or(raw.tolerances.residual).unwrap_or(base.residual),
            )?,
            payoff: positive(
                "tolerances.payoff",
                overrides.tol_payoff.or(raw.tolerances.payoff).unwrap_or(base.payoff),
            )?,
        };

        let mut options = raw.options;
        if overrides.horizon.is_some() {
            options.horizon = overrides.horizon;
        }
        if overrides.x_grid.is_some() {
            options.x_grid = overrides.x_grid.clone();
        }
        if overrides.reward_grid.is_some() {
            options.reward_grid = overrides.reward_grid.clone();
        }

        let cfg = Self {
            command,
            technology,
            r,
            distribution: raw.distribution,
            distribution_dag: raw.distribution_dag,
            mechanism: raw.mechanism,
            options,
            tolerances,
        };
        cfg.check_requirements()?;
        Ok(cfg)
    }

    fn check_requirements(&self) -> Result<(), ConfigError> {
        let need = |what: &str| Err(ConfigError::Invalid(format!("`{}` requires `{what}`", self.command.name())));
        let insurance = matches!(self.technology, Technology::Insurance(_));
        match self.command {
            Command::SolveDeadline | Command::SolveEuler | Command::UiSweep if self.distribution.is_none() => {
                return need("distribution")
            }
            Command::CompareStatics if self.distribution.is_none() || self.distribution_dag.is_none() => {
                return need("distribution and distribution_dag")
            }
            Command::Verify if self.mechanism.is_none() => return need("mechanism"),
            Command::UiSchedule | Command::UiSweep if !insurance => {
                return need("an insurance technology")
            }
            Command::UiSchedule if self.mechanism.is_none() && self.distribution.is_none() => {
                return need("mechanism or distribution")
            }
            _ => {}
        }
        if let Some(d) = &self.distribution {
            d.build()?;
        }
        if let Some(d) = &self.distribution_dag {
            d.build()?;
        }
        if let Some(h) = self.options.horizon {
            if h == 0 {
                return Err(ConfigError::Invalid("horizon must be at least 1".into()));
            }
        }
        for (name, grid) in [("x_grid", &self.options.x_grid), ("reward_grid", &self.options.reward_grid)] {
            if let Some(g) = grid {
                if g.is_empty() || g.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(ConfigError::Invalid(format!("{name} must be non-empty and non-negative")));
                }
            }
        }
        if let Some(s) = &self.options.schedule_of {
            if s != "deadline" && s != "euler" {
                return Err(ConfigError::Invalid(format!("schedule_of must be deadline or euler, got {s}")));
            }
        }
        if let Some(MechanismSpec::Deadline {
            deadline: DeadlineValue::Named(n),
        }) = &self.mechanism
        {
            if n != "never" {
                return Err(ConfigError::Invalid(format!("deadline must be a number or \"never\", got {n}")));
            }
        }
        Ok(())
    }

    /// Builds the technology pair. Frontier shape problems surface here as
    /// [`BuildError::Model`]; malformed literals as [`BuildError::Config`].
    pub fn pair(&self) -> Result<TechnologyPair, BuildError> {
        match &self.technology {
            Technology::Pair { f0, f1 } => {
                let f0 = f0.build("f0").map_err(BuildError::from_frontier)?;
                let f1 = f1.build("f1").map_err(BuildError::from_frontier)?;
                TechnologyPair::new(f0, f1, self.r).map_err(BuildError::from_frontier)
            }
            Technology::Insurance(p) => build_frontiers(p).map_err(|e| match e {
                InsuranceError::InvalidPrimitives(m) => BuildError::Config(m),
                InsuranceError::Frontier(f) => BuildError::from_frontier(f),
                other => BuildError::Solver(other.to_string()),
            }),
        }
    }

    pub fn primitives(&self) -> Option<UiPrimitives> {
        match self.technology {
            Technology::Insurance(p) => Some(p),
            Technology::Pair { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Solver(String),
}

impl BuildError {
    fn from_frontier(e: FrontierError) -> Self {
        match e {
            FrontierError::InvalidFrontier(m) => BuildError::Config(m),
            FrontierError::InvalidRate(r) => BuildError::Config(format!("discount rate {r}")),
            other => BuildError::Model(other.to_string()),
        }
    }
}

/// Builds a pair from `{"technology": {...}, "r": 1.0}` or a bare technology object.
pub fn pair_from_json(text: &str) -> Result<(TechnologyPair, Option<UiPrimitives>), BuildError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BuildError::Config(e.to_string()))?;
    let (tech, r) = match v.get("technology") {
        Some(t) => (t, v.get("r").map_or(Some(1.0), Value::as_f64)),
        None => (&v, Some(1.0)),
    };
    let r = r.ok_or_else(|| BuildError::Config("r must be a number".into()))?;
    let r = positive("r", r).map_err(|e| BuildError::Config(e.to_string()))?;
    let technology = parse_technology(tech, r).map_err(|e| BuildError::Config(e.to_string()))?;
    let cfg = RunConfig {
        command: Command::Analyze,
        technology,
        r,
        distribution: None,
        distribution_dag: None,
        mechanism: None,
        options: CommandOptions::default(),
        tolerances: Tolerances::default(),
    };
    Ok((cfg.pair()?, cfg.primitives()))
}

/// Builds a distribution from `{"atoms": [[t, p], ...]}` or `{"family": {...}, "m": n}`.
pub fn distribution_from_json(text: &str) -> Result<BreakthroughDist, ConfigError> {
    let spec: DistributionSpec = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    spec.build()
}

fn parse_technology(v: &Value, r: f64) -> Result<Technology, ConfigError> {
    let kind = v.get("kind").and_then(Value::as_str);
    match kind {
        Some("insurance") => {
            let spec: InsuranceSpec =
                serde_json::from_value(v.clone()).map_err(|e| ConfigError::Parse(format!("technology: {e}")))?;
            let p = UiPrimitives {
                a: spec.a,
                b: spec.b,
                w: spec.w,
                shadow: spec.shadow,
                r,
            };
            p.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
            Ok(Technology::Insurance(p))
        }
        Some(other) => Err(ConfigError::Invalid(format!("unknown technology kind `{other}`"))),
        None => {
            #[derive(Deserialize)]
            #[serde(deny_unknown_fields)]
            struct PairSpec {
                f0: FrontierSpec,
                f1: FrontierSpec,
            }
            let spec: PairSpec =
                serde_json::from_value(v.clone()).map_err(|e| ConfigError::Parse(format!("technology: {e}")))?;
            // catch malformed literals now; shape failures wait for the run
            for (name, f) in [("f0", &spec.f0), ("f1", &spec.f1)] {
                if let Err(FrontierError::InvalidFrontier(m)) = f.build(name) {
                    return Err(ConfigError::Invalid(format!("{name}: {m}")));
                }
            }
            Ok(Technology::Pair {
                f0: spec.f0,
                f1: spec.f1,
            })
        }
    }
}

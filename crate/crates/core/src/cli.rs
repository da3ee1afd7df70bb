//! Command dispatch for the `disclosure` binary.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

use crate::config::{
    Command, ConfigError, DeadlineValue, DistributionSpec, MechanismSpec, Overrides, RunConfig, COMMANDS,
};
use crate::deadline::{deadline_payoff, optimize_deadline, t_underline, Deadline, DeadlineError, DeadlineSpec};
use crate::distribution::{order_checks, BreakthroughDist};
use crate::euler::{
    comparative_statics_check, simple_gate, solve_general_with, solve_with, EulerError, EulerSolution, SolveOptions,
};
use crate::frontier::{validate_model, TechnologyPair};
use crate::insurance::{schedule, welfare_sweep, InsuranceError, UiPrimitives};
use crate::mechanism::{front_load, ic_check, payoff, Mechanism, MechanismError, Reward, AFFINE_TOL};
use crate::numeric::linspace;
use crate::oracle::{point_mass_family, undominated_scan, Breakthrough, ENUMERATION_BUDGET};
use crate::report::{
    deadline_json, foc_json, ic_json, mechanism_table, model_report_json, num, nums, opt_num, sample_times,
    ExitStatus, Outputs, Table,
};

#[derive(Debug, Parser)]
#[command(
    name = "disclosure",
    version,
    about = "Solve and verify optimal disclosure-incentive mechanisms",
    after_help = "Commands: analyze, solve-deadline, solve-euler, verify, compare-statics, ui-schedule, ui-sweep, oracle"
)]
pub struct Cli {
    /// Command to run; may instead be given as "command" in the config.
    pub command: Option<String>,
    /// Path to the JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub tol_root: Option<f64>,
    #[arg(long)]
    pub tol_residual: Option<f64>,
    #[arg(long)]
    pub tol_payoff: Option<f64>,
    /// Oracle horizon in periods.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Comma-separated oracle flow grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x_grid: Option<Vec<f64>>,
    /// Comma-separated oracle reward grid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub reward_grid: Option<Vec<f64>>,
}

fn usage() -> String {
    format!(
        "usage: disclosure <COMMAND> --config PATH [--out DIR] [--tol-root X] [--tol-residual X]\ncommands: {}",
        COMMANDS.join(", ")
    )
}

/// Parses arguments, runs and writes outputs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => ExitStatus::Config.code(),
            };
            let _ = e.print();
            return code;
        }
    };
    if let Some(c) = &cli.command {
        if Command::parse(c).is_err() {
            eprintln!("unknown command `{c}`\n{}", usage());
            return ExitStatus::Config.code();
        }
    }
    let overrides = Overrides {
        command: cli.command.clone(),
        tol_root: cli.tol_root,
        tol_residual: cli.tol_residual,
        tol_payoff: cli.tol_payoff,
        horizon: cli.horizon,
        x_grid: cli.x_grid.clone(),
        reward_grid: cli.reward_grid.clone(),
    };
    let cfg = match RunConfig::from_path(&cli.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, ConfigError::UnknownCommand(_)) {
                eprintln!("{}", usage());
            }
            return ExitStatus::Config.code();
        }
    };
    let outputs = match run(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitStatus::Config.code();
        }
    };
    match outputs.write(&cli.out) {
        Ok(files) => {
            println!(
                "{}: {} -> {} ({})",
                cfg.command.name(),
                outputs.status.label(),
                cli.out.display(),
                files.join(", ")
            );
            if let Some(Value::String(msg)) = outputs.report.get("error") {
                eprintln!("error: {msg}");
            }
            outputs.status.code()
        }
        Err(e) => {
            eprintln!("error: cannot write outputs: {e}");
            ExitStatus::Solver.code()
        }
    }
}

/// Runs one configured command. `Err` means the configuration was unusable
/// and nothing should be written.
pub fn run(cfg: &RunConfig) -> Result<Outputs, ConfigError> {
    let mut out = Outputs::new(cfg.command.name(), &cfg.tolerances);
    let pair = match cfg.pair() {
        Ok(p) => p,
        Err(crate::config::BuildError::Config(m)) => return Err(ConfigError::Invalid(m)),
        Err(crate::config::BuildError::Model(m)) => {
            fail(&mut out, ExitStatus::Model, m);
            return Ok(out);
        }
        Err(crate::config::BuildError::Solver(m)) => {
            fail(&mut out, ExitStatus::Solver, m);
            return Ok(out);
        }
    };
    let model = validate_model(&pair);
    out.set("model_checks", model_report_json(&model));
    if !model.all_passed() {
        out.status = ExitStatus::Model;
        let failed: Vec<&str> = model.failures().map(|c| c.name).collect();
        out.set("error", json!(format!("model assumptions failed: {}", failed.join(", "))));
        if cfg.command != Command::Analyze {
            return Ok(out);
        }
    }
    let g = cfg.distribution.as_ref().map(DistributionSpec::build).transpose()?;
    let g_dag = cfg.distribution_dag.as_ref().map(DistributionSpec::build).transpose()?;

    let result = match cfg.command {
        Command::Analyze => analyze(cfg, &pair, g.as_ref(), g_dag.as_ref(), &mut out),
        Command::SolveDeadline => solve_deadline(cfg, &pair, req(&g), &mut out),
        Command::SolveEuler => solve_euler(cfg, &pair, req(&g), &mut out),
        Command::Verify => verify(cfg, &pair, g.as_ref(), &mut out),
        Command::CompareStatics => compare_statics(cfg, &pair, req(&g), req(&g_dag), &mut out),
        Command::UiSchedule => ui_schedule(cfg, &pair, g.as_ref(), &mut out),
        Command::UiSweep => ui_sweep(cfg, req(&g), &mut out),
        Command::Oracle => oracle(cfg, &pair, &mut out),
    };
    match result {
        Ok(()) => Ok(out),
        Err(Failure::Config(m)) => Err(ConfigError::Invalid(m)),
        Err(Failure::Status(status, m)) => {
            fail(&mut out, status, m);
            Ok(out)
        }
    }
}

fn req(g: &Option<BreakthroughDist>) -> &BreakthroughDist {
    g.as_ref().expect("checked by RunConfig")
}

fn fail(out: &mut Outputs, status: ExitStatus, message: String) {
    out.status = status;
    out.set("error", json!(message));
}

enum Failure {
    Config(String),
    Status(ExitStatus, String),
}

impl From<DeadlineError> for Failure {
    fn from(e: DeadlineError) -> Self {
        match e {
            DeadlineError::NoConflict { .. } => Failure::Status(ExitStatus::Model, e.to_string()),
            other => Failure::Status(ExitStatus::Solver, other.to_string()),
        }
    }
}

impl From<EulerError> for Failure {
    fn from(e: EulerError) -> Self {
        match e {
            EulerError::NotSimple { .. } | EulerError::AtomAtZero(_) | EulerError::UnequalSupport => {
                Failure::Status(ExitStatus::Model, e.to_string())
            }
            other => Failure::Status(ExitStatus::Solver, other.to_string()),
        }
    }
}

impl From<MechanismError> for Failure {
    fn from(e: MechanismError) -> Self {
        match e {
            MechanismError::Invalid(m) => Failure::Config(format!("mechanism: {m}")),
            other => Failure::Status(ExitStatus::Solver, other.to_string()),
        }
    }
}

impl From<InsuranceError> for Failure {
    fn from(e: InsuranceError) -> Self {
        match e {
            InsuranceError::InvalidPrimitives(m) => Failure::Config(m),
            InsuranceError::Deadline(d) => d.into(),
            InsuranceError::Euler(d) => d.into(),
            other => Failure::Status(ExitStatus::Solver, other.to_string()),
        }
    }
}

impl From<crate::frontier::FrontierError> for Failure {
    fn from(e: crate::frontier::FrontierError) -> Self {
        Failure::Status(ExitStatus::Solver, e.to_string())
    }
}

type Step = Result<(), Failure>;

fn euler_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        psi_tol: cfg.tolerances.root,
        allow_boundary_u_star: cfg.primitives().is_some(),
        ..SolveOptions::default()
    }
}

fn analyze(
    cfg: &RunConfig,
    pair: &TechnologyPair,
    g: Option<&BreakthroughDist>,
    g_dag: Option<&BreakthroughDist>,
    out: &mut Outputs,
) -> Step {
    out.set("u0", num(pair.u0));
    out.set("u1", num(pair.u1));
    out.set("u_star", num(pair.u_star));
    out.set("r", num(pair.r));
    out.set("alpha", num(pair.alpha()?));
    let gap = pair.affine_gap()?;
    out.set("affine_gap", num(gap));
    out.set("f0_affine", json!(gap <= AFFINE_TOL));
    out.set("t_underline", t_underline(pair).map_or(Value::Null, num));
    let gate = simple_gate(pair, cfg.primitives().is_some());
    out.set(
        "euler_gate",
        json!({ "passed": gate.all_passed(), "checks": model_report_json(&gate) }),
    );
    if let Some(g) = g {
        out.set("distribution", dist_json(g));
        if let Some(d) = g_dag {
            let o = order_checks(g, d);
            out.set(
                "order",
                json!({ "fosd": o.fosd, "mlr": o.mlr, "mlr_reason": o.mlr_reason }),
            );
        }
    }
    if let Some(p) = cfg.primitives() {
        out.set("insurance", primitives_json(&p));
    }
    Ok(())
}

fn dist_json(g: &BreakthroughDist) -> Value {
    json!({
        "times": nums(&g.times()),
        "masses": nums(&g.masses()),
    })
}

fn primitives_json(p: &UiPrimitives) -> Value {
    json!({
        "a": p.a,
        "b": p.b,
        "w": p.w,
        "shadow": p.shadow,
        "c0": num(p.c0()),
        "u0": num(p.u0()),
        "eps_linear": num(p.eps_linear()),
    })
}

fn add_mechanism_table(cfg: &RunConfig, m: &Mechanism, atoms: &[f64], out: &mut Outputs) -> Step {
    match cfg.primitives() {
        Some(p) => out.tables.push(schedule_table(&p, m, atoms)?),
        None => out.tables.push(mechanism_table(m, atoms)),
    }
    Ok(())
}

fn schedule_table(p: &UiPrimitives, m: &Mechanism, atoms: &[f64]) -> Result<Table, Failure> {
    let rows = schedule(p, m, &sample_times(m, atoms))?;
    let mut t = Table::new("mechanism.csv", &["t", "x", "X", "b", "C", "L", "theta"]);
    for r in rows {
        t.push_f64(&[r.t, r.x, r.value, r.benefit, r.consumption, r.labour, r.tax]);
    }
    Ok(t)
}

fn solve_deadline(cfg: &RunConfig, pair: &TechnologyPair, g: &BreakthroughDist, out: &mut Outputs) -> Step {
    let sol = optimize_deadline(pair, g, cfg.tolerances.payoff)?;
    out.set("t_star", deadline_json(sol.t_star));
    out.set("t_underline", num(sol.t_underline));
    out.set("pi", num(sol.pi));
    out.set("foc", foc_json(&sol.foc));
    out.set("candidates", nums(&sol.candidates));
    out.set("best_in_class_only", json!(sol.best_in_class_only));
    out.set("anomaly", sol.anomaly.clone().map_or(Value::Null, Value::String));
    out.set("distribution", dist_json(g));
    let m = DeadlineSpec::new(sol.t_star, pair).mechanism()?;
    add_mechanism_table(cfg, &m, &g.times(), out)
}

fn euler_json(sol: &EulerSolution) -> Value {
    json!({
        "lambda_star": num(sol.lambda_star),
        "times": nums(&sol.times),
        "levels": nums(&sol.levels),
        "rewards": nums(&sol.rewards),
        "psi_at_root": num(sol.psi_at_root),
        "payoff": num(sol.payoff),
        "x0": num(sol.x0()),
        "psi_monotone": sol.psi_monotone,
        "roots": sol.roots.iter().map(|r| json!({
            "lambda": num(r.lambda),
            "psi": num(r.psi),
            "payoff": num(r.payoff),
        })).collect::<Vec<_>>(),
        "residual_max": num(sol.residuals.max_abs()),
        "initial_residual": num(sol.residuals.initial),
    })
}

fn residuals_table(sol: &EulerSolution, g: &BreakthroughDist) -> Table {
    let mut t = Table::new("residuals.csv", &["k", "t", "mass", "u", "X", "residual", "forward_residual"]);
    for (k, &(time, mass)) in g.atoms().iter().enumerate() {
        t.push(vec![
            (k + 1).to_string(),
            crate::report::fmt_f64(time),
            crate::report::fmt_f64(mass),
            crate::report::fmt_f64(sol.levels[k]),
            crate::report::fmt_f64(sol.rewards[k]),
            crate::report::fmt_f64(sol.residuals.per_atom[k]),
            sol.residuals.forward[k].map_or(String::new(), crate::report::fmt_f64),
        ]);
    }
    t
}

fn solve_euler(cfg: &RunConfig, pair: &TechnologyPair, g: &BreakthroughDist, out: &mut Outputs) -> Step {
    let opts = euler_options(cfg);
    let gate = simple_gate(pair, opts.allow_boundary_u_star);
    out.set("euler_gate", model_report_json(&gate));
    if !gate.all_passed() {
        return Err(Failure::Status(
            ExitStatus::Model,
            "pair is not simple; use solve-deadline for kinked or affine frontiers".into(),
        ));
    }
    let (sol, g_used) = match cfg.distribution.as_ref() {
        Some(DistributionSpec::Family { family, m }) => {
            let gen = solve_general_with(pair, family, *m, &opts)?;
            out.set("m", json!(gen.m));
            out.set("self_convergence_gap", opt_num(gen.self_convergence_gap));
            (gen.solution, g.clone())
        }
        _ => (solve_with(pair, g, &opts)?, g.clone()),
    };
    out.set("solution", euler_json(&sol));
    out.set("x0_above_u1", json!(sol.x0() > pair.u1));
    let ok = sol.residuals.max_abs() <= cfg.tolerances.residual;
    out.set("residuals_ok", json!(ok));
    out.set("distribution", dist_json(&g_used));
    out.tables.push(residuals_table(&sol, &g_used));
    add_mechanism_table(cfg, &sol.mechanism, &g_used.times(), out)?;
    if !ok {
        return Err(Failure::Status(
            ExitStatus::Solver,
            format!(
                "Euler residual {} exceeds tolerance {}",
                sol.residuals.max_abs(),
                cfg.tolerances.residual
            ),
        ));
    }
    Ok(())
}

fn config_mechanism(cfg: &RunConfig, pair: &TechnologyPair) -> Result<Option<Mechanism>, Failure> {
    let Some(spec) = &cfg.mechanism else {
        return Ok(None);
    };
    let m = match spec {
        MechanismSpec::Deadline { deadline } => {
            let d = match deadline {
                DeadlineValue::At(t) if *t >= 0.0 => Deadline::At(*t),
                DeadlineValue::At(t) => return Err(Failure::Config(format!("negative deadline {t}"))),
                DeadlineValue::Named(_) => Deadline::Never,
            };
            DeadlineSpec::new(d, pair).mechanism()?
        }
        MechanismSpec::Steps { grid, levels, reward } => Mechanism::new(
            pair.r,
            grid.clone(),
            levels.clone(),
            reward.clone().map_or(Reward::Derived, Reward::Explicit),
        )?,
    };
    Ok(Some(m))
}

/// Deadline of a mechanism already known to be in deadline form.
fn deadline_of(m: &Mechanism, pair: &TechnologyPair) -> Deadline {
    let tol = 1e-12;
    match m.levels().iter().position(|&x| (x - pair.u_star).abs() <= tol) {
        Some(i) => Deadline::At(m.grid()[i]),
        None => Deadline::Never,
    }
}

fn verify(cfg: &RunConfig, pair: &TechnologyPair, g: Option<&BreakthroughDist>, out: &mut Outputs) -> Step {
    let m = config_mechanism(cfg, pair)?.expect("checked by RunConfig");
    let ic = ic_check(&m);
    out.set("ic", json!(ic.ic));
    out.set("ic_report", ic_json(&ic));
    let tol = cfg.tolerances.payoff;
    let indifferent = match m.reward() {
        Reward::Derived => true,
        Reward::Explicit(rw) => rw
            .iter()
            .zip(m.grid_values())
            .all(|(a, b)| (a - b).abs() <= tol),
    };
    let deadline_form = m.is_deadline_form(pair.u0, pair.u_star, 1e-12);
    out.set("deadline_form", json!(deadline_form));
    let t_low = t_underline(pair)?;
    out.set("t_underline", num(t_low));
    let affine = pair.affine_gap()? <= AFFINE_TOL;
    let class = if !ic.ic {
        "not incentive compatible".to_string()
    } else if !indifferent {
        "dominated: disclosure reward exceeds continuation value".to_string()
    } else if deadline_form {
        let d = deadline_of(&m, pair);
        out.set("deadline", deadline_json(d));
        match d {
            Deadline::At(t) if t < t_low - tol => "dominated: deadline before T_underline".to_string(),
            _ => "deadline, T ≥ T_underline".to_string(),
        }
    } else if affine {
        "dominated by its front-loaded deadline".to_string()
    } else {
        "not a deadline mechanism; f0 is not affine".to_string()
    };
    out.set("undominated_class", json!(class));

    if m.levels().iter().all(|&x| x <= pair.u0 + 1e-12) {
        let fl = front_load(&m, pair)?;
        out.set(
            "front_loaded",
            json!({ "deadline": deadline_json(fl.spec.deadline), "not_affine": fl.not_affine }),
        );
        if let Some(g) = g {
            let before = payoff(&m, pair, g)?.total_finite()?;
            let after = deadline_payoff(pair, g, fl.spec.deadline)?;
            out.set("payoff", num(before));
            out.set("front_loaded_payoff", num(after));
        }
    } else if let Some(g) = g {
        out.set("payoff", num(payoff(&m, pair, g)?.total_finite()?));
    }
    add_mechanism_table(cfg, &m, &g.map(|g| g.times()).unwrap_or_default(), out)
}

fn compare_statics(
    cfg: &RunConfig,
    pair: &TechnologyPair,
    g: &BreakthroughDist,
    g_dag: &BreakthroughDist,
    out: &mut Outputs,
) -> Step {
    let order = order_checks(g, g_dag);
    out.set("fosd", json!(order.fosd));
    out.set("mlr", json!(order.mlr));
    let gate = simple_gate(pair, cfg.primitives().is_some());
    let mut table = Table::new("compare.csv", &["t", "X", "X_dag"]);
    if gate.all_passed() {
        out.set("path", json!("euler"));
        let cs = comparative_statics_check(pair, g, g_dag)?;
        out.set("x_ge", json!(cs.x_ge));
        out.set("witness", opt_num(cs.witness));
        for r in &cs.rows {
            table.push_f64(&[r.t, r.x, r.x_dag]);
        }
    } else {
        out.set("path", json!("deadline"));
        let a = optimize_deadline(pair, g, cfg.tolerances.payoff)?;
        let b = optimize_deadline(pair, g_dag, cfg.tolerances.payoff)?;
        out.set("t_star", deadline_json(a.t_star));
        out.set("t_star_dag", deadline_json(b.t_star));
        let ge = match (a.t_star, b.t_star) {
            (Deadline::Never, _) => true,
            (Deadline::At(_), Deadline::Never) => false,
            (Deadline::At(x), Deadline::At(y)) => x >= y - cfg.tolerances.payoff,
        };
        out.set("t_ge", json!(ge));
        let sa = DeadlineSpec::new(a.t_star, pair);
        let sb = DeadlineSpec::new(b.t_star, pair);
        let end = 1.5 * g.last_time().max(g_dag.last_time()) + 1.0;
        for t in linspace(0.0, end, 101) {
            table.push_f64(&[t, sa.reward_at(t), sb.reward_at(t)]);
        }
    }
    out.tables.push(table);
    Ok(())
}

fn ui_schedule(cfg: &RunConfig, pair: &TechnologyPair, g: Option<&BreakthroughDist>, out: &mut Outputs) -> Step {
    let p = cfg.primitives().expect("checked by RunConfig");
    out.set("insurance", primitives_json(&p));
    let (m, source) = match config_mechanism(cfg, pair)? {
        Some(m) => (m, "config"),
        None => {
            let g = g.expect("checked by RunConfig");
            if cfg.options.schedule_of.as_deref() == Some("euler") {
                let sol = solve_with(pair, g, &euler_options(cfg))?;
                out.set("lambda_star", num(sol.lambda_star));
                (sol.mechanism, "euler")
            } else {
                let sol = optimize_deadline(pair, g, cfg.tolerances.payoff)?;
                out.set("t_star", deadline_json(sol.t_star));
                (DeadlineSpec::new(sol.t_star, pair).mechanism()?, "deadline")
            }
        }
    };
    out.set("source", json!(source));
    let atoms = g.map(|g| g.times()).unwrap_or_default();
    let rows = schedule(&p, &m, &sample_times(&m, &atoms))?;
    let identity = rows.iter().fold(0.0f64, |acc, r| {
        acc.max((r.consumption.powf(p.a) - r.labour.powf(p.b) - r.value).abs())
    });
    out.set("identity_max_error", num(identity));
    out.set("rows", json!(rows.len()));
    add_mechanism_table(cfg, &m, &atoms, out)
}

fn ui_sweep(cfg: &RunConfig, g: &BreakthroughDist, out: &mut Outputs) -> Step {
    let p = cfg.primitives().expect("checked by RunConfig");
    let shadows = cfg.options.shadows.clone().unwrap_or_else(|| vec![0.5, 0.2, 0.1, 0.05]);
    let rows = welfare_sweep(&p, &shadows, g, cfg.tolerances.payoff)?;
    let mut table = Table::new(
        "welfare.csv",
        &["shadow", "pi_deadline", "pi_star", "ratio", "eps_linear", "affine_gap", "gap_ok"],
    );
    for r in &rows {
        table.push(vec![
            crate::report::fmt_f64(r.shadow),
            crate::report::fmt_f64(r.pi_deadline),
            crate::report::fmt_f64(r.pi_star),
            crate::report::fmt_f64(r.ratio),
            crate::report::fmt_f64(r.eps_linear),
            crate::report::fmt_f64(r.affine_gap),
            r.gap_ok.to_string(),
        ]);
    }
    out.tables.push(table);
    out.set(
        "rows",
        Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "shadow": num(r.shadow),
                        "pi_deadline": num(r.pi_deadline),
                        "pi_star": num(r.pi_star),
                        "ratio": num(r.ratio),
                        "eps_linear": num(r.eps_linear),
                        "affine_gap": num(r.affine_gap),
                        "gap_ok": r.gap_ok,
                    })
                })
                .collect(),
        ),
    );
    out.set("all_gaps_ok", json!(rows.iter().all(|r| r.gap_ok)));
    out.set("ratio_increasing", json!(rows.windows(2).all(|w| w[1].ratio > w[0].ratio)));
    out.set("distribution", dist_json(g));
    Ok(())
}

fn oracle(cfg: &RunConfig, pair: &TechnologyPair, out: &mut Outputs) -> Step {
    let horizon = cfg.options.horizon.unwrap_or(2);
    let rewards = cfg
        .options
        .reward_grid
        .clone()
        .unwrap_or_else(|| linspace(pair.u_star, pair.u0, 9));
    let xs = cfg.options.x_grid.clone().unwrap_or_else(|| rewards.clone());
    let total = (xs.len() as f64).powi(horizon as i32) * (rewards.len() as f64).powi(horizon as i32);
    if total > ENUMERATION_BUDGET as f64 {
        return Err(Failure::Config(format!(
            "oracle enumeration of {total} mechanisms exceeds the budget of {ENUMERATION_BUDGET}"
        )));
    }
    let family = point_mass_family(horizon);
    let rep = undominated_scan(pair, horizon, &xs, &rewards, &family)
        .map_err(|e| Failure::Status(ExitStatus::Solver, e.to_string()))?;
    let mut sorted = rewards.clone();
    sorted.sort_by(f64::total_cmp);
    let step = sorted.windows(2).fold(0.0f64, |a, w| a.max(w[1] - w[0]));
    out.set("horizon", json!(horizon));
    out.set("x_grid", nums(&xs));
    out.set("reward_grid", nums(&rewards));
    out.set("enumerated", json!(rep.enumerated as u64));
    out.set("incentive_compatible", json!(rep.incentive_compatible));
    out.set("undominated", json!(rep.undominated.len()));
    out.set("indifference", num(rep.indifference));
    out.set("reward_grid_step", num(step));
    out.set("indifference_within_step", json!(rep.indifference <= step + 1e-12));

    let mut header: Vec<String> = Vec::new();
    for prefix in ["x", "X1", "X0"] {
        header.extend((0..horizon).map(|s| format!("{prefix}_{s}")));
    }
    header.push("max_gap".into());
    header.extend(family.iter().map(|b| match b {
        Breakthrough::At(t) => format!("payoff_at_{t}"),
        Breakthrough::Never => "payoff_never".into(),
    }));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new("undominated.csv", &header_refs);
    for e in &rep.undominated {
        let mut row: Vec<f64> = Vec::new();
        row.extend(&e.x);
        row.extend(&e.x1);
        row.extend(&e.x0);
        row.push(e.max_gap);
        row.extend(&e.payoffs);
        table.push_f64(&row);
    }
    out.tables.push(table);
    Ok(())
}

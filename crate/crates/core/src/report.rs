//! Machine-readable outputs: `report.json` with sorted keys and CSV tables.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::config::Tolerances;
use crate::deadline::{Deadline, FocReport};
use crate::frontier::ModelReport;
use crate::mechanism::{IcReport, Mechanism};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Config = 1,
    Model = 2,
    Solver = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn label(self) -> &'static str {
        match self {
            ExitStatus::Ok => "ok",
            ExitStatus::Config => "config_error",
            ExitStatus::Model => "model_assumption_failure",
            ExitStatus::Solver => "solver_error",
        }
    }
}

/// A CSV table held in memory until every output is ready.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|v| fmt_f64(*v)).collect());
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Finite floats as numbers, the rest as strings (JSON has no infinities).
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(fmt_f64(v))
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub status: ExitStatus,
    pub report: Map<String, Value>,
    pub tables: Vec<Table>,
}

impl Outputs {
    pub fn new(command: &str, tolerances: &Tolerances) -> Self {
        let mut report = Map::new();
        report.insert("command".into(), json!(command));
        report.insert(
            "tolerances".into(),
            json!({
                "payoff": tolerances.payoff,
                "residual": tolerances.residual,
                "root": tolerances.root,
            }),
        );
        Self {
            status: ExitStatus::Ok,
            report,
            tables: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.report.insert(key.to_string(), value);
    }

    pub fn render_report(&self) -> String {
        let mut report = self.report.clone();
        report.insert("status".into(), json!(self.status.label()));
        let mut s = serde_json::to_string_pretty(&Value::Object(report)).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes every output after rendering all of them.
    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<String>> {
        let mut files = vec![("report.json".to_string(), self.render_report())];
        for t in &self.tables {
            let body = t.to_csv().map_err(std::io::Error::other)?;
            files.push((t.name.clone(), body));
        }
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, body) in files {
            std::fs::write(dir.join(&name), body)?;
            written.push(name);
        }
        Ok(written)
    }
}

pub fn model_report_json(r: &ModelReport) -> Value {
    Value::Array(
        r.checks
            .iter()
            .map(|c| {
                json!({
                    "name": c.name,
                    "passed": c.passed,
                    "witness": opt_num(c.witness),
                    "detail": c.detail,
                })
            })
            .collect(),
    )
}

pub fn deadline_json(d: Deadline) -> Value {
    match d {
        Deadline::At(t) => num(t),
        Deadline::Never => json!("never"),
    }
}

pub fn foc_json(f: &FocReport) -> Value {
    json!({
        "alpha": num(f.alpha),
        "bracket_minus": num(f.bracket_minus),
        "bracket_plus": opt_num(f.bracket_plus),
        "pi_minus": opt_num(f.pi_minus),
        "pi_plus": opt_num(f.pi_plus),
        "satisfied": f.satisfied,
    })
}

pub fn ic_json(r: &IcReport) -> Value {
    json!({
        "ic": r.ic,
        "violation": r.violation.as_ref().map(|v| json!({
            "clause": format!("{:?}", v.clause),
            "t": num(v.time),
            "detail": v.detail,
        })),
    })
}

/// Sample times: the mechanism grid, atom times and an even grid.
pub fn sample_times(m: &Mechanism, atoms: &[f64]) -> Vec<f64> {
    let end = m
        .grid()
        .iter()
        .chain(atoms)
        .fold(0.0f64, |a, &b| a.max(b));
    let end = 1.5 * end + 1.0;
    let mut t: Vec<f64> = crate::numeric::linspace(0.0, end, 101);
    t.extend(atoms);
    t
}

pub fn mechanism_table(m: &Mechanism, atoms: &[f64]) -> Table {
    let mut table = Table::new("mechanism.csv", &["t", "x", "X"]);
    for row in m.sample_rows(&sample_times(m, atoms)) {
        table.push_f64(&[row.t, row.flow, row.value]);
    }
    table
}

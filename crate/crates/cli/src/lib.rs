//! Front end for `paoi-core`: JSON experiment configs in, CSV tables out.
//!
//! Config schema version 1:
//!
//! ```json
//! {
//!   "version": 1,
//!   "description": "optional free text",
//!   "mode": "compare",
//!   "spec": {"classes": [
//!     {"arrival_rate": 0.1, "service": {"kind": "exponential", "rate": 0.1}}
//!   ]},
//!   "disciplines": ["buffer1_replace", "fcfs_infinite", "lcfs_infinite"],
//!   "sweep": {"parameter": "class[0].arrival_rate", "grid": [0.05, 0.1]},
//!   "sim": {"seed": 1, "replications": 10, "completions_per_replication": 100000,
//!           "warmup_completions": 10000, "confidence_level": 0.99},
//!   "output": "out.csv"
//! }
//! ```
//!
//! Service kinds: `exponential {rate}`, `deterministic {value}`,
//! `uniform {lower, upper}`, `gamma {shape, rate}`. `mode`, `description`,
//! `sweep`, `sim` (unless simulating) and `output` are optional;
//! `disciplines` defaults to `["buffer1_replace"]`.

pub mod config;
pub mod error;
pub mod run;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub use config::{ExperimentConfig, Mode, ParamPath, Sweep};
pub use error::CliError;
pub use run::{advise, run, write_advice_csv, write_csv, Advice, Row};

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rows(Vec<Row>),
    Advice(Vec<Advice>),
}

/// Loads `config_path`, runs it in `mode`, and writes the CSV to `out` (or
/// the config's `output`).
pub fn execute(
    mode: Mode,
    config_path: &Path,
    out: Option<&Path>,
) -> Result<(PathBuf, Outcome), CliError> {
    let config = ExperimentConfig::load(config_path)?;
    let target = out
        .map(Path::to_path_buf)
        .or_else(|| config.output.clone())
        .ok_or_else(|| {
            CliError::Validation("output: no --out given and config has no output".into())
        })?;
    let outcome = if mode == Mode::Advise {
        Outcome::Advice(advise(&config)?)
    } else {
        Outcome::Rows(run(&config, mode)?)
    };
    let file = File::create(&target)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", target.display())))?;
    let writer = BufWriter::new(file);
    match &outcome {
        Outcome::Rows(rows) => write_csv(rows, mode, writer)?,
        Outcome::Advice(a) => write_advice_csv(a, writer)?,
    }
    Ok((target, outcome))
}

/// Plain-text table of an outcome.
pub fn summary(outcome: &Outcome) -> String {
    let mut s = String::new();
    match outcome {
        Outcome::Rows(rows) => {
            s.push_str(&format!(
                "{:<28} {:>5} {:<8} {:<6} {:>14} {:>12}\n",
                "point", "class", "disc", "method", "paoi", "+/-"
            ));
            for r in rows {
                let point = match (&r.sweep_param, r.sweep_value) {
                    (Some(p), Some(v)) => format!("{p}={v}"),
                    _ => "-".into(),
                };
                s.push_str(&format!(
                    "{:<28} {:>5} {:<8} {:<6} {:>14.6} {:>12}\n",
                    point,
                    r.class,
                    r.discipline.label(),
                    r.method.label(),
                    r.paoi,
                    r.ci_halfwidth
                        .map(|h| format!("{h:.6}"))
                        .unwrap_or_default()
                ));
            }
        }
        Outcome::Advice(advice) => {
            for a in advice {
                let point = match (&a.sweep_param, a.sweep_value) {
                    (Some(p), Some(v)) => format!("{p}={v}: "),
                    _ => String::new(),
                };
                s.push_str(&format!(
                    "{point}given order {:?} average PAoI {:.6}; recommended {:?} average PAoI {:.6}\n",
                    a.given, a.given_average, a.recommended, a.recommended_average
                ));
            }
        }
    }
    s
}

//! Experiment configuration: JSON schema, validation and sweep paths.

use std::fmt;
use std::path::{Path, PathBuf};

use paoi_core::sim::{Discipline, SimConfig};
use paoi_core::{ServiceDistribution, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Bounds,
    Simulate,
    Compare,
    Advise,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Bounds => "bounds",
            Mode::Simulate => "simulate",
            Mode::Compare => "compare",
            Mode::Advise => "advise",
        }
    }

    pub fn needs_simulation(self) -> bool {
        matches!(self, Mode::Simulate | Mode::Compare)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: String,
    pub grid: Vec<f64>,
}

fn default_disciplines() -> Vec<Discipline> {
    vec![Discipline::Buffer1Replace]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// When present, must agree with the verb the config is run with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub spec: SystemSpec,
    #[serde(default = "default_disciplines")]
    pub disciplines: Vec<Discipline>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// The scalar a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    ArrivalRate,
    ServiceRate,
    ServiceValue,
    ServiceLower,
    ServiceUpper,
    ServiceShape,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamPath {
    pub class: usize,
    pub field: Field,
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = match self.field {
            Field::ArrivalRate => "arrival_rate",
            Field::ServiceRate => "service.rate",
            Field::ServiceValue => "service.value",
            Field::ServiceLower => "service.lower",
            Field::ServiceUpper => "service.upper",
            Field::ServiceShape => "service.shape",
        };
        write!(f, "class[{}].{field}", self.class)
    }
}

impl ParamPath {
    /// Parses `class[i].<field>` (or `classes[i].<field>`), `i` zero-based.
    pub fn parse(s: &str) -> Result<Self, CliError> {
        let bad = || {
            CliError::Validation(format!(
                "sweep.parameter: cannot parse {s:?}; expected class[<index>].<field> with field \
                 one of arrival_rate, service.rate, service.value, service.lower, \
                 service.upper, service.shape"
            ))
        };
        let rest = s
            .strip_prefix("classes[")
            .or_else(|| s.strip_prefix("class["))
            .ok_or_else(bad)?;
        let (index, field) = rest.split_once("].").ok_or_else(bad)?;
        let class: usize = index.parse().map_err(|_| bad())?;
        let field = match field {
            "arrival_rate" => Field::ArrivalRate,
            "service.rate" => Field::ServiceRate,
            "service.value" => Field::ServiceValue,
            "service.lower" => Field::ServiceLower,
            "service.upper" => Field::ServiceUpper,
            "service.shape" => Field::ServiceShape,
            _ => return Err(bad()),
        };
        Ok(Self { class, field })
    }

    fn slot<'a>(&self, spec: &'a mut SystemSpec) -> Result<&'a mut f64, CliError> {
        let k = spec.len();
        let path = *self;
        let class = spec.classes.get_mut(self.class).ok_or_else(|| {
            CliError::Validation(format!(
                "sweep.parameter: {path} names class index {}, but spec has {k} classes",
                path.class
            ))
        })?;
        let kind = class.service.kind();
        let slot = match (self.field, &mut class.service) {
            (Field::ArrivalRate, _) => Some(&mut class.arrival_rate),
            (Field::ServiceRate, ServiceDistribution::Exponential { rate })
            | (Field::ServiceRate, ServiceDistribution::Gamma { rate, .. }) => Some(rate),
            (Field::ServiceValue, ServiceDistribution::Deterministic { value }) => Some(value),
            (Field::ServiceLower, ServiceDistribution::Uniform { lower, .. }) => Some(lower),
            (Field::ServiceUpper, ServiceDistribution::Uniform { upper, .. }) => Some(upper),
            (Field::ServiceShape, ServiceDistribution::Gamma { shape, .. }) => Some(shape),
            _ => None,
        };
        slot.ok_or_else(|| {
            CliError::Validation(format!(
                "sweep.parameter: {path} does not exist, class {} service is {kind}",
                path.class
            ))
        })
    }

    pub fn get(&self, spec: &SystemSpec) -> Result<f64, CliError> {
        let mut copy = spec.clone();
        Ok(*self.slot(&mut copy)?)
    }

    /// A copy of `spec` with this parameter set to `value`.
    pub fn apply(&self, spec: &SystemSpec, value: f64) -> Result<SystemSpec, CliError> {
        let mut out = spec.clone();
        *self.slot(&mut out)? = value;
        Ok(out)
    }
}

/// One evaluation point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub param: Option<ParamPath>,
    pub value: Option<f64>,
    pub spec: SystemSpec,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." || path.is_empty() {
                CliError::Validation(format!("config: {inner}"))
            } else {
                CliError::Validation(format!("{path}: {inner}"))
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks everything a run depends on, reporting the first problem with
    /// its field path.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Validation(format!(
                "version: unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if let Some(m) = self.mode {
            if m != mode {
                return Err(CliError::Validation(format!(
                    "mode: config declares {:?} but was run with `{}`",
                    m.name(),
                    mode.name()
                )));
            }
        }
        self.spec
            .validate()
            .map_err(|e| CliError::from_core_at("spec", e))?;
        if self.disciplines.is_empty() {
            return Err(CliError::Validation(
                "disciplines: must list at least one discipline".into(),
            ));
        }
        for (i, d) in self.disciplines.iter().enumerate() {
            if self.disciplines[..i].contains(d) {
                return Err(CliError::Validation(format!(
                    "disciplines[{i}]: {} listed twice",
                    d.label()
                )));
            }
        }
        if let Some(sweep) = &self.sweep {
            let path = ParamPath::parse(&sweep.parameter)?;
            path.get(&self.spec)?;
            if sweep.grid.is_empty() {
                return Err(CliError::Validation("sweep.grid: must not be empty".into()));
            }
            for (i, &v) in sweep.grid.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Validation(format!(
                        "sweep.grid[{i}]: must be a positive finite number, got {v}"
                    )));
                }
                if i > 0 && v <= sweep.grid[i - 1] {
                    return Err(CliError::Validation(format!(
                        "sweep.grid[{i}]: grid must be strictly increasing ({} then {v})",
                        sweep.grid[i - 1]
                    )));
                }
                path.apply(&self.spec, v)?
                    .validate()
                    .map_err(|e| CliError::from_core_at(&format!("sweep.grid[{i}] -> spec"), e))?;
            }
        }
        if mode.needs_simulation() {
            let sim = self.sim.as_ref().ok_or_else(|| {
                CliError::Validation(format!("sim: required for `{}`", mode.name()))
            })?;
            sim.validate().map_err(|e| CliError::from_core_at("", e))?;
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<Point>, CliError> {
        match &self.sweep {
            None => Ok(vec![Point {
                param: None,
                value: None,
                spec: self.spec.clone(),
            }]),
            Some(sweep) => {
                let path = ParamPath::parse(&sweep.parameter)?;
                sweep
                    .grid
                    .iter()
                    .map(|&v| {
                        Ok(Point {
                            param: Some(path),
                            value: Some(v),
                            spec: path.apply(&self.spec, v)?,
                        })
                    })
                    .collect()
            }
        }
    }
}

//! Evaluation of a validated config into CSV rows.

use std::io::Write;

use paoi_core::bounds_mg;
use paoi_core::exact_mm::ExactAnalysis;
use paoi_core::infinite::{
    fcfs_average_paoi, fcfs_paoi, lcfs_paoi_upper_bound, optimal_priority_order,
};
use paoi_core::sim::{simulate, Discipline, SimConfig};
use paoi_core::{Error, Method, PaoiComponents, ServiceLaw, SystemSpec};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode, Point};
use crate::error::CliError;

/// One output line: one class under one discipline and method at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    /// One-based priority.
    pub class: usize,
    pub discipline: Discipline,
    pub method: Method,
    pub paoi: f64,
    pub ci_halfwidth: Option<f64>,
    pub e_p: Option<f64>,
    pub e_w: Option<f64>,
    pub e_i: Option<f64>,
    pub e_g: Option<f64>,
    /// Analytic value minus the simulated mean (compare mode only).
    pub bound_minus_sim: Option<f64>,
}

pub const CSV_HEADER: [&str; 11] = [
    "sweep_param",
    "sweep_value",
    "class",
    "discipline",
    "method",
    "paoi",
    "ci_halfwidth",
    "E_P",
    "E_W",
    "E_I",
    "E_G",
];

struct Analytic {
    class: usize,
    method: Method,
    components: PaoiComponents,
}

fn analytic_rows(
    spec: &SystemSpec,
    discipline: Discipline,
    mode: Mode,
) -> Result<Vec<Analytic>, CliError> {
    let all = |method: Method, comps: Vec<PaoiComponents>| -> Vec<Analytic> {
        comps
            .into_iter()
            .enumerate()
            .map(|(class, components)| Analytic {
                class,
                method,
                components,
            })
            .collect()
    };
    match (discipline, mode) {
        (Discipline::FcfsInfinite, _) => Ok(all(Method::Exact, fcfs_paoi(spec)?)),
        (Discipline::LcfsInfinite, Mode::Exact) => Err(CliError::Capability(
            "no exact PAoI for infinite LCFS buffers; run `bounds` or `simulate`".into(),
        )),
        (Discipline::LcfsInfinite, _) => Ok(all(Method::UpperBound, lcfs_paoi_upper_bound(spec)?)),
        (Discipline::Buffer1Replace, Mode::Exact) => {
            let analysis =
                ExactAnalysis::new(spec).map_err(|e| fallback(e, "bounds or simulate"))?;
            let comps = (0..spec.len())
                .map(|c| {
                    analysis
                        .paoi(c)
                        .map_err(|e| fallback(e, "bounds or simulate"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(all(Method::Exact, comps))
        }
        (Discipline::Buffer1Replace, Mode::Bounds) => {
            let comps =
                bounds_mg::upper_bounds(spec).map_err(|e| fallback(e, "exact or simulate"))?;
            Ok(all(Method::UpperBound, comps))
        }
        (Discipline::Buffer1Replace, _) => {
            // Whatever applies: exact per supported class, bounds if the
            // service law is shared.
            let mut out = Vec::new();
            match ExactAnalysis::new(spec) {
                Ok(analysis) => {
                    for c in 0..spec.len() {
                        match analysis.paoi(c) {
                            Ok(components) => out.push(Analytic {
                                class: c,
                                method: Method::Exact,
                                components,
                            }),
                            Err(Error::UnsupportedModel(_)) => {}
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
                Err(Error::UnsupportedModel(_)) => {}
                Err(e) => return Err(e.into()),
            }
            match bounds_mg::upper_bounds(spec) {
                Ok(comps) => out.extend(all(Method::UpperBound, comps)),
                Err(Error::UnsupportedModel(_)) => {}
                Err(e) => return Err(e.into()),
            }
            if let Some(c) = (0..spec.len()).find(|c| out.iter().all(|a| a.class != *c)) {
                return Err(CliError::Capability(format!(
                    "no analytic PAoI for class {} of this buffer-one system \
                     (needs exponential or shared service); run `simulate`",
                    c + 1
                )));
            }
            out.sort_by_key(|a| (a.class, a.method));
            Ok(out)
        }
    }
}

fn fallback(e: Error, modes: &str) -> CliError {
    match e {
        Error::UnsupportedModel(m) => CliError::Capability(format!("{m}; fall back to {modes}")),
        other => other.into(),
    }
}

fn point_rows(
    point: &Point,
    disciplines: &[Discipline],
    mode: Mode,
    sim: Option<&SimConfig>,
) -> Result<Vec<Row>, CliError> {
    let mut rows = Vec::new();
    for &d in disciplines {
        let base = |class: usize, method: Method, paoi: f64| Row {
            sweep_param: point.param.map(|p| p.to_string()),
            sweep_value: point.value,
            class: class + 1,
            discipline: d,
            method,
            paoi,
            ci_halfwidth: None,
            e_p: None,
            e_w: None,
            e_i: None,
            e_g: None,
            bound_minus_sim: None,
        };
        let analytic = if mode == Mode::Simulate {
            Vec::new()
        } else {
            analytic_rows(&point.spec, d, mode)?
        };
        let simulated = match (mode.needs_simulation(), sim) {
            (true, Some(cfg)) => Some(simulate(&point.spec, d, cfg)?),
            _ => None,
        };
        for c in 0..point.spec.len() {
            for a in analytic.iter().filter(|a| a.class == c) {
                let comp = a.components;
                rows.push(Row {
                    e_p: Some(comp.service),
                    e_w: Some(comp.buffer_busy),
                    e_i: Some(comp.interarrival),
                    e_g: Some(comp.gap),
                    bound_minus_sim: simulated
                        .as_ref()
                        .map(|s| comp.total - s.classes[c].paoi_mean),
                    ..base(c, a.method, comp.total)
                });
            }
            if let Some(s) = &simulated {
                let est = &s.classes[c];
                rows.push(Row {
                    ci_halfwidth: Some(est.ci_halfwidth),
                    e_p: Some(point.spec.service(c).mean()),
                    e_w: Some(est.wait_mean),
                    e_i: Some(1.0 / point.spec.rate(c)),
                    ..base(c, Method::Simulated, est.paoi_mean)
                });
            }
        }
    }
    Ok(rows)
}

fn point_context(point: &Point) -> String {
    match (point.param, point.value) {
        (Some(p), Some(v)) => format!("at {p} = {v}"),
        _ => "at the base spec".into(),
    }
}

/// Rows for every sweep point, discipline, class and method, in that order.
pub fn run(config: &ExperimentConfig, mode: Mode) -> Result<Vec<Row>, CliError> {
    if mode == Mode::Advise {
        return Err(CliError::Validation(
            "mode: use `advise` for order recommendations".into(),
        ));
    }
    config.validate(mode)?;
    let points = config.points()?;
    let per_point: Vec<Vec<Row>> = points
        .par_iter()
        .map(|p| {
            point_rows(p, &config.disciplines, mode, config.sim.as_ref())
                .map_err(|e| e.context(&point_context(p)))
        })
        .collect::<Result<_, _>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[Row], mode: Mode, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if mode == Mode::Compare {
        header.push("bound_minus_sim");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.sweep_param.clone().unwrap_or_default(),
            fmt_opt(r.sweep_value),
            r.class.to_string(),
            r.discipline.label().to_string(),
            r.method.label().to_string(),
            r.paoi.to_string(),
            fmt_opt(r.ci_halfwidth),
            fmt_opt(r.e_p),
            fmt_opt(r.e_w),
            fmt_opt(r.e_i),
            fmt_opt(r.e_g),
        ];
        if mode == Mode::Compare {
            rec.push(fmt_opt(r.bound_minus_sim));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Given and recommended priority orders for FCFS at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Advice {
    pub sweep_param: Option<String>,
    pub sweep_value: Option<f64>,
    /// One-based class labels in priority order, highest first.
    pub given: Vec<usize>,
    pub recommended: Vec<usize>,
    pub given_average: f64,
    pub recommended_average: f64,
}

pub fn advise(config: &ExperimentConfig) -> Result<Vec<Advice>, CliError> {
    config.validate(Mode::Advise)?;
    config
        .points()?
        .par_iter()
        .map(|p| {
            let inner = || -> Result<Advice, CliError> {
                let order = optimal_priority_order(&p.spec)?;
                Ok(Advice {
                    sweep_param: p.param.map(|x| x.to_string()),
                    sweep_value: p.value,
                    given: (1..=p.spec.len()).collect(),
                    recommended: order.iter().map(|i| i + 1).collect(),
                    given_average: fcfs_average_paoi(&p.spec)?,
                    recommended_average: fcfs_average_paoi(&p.spec.permuted(&order))?,
                })
            };
            inner().map_err(|e| e.context(&point_context(p)))
        })
        .collect()
}

pub fn write_advice_csv<W: Write>(advice: &[Advice], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_param",
        "sweep_value",
        "order_kind",
        "order",
        "average_paoi",
    ])?;
    let join = |o: &[usize]| {
        o.iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    for a in advice {
        for (kind, order, avg) in [
            ("given", &a.given, a.given_average),
            ("recommended", &a.recommended, a.recommended_average),
        ] {
            w.write_record([
                a.sweep_param.clone().unwrap_or_default(),
                fmt_opt(a.sweep_value),
                kind.to_string(),
                join(order),
                avg.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

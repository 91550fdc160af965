//! PAoI values and their decomposition `E[A] = E[P] + E[W] + E[I] + E[G]`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Per-class breakdown of expected peak age.
///
/// `service` is `E[P]`, `buffer_busy` the expected time the class's (initial)
/// buffer stays occupied (or the FCFS queueing delay), `interarrival` is
/// `1/λ`, and `gap` the expected time from the freshest release in a buffer
/// busy period to the moment the buffer empties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaoiComponents {
    pub service: f64,
    pub buffer_busy: f64,
    pub interarrival: f64,
    pub gap: f64,
    pub total: f64,
}

impl PaoiComponents {
    pub fn new(service: f64, buffer_busy: f64, interarrival: f64, gap: f64) -> Self {
        Self {
            service,
            buffer_busy,
            interarrival,
            gap,
            total: service + buffer_busy + interarrival + gap,
        }
    }
}

/// Expected buffer busy period from the occupancy probability, by Little's
/// law on the entering packets: `p = λ (1 - p) E[W]`.
pub fn buffer_busy_from_occupancy(rate: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::param(
            "p",
            format!("occupancy must lie in [0, 1], got {p}"),
        ));
    }
    if p >= 1.0 {
        return Err(Error::Divergence(format!(
            "buffer occupancy probability is {p}; expected busy period is infinite"
        )));
    }
    if 1.0 - p < 1e-12 {
        return Err(Error::Degenerate(format!(
            "1 - p = {:e} is below 1e-12; busy period is numerically undefined",
            1.0 - p
        )));
    }
    Ok(p / (rate * (1.0 - p)))
}

/// Jensen upper bound of PAoI from a buffer occupancy probability:
/// `E[G] = (1 - E[e^{-λW}])/λ <= (1 - e^{-λ E[W]})/λ`.
pub fn jensen_bound(mean_service: f64, rate: f64, p: f64) -> Result<PaoiComponents> {
    let w = buffer_busy_from_occupancy(rate, p)?;
    let gap = -(-rate * w).exp_m1() / rate;
    Ok(PaoiComponents::new(mean_service, w, 1.0 / rate, gap))
}

/// How a reported value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    /// An upper bound; also the recommended approximation. Never exact.
    UpperBound,
    Simulated,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::UpperBound => "bound",
            Method::Simulated => "sim",
        }
    }
}

/// One class's PAoI from one method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaoiValue {
    /// Zero-based priority index.
    pub class: usize,
    pub method: Method,
    pub paoi: f64,
    /// Present for simulated values only.
    pub ci_halfwidth: Option<f64>,
    pub components: Option<PaoiComponents>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PaoiReport {
    pub values: Vec<PaoiValue>,
}

impl PaoiReport {
    pub fn push_analytic(&mut self, method: Method, per_class: &[PaoiComponents]) {
        debug_assert_ne!(method, Method::Simulated);
        for (class, c) in per_class.iter().enumerate() {
            self.values.push(PaoiValue {
                class,
                method,
                paoi: c.total,
                ci_halfwidth: None,
                components: Some(*c),
            });
        }
    }

    pub fn get(&self, class: usize, method: Method) -> Option<&PaoiValue> {
        self.values
            .iter()
            .find(|v| v.class == class && v.method == method)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn busy_period_from_little() {
        assert_eq!(buffer_busy_from_occupancy(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(buffer_busy_from_occupancy(1.0, 0.2).unwrap(), 0.25);
        assert_eq!(buffer_busy_from_occupancy(2.0, 0.5).unwrap(), 0.5);
        assert!(matches!(
            buffer_busy_from_occupancy(1.0, 1.0),
            Err(Error::Divergence(_))
        ));
        assert!(matches!(
            buffer_busy_from_occupancy(1.0, 1.0 - 1e-14),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn jensen_bound_limits() {
        // empty buffer: 1/μ + 1/λ
        let c = jensen_bound(1.0, 2.0, 0.0).unwrap();
        assert_eq!(c.total, 1.5);
        // λ = μ = 1, p = 1/3: 1 + 0.5 + 2 - e^{-0.5}
        let c = jensen_bound(1.0, 1.0, 1.0 / 3.0).unwrap();
        let hand = 3.5 - (-0.5f64).exp();
        assert!((c.total - hand).abs() < 1e-14);
        assert!((c.total - 2.893_469_340_287_366).abs() < 1e-12);
    }
}

use serde::{Deserialize, Serialize};

use crate::dist::{ServiceDistribution, ServiceLaw};
use crate::error::{Error, Result};

/// Largest class count any analysis accepts.
pub const MAX_CLASSES: usize = 12;

/// One traffic class: Poisson arrivals at `arrival_rate`, iid service times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub arrival_rate: f64,
    pub service: ServiceDistribution,
}

impl ClassSpec {
    pub fn new(arrival_rate: f64, service: ServiceDistribution) -> Self {
        Self {
            arrival_rate,
            service,
        }
    }

    /// Traffic intensity `λ E[P]`.
    pub fn load(&self) -> f64 {
        self.arrival_rate * self.service.mean()
    }
}

/// Classes in priority order: index 0 is served first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub classes: Vec<ClassSpec>,
}

impl SystemSpec {
    pub fn new(classes: Vec<ClassSpec>) -> Result<Self> {
        let spec = Self { classes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::param("classes", "at least one class is required"));
        }
        if self.classes.len() > MAX_CLASSES {
            return Err(Error::param(
                "classes",
                format!(
                    "at most {MAX_CLASSES} classes are supported, got {}",
                    self.classes.len()
                ),
            ));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.arrival_rate.is_finite() && c.arrival_rate > 0.0) {
                return Err(Error::param(
                    format!("classes[{i}].arrival_rate"),
                    format!("must be finite and > 0, got {}", c.arrival_rate),
                ));
            }
            c.service.validate(&format!("classes[{i}].service"))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn rate(&self, class: usize) -> f64 {
        self.classes[class].arrival_rate
    }

    pub fn service(&self, class: usize) -> &ServiceDistribution {
        &self.classes[class].service
    }

    pub fn loads(&self) -> Vec<f64> {
        self.classes.iter().map(ClassSpec::load).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.classes.iter().map(|c| c.arrival_rate).sum()
    }

    pub fn total_load(&self) -> f64 {
        self.classes.iter().map(ClassSpec::load).sum()
    }

    /// Errors unless every cumulative load `Σ_{j<=i} ρ_j` is below one.
    pub fn check_stable(&self) -> Result<()> {
        let mut acc = 0.0;
        for (i, c) in self.classes.iter().enumerate() {
            acc += c.load();
            if acc >= 1.0 {
                return Err(Error::Unstable {
                    class: i,
                    load: acc,
                });
            }
        }
        Ok(())
    }

    /// The common service law, if every class shares one.
    pub fn common_service(&self) -> Option<ServiceDistribution> {
        let first = self.classes.first()?.service;
        self.classes
            .iter()
            .all(|c| c.service == first)
            .then_some(first)
    }

    pub fn all_exponential(&self) -> bool {
        self.classes.iter().all(|c| c.service.is_exponential())
    }

    /// The same classes re-prioritized: `order[p]` is the original index of
    /// the class placed at priority `p`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            classes: order.iter().map(|&i| self.classes[i]).collect(),
        }
    }

    /// The first `l` classes alone, as if the others never arrived.
    pub fn prefix(&self, l: usize) -> Self {
        Self {
            classes: self.classes[..l].to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(rate: f64) -> ServiceDistribution {
        ServiceDistribution::exponential(rate).unwrap()
    }

    #[test]
    fn validation_names_the_field() {
        let err = SystemSpec::new(vec![
            ClassSpec::new(1.0, exp(1.0)),
            ClassSpec::new(0.0, exp(1.0)),
        ])
        .unwrap_err();
        assert_eq!(
            err,
            Error::InvalidParameter {
                field: "classes[1].arrival_rate".into(),
                reason: "must be finite and > 0, got 0".into()
            }
        );
        assert!(SystemSpec::new(vec![]).is_err());
        assert!(SystemSpec::new(vec![ClassSpec::new(1.0, exp(1.0)); 13]).is_err());
    }

    #[test]
    fn stability_reports_partial_sum() {
        let spec = SystemSpec::new(vec![
            ClassSpec::new(0.3, exp(1.0)),
            ClassSpec::new(0.5, exp(1.0)),
            ClassSpec::new(0.4, exp(1.0)),
        ])
        .unwrap();
        match spec.check_stable() {
            Err(Error::Unstable { class, load }) => {
                assert_eq!(class, 2);
                assert!((load - 1.2).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn common_service_detection() {
        let a = SystemSpec::new(vec![ClassSpec::new(1.0, exp(2.0)); 3]).unwrap();
        assert_eq!(a.common_service(), Some(exp(2.0)));
        let b = SystemSpec::new(vec![
            ClassSpec::new(1.0, exp(2.0)),
            ClassSpec::new(1.0, exp(3.0)),
        ])
        .unwrap();
        assert_eq!(b.common_service(), None);
    }
}

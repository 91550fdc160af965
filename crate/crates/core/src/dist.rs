//! Service-time laws with closed-form Laplace–Stieltjes transforms.
//!
//! Every law here has an exact LST `E[exp(-sP)]`, exact first and second
//! moments, and a sampler. The analytic modules only ever touch the LST and
//! the moments; the simulator only touches the sampler.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this value of `s * width` the uniform LST switches to a Taylor series.
const UNIFORM_TAYLOR_CUTOFF: f64 = 1e-8;

/// Common interface over single laws and mixtures.
pub trait ServiceLaw {
    /// `E[exp(-s P)]` for `s >= 0`.
    fn lst(&self, s: f64) -> f64;
    fn mean(&self) -> f64;
    fn second_moment(&self) -> f64;

    fn variance(&self) -> f64 {
        let m = self.mean();
        self.second_moment() - m * m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ServiceDistribution {
    Exponential { rate: f64 },
    Deterministic { value: f64 },
    Uniform { lower: f64, upper: f64 },
    Gamma { shape: f64, rate: f64 },
}

fn positive(field: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            format!("{field}.{name}"),
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

impl ServiceDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        let d = Self::Exponential { rate };
        d.validate("service")?;
        Ok(d)
    }

    pub fn deterministic(value: f64) -> Result<Self> {
        let d = Self::Deterministic { value };
        d.validate("service")?;
        Ok(d)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let d = Self::Uniform { lower, upper };
        d.validate("service")?;
        Ok(d)
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        let d = Self::Gamma { shape, rate };
        d.validate("service")?;
        Ok(d)
    }

    /// Checks the parameter domain; `field` prefixes the error path.
    pub fn validate(&self, field: &str) -> Result<()> {
        match *self {
            Self::Exponential { rate } => positive(field, "rate", rate),
            Self::Deterministic { value } => positive(field, "value", value),
            Self::Uniform { lower, upper } => {
                if !(lower.is_finite() && lower >= 0.0) {
                    return Err(Error::param(
                        format!("{field}.lower"),
                        format!("must be finite and >= 0, got {lower}"),
                    ));
                }
                if !(upper.is_finite() && upper > lower) {
                    return Err(Error::param(
                        format!("{field}.upper"),
                        format!("must be finite and > lower ({lower}), got {upper}"),
                    ));
                }
                Ok(())
            }
            Self::Gamma { shape, rate } => {
                positive(field, "shape", shape)?;
                positive(field, "rate", rate)
            }
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::Exponential { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Exponential { .. } => "exponential",
            Self::Deterministic { .. } => "deterministic",
            Self::Uniform { .. } => "uniform",
            Self::Gamma { .. } => "gamma",
        }
    }

    /// Builds a reusable sampler. Parameters are assumed valid.
    pub fn sampler(&self) -> ServiceSampler {
        match *self {
            Self::Exponential { rate } => {
                ServiceSampler::Exponential(Exp::new(rate).expect("validated rate"))
            }
            Self::Deterministic { value } => ServiceSampler::Constant(value),
            Self::Uniform { lower, upper } => ServiceSampler::Uniform(
                Uniform::new_inclusive(lower, upper).expect("validated bounds"),
            ),
            Self::Gamma { shape, rate } => {
                ServiceSampler::Gamma(Gamma::new(shape, 1.0 / rate).expect("validated shape"))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }
}

impl ServiceLaw for ServiceDistribution {
    fn lst(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0, "lst evaluated at negative s = {s}");
        match *self {
            Self::Exponential { rate } => rate / (rate + s),
            Self::Deterministic { value } => (-s * value).exp(),
            Self::Uniform { lower, upper } => {
                let x = s * (upper - lower);
                let tail = if x < UNIFORM_TAYLOR_CUTOFF {
                    1.0 - x / 2.0 + x * x / 6.0
                } else {
                    -(-x).exp_m1() / x
                };
                (-s * lower).exp() * tail
            }
            Self::Gamma { shape, rate } => (-shape * (s / rate).ln_1p()).exp(),
        }
    }

    fn mean(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Deterministic { value } => value,
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::Gamma { shape, rate } => shape / rate,
        }
    }

    fn second_moment(&self) -> f64 {
        match *self {
            Self::Exponential { rate } => 2.0 / (rate * rate),
            Self::Deterministic { value } => value * value,
            Self::Uniform { lower, upper } => (lower * lower + lower * upper + upper * upper) / 3.0,
            Self::Gamma { shape, rate } => shape * (shape + 1.0) / (rate * rate),
        }
    }
}

/// Pre-built sampler for one [`ServiceDistribution`].
#[derive(Debug, Clone, Copy)]
pub enum ServiceSampler {
    Exponential(Exp<f64>),
    Constant(f64),
    Uniform(Uniform<f64>),
    Gamma(Gamma<f64>),
}

impl Distribution<f64> for ServiceSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential(d) => d.sample(rng),
            Self::Constant(v) => *v,
            Self::Uniform(d) => d.sample(rng),
            Self::Gamma(d) => d.sample(rng),
        }
    }
}

/// Finite mixture of service laws, e.g. the service time of a randomly
/// chosen packet from a merged group of classes.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureDistribution {
    components: Vec<(f64, ServiceDistribution)>,
}

impl MixtureDistribution {
    pub fn new(components: Vec<(f64, ServiceDistribution)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::param("mixture", "needs at least one component"));
        }
        for (i, (w, d)) in components.iter().enumerate() {
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::param(
                    format!("mixture[{i}].weight"),
                    format!("must be > 0, got {w}"),
                ));
            }
            d.validate(&format!("mixture[{i}]"))?;
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "mixture",
                format!("weights must sum to 1, got {total}"),
            ));
        }
        Ok(Self { components })
    }

    /// Mixture with weights proportional to `intensities` (normalized here).
    pub fn proportional(parts: &[(f64, ServiceDistribution)]) -> Result<Self> {
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if total.is_nan() || total <= 0.0 {
            return Err(Error::param("mixture", "total weight must be > 0"));
        }
        Self::new(parts.iter().map(|&(w, d)| (w / total, d)).collect())
    }

    pub fn components(&self) -> &[(f64, ServiceDistribution)] {
        &self.components
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, d) in &self.components {
            acc += w;
            if u < acc {
                return d.sample(rng);
            }
        }
        self.components.last().expect("non-empty").1.sample(rng)
    }
}

impl ServiceLaw for MixtureDistribution {
    fn lst(&self, s: f64) -> f64 {
        self.components.iter().map(|(w, d)| w * d.lst(s)).sum()
    }

    fn mean(&self) -> f64 {
        self.components.iter().map(|(w, d)| w * d.mean()).sum()
    }

    fn second_moment(&self) -> f64 {
        self.components
            .iter()
            .map(|(w, d)| w * d.second_moment())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus() -> Vec<ServiceDistribution> {
        vec![
            ServiceDistribution::exponential(1.0).unwrap(),
            ServiceDistribution::exponential(0.1).unwrap(),
            ServiceDistribution::deterministic(3.0).unwrap(),
            ServiceDistribution::uniform(0.0, 20.0).unwrap(),
            ServiceDistribution::uniform(2.0, 5.0).unwrap(),
            ServiceDistribution::gamma(10.0, 1.0).unwrap(),
            ServiceDistribution::gamma(0.5, 2.0).unwrap(),
        ]
    }

    #[test]
    fn exponential_lst_values() {
        let d = ServiceDistribution::exponential(1.0).unwrap();
        assert_eq!(d.lst(0.0), 1.0);
        assert_eq!(d.lst(1.0), 0.5);
    }

    #[test]
    fn lst_at_zero_is_one() {
        for d in corpus() {
            assert_eq!(d.lst(0.0), 1.0, "{d:?}");
        }
    }

    /// Composite Simpson on `exp(-s x) f(x)` for the Gamma density.
    fn gamma_lst_by_quadrature(shape: f64, rate: f64, s: f64) -> f64 {
        let ln_norm = shape * rate.ln() - statrs::function::gamma::ln_gamma(shape);
        let f = |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                (ln_norm + (shape - 1.0) * x.ln() - (rate + s) * x).exp()
            }
        };
        let (a, b, n) = (0.0, 200.0, 200_000usize);
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn gamma_lst_matches_quadrature() {
        let d = ServiceDistribution::gamma(10.0, 1.0).unwrap();
        let direct = (1.0f64 / 1.1).powi(10);
        let quad = gamma_lst_by_quadrature(10.0, 1.0, 0.1);
        assert_relative_eq!(direct, 0.385_543_289_429_531_64, max_relative = 1e-12);
        assert_relative_eq!(quad, direct, max_relative = 1e-9);
        assert_relative_eq!(d.lst(0.1), direct, max_relative = 1e-14);
    }

    #[test]
    fn uniform_small_argument_is_smooth() {
        let d = ServiceDistribution::uniform(0.0, 20.0).unwrap();
        // Across the Taylor cutoff the two branches agree.
        let s_lo = 0.99 * UNIFORM_TAYLOR_CUTOFF / 20.0;
        let s_hi = 1.01 * UNIFORM_TAYLOR_CUTOFF / 20.0;
        assert!(d.lst(s_lo) >= d.lst(s_hi));
        assert_relative_eq!(d.lst(s_lo), 1.0 - 10.0 * s_lo, max_relative = 1e-15);
        assert_relative_eq!(d.lst(s_hi), 1.0 - 10.0 * s_hi, max_relative = 1e-15);
        assert_relative_eq!(
            d.lst(1.0),
            (1.0 - (-20.0f64).exp()) / 20.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn closed_form_moments() {
        let e = ServiceDistribution::exponential(2.0).unwrap();
        assert_eq!(e.mean(), 0.5);
        assert_eq!(e.second_moment(), 0.5);
        let u = ServiceDistribution::uniform(0.0, 20.0).unwrap();
        assert_eq!(u.mean(), 10.0);
        assert_relative_eq!(u.second_moment(), 400.0 / 3.0, max_relative = 1e-15);
        let g = ServiceDistribution::gamma(10.0, 1.0).unwrap();
        assert_eq!(g.mean(), 10.0);
        assert_eq!(g.second_moment(), 110.0);
    }

    #[test]
    fn monte_carlo_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, m1, m2) in [
            (
                ServiceDistribution::uniform(0.0, 20.0).unwrap(),
                10.0,
                400.0 / 3.0,
            ),
            (ServiceDistribution::gamma(10.0, 1.0).unwrap(), 10.0, 110.0),
        ] {
            let sampler = d.sampler();
            let n = 1_000_000;
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let x = sampler.sample(&mut rng);
                s1 += x;
                s2 += x * x;
            }
            assert_relative_eq!(s1 / n as f64, m1, max_relative = 1e-3);
            assert_relative_eq!(s2 / n as f64, m2, max_relative = 3e-3);
        }
    }

    #[test]
    fn exponential_sample_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = ServiceDistribution::exponential(1.0).unwrap();
        let sampler = d.sampler();
        let n = 1_000_000;
        let mean = (0..n).map(|_| sampler.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn deterministic_and_uniform_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = ServiceDistribution::deterministic(3.0).unwrap();
        assert!((0..100).all(|_| d.sample(&mut rng) == 3.0));
        let u = ServiceDistribution::uniform(0.0, 20.0).unwrap().sampler();
        assert!((0..100_000).all(|_| {
            let x = u.sample(&mut rng);
            (0.0..=20.0).contains(&x)
        }));
    }

    #[test]
    fn lst_bounded_and_monotone_on_log_grid() {
        let grid: Vec<f64> = (0..=90)
            .map(|i| 10f64.powf(-6.0 + i as f64 / 10.0))
            .collect();
        for d in corpus() {
            let mut prev = 1.0;
            for &s in &grid {
                let v = d.lst(s);
                assert!(
                    v > 0.0 || (v == 0.0 && s * d.mean() > 700.0),
                    "{d:?} at {s}: {v}"
                );
                assert!(v <= 1.0 && v <= prev, "{d:?} at {s}: {v} > {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn derivative_at_zero_is_minus_mean() {
        for d in corpus() {
            let h = 1e-5 / d.mean();
            let fd = (d.lst(h) - 1.0) / h;
            // one-sided, so keep the second-order term: -fd = E[P] - h E[P^2] / 2 + O(h^2)
            assert_relative_eq!(
                -fd,
                d.mean() - h * d.second_moment() / 2.0,
                max_relative = 1e-8
            );
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(ServiceDistribution::exponential(0.0).is_err());
        assert!(ServiceDistribution::exponential(f64::NAN).is_err());
        assert!(ServiceDistribution::deterministic(-1.0).is_err());
        assert!(ServiceDistribution::uniform(3.0, 3.0).is_err());
        assert!(ServiceDistribution::uniform(-1.0, 3.0).is_err());
        assert!(ServiceDistribution::gamma(0.0, 1.0).is_err());
        let err = ServiceDistribution::gamma(1.0, -2.0).unwrap_err();
        assert!(
            matches!(err, Error::InvalidParameter { ref field, .. } if field == "service.rate")
        );
    }

    #[test]
    fn mixture_validation() {
        let e = ServiceDistribution::exponential(1.0).unwrap();
        assert!(MixtureDistribution::new(vec![]).is_err());
        assert!(MixtureDistribution::new(vec![(0.5, e), (0.4, e)]).is_err());
        assert!(MixtureDistribution::new(vec![(0.0, e), (1.0, e)]).is_err());
        let m = MixtureDistribution::proportional(&[(3.0, e), (1.0, e)]).unwrap();
        assert_eq!(m.components()[0].0, 0.75);
    }

    #[test]
    fn json_shape() {
        let d: ServiceDistribution =
            serde_json::from_str(r#"{"kind":"gamma","shape":10,"rate":1}"#).unwrap();
        assert_eq!(
            d,
            ServiceDistribution::Gamma {
                shape: 10.0,
                rate: 1.0
            }
        );
        let s = serde_json::to_string(&ServiceDistribution::Uniform {
            lower: 0.0,
            upper: 20.0,
        })
        .unwrap();
        assert_eq!(s, r#"{"kind":"uniform","lower":0.0,"upper":20.0}"#);
        assert!(
            serde_json::from_str::<ServiceDistribution>(r#"{"kind":"pareto","alpha":2}"#).is_err()
        );
    }

    fn any_dist() -> impl Strategy<Value = ServiceDistribution> {
        prop_oneof![
            (0.05f64..20.0).prop_map(|rate| ServiceDistribution::Exponential { rate }),
            (0.05f64..20.0).prop_map(|value| ServiceDistribution::Deterministic { value }),
            (0.0f64..5.0, 0.01f64..20.0).prop_map(|(lower, w)| ServiceDistribution::Uniform {
                lower,
                upper: lower + w
            }),
            (0.2f64..30.0, 0.1f64..10.0)
                .prop_map(|(shape, rate)| ServiceDistribution::Gamma { shape, rate }),
        ]
    }

    proptest! {
        #[test]
        fn variance_nonnegative(d in any_dist()) {
            prop_assert!(d.second_moment() >= d.mean() * d.mean() * (1.0 - 1e-12));
        }

        #[test]
        fn mixture_lst_is_weighted_sum(
            a in any_dist(), b in any_dist(), w in 0.01f64..0.99, s in 0.0f64..50.0
        ) {
            let m = MixtureDistribution::new(vec![(w, a), (1.0 - w, b)]).unwrap();
            let expect = w * a.lst(s) + (1.0 - w) * b.lst(s);
            prop_assert!((m.lst(s) - expect).abs() <= 4.0 * f64::EPSILON);
            prop_assert!((m.mean() - (w * a.mean() + (1.0 - w) * b.mean())).abs()
                <= 1e-12 * m.mean());
        }
    }
}

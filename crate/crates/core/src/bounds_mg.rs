//! PAoI upper bounds for a replacing one-packet buffer per class under a
//! general service law shared by all classes.
//!
//! Rejection probabilities come from the chain embedded at departure epochs
//! of the nested subsystems `S_1 ⊂ S_2 ⊂ .. ⊂ S_k` (classes `1..l` only).
//! Given `p_i`, `E[W_i]` is exact and only `E[e^{-λW}]` is bounded (Jensen).

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::dist::{ServiceDistribution, ServiceLaw};
use crate::error::{Error, Result};
use crate::exact_mm::mask_from_rank;
use crate::linalg::stationary_of_stochastic;
use crate::report::{jensen_bound, PaoiComponents};
use crate::system::SystemSpec;

const ROW_SUM_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-10;

/// Occupancy just after departures in the subsystem of the first `size`
/// classes.
#[derive(Debug, Clone)]
pub struct DepartureChain {
    pub size: usize,
    /// Occupancy masks (bit `i` = class `i`), lexicographic over `(B_1..B_l)`.
    pub states: Vec<u16>,
    pub transition: DMatrix<f64>,
}

impl DepartureChain {
    pub fn index_of(&self, mask: u16) -> usize {
        crate::exact_mm::rank_of_mask(self.size, mask)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionProfile {
    pub p: Vec<f64>,
}

fn common_service(spec: &SystemSpec) -> Result<ServiceDistribution> {
    spec.common_service().ok_or_else(|| {
        Error::UnsupportedModel(
            "M/G/1 buffer-one bounds need one service law shared by all classes \
             (use simulation, or the exact analysis for exponential service)"
                .into(),
        )
    })
}

fn rate_sum(rates: &[f64], mask: u16) -> f64 {
    rates
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, r)| r)
        .sum()
}

/// `∫ Π_{j∈filled}(1 - e^{-λ_j x}) Π_{j∈free∖filled} e^{-λ_j x} dF(x)`, by
/// inclusion–exclusion over subsets of `filled`.
fn fill_probability(service: &ServiceDistribution, rates: &[f64], free: u16, filled: u16) -> f64 {
    let stay_empty = rate_sum(rates, free & !filled);
    let mut acc = 0.0;
    let mut sub = filled;
    loop {
        let sign = if sub.count_ones().is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += sign * service.lst(stay_empty + rate_sum(rates, sub));
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & filled;
    }
    acc
}

/// Transition matrix of the departure-epoch chain of subsystem `S_l`.
///
/// From occupancy `b` the next service goes to the highest-priority occupied
/// class (or, from the empty state, to the next arrival, which starts service
/// with every buffer empty). Classes still waiting stay occupied; each other
/// class is occupied at the next departure iff it saw an arrival.
pub fn build_departure_chain(spec: &SystemSpec, size: usize) -> Result<DepartureChain> {
    spec.validate()?;
    let service = common_service(spec)?;
    if size == 0 || size > spec.len() {
        return Err(Error::param(
            "size",
            format!("subsystem size must be in 1..={}, got {size}", spec.len()),
        ));
    }
    let rates: Vec<f64> = spec.classes[..size]
        .iter()
        .map(|c| c.arrival_rate)
        .collect();
    let full: u16 = ((1u32 << size) - 1) as u16;
    let states: Vec<u16> = (0..1usize << size)
        .map(|r| mask_from_rank(size, r))
        .collect();
    let n = states.len();
    let mut transition = DMatrix::<f64>::zeros(n, n);

    // Rows depend only on which classes remain waiting.
    let mut rows: HashMap<u16, Vec<(u16, f64)>> = HashMap::new();
    for (from, &b) in states.iter().enumerate() {
        let waiting = if b == 0 { 0 } else { b & (b - 1) };
        let row = rows.entry(waiting).or_insert_with(|| {
            let free = full & !waiting;
            let mut out = Vec::new();
            let mut filled = free;
            loop {
                out.push((
                    waiting | filled,
                    fill_probability(&service, &rates, free, filled),
                ));
                if filled == 0 {
                    break;
                }
                filled = (filled - 1) & free;
            }
            out
        });
        for &(to, prob) in row.iter() {
            let prob = if prob < 0.0 {
                if prob < -ROW_SUM_TOL {
                    return Err(Error::Numerical(format!(
                        "transition probability {prob:e} from state {from}; inclusion-exclusion \
                         lost precision"
                    )));
                }
                0.0
            } else {
                prob
            };
            transition[(from, crate::exact_mm::rank_of_mask(size, to))] = prob;
        }
        let sum: f64 = transition.row(from).iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Numerical(format!(
                "departure chain row {from} sums to {sum}"
            )));
        }
    }
    Ok(DepartureChain {
        size,
        states,
        transition,
    })
}

/// `π_l(0,..,0)`: probability that a departure leaves the subsystem empty.
pub fn zero_state_prob(chain: &DepartureChain) -> Result<f64> {
    let (pi, residual) = stationary_of_stochastic(&chain.transition)?;
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "departure chain residual {residual:e} exceeds {RESIDUAL_TOL:e}"
        )));
    }
    Ok(pi[0])
}

/// `π_l(0,..,0)` for `l = 0..=k`, with `π_0 = 1`.
pub fn zero_state_probs(spec: &SystemSpec) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(spec.len() + 1);
    out.push(1.0);
    for l in 1..=spec.len() {
        out.push(zero_state_prob(&build_departure_chain(spec, l)?)?);
    }
    Ok(out)
}

/// Probability that an arriving class-`i` packet finds its buffer full.
pub fn rejection_probs(spec: &SystemSpec) -> Result<RejectionProfile> {
    let service = common_service(spec)?;
    let mean = service.mean();
    let zeros = zero_state_probs(spec)?;
    let k = spec.len();
    let total = spec.total_rate();
    let z_k = zeros[k];
    let idle_term = z_k / (total * mean + z_k);

    let p = (1..=k)
        .map(|i| {
            let lam = spec.rate(i - 1);
            let served = (zeros[i - 1] - zeros[i]) / (lam * mean + lam / total * z_k);
            let p = 1.0 - served - idle_term;
            if p < -1e-12 {
                return Err(Error::Inconsistent(format!(
                    "rejection probability of class {i} is {p}"
                )));
            }
            Ok(p.max(0.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RejectionProfile { p })
}

/// Per-class upper bound of PAoI given the rejection profile.
pub fn paoi_upper_bound(
    spec: &SystemSpec,
    profile: &RejectionProfile,
) -> Result<Vec<PaoiComponents>> {
    if profile.p.len() != spec.len() {
        return Err(Error::param(
            "profile",
            format!(
                "{} probabilities for {} classes",
                profile.p.len(),
                spec.len()
            ),
        ));
    }
    spec.classes
        .iter()
        .zip(&profile.p)
        .map(|(c, &p)| jensen_bound(c.service.mean(), c.arrival_rate, p))
        .collect()
}

/// Rejection probabilities and bounds in one call.
pub fn upper_bounds(spec: &SystemSpec) -> Result<Vec<PaoiComponents>> {
    paoi_upper_bound(spec, &rejection_probs(spec)?)
}

/// How one class's bound moves as another class's arrival rate is scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassTrend {
    pub class: usize,
    pub sup: f64,
    pub inf: f64,
    /// `(sup - inf) / inf` over the grid.
    pub relative_variation: f64,
    /// Last grid value over first.
    pub growth: f64,
    pub strictly_increasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    pub scaled_class: usize,
    pub scales: Vec<f64>,
    /// `bounds[g][j]`: bound for class `j` at grid point `g`.
    pub bounds: Vec<Vec<f64>>,
    pub trends: Vec<ClassTrend>,
}

impl LimitReport {
    /// Classes below the scaled one diverge, the rest stay within
    /// `tolerance` relative variation.
    pub fn matches_limit_behavior(&self, tolerance: f64) -> bool {
        self.trends.iter().all(|t| {
            if t.class > self.scaled_class {
                t.strictly_increasing
            } else {
                t.relative_variation < tolerance
            }
        })
    }
}

/// Evaluates all bounds with `λ_class` multiplied by `10^t` for each `t`.
pub fn limit_diagnostics(
    spec: &SystemSpec,
    class: usize,
    exponents: &[f64],
) -> Result<LimitReport> {
    if class >= spec.len() {
        return Err(Error::param("class", format!("no class {}", class + 1)));
    }
    if exponents.is_empty() {
        return Err(Error::param("exponents", "grid must be non-empty"));
    }
    let base = spec.rate(class);
    let mut scales = Vec::with_capacity(exponents.len());
    let mut bounds = Vec::with_capacity(exponents.len());
    for &t in exponents {
        let scale = 10f64.powf(t);
        let mut scaled = spec.clone();
        scaled.classes[class].arrival_rate = base * scale;
        let b = upper_bounds(&scaled)?;
        scales.push(scale);
        bounds.push(b.iter().map(|c| c.total).collect::<Vec<_>>());
    }
    let trends = (0..spec.len())
        .map(|j| {
            let series: Vec<f64> = bounds.iter().map(|row| row[j]).collect();
            let sup = series.iter().copied().fold(f64::MIN, f64::max);
            let inf = series.iter().copied().fold(f64::MAX, f64::min);
            ClassTrend {
                class: j,
                sup,
                inf,
                relative_variation: (sup - inf) / inf,
                growth: series[series.len() - 1] / series[0],
                strictly_increasing: series.windows(2).all(|w| w[1] > w[0]),
            }
        })
        .collect();
    Ok(LimitReport {
        scaled_class: class,
        scales,
        bounds,
        trends,
    })
}

//! Exact PAoI for exponential service with a one-packet replacing buffer per
//! class.
//!
//! The state `(J, B_1..B_k)` records the class in service (or idle) and which
//! buffers hold a packet. Its stationary law gives every buffer's occupancy
//! `p_i`, hence `E[W_i]` by Little's law. The gap term needs the whole law of
//! `W_i`: its LST is assembled by conditioning on what an entering packet
//! sees, using the busy-period transforms of the higher-priority classes.

use nalgebra::DMatrix;

use crate::dist::{ServiceDistribution, ServiceLaw};
use crate::error::{Error, Result};
use crate::linalg::stationary_of_generator;
use crate::report::{buffer_busy_from_occupancy, PaoiComponents};
use crate::system::{SystemSpec, MAX_CLASSES};

/// Largest class count for which the generator is built densely
/// (`8 * 2^8 + 1 = 2049` states).
pub const MAX_DENSE_CLASSES: usize = 8;

const STATIONARY_RESIDUAL_TOL: f64 = 1e-9;

/// `(J, B_1..B_k)`: the class in service and the occupied buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufferState {
    /// Zero-based class in service, `None` when idle.
    pub serving: Option<usize>,
    /// Bit `i` set when class `i`'s buffer holds a packet.
    pub occupied: u16,
}

impl BufferState {
    pub const IDLE: BufferState = BufferState {
        serving: None,
        occupied: 0,
    };

    pub fn is_occupied(&self, class: usize) -> bool {
        self.occupied & (1 << class) != 0
    }

    /// Occupancy as a 0/1 vector `(B_1, .., B_k)`.
    pub fn bits(&self, k: usize) -> Vec<u8> {
        (0..k).map(|i| self.is_occupied(i) as u8).collect()
    }
}

/// Occupancy mask whose lexicographic rank over `(B_1, .., B_k)` is `rank`.
pub(crate) fn mask_from_rank(k: usize, rank: usize) -> u16 {
    (0..k).fold(0u16, |m, i| {
        if rank >> (k - 1 - i) & 1 == 1 {
            m | (1 << i)
        } else {
            m
        }
    })
}

pub(crate) fn rank_of_mask(k: usize, mask: u16) -> usize {
    (0..k).fold(0usize, |r, i| {
        if mask & (1 << i) != 0 {
            r | (1 << (k - 1 - i))
        } else {
            r
        }
    })
}

fn state_index(k: usize, s: BufferState) -> usize {
    match s.serving {
        None => 0,
        Some(j) => 1 + (j << k) + rank_of_mask(k, s.occupied),
    }
}

/// Idle state first, then every busy state in lexicographic `(J, B_1..B_k)`
/// order: `1 + k 2^k` states.
pub fn enumerate_states(k: usize) -> Result<Vec<BufferState>> {
    if k == 0 || k > MAX_CLASSES {
        return Err(Error::param(
            "k",
            format!("class count must be in 1..={MAX_CLASSES}, got {k}"),
        ));
    }
    let mut states = Vec::with_capacity(1 + (k << k));
    states.push(BufferState::IDLE);
    for j in 0..k {
        for rank in 0..(1usize << k) {
            states.push(BufferState {
                serving: Some(j),
                occupied: mask_from_rank(k, rank),
            });
        }
    }
    Ok(states)
}

#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub states: Vec<BufferState>,
    pub q: DMatrix<f64>,
}

fn require_exponential(spec: &SystemSpec) -> Result<()> {
    if let Some((i, c)) = spec
        .classes
        .iter()
        .enumerate()
        .find(|(_, c)| !c.service.is_exponential())
    {
        return Err(Error::UnsupportedModel(format!(
            "exact buffer-one analysis needs exponential service; class {} is {} \
             (use the M/G/1 bounds or simulation)",
            i + 1,
            c.service.kind()
        )));
    }
    Ok(())
}

fn service_rate(d: &ServiceDistribution) -> f64 {
    match *d {
        ServiceDistribution::Exponential { rate } => rate,
        _ => unreachable!("checked by require_exponential"),
    }
}

/// Outgoing `(target index, rate)` pairs of one state.
pub type Transitions = Vec<(usize, f64)>;

/// Off-diagonal rates of `(J, B_1..B_k)`, one list of `(target, rate)` per
/// state. Arrivals to a full buffer replace the waiting packet and leave the
/// state unchanged, so they do not appear.
pub fn transitions(spec: &SystemSpec) -> Result<(Vec<BufferState>, Vec<Transitions>)> {
    spec.validate()?;
    require_exponential(spec)?;
    let k = spec.len();
    let states = enumerate_states(k)?;
    let out = states
        .iter()
        .map(|s| {
            let mut row = Vec::with_capacity(k + 1);
            match s.serving {
                None => {
                    for i in 0..k {
                        let to = state_index(
                            k,
                            BufferState {
                                serving: Some(i),
                                occupied: 0,
                            },
                        );
                        row.push((to, spec.rate(i)));
                    }
                }
                Some(j) => {
                    for i in 0..k {
                        if !s.is_occupied(i) {
                            let to = state_index(
                                k,
                                BufferState {
                                    serving: Some(j),
                                    occupied: s.occupied | (1 << i),
                                },
                            );
                            row.push((to, spec.rate(i)));
                        }
                    }
                    let next = if s.occupied == 0 {
                        BufferState::IDLE
                    } else {
                        let m = s.occupied.trailing_zeros() as usize;
                        BufferState {
                            serving: Some(m),
                            occupied: s.occupied & !(1 << m),
                        }
                    };
                    row.push((state_index(k, next), service_rate(spec.service(j))));
                }
            }
            row
        })
        .collect();
    Ok((states, out))
}

/// Dense generator of `(J, B_1..B_k)`, for up to [`MAX_DENSE_CLASSES`].
pub fn build_rate_matrix(spec: &SystemSpec) -> Result<RateMatrix> {
    spec.validate()?;
    require_exponential(spec)?;
    let k = spec.len();
    if k > MAX_DENSE_CLASSES {
        return Err(Error::UnsupportedModel(format!(
            "dense generator limited to {MAX_DENSE_CLASSES} classes, got {k}"
        )));
    }
    let (states, rows) = transitions(spec)?;
    let n = states.len();
    let mut q = DMatrix::<f64>::zeros(n, n);
    for (from, row) in rows.iter().enumerate() {
        for &(to, rate) in row {
            q[(from, to)] += rate;
        }
        let out: f64 = row.iter().map(|(_, r)| r).sum();
        q[(from, from)] -= out;
    }
    Ok(RateMatrix { states, q })
}

const GAUSS_SEIDEL_MAX_SWEEPS: usize = 200_000;

/// Stationary law from sparse rows (no self-loops) by Gauss–Seidel sweeps on
/// `π Q = 0`.
fn stationary_sparse(
    states: Vec<BufferState>,
    rows: &[Vec<(usize, f64)>],
) -> Result<StationaryDistribution> {
    let n = states.len();
    let exit: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|(_, x)| x).sum())
        .collect();
    let mut incoming: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (from, row) in rows.iter().enumerate() {
        for &(to, rate) in row {
            debug_assert_ne!(to, from);
            incoming[to].push((from, rate));
        }
    }
    let inflow =
        |pi: &[f64], j: usize| -> f64 { incoming[j].iter().map(|&(i, r)| pi[i] * r).sum() };
    let residual_of = |pi: &[f64]| -> f64 {
        (0..n)
            .map(|j| (inflow(pi, j) - pi[j] * exit[j]).abs())
            .fold(0.0, f64::max)
    };
    let mut pi = vec![1.0 / n as f64; n];
    for sweep in 0..GAUSS_SEIDEL_MAX_SWEEPS {
        for j in 0..n {
            pi[j] = inflow(&pi, j) / exit[j];
        }
        let total: f64 = pi.iter().sum();
        pi.iter_mut().for_each(|v| *v /= total);
        if sweep % 16 == 15 {
            let residual = residual_of(&pi);
            if residual <= STATIONARY_RESIDUAL_TOL * 1e-3 {
                return Ok(StationaryDistribution {
                    states,
                    probs: pi,
                    residual,
                });
            }
        }
    }
    Err(Error::Numerical(format!(
        "Gauss-Seidel did not reach residual {:e} on {n} states",
        STATIONARY_RESIDUAL_TOL * 1e-3
    )))
}

#[derive(Debug, Clone)]
pub struct StationaryDistribution {
    pub states: Vec<BufferState>,
    pub probs: Vec<f64>,
    /// `‖π Q‖∞` of the returned vector.
    pub residual: f64,
}

impl StationaryDistribution {
    pub fn prob(&self, state: BufferState) -> f64 {
        self.states
            .iter()
            .position(|&s| s == state)
            .map_or(0.0, |i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (BufferState, f64)> + '_ {
        self.states.iter().copied().zip(self.probs.iter().copied())
    }
}

pub fn stationary(rates: &RateMatrix) -> Result<StationaryDistribution> {
    let (probs, residual) = stationary_of_generator(&rates.q)?;
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "stationary residual {residual:e} exceeds {STATIONARY_RESIDUAL_TOL:e} \
             ({} states); generator is badly conditioned",
            rates.states.len()
        )));
    }
    Ok(StationaryDistribution {
        states: rates.states.clone(),
        probs,
        residual,
    })
}

/// `p_i`: stationary probability that class `i`'s buffer is full.
pub fn buffer_full_prob(pi: &StationaryDistribution, class: usize) -> f64 {
    pi.iter()
        .filter(|(s, _)| s.is_occupied(class))
        .map(|(_, p)| p)
        .sum()
}

/// `E[W_i] = p_i / (λ_i (1 - p_i))`.
pub fn expected_buffer_busy(spec: &SystemSpec, p: f64, class: usize) -> Result<f64> {
    buffer_busy_from_occupancy(spec.rate(class), p)
}

/// LST of the busy period spent serving one class whose buffer replaces,
/// starting from a packet of that class entering service:
/// `η(s) = ψ(s+λ) / (1 - ψ(s) + ψ(s+λ))`.
pub fn single_class_busy_lst(service: &impl ServiceLaw, rate: f64, s: f64) -> f64 {
    let next = service.lst(s + rate);
    next / (1.0 - service.lst(s) + next)
}

/// Busy-period LSTs `(η_0, η_1)` for two identical top classes, started with
/// a packet in service and 0 (resp. 1) of the two buffers occupied.
pub fn two_class_busy_lst(service: &impl ServiceLaw, rate: f64, s: f64) -> (f64, f64) {
    let p0 = service.lst(s);
    let p1 = service.lst(s + rate);
    let p2 = service.lst(s + 2.0 * rate);
    // η0 = p2 + 2(p1 - p2) η0 + (p0 - 2p1 + p2) η1
    // η1 = p1 η0 + (p0 - p1) η1
    let a11 = 1.0 - 2.0 * (p1 - p2);
    let a12 = -(p0 - 2.0 * p1 + p2);
    let a21 = -p1;
    let a22 = 1.0 - (p0 - p1);
    let det = a11 * a22 - a12 * a21;
    let eta0 = p2 * a22 / det;
    let eta1 = -a21 * p2 / det;
    (eta0, eta1)
}

fn nearly_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Exact analysis of one system, caching its stationary law.
#[derive(Debug, Clone)]
pub struct ExactAnalysis {
    spec: SystemSpec,
    pi: StationaryDistribution,
}

impl ExactAnalysis {
    /// Solves densely up to [`MAX_DENSE_CLASSES`] classes, iteratively
    /// beyond.
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let pi = if spec.len() <= MAX_DENSE_CLASSES {
            stationary(&build_rate_matrix(spec)?)?
        } else {
            let (states, rows) = transitions(spec)?;
            stationary_sparse(states, &rows)?
        };
        Ok(Self {
            spec: spec.clone(),
            pi,
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn stationary(&self) -> &StationaryDistribution {
        &self.pi
    }

    pub fn buffer_full_prob(&self, class: usize) -> f64 {
        buffer_full_prob(&self.pi, class)
    }

    /// Checks that the LST of `W_class` can be assembled for this system.
    pub fn supports_class(&self, class: usize) -> Result<()> {
        let k = self.spec.len();
        if class >= k {
            return Err(Error::param(
                "class",
                format!("class {} out of 1..={k}", class + 1),
            ));
        }
        match class {
            0 | 1 => Ok(()),
            2 => {
                let (a, b) = (&self.spec.classes[0], &self.spec.classes[1]);
                if nearly_equal(a.arrival_rate, b.arrival_rate)
                    && nearly_equal(service_rate(&a.service), service_rate(&b.service))
                {
                    Ok(())
                } else {
                    Err(Error::UnsupportedModel(
                        "exact PAoI of class 3 requires classes 1 and 2 to share arrival and \
                         service rates (use the M/G/1 bounds or simulation)"
                            .into(),
                    ))
                }
            }
            _ => Err(Error::UnsupportedModel(format!(
                "exact PAoI is available for classes 1-3 only, requested class {} \
                 (use the M/G/1 bounds or simulation)",
                class + 1
            ))),
        }
    }

    /// `E[e^{-s W_class}]` for a packet entering the buffer (or the server).
    pub fn w_lst(&self, class: usize, s: f64) -> Result<f64> {
        self.supports_class(class)?;
        let p = self.buffer_full_prob(class);
        let free = 1.0 - p;
        if free < 1e-12 {
            return Err(Error::Degenerate(format!(
                "class {} buffer is full with probability {p}; conditioning on an empty buffer \
                 is undefined",
                class + 1
            )));
        }
        let spec = &self.spec;
        let psi = |j: usize, x: f64| spec.service(j).lst(x);

        let weighted: f64 = match class {
            0 => self
                .pi
                .iter()
                .filter(|(st, _)| !st.is_occupied(0))
                .map(|(st, prob)| match st.serving {
                    None => prob,
                    Some(j) => prob * psi(j, s),
                })
                .sum(),
            1 => {
                let lam = spec.rate(0);
                let eta = single_class_busy_lst(spec.service(0), lam, s);
                self.pi
                    .iter()
                    .filter(|(st, _)| !st.is_occupied(1))
                    .map(|(st, prob)| {
                        let v = match st.serving {
                            None => 1.0,
                            Some(j) if st.is_occupied(0) => psi(j, s) * eta,
                            Some(j) => psi(j, s) * eta - psi(j, s + lam) * eta + psi(j, s + lam),
                        };
                        prob * v
                    })
                    .sum()
            }
            2 => {
                let lam = spec.rate(0);
                let (eta0, eta1) = two_class_busy_lst(spec.service(0), lam, s);
                self.pi
                    .iter()
                    .filter(|(st, _)| !st.is_occupied(2))
                    .map(|(st, prob)| {
                        let waiting = st.is_occupied(0) as u8 + st.is_occupied(1) as u8;
                        let v = match (st.serving, waiting) {
                            (None, _) => 1.0,
                            (Some(j), 0) => {
                                let (a, b, c) = (psi(j, s), psi(j, s + lam), psi(j, s + 2.0 * lam));
                                c + 2.0 * (b - c) * eta0 + (a - 2.0 * b + c) * eta1
                            }
                            (Some(j), 1) => {
                                let (a, b) = (psi(j, s), psi(j, s + lam));
                                b * eta0 + (a - b) * eta1
                            }
                            (Some(j), _) => psi(j, s) * eta1,
                        };
                        prob * v
                    })
                    .sum()
            }
            _ => unreachable!("rejected by supports_class"),
        };
        Ok(weighted / free)
    }

    /// Conditional law of the server seen by an entering packet:
    /// `P(J = j | B_class = 0)`, index 0 meaning idle.
    pub fn server_given_empty(&self, class: usize) -> Result<Vec<f64>> {
        let free = 1.0 - self.buffer_full_prob(class);
        if free < 1e-12 {
            return Err(Error::Degenerate(format!(
                "class {} buffer is never empty",
                class + 1
            )));
        }
        let mut out = vec![0.0; self.spec.len() + 1];
        for (st, prob) in self.pi.iter().filter(|(st, _)| !st.is_occupied(class)) {
            out[st.serving.map_or(0, |j| j + 1)] += prob / free;
        }
        Ok(out)
    }

    pub fn paoi(&self, class: usize) -> Result<PaoiComponents> {
        let lam = self.spec.rate(class);
        let p = self.buffer_full_prob(class);
        let w = expected_buffer_busy(&self.spec, p, class)?;
        let gap = (1.0 - self.w_lst(class, lam)?) / lam;
        Ok(PaoiComponents::new(
            self.spec.service(class).mean(),
            w,
            1.0 / lam,
            gap,
        ))
    }
}

pub fn paoi_exact(spec: &SystemSpec, class: usize) -> Result<PaoiComponents> {
    ExactAnalysis::new(spec)?.paoi(class)
}

/// `E[e^{-s W_class}]` computed from a fresh stationary solve.
pub fn w_lst(spec: &SystemSpec, class: usize, s: f64) -> Result<f64> {
    ExactAnalysis::new(spec)?.w_lst(class, s)
}

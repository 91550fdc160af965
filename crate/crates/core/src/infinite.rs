//! Infinite per-class buffers: exact FCFS PAoI, the priority order that
//! minimizes average FCFS PAoI, and LCFS upper bounds through the
//! initial-buffer construction.

use crate::dist::{MixtureDistribution, ServiceLaw};
use crate::error::{Error, Result};
use crate::report::{jensen_bound, PaoiComponents};
use crate::system::SystemSpec;

const CONSERVATION_TOL: f64 = 1e-12;
const FIXED_POINT_TOL: f64 = 1e-15;
const FIXED_POINT_MAX_ITER: usize = 1_000_000;

/// Exact per-class PAoI under FCFS within each class and non-preemptive
/// priority across classes.
pub fn fcfs_paoi(spec: &SystemSpec) -> Result<Vec<PaoiComponents>> {
    spec.validate()?;
    spec.check_stable()?;
    let residual: f64 = 0.5
        * spec
            .classes
            .iter()
            .map(|c| c.arrival_rate * c.service.second_moment())
            .sum::<f64>();
    let mut above = 0.0;
    Ok(spec
        .classes
        .iter()
        .map(|c| {
            let through = above + c.load();
            let wait = residual / ((1.0 - through) * (1.0 - above));
            above = through;
            PaoiComponents::new(c.service.mean(), wait, 1.0 / c.arrival_rate, 0.0)
        })
        .collect())
}

/// Mean of [`fcfs_paoi`] over classes.
pub fn fcfs_average_paoi(spec: &SystemSpec) -> Result<f64> {
    let per_class = fcfs_paoi(spec)?;
    Ok(per_class.iter().map(|c| c.total).sum::<f64>() / per_class.len() as f64)
}

/// Class indices sorted by ascending load, ties kept in input order.
/// `order[p]` is the class to place at priority `p`.
pub fn optimal_priority_order(spec: &SystemSpec) -> Result<Vec<usize>> {
    spec.validate()?;
    spec.check_stable()?;
    let loads = spec.loads();
    let mut order: Vec<usize> = (0..spec.len()).collect();
    order.sort_by(|&a, &b| loads[a].total_cmp(&loads[b]));
    Ok(order)
}

/// Classes above a pivot merged into group `a`, the pivot and below into
/// group `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedClassView {
    pub pivot: usize,
    pub rate_a: f64,
    pub rate_b: f64,
    pub load_a: f64,
    pub load_b: f64,
    /// `None` for the top class, which has nothing above it.
    pub service_a: Option<MixtureDistribution>,
    pub service_b: MixtureDistribution,
}

impl MergedClassView {
    pub fn new(spec: &SystemSpec, pivot: usize) -> Result<Self> {
        if pivot >= spec.len() {
            return Err(Error::param("pivot", format!("no class {}", pivot + 1)));
        }
        let (above, rest) = spec.classes.split_at(pivot);
        let parts = |cs: &[crate::system::ClassSpec]| -> Vec<_> {
            cs.iter().map(|c| (c.arrival_rate, c.service)).collect()
        };
        let service_a = if above.is_empty() {
            None
        } else {
            Some(MixtureDistribution::proportional(&parts(above))?)
        };
        Ok(Self {
            pivot,
            rate_a: above.iter().map(|c| c.arrival_rate).sum(),
            rate_b: rest.iter().map(|c| c.arrival_rate).sum(),
            load_a: above.iter().map(|c| c.load()).sum(),
            load_b: rest.iter().map(|c| c.load()).sum(),
            service_a,
            service_b: MixtureDistribution::proportional(&parts(rest))?,
        })
    }

    pub fn mean_service_a(&self) -> f64 {
        self.service_a.as_ref().map_or(0.0, |d| d.mean())
    }

    pub fn mean_service_b(&self) -> f64 {
        self.service_b.mean()
    }

    /// LST of a busy period `V_a` (started by a group-`a` packet, ending when
    /// no group-`a` packet is left), by fixed-point iteration of
    /// `V(s) = ψ_a(s + λ_a - λ_a V(s))`.
    pub fn busy_lst_a(&self, s: f64) -> Result<f64> {
        let Some(service_a) = &self.service_a else {
            return Ok(1.0);
        };
        let mut v = 0.0f64;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let next = service_a.lst(s + self.rate_a * (1.0 - v));
            if (next - v).abs() <= FIXED_POINT_TOL {
                return Ok(next);
            }
            v = next;
        }
        Err(Error::Numerical(format!(
            "busy-period transform did not converge at s = {s} (load above class {} is {})",
            self.pivot + 1,
            self.load_a
        )))
    }

    /// LST of a busy period `V_b` (started by a group-`b` packet).
    pub fn busy_lst_b(&self, s: f64) -> Result<f64> {
        let va = self.busy_lst_a(s)?;
        Ok(self.service_b.lst(s + self.rate_a * (1.0 - va)))
    }
}

/// How the server's busy time splits into the two kinds of busy period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyPeriodStats {
    pub mean_va: f64,
    pub mean_vb: f64,
    /// Rate at which `V_a` periods start.
    pub rate_hat_a: f64,
    pub frac_in_va: f64,
    pub frac_in_vb: f64,
}

impl BusyPeriodStats {
    pub fn new(spec: &SystemSpec, view: &MergedClassView) -> Result<Self> {
        let total = spec.total_load();
        let clear = 1.0 - view.load_a;
        let mean_va = view.mean_service_a() / clear;
        let mean_vb = view.mean_service_b() / clear;
        let frac_in_vb = view.rate_b * mean_vb;
        let mut frac_in_va = total - frac_in_vb;
        if frac_in_va < 0.0 {
            if frac_in_va < -CONSERVATION_TOL {
                return Err(Error::Inconsistent(format!(
                    "fraction of time in V_a for class {} is {frac_in_va}",
                    view.pivot + 1
                )));
            }
            frac_in_va = 0.0;
        }
        let rate_hat_a = if mean_va > 0.0 {
            frac_in_va / mean_va
        } else {
            0.0
        };
        Ok(Self {
            mean_va,
            mean_vb,
            rate_hat_a,
            frac_in_va,
            frac_in_vb,
        })
    }
}

/// Law of the window over which an initial buffer fills and drains.
///
/// The initial buffer of class `i` fills at the first class-`i` arrival
/// inside a `V_a` or `V_b` period and empties when that period ends.
/// `Service` integrates the occupied time over the first packet's service
/// law only; `BusyPeriod` integrates over the full busy-period law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OccupancyWindow {
    Service,
    #[default]
    BusyPeriod,
}

/// `E[X] - 1/λ + E[e^{-λX}]/λ`: expected time from the first Poisson(`λ`)
/// arrival in a window of length `X` to the end of the window.
fn occupied_time(mean: f64, lst_at_rate: f64, rate: f64) -> f64 {
    mean - (1.0 - lst_at_rate) / rate
}

/// Errors if the load strictly above any class reaches one or the total
/// load exceeds one.
fn check_critical(spec: &SystemSpec) -> Result<()> {
    let mut acc = 0.0;
    for (i, c) in spec.classes.iter().enumerate() {
        acc += c.load();
        let last = i + 1 == spec.len();
        if acc > 1.0 || (!last && acc >= 1.0) {
            return Err(Error::Unstable {
                class: i,
                load: acc,
            });
        }
    }
    Ok(())
}

/// Stationary probability that each class's initial buffer holds a packet.
pub fn lcfs_initial_buffer_probs(spec: &SystemSpec) -> Result<Vec<f64>> {
    lcfs_initial_buffer_probs_with(spec, OccupancyWindow::default())
}

/// [`lcfs_initial_buffer_probs`] with an explicit window law.
///
/// Total load exactly one is accepted: the occupancies stay finite there and
/// are the heavy-traffic limits.
pub fn lcfs_initial_buffer_probs_with(
    spec: &SystemSpec,
    window: OccupancyWindow,
) -> Result<Vec<f64>> {
    spec.validate()?;
    check_critical(spec)?;
    (0..spec.len())
        .map(|i| {
            let lam = spec.rate(i);
            let p = if i == 0 {
                spec.classes
                    .iter()
                    .map(|c| {
                        c.arrival_rate * occupied_time(c.service.mean(), c.service.lst(lam), lam)
                    })
                    .sum::<f64>()
            } else {
                let view = MergedClassView::new(spec, i)?;
                let stats = BusyPeriodStats::new(spec, &view)?;
                let (a, b) = match window {
                    OccupancyWindow::Service => (
                        occupied_time(
                            view.mean_service_a(),
                            view.service_a.as_ref().map_or(1.0, |d| d.lst(lam)),
                            lam,
                        ),
                        occupied_time(view.mean_service_b(), view.service_b.lst(lam), lam),
                    ),
                    OccupancyWindow::BusyPeriod => (
                        occupied_time(stats.mean_va, view.busy_lst_a(lam)?, lam),
                        occupied_time(stats.mean_vb, view.busy_lst_b(lam)?, lam),
                    ),
                };
                stats.rate_hat_a * a + view.rate_b * b
            };
            if !(-CONSERVATION_TOL..=1.0).contains(&p) {
                return Err(Error::Inconsistent(format!(
                    "initial-buffer occupancy of class {} is {p}",
                    i + 1
                )));
            }
            Ok(p.max(0.0))
        })
        .collect()
}

/// Per-class LCFS PAoI upper bound from initial-buffer occupancy.
pub fn lcfs_paoi_upper_bound(spec: &SystemSpec) -> Result<Vec<PaoiComponents>> {
    lcfs_paoi_upper_bound_with(spec, OccupancyWindow::default())
}

pub fn lcfs_paoi_upper_bound_with(
    spec: &SystemSpec,
    window: OccupancyWindow,
) -> Result<Vec<PaoiComponents>> {
    let probs = lcfs_initial_buffer_probs_with(spec, window)?;
    spec.classes
        .iter()
        .zip(probs)
        .map(|(c, p)| jensen_bound(c.service.mean(), c.arrival_rate, p))
        .collect()
}

//! Event-driven simulation of a non-preemptive static-priority server with
//! Poisson sources, under three per-class buffer disciplines.
//!
//! Per class, a peak is recorded at every completion whose packet is fresher
//! than everything the class has completed before; its value is the
//! completion time minus the previous freshest release. Completions of stale
//! packets leave the age unchanged and record nothing.

mod calendar;
mod stats;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::ServiceSampler;
use crate::error::{Error, Result};
use crate::system::SystemSpec;

pub use calendar::{Event, EventCalendar};
pub use stats::mean_and_halfwidth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    /// One slot per class; a new arrival overwrites the waiting packet.
    Buffer1Replace,
    /// Unbounded FIFO queue per class.
    FcfsInfinite,
    /// Unbounded LIFO queue per class, non-preemptive. Modeled as a one-slot
    /// initial buffer holding the freshest waiting packet in front of a main
    /// stack.
    LcfsInfinite,
}

impl Discipline {
    pub fn label(self) -> &'static str {
        match self {
            Discipline::Buffer1Replace => "buffer1",
            Discipline::FcfsInfinite => "fcfs",
            Discipline::LcfsInfinite => "lcfs",
        }
    }

    pub fn infinite_buffers(self) -> bool {
        !matches!(self, Discipline::Buffer1Replace)
    }
}

pub const DEFAULT_QUEUE_CAP: usize = 1_000_000;

fn default_queue_cap() -> usize {
    DEFAULT_QUEUE_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub replications: usize,
    /// Measured completions per class in each replication.
    pub completions_per_replication: u64,
    /// Completions over all classes discarded before measuring.
    pub warmup_completions: u64,
    pub confidence_level: f64,
    /// Waiting packets per class beyond which a run is declared divergent.
    #[serde(default = "default_queue_cap")]
    pub queue_cap: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            replications: 10,
            completions_per_replication: 100_000,
            warmup_completions: 10_000,
            confidence_level: 0.99,
            queue_cap: DEFAULT_QUEUE_CAP,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::param("sim.replications", "must be at least 2"));
        }
        if self.completions_per_replication == 0 {
            return Err(Error::param(
                "sim.completions_per_replication",
                "must be positive",
            ));
        }
        if self.warmup_completions >= self.completions_per_replication {
            return Err(Error::param(
                "sim.warmup_completions",
                format!(
                    "must be below completions_per_replication ({})",
                    self.completions_per_replication
                ),
            ));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::param(
                "sim.confidence_level",
                format!("must lie in (0, 1), got {}", self.confidence_level),
            ));
        }
        if self.queue_cap == 0 {
            return Err(Error::param("sim.queue_cap", "must be positive"));
        }
        Ok(())
    }
}

/// Per-class simulation output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassEstimate {
    pub paoi_mean: f64,
    pub ci_halfwidth: f64,
    /// Time-average probability that the class's buffer (FCFS: queue; LCFS:
    /// initial buffer) holds a waiting packet.
    pub buffer_full_fraction: f64,
    pub buffer_full_halfwidth: f64,
    /// Buffer1/LCFS: mean occupied spell per arrival that found the buffer
    /// empty (zero if it went straight to service). FCFS: mean queueing delay.
    pub wait_mean: f64,
    pub completions: u64,
    pub peaks: u64,
    /// Overwritten packets (Buffer1Replace only).
    pub drops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub discipline: Discipline,
    pub replications: usize,
    pub classes: Vec<ClassEstimate>,
}

/// Time-average (initial-)buffer occupancy per class of a finished run.
pub fn occupancy_probe(estimate: &SimEstimate) -> Vec<f64> {
    estimate
        .classes
        .iter()
        .map(|c| c.buffer_full_fraction)
        .collect()
}

/// Runs `cfg.replications` independent replications and aggregates them in
/// replication order.
pub fn simulate(spec: &SystemSpec, discipline: Discipline, cfg: &SimConfig) -> Result<SimEstimate> {
    spec.validate()?;
    cfg.validate()?;
    let reps: Vec<ReplicationStats> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| Replication::new(spec, discipline, cfg, r as u64).run())
        .collect::<Result<_>>()?;

    let level = cfg.confidence_level;
    let classes = (0..spec.len())
        .map(|c| {
            let col = |f: &dyn Fn(&ClassStats) -> f64| -> Vec<f64> {
                reps.iter().map(|r| f(&r.classes[c])).collect()
            };
            let (paoi_mean, ci_halfwidth) = mean_and_halfwidth(&col(&|s| s.peak_mean()), level);
            let (buffer_full_fraction, buffer_full_halfwidth) =
                mean_and_halfwidth(&col(&|s| s.occupied_time / s.measured_time), level);
            let wait = col(&|s| s.wait_mean(discipline));
            ClassEstimate {
                paoi_mean,
                ci_halfwidth,
                buffer_full_fraction,
                buffer_full_halfwidth,
                wait_mean: wait.iter().sum::<f64>() / wait.len() as f64,
                completions: reps.iter().map(|r| r.classes[c].completions).sum(),
                peaks: reps.iter().map(|r| r.classes[c].peaks).sum(),
                drops: reps.iter().map(|r| r.classes[c].drops).sum(),
            }
        })
        .collect();
    Ok(SimEstimate {
        discipline,
        replications: cfg.replications,
        classes,
    })
}

#[derive(Debug, Clone, Default)]
struct ClassStats {
    peak_sum: f64,
    peaks: u64,
    completions: u64,
    drops: u64,
    occupied_time: f64,
    measured_time: f64,
    /// Arrivals that found the (initial) buffer empty.
    empty_arrivals: u64,
    queue_delay_sum: f64,
}

impl ClassStats {
    fn peak_mean(&self) -> f64 {
        self.peak_sum / self.peaks as f64
    }

    fn wait_mean(&self, d: Discipline) -> f64 {
        match d {
            Discipline::FcfsInfinite => self.queue_delay_sum / self.completions as f64,
            _ if self.empty_arrivals == 0 => 0.0,
            _ => self.occupied_time / self.empty_arrivals as f64,
        }
    }
}

#[derive(Debug)]
struct ReplicationStats {
    classes: Vec<ClassStats>,
}

/// Waiting packets of one class, each stored as its release time.
#[derive(Debug)]
enum Waiting {
    Slot(Option<f64>),
    Fifo(VecDeque<f64>),
    Lifo {
        initial: Option<f64>,
        main: Vec<f64>,
    },
}

impl Waiting {
    fn new(d: Discipline) -> Self {
        match d {
            Discipline::Buffer1Replace => Waiting::Slot(None),
            Discipline::FcfsInfinite => Waiting::Fifo(VecDeque::new()),
            Discipline::LcfsInfinite => Waiting::Lifo {
                initial: None,
                main: Vec::new(),
            },
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Waiting::Slot(s) => s.is_none(),
            Waiting::Fifo(q) => q.is_empty(),
            Waiting::Lifo { initial, main } => initial.is_none() && main.is_empty(),
        }
    }

    /// Whether the buffer tracked by the occupancy probe is occupied.
    fn probe_occupied(&self) -> bool {
        match self {
            Waiting::Slot(s) => s.is_some(),
            Waiting::Fifo(q) => !q.is_empty(),
            Waiting::Lifo { initial, .. } => initial.is_some(),
        }
    }

    fn backlog(&self) -> usize {
        match self {
            Waiting::Slot(s) => s.is_some() as usize,
            Waiting::Fifo(q) => q.len(),
            Waiting::Lifo { initial, main } => initial.is_some() as usize + main.len(),
        }
    }

    /// Stores a new packet; returns true if one was overwritten.
    fn push(&mut self, release: f64) -> bool {
        match self {
            Waiting::Slot(s) => s.replace(release).is_some(),
            Waiting::Fifo(q) => {
                q.push_back(release);
                false
            }
            Waiting::Lifo { initial, main } => {
                if let Some(old) = initial.replace(release) {
                    main.push(old);
                }
                false
            }
        }
    }

    fn pop(&mut self) -> Option<f64> {
        match self {
            Waiting::Slot(s) => s.take(),
            Waiting::Fifo(q) => q.pop_front(),
            Waiting::Lifo { initial, main } => initial.take().or_else(|| main.pop()),
        }
    }
}

struct Replication<'a> {
    spec: &'a SystemSpec,
    discipline: Discipline,
    cfg: &'a SimConfig,
    arrival_rng: Vec<ChaCha8Rng>,
    service_rng: Vec<ChaCha8Rng>,
    interarrival: Vec<Exp<f64>>,
    service: Vec<ServiceSampler>,
    calendar: EventCalendar,
    now: f64,
    /// Class and release of the packet in service.
    in_service: Option<(usize, f64)>,
    service_started: f64,
    waiting: Vec<Waiting>,
    freshest: Vec<Option<f64>>,
    occupied_since: Vec<Option<f64>>,
    total_completions: u64,
    measure_from: Option<f64>,
    stats: Vec<ClassStats>,
}

impl<'a> Replication<'a> {
    /// Class `c` of replication `r` draws arrivals from stream `2kr + c` and
    /// services from stream `2kr + k + c` of one ChaCha key, so streams never
    /// overlap and the same class sees the same inputs across disciplines.
    fn new(spec: &'a SystemSpec, discipline: Discipline, cfg: &'a SimConfig, r: u64) -> Self {
        let k = spec.len() as u64;
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(id);
            rng
        };
        Self {
            spec,
            discipline,
            cfg,
            arrival_rng: (0..k).map(|c| stream(2 * k * r + c)).collect(),
            service_rng: (0..k).map(|c| stream(2 * k * r + k + c)).collect(),
            interarrival: spec
                .classes
                .iter()
                .map(|c| Exp::new(c.arrival_rate).expect("validated rate"))
                .collect(),
            service: spec.classes.iter().map(|c| c.service.sampler()).collect(),
            calendar: EventCalendar::new(),
            now: 0.0,
            in_service: None,
            service_started: 0.0,
            waiting: (0..k).map(|_| Waiting::new(discipline)).collect(),
            freshest: vec![None; k as usize],
            occupied_since: vec![None; k as usize],
            total_completions: 0,
            measure_from: (cfg.warmup_completions == 0).then_some(0.0),
            stats: vec![ClassStats::default(); k as usize],
        }
    }

    fn measuring(&self) -> bool {
        self.measure_from.is_some()
    }

    fn schedule_arrival(&mut self, c: usize) {
        let gap = self.interarrival[c].sample(&mut self.arrival_rng[c]);
        self.calendar.schedule(self.now + gap, Event::Arrival(c));
    }

    fn done(&self) -> bool {
        self.measuring()
            && self
                .stats
                .iter()
                .all(|s| s.completions >= self.cfg.completions_per_replication)
    }

    fn run(mut self) -> Result<ReplicationStats> {
        for c in 0..self.spec.len() {
            self.schedule_arrival(c);
        }
        while !self.done() {
            let (t, event) = self.calendar.pop().expect("arrivals are always pending");
            self.now = t;
            match event {
                Event::Arrival(c) => self.on_arrival(c)?,
                Event::Departure => self.on_departure(),
            }
            debug_assert!(
                self.in_service.is_some() || self.waiting.iter().all(Waiting::is_empty),
                "server idle with packets waiting"
            );
        }
        let start = self.measure_from.expect("done implies measuring");
        for c in 0..self.spec.len() {
            self.close_spell(c);
            self.stats[c].measured_time = self.now - start;
        }
        Ok(ReplicationStats {
            classes: self.stats,
        })
    }

    fn on_arrival(&mut self, c: usize) -> Result<()> {
        self.schedule_arrival(c);
        let measuring = self.measuring();
        if measuring && !self.waiting[c].probe_occupied() {
            self.stats[c].empty_arrivals += 1;
        }
        if self.in_service.is_none() {
            self.start_service(c, self.now);
            return Ok(());
        }
        let was_occupied = self.waiting[c].probe_occupied();
        if self.waiting[c].push(self.now) && measuring {
            self.stats[c].drops += 1;
        }
        if !was_occupied {
            self.occupied_since[c] = Some(self.now);
        }
        if self.waiting[c].backlog() > self.cfg.queue_cap {
            return Err(Error::SimulationDiverged {
                class: c,
                cap: self.cfg.queue_cap,
            });
        }
        Ok(())
    }

    fn start_service(&mut self, c: usize, release: f64) {
        debug_assert!(self.in_service.is_none(), "service started while busy");
        let p = self.service[c].sample(&mut self.service_rng[c]);
        self.in_service = Some((c, release));
        self.service_started = self.now;
        self.calendar.schedule(self.now + p, Event::Departure);
    }

    /// Adds the measured part of class `c`'s open occupied spell.
    fn close_spell(&mut self, c: usize) {
        if let (Some(since), Some(from)) = (self.occupied_since[c], self.measure_from) {
            self.stats[c].occupied_time += self.now - since.max(from);
        }
        if self.occupied_since[c].is_some() {
            self.occupied_since[c] = Some(self.now);
        }
    }

    fn on_departure(&mut self) {
        let (c, release) = self.in_service.take().expect("departure while idle");
        if self.measuring() {
            let s = &mut self.stats[c];
            s.completions += 1;
            if self.discipline == Discipline::FcfsInfinite {
                s.queue_delay_sum += self.service_started - release;
            }
        }
        match self.freshest[c] {
            Some(prev) if release > prev => {
                if self.measuring() {
                    self.stats[c].peak_sum += self.now - prev;
                    self.stats[c].peaks += 1;
                }
                self.freshest[c] = Some(release);
            }
            Some(_) => {}
            None => self.freshest[c] = Some(release),
        }
        self.total_completions += 1;
        if self.measure_from.is_none() && self.total_completions >= self.cfg.warmup_completions {
            self.measure_from = Some(self.now);
        }

        let Some(next) = self.waiting.iter().position(|w| !w.is_empty()) else {
            return;
        };
        let was_occupied = self.waiting[next].probe_occupied();
        let release = self.waiting[next].pop().expect("non-empty");
        if was_occupied && !self.waiting[next].probe_occupied() {
            self.close_spell(next);
            self.occupied_since[next] = None;
        }
        self.start_service(next, release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::ServiceDistribution;
    use crate::system::ClassSpec;

    fn exp(rate: f64) -> ServiceDistribution {
        ServiceDistribution::exponential(rate).unwrap()
    }

    fn spec(classes: &[(f64, ServiceDistribution)]) -> SystemSpec {
        SystemSpec::new(classes.iter().map(|&(l, d)| ClassSpec::new(l, d)).collect()).unwrap()
    }

    fn cfg(n: u64) -> SimConfig {
        SimConfig {
            seed: 7,
            replications: 8,
            completions_per_replication: n,
            warmup_completions: n / 10,
            ..SimConfig::default()
        }
    }

    fn within(est: &ClassEstimate, target: f64) -> bool {
        (est.paoi_mean - target).abs() <= est.ci_halfwidth
    }

    #[test]
    fn reproducible() {
        let s = spec(&[
            (0.3, exp(1.0)),
            (0.4, ServiceDistribution::uniform(0.5, 1.5).unwrap()),
        ]);
        for d in [
            Discipline::Buffer1Replace,
            Discipline::FcfsInfinite,
            Discipline::LcfsInfinite,
        ] {
            let a = simulate(&s, d, &cfg(2_000)).unwrap();
            let b = simulate(&s, d, &cfg(2_000)).unwrap();
            assert_eq!(a, b);
            let mut other = cfg(2_000);
            other.seed = 8;
            assert_ne!(a, simulate(&s, d, &other).unwrap());
        }
    }

    #[test]
    fn fcfs_mm1_paoi() {
        let est = simulate(
            &spec(&[(1.0, exp(2.0))]),
            Discipline::FcfsInfinite,
            &cfg(50_000),
        )
        .unwrap();
        assert!(within(&est.classes[0], 2.0), "{:?}", est.classes[0]);
        assert_eq!(est.classes[0].drops, 0);
        assert_eq!(est.classes[0].peaks, est.classes[0].completions);
    }

    #[test]
    fn md1_queueing_delay() {
        let d = ServiceDistribution::deterministic(1.0).unwrap();
        let est = simulate(&spec(&[(0.5, d)]), Discipline::FcfsInfinite, &cfg(50_000)).unwrap();
        // λ d² / (2 (1 - λ d)) = 0.5
        assert!(
            (est.classes[0].wait_mean - 0.5).abs() < 0.02,
            "{}",
            est.classes[0].wait_mean
        );
    }

    #[test]
    fn buffer_occupancy_single_class() {
        let est = simulate(
            &spec(&[(1.0, exp(1.0))]),
            Discipline::Buffer1Replace,
            &cfg(50_000),
        )
        .unwrap();
        let c = &est.classes[0];
        assert!((c.buffer_full_fraction - 1.0 / 3.0).abs() <= c.buffer_full_halfwidth.max(0.005));
        // E[W] = p / (λ (1 - p)) = 0.5
        assert!((c.wait_mean - 0.5).abs() < 0.02, "{}", c.wait_mean);
        assert!(c.drops > 0);
        assert!(within(c, 2.75), "{c:?}");
    }

    #[test]
    fn lcfs_initial_buffer_occupancy() {
        let est = simulate(
            &spec(&[(0.6, exp(1.0))]),
            Discipline::LcfsInfinite,
            &cfg(50_000),
        )
        .unwrap();
        let c = &est.classes[0];
        let p = 0.6 - 1.0 + 1.0 / 1.6;
        assert!(
            (c.buffer_full_fraction - p).abs() <= c.buffer_full_halfwidth.max(0.005),
            "{c:?}"
        );
        assert!(c.peaks < c.completions);
        assert_eq!(est.classes[0].drops, 0);
    }

    #[test]
    fn light_traffic_occupancy_vanishes() {
        let est = simulate(
            &spec(&[(1e-3, exp(1.0))]),
            Discipline::Buffer1Replace,
            &cfg(2_000),
        )
        .unwrap();
        assert!(est.classes[0].buffer_full_fraction < 0.01);
        assert_eq!(
            occupancy_probe(&est),
            vec![est.classes[0].buffer_full_fraction]
        );
    }

    #[test]
    fn overloaded_infinite_queue_diverges() {
        let mut c = cfg(1_000_000);
        c.queue_cap = 1_000;
        let err = simulate(&spec(&[(2.0, exp(1.0))]), Discipline::FcfsInfinite, &c).unwrap_err();
        assert_eq!(
            err,
            Error::SimulationDiverged {
                class: 0,
                cap: 1_000
            }
        );
        // the same load is fine with a one-slot buffer
        assert!(simulate(
            &spec(&[(2.0, exp(1.0))]),
            Discipline::Buffer1Replace,
            &cfg(1_000)
        )
        .is_ok());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(100);
        c.replications = 1;
        assert!(c.validate().is_err());
        let mut c = cfg(100);
        c.warmup_completions = 100;
        assert!(c.validate().is_err());
        let mut c = cfg(100);
        c.confidence_level = 1.0;
        assert!(c.validate().is_err());
    }
}

//! Peak age of information (PAoI) for single-server queues where `k` Poisson
//! sources share one non-preemptive static-priority server.
//!
//! Three buffer models are covered:
//!
//! * one replacing buffer slot per class ([`exact_mm`] for exponential
//!   service, [`bounds_mg`] for general service shared by all classes),
//! * infinite FCFS buffers ([`infinite::fcfs_paoi`], exact),
//! * infinite LCFS buffers ([`infinite::lcfs_paoi_upper_bound`]).
//!
//! [`sim`] is an event-driven simulator for all three, used as the oracle
//! against which the analytic values are checked.

pub mod bounds_mg;
pub mod dist;
pub mod error;
pub mod exact_mm;
pub mod infinite;
mod linalg;
pub mod report;
pub mod sim;
pub mod system;

pub use dist::{MixtureDistribution, ServiceDistribution, ServiceLaw};
pub use error::{Error, Result};
pub use report::{Method, PaoiComponents, PaoiReport, PaoiValue};
pub use system::{ClassSpec, SystemSpec};

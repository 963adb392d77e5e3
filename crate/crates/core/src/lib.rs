//! Dynamic traffic allocation across QoS traffic classes sharing one resource pool.
//!
//! The crate is organized bottom-up:
//!
//! * [`traffic`]: classes, observations, QoS scoring, constraints and throughput metrics.
//! * [`allocator`]: static, load-balancing, dynamic and reference-optimal policies.
//! * [`scenario`] and [`simulator`]: scenario files, seeded traces and the epoch loop.
//! * [`sweep`] and [`report`]: parameter sweeps, CSV/SVG output and summaries.
//! * [`cli`]: the `dta-sim` command line.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocator;
pub mod cli;
pub mod error;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod simulator;
pub mod sweep;
pub mod traffic;

pub use allocator::PolicyKind;
pub use error::{Error, Result};
pub use scenario::{parse_scenario, RangeSpec, Scenario};
pub use simulator::{compare_policies, run, SimulationResult};

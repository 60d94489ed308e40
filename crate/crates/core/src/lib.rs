//! Deterministic simulator and decision library for SDN-assisted networked
//! music performance.
//!
//! A network monitoring service probes every candidate path between two
//! musicians, an SDN controller moves the audio flow to a clearly better path
//! (hysteresis threshold), and a session service switches the sound cards to a
//! lower-latency audio mode when no path can keep end-to-end delay within the
//! Ensemble Performance Threshold, returning to the better mode once the
//! network recovers.
//!
//! All delay arithmetic is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`.

// `!(x >= 0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod engine;
mod error;
pub mod model;
pub mod monitoring;
pub mod network;
mod scalar;
pub mod scenario;
pub mod session;
pub mod summary;
pub mod trace;

pub use engine::{run, run_baseline, run_with, Adaptation, RunError};
pub use error::{Error, Result};
pub use model::{
    blocking_delay, end_to_end_delay, end_to_end_delay_asymmetric, meets_ept, AudioMode, TimeMs,
    DEFAULT_EPT_MS,
};
pub use network::{NodeId, PathId};
pub use scalar::Scalar;
pub use scenario::{bundled, parse_scenario, ScenarioError};
pub use summary::{improvement_pct, summarize, EventCounts};
pub use trace::{TraceKind, CSV_HEADER};

pub type SoundCardProfile = model::SoundCardProfile<f64>;
pub type DelayBudget = model::DelayBudget<f64>;
pub type DelaySample = model::DelaySample<f64>;
pub type DelaySchedule = network::DelaySchedule<f64>;
pub type PathDescriptor = network::PathDescriptor<f64>;
pub type Topology = network::Topology<f64>;
pub type ProbeConfig = monitoring::ProbeConfig<f64>;
pub type PathEstimate = monitoring::PathEstimate<f64>;
pub type Snapshot = monitoring::Snapshot<f64>;
pub type ReroutePolicy = controller::ReroutePolicy<f64>;
pub type UserProfile = session::UserProfile<f64>;
pub type SessionState = session::SessionState<f64>;
pub type SessionProfiles = session::SessionProfiles<f64>;
pub type Scenario = scenario::Scenario<f64>;
pub type TraceEvent = trace::TraceEvent<f64>;
pub type Trace = Vec<trace::TraceEvent<f64>>;
pub type Summary = summary::Summary<f64>;

/// Single-precision variants.
pub mod f32 {
    pub type Scenario = crate::scenario::Scenario<f32>;
    pub type TraceEvent = crate::trace::TraceEvent<f32>;
    pub type Summary = crate::summary::Summary<f32>;
    pub type SessionProfiles = crate::session::SessionProfiles<f32>;
}

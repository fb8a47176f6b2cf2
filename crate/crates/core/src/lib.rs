//! Queues whose service rate depends on the queue length through a threshold
//! policy: embedded-chain analysis, departure-process model, channel access
//! delay, power/delay threshold search and a discrete-event simulator.

pub mod channel;
pub mod departure;
pub mod error;
pub mod policy;
pub mod power;
pub mod quad;
pub mod queue;
pub mod scenario;
pub mod service;
pub mod sim;

pub use channel::{analyze_channel, ChannelResult, ChannelSpec, InterarrivalLaw};
pub use departure::{DepartureModel, DepartureOptions};
pub use error::{Error, Result};
pub use policy::{ArrivalSpec, ThresholdPolicy};
pub use power::{DesignContext, DesignEvaluation, PowerSpec, PsoConfig, SearchOutcome};
pub use queue::{DelayVariant, EpochMode, QueueAnalysis};
pub use scenario::Scenario;
pub use service::{ServiceDist, ServiceSpec};

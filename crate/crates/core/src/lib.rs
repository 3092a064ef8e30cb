//! Deterministic discrete-event simulation of mobile ad-hoc networks running
//! a multipath energy-aware source routing protocol (MEA-DSR) or a
//! simplified DSR baseline, with the metrics and batch harness used to
//! compare them.

pub mod dsr;
pub mod error;
pub mod harness;
pub mod meadsr;
pub mod metrics;
pub mod model;
pub mod protocol;
pub mod sim;

pub use error::{ConfigError, ModelError, ProtocolError, SimError};
pub use model::{Energy, NodeId, Route};
pub use sim::config::{Protocol, SimConfig};
pub use sim::engine::run;
pub use sim::trace::EventTrace;

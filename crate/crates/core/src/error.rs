use thiserror::Error;

use crate::model::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("route needs at least 2 nodes, got {0}")]
    RouteTooShort(usize),
    #[error("route visits {0} twice")]
    RouteLoop(NodeId),
    #[error("routes {primary} and {candidate} do not share endpoints")]
    EndpointMismatch { primary: String, candidate: String },
    #[error("route selection over an empty candidate set")]
    NoCandidates,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{node}: wait-time expiry for ({src}, {seq}) with no candidate routes")]
    EmptyRoutesTable { node: NodeId, src: NodeId, seq: u32 },
    #[error("{node}: cannot originate data to itself")]
    SelfAddressed { node: NodeId },
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("protocol invariant violated at t={time:.6}s: {source}")]
    Protocol {
        time: f64,
        #[source]
        source: ProtocolError,
    },
    #[error("engine invariant violated at t={time:.6}s: {message}")]
    Invariant { time: f64, message: String },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

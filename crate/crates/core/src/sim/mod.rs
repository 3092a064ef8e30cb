//! Deterministic discrete-event engine and its supporting models.

pub mod config;
pub mod engine;
pub mod mobility;
pub mod radio;
pub mod rng;
pub mod trace;
pub mod traffic;

//! Core of a self-hostable quantum runtime: circuit IR, calibration-aware
//! transpilation, simulated backends, execution pipelines, job scheduling and
//! a durable event store.

pub mod backend;
pub mod calibration;
pub mod circuit;
pub mod clock;
pub mod pipeline;
pub mod platform;
pub mod scheduler;
pub mod store;
pub mod transpiler;

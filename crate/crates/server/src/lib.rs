//! HTTP service, blocking client and command-line front end for the
//! quantum runtime in [`qruntime_core`].

pub mod api;
pub mod auth;
pub mod cli;
pub mod client;
pub mod config;
pub mod schemas;
pub mod wire;

pub use client::{Client, ClientError};

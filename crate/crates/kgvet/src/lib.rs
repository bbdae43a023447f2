//! Question answering grounded in a reviewable knowledge graph.
//!
//! This crate carries everything that needs an operating system: the LLM
//! gateway (HTTP or scripted mock), the generate/review/revise/answer agent,
//! the evaluation harness, file formats, and the command-line interface.
//! The underlying math and graph machinery live in `kgvet-core`.

#![deny(unsafe_code)]

pub mod agent;
pub mod clock;
pub mod gateway;
pub mod harness;
pub mod io;

pub mod cli;

pub use agent::{Agent, AgentConfig, AgentMode, AgentTrace};
pub use gateway::{Gateway, GatewayError, MockGateway, MockScript, ProviderConfig};

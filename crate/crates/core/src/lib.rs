//! Kernelized contextual-bandit joint user association and beam tracking
//! for mmWave vehicular networks, with a seeded system-level simulator.

pub mod agent;
pub mod bandit;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod error;
pub mod geom;
pub mod kernels;
pub mod linalg;
pub mod network;
pub mod phy;
pub mod scenario;
pub mod trace;

pub use error::{Error, Result};

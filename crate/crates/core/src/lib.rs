//! Hierarchical Gaussian-process reinforcement learning for multi-domain
//! dialogue management.
//!
//! A master policy (restaurant or hotel search) hands control to shared
//! sub-domain policies (booking, payment) through options. Every policy is a
//! sparse GP posterior over Q trained with episodic GPTD and acts by
//! posterior sampling.

pub mod acts;
pub mod adapt;
pub mod belief;
pub mod config;
pub mod db;
pub mod env;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernel;
pub mod ontology;
pub mod policy;
pub mod rng;
pub mod smdp;
pub mod trace;
pub mod user;
pub mod world;

pub use error::{Error, Result};

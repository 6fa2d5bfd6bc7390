//! Monte-Carlo and analytic simulation of variable-strength eavesdropping on
//! time-bin BB84.
//!
//! The crate is organised bottom-up: single-qubit states and channels
//! ([`quantum`], [`channels`]), pointer models for weak measurements
//! ([`pointer`]), the photon source ([`source`]), Eve's strategies
//! ([`attacks`]), the protocol itself ([`protocol`]) and closed-form
//! predictions with parameter sweeps ([`analytics`]).

pub mod analytics;
pub mod attacks;
pub mod channels;
pub mod error;
pub mod pointer;
pub mod protocol;
pub mod quadrature;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod source;
pub mod validation;

pub use error::{Error, Result};
pub use rng::RandomStream;

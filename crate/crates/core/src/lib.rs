//! Exact state-vector simulation of Heisenberg spin chains.
//!
//! The crate simulates ferromagnetic Heisenberg evolution using only
//! antiferromagnetic exchange pulses: each two-spin ferromagnetic step of
//! duration `t` is replaced by an antiferromagnetic pulse whose singlet phase
//! wraps once around `2π`. On top of that primitive it provides
//!
//! * a Loschmidt-echo test ([`echo`]) and a perfect-state-transfer test
//!   ([`transfer`]),
//! * a classical mean-field baseline for the echo ([`meanfield`]),
//! * a gate-noise Monte-Carlo harness with log-log slope fits ([`noise`]),
//! * an exact eigendecomposition oracle ([`chain`]) and a self-check suite
//!   ([`oracle`]).
//!
//! Sites are numbered from 1. Site 1 is the most significant bit of a basis
//! index and bit value 0 is spin-up.

pub mod chain;
pub mod echo;
pub mod error;
pub mod gates;
pub mod meanfield;
pub mod noise;
pub mod oracle;
pub mod statevec;
pub mod transfer;
pub mod trotter;

pub use error::{Error, Result};
pub use num_complex::Complex64;

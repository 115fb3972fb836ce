//! Fuzzy commitment and secure sketch biometric systems built on binary
//! linear codes.
//!
//! The crate covers the whole pipeline: bit-packed GF(2) algebra, code
//! construction with exact minimum-weight syndrome decoding, a BSC model of
//! biometric measurements, the four keyed/keyless system variants, attack
//! constructions for every compromise scenario, exact privacy-leakage
//! computation on small instances, multi-system rank profiles, and a seeded
//! Monte Carlo harness.

pub mod adversary;
pub mod biomodel;
pub mod codes;
pub mod error;
pub mod gf2;
pub mod harness;
pub mod leakage;
pub mod multisys;
pub mod schemes;

pub use error::{Error, Result};
pub use gf2::{BitMatrix, BitVec};

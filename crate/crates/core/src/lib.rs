//! Exact sampling of the stationary workload of a single-server queue,
//! jointly with its driving random walk, by dominated coupling from the past.
//!
//! The crate is `no_std` with `alloc`. Randomness is always supplied by the
//! caller through [`rand::Rng`].

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod coupling;
pub mod error;
pub mod increment;
pub mod math;
pub mod oracles;
pub mod params;
pub mod partition;
pub mod proposals;
pub mod sampler;

pub use error::{Error, Result};
pub use increment::{CenteredPareto, FiniteLattice, IncrementLaw, LatticeLaw, ParetoLattice, Region};
pub use params::{AlgorithmParams, BetaMode, FeasibilityReport};
pub use sampler::{BackwardSample, PatchOutcome, Sampler, WalkPath};

//! Bandwidth allocation for a millimetre-wave rail network with one base
//! station and a row of full-duplex mobile relays.
//!
//! The crate is `no_std` with `alloc`. Wall-clock timing is injected through
//! [`clock::Clock`].

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod allocators;
pub mod certify;
pub mod clock;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod problem;
pub mod qp;
pub mod radio;
pub mod sqp;

pub use allocators::{AllocatorResult, BarrierOptions, Method};
pub use clock::{Clock, NoClock};
pub use error::{Error, Result};
pub use geometry::{Point2D, Scenario};
pub use problem::{Objective, Separable};
pub use radio::{CapacityModel, RadioParams, RadioSettings};
pub use sqp::{solve_sqp, SolverConfig, SolverReport};

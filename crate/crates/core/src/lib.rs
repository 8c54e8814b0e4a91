//! Simulation and verification lab for loop-erased random walk and SLE(2).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod content;
pub mod curve;
pub mod curvemetric;
pub mod error;
pub mod experiments;
pub mod harmonic;
pub mod lab;
pub mod lattice;
pub mod lerw;
pub mod loewner;
pub mod rng;
pub mod rnweights;
pub mod saw;
pub mod stats;

pub use curve::ParamCurve;
pub use error::{Error, Result};
pub use lattice::{approximate, DomainSpec, Edge, LatticeDomain, Site};
pub use saw::Saw;

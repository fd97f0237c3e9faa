//! Exact generalized maximum flow solver.
//!
//! Implements the strongly polynomial contraction algorithm for
//! generalized flow maximization end to end: flow-generating-cycle
//! detection, the two-phase feasibility/optimization scheme, the
//! augmenting-path/label-update engine in reference and heap-accelerated
//! form, arc contraction with exact uncontraction, and an independent
//! exact-simplex oracle for verification at desk scale.

pub mod contract;
pub mod detect;
pub mod model;
pub mod netflow;
pub mod oracle;
pub mod ppn;
pub mod rational;
pub mod stats;

pub use model::{Instance, LabelVector, Potentials, RelabeledFlow};
pub use rational::{Int, Rational};

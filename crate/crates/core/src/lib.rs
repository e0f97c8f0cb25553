//! Small-gain analysis of networks of input-to-state stable systems.
//!
//! Infinite index sets are handled through finite truncations: finite gain
//! matrices, spatially invariant banded families evaluated on a periodic or
//! zero-padded window, and block-diagonal families. Everything in this crate is
//! pure computation on `alloc` collections; IO and file formats live in the
//! `sgnet` companion crate.
//!
//! Module map:
//!
//! - [`comparison`]: comparison functions (classes K, K∞, KL, PD) as expression trees.
//! - [`network`]: gain families, truncated state vectors, aggregated subsystem data.
//! - [`operator`]: the max- and sum-form gain operators, their powers, spectral
//!   radius, cycle structure, Kleene star and points of strict decay.
//! - [`cone`]: distance to the cone and the small-gain condition probes.
//! - [`discrete`]: the discrete monotone system, eISS certificates, MLIM probe and
//!   the Lyapunov function built from operator powers.
//! - [`ode`]: the two spatially invariant ODE networks on periodic windows.
//! - [`verifier`]: small-gain theorem hypotheses and gain synthesis.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod comparison;
pub mod cone;
pub mod cycles;
pub mod discrete;
pub mod envelope;
mod error;
pub(crate) mod math;
pub mod network;
pub mod ode;
pub mod operator;
pub mod sampling;
pub mod verifier;

pub use comparison::{ComparisonFunction, FnClass, KlFunction};
pub use error::{Error, Result};
pub use network::{AggregationMode, Boundary, GainFamily, GainStructure, StateVector};
pub use operator::GainOperator;

/// Outcome vocabulary shared by every probe.
///
/// Probes can refute a condition with a concrete witness, but they can only
/// support it with finitely many samples.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Evidence {
    /// Decided exactly (closed form, criterion or finite check).
    Pass,
    /// No counterexample among `samples` tested points.
    Supported { samples: usize },
    /// A witness violates the condition.
    Falsified { witness: alloc::string::String },
    /// The probe ran out of budget before reaching a verdict.
    Inconclusive { reason: alloc::string::String },
}

impl Evidence {
    pub fn is_positive(&self) -> bool {
        matches!(self, Evidence::Pass | Evidence::Supported { .. })
    }

    pub fn is_falsified(&self) -> bool {
        matches!(self, Evidence::Falsified { .. })
    }
}

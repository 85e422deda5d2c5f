//! Simulation toolkit for a voltage-tunable Huygens metasurface relay.
//!
//! The pipeline runs from unit-cell circuit physics ([`cell`]) through
//! phase lookup-table synthesis ([`lut`]), beam steering and splitting
//! ([`beam`]), link budgets ([`budget`]), coverage and blockage scenarios
//! ([`scenario`]) to beam-alignment protocols ([`protocol`]).

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod beam;
pub mod budget;
pub mod cell;
pub mod config;
pub mod consts;
pub mod error;
pub mod lut;
pub mod protocol;
pub mod scenario;

pub use error::{Error, Result};

//! Compact model of depletion-mode microdisk and microring modulators.
//!
//! The crate covers the lumped resonator equations, the electrical
//! parasitics, the microheater, a joint transient solver working on the
//! analytic (baseband) field, drive generators, post-processing and the
//! measurement-to-model extraction flow.

pub mod analysis;
pub mod card;
pub mod electrical;
pub mod error;
pub mod extraction;
pub mod io;
pub mod model;
pub mod scenario;
pub mod solver;
pub mod stimulus;
pub mod thermal;

pub use error::{Error, Result};

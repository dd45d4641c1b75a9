//! Stochastic network calculus bounds for a single 802.11 DCF node, with a
//! slotted DCF simulator for validation.
//!
//! The pipeline runs bottom-up: [`dcf`] solves the MAC model and bounds the
//! impairment MGF, [`bounds`] turns that into a weak service curve and
//! optimizes backlog and delay bounds against a [`traffic`] model, and
//! [`sim`] measures the same quantities on simulated traces.

pub mod bounds;
pub mod config;
pub mod dcf;
pub mod error;
pub mod minplus;
pub mod numeric;
pub mod report;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};

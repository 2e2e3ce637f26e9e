//! Shared checks for the property tests and the acceptance suite.

pub mod invariants;

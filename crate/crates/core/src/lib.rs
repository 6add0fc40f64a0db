//! Benchmark harness for prompted LLM time-series forecasting.
//!
//! The pipeline runs dataset construction ([`series`]), prompt rendering
//! ([`prompt`]), model querying ([`gateway`]), answer extraction
//! ([`extract`]) and scoring ([`metrics`]), orchestrated by [`runner`].
//! [`classical`] holds the decomposition forecaster that powers the
//! offline oracle backend and the classical comparison rows.

pub mod classical;
pub mod extract;
pub mod gateway;
pub mod metrics;
pub mod prompt;
pub mod runner;
pub mod series;

//! Audit toolkit for algorithmic screening outcomes.
//!
//! The library answers three questions about a screening dataset in which
//! one or more scoring models rate applicants for positions:
//!
//! 1. **Adverse impact** ([`adverse`]): per position, does any demographic
//!    group fall below the four-fifths impact-ratio gate *and* a two-sample
//!    z-test significance gate, with Benjamini–Hochberg control across
//!    positions? Aggregate rollups show how position-level disparities can
//!    be masked in aggregate.
//! 2. **Outcome homogenization** ([`homog`]): are applicants who apply to
//!    many positions rejected *everywhere* more often than independent
//!    decisions would predict? The baseline of independence is the exact
//!    Poisson-binomial law over each applicant's own selection rates.
//! 3. **Counterfactual concentration** ([`sim`]): if applicants had applied
//!    more broadly under varying model monoculture, how fast does systemic
//!    rejection decay? A connected-set expansion bounds plausible extra
//!    applications, and replicated sampling traces the decay curve.
//!
//! [`dataset`] ingests and cleans raw application CSVs, [`synth`] generates
//! calibrated synthetic corpora with plantable anomalies for validation, and
//! [`cli`] wires everything into the `screenaudit` binary.

pub mod adverse;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod homog;
pub mod report;
mod seeding;
pub mod sim;
pub mod stats;
pub mod synth;

pub use error::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

//! Generalized Cox (phase-type) distributions.
//!
//! A generalized Cox distribution picks one of several parallel branches at
//! random and then traverses that branch's exponential stages in series. The
//! crate covers:
//!
//! * [`model`]: the branch representation, classical Cox conversion and the
//!   phase-type matrix form;
//! * [`analysis`]: Laplace transform, raw moments, density and cdf, and the
//!   minimum second moment for a given routing;
//! * [`fitting`]: minimal-state two-moment matching plus the Sauer-Chandy
//!   baseline;
//! * [`sampling`]: reproducible inverse-transform variate generation;
//! * [`markov`]: absorbing CTMC export (JSON and DOT) and absorption moments;
//! * [`des`]: an event calendar and an M/PH/1 queue for end-to-end checks;
//! * [`cli`]: the `phasefit` command-line tool.
//!
//! ```
//! use phasefit::{analysis, fitting};
//!
//! let fit = fitting::fit_two_moments(1.0, 0.4).unwrap();
//! assert_eq!(fit.n_transient, 3);
//! assert!((analysis::variance(&fit.model) - 0.4).abs() < 1e-12);
//! ```

pub mod analysis;
pub mod cli;
pub mod des;
pub mod error;
pub mod fitting;
pub mod markov;
pub mod model;
pub mod sampling;

pub use error::{Error, Result};
pub use model::{Branch, ClassicalCoxSpec, GeneralizedCoxModel, PhaseTypeRep};

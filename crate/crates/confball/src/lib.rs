//! Adaptive confidence balls in the Gaussian sequence model.
//!
//! The model is `y_{j,k} = theta_{j,k} + n^{-1/2} z_{j,k}` on the dyadic
//! index set `j = 0..J-1`, `k = 1..2^j`, with i.i.d. standard normal noise.
//! This crate provides:
//!
//! * [`numerics`] - the special functions everything else needs (normal and
//!   chi-squared CDFs/quantiles, and the solver for `lambda - log lambda = c`);
//! * [`sequence`] - coefficient vectors, Besov bodies, observation sampling,
//!   and the least-favorable configurations (hypercubes, vertex sets);
//! * [`blocks`] - block partitioning, block energies, and the hard block
//!   thresholding estimator that centers every ball;
//! * [`balls`] - the three confidence-ball constructions: single resolution
//!   level, Besov-adaptive, and honest over all of `R^N`;
//! * [`bounds`] - executable forms of the lower bounds and the supporting
//!   lemmas;
//! * [`harness`] - a seeded Monte-Carlo harness for coverage, radius-scaling,
//!   lower-bound, and lemma-verification experiments.
//!
//! All randomness is counter-based: every replicate stream is a pure function
//! of `(seed, replicate index)`, so reports are byte-identical across runs
//! and thread counts.

pub mod balls;
pub mod blocks;
pub mod bounds;
mod error;
pub mod harness;
pub mod numerics;
pub mod sequence;

pub use balls::{BallKind, ConfidenceBall, CutoffLevels, RadiusSqTerms};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, ExperimentKind, ExperimentReport};
pub use sequence::{BesovBody, CoefficientVector, NoiseModel};

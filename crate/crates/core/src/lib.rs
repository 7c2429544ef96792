//! Minwise hashing and b-bit minwise hashing with maximum-likelihood
//! estimators for set intersection, resemblance and containment.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`]: validated sets, ground-truth triples and observed counts.
//! - [`hashing`]: the seeded hash family, sketches, bit packing and the
//!   on-disk sketch format.
//! - [`minwise`]: the three simple estimators, the 3-cell MLE and their
//!   asymptotic variances.
//! - [`bbit`]: the large-universe cell model for b-bit values and the five
//!   cell-grouping schemes.
//! - [`mle`]: generic one-parameter multinomial likelihood machinery.
//! - [`oracle`]: exact and brute-force reference probabilities.
//! - [`analysis`]: variance-ratio grids and the Monte Carlo harness.
//! - [`corpus`]: input parsing and corpus statistics.
//!
//! Numerical code is generic over [`Scalar`] (field operations, including
//! exact rationals) or [`Real`] (IEEE floats). The aliases below fix the
//! common instantiations.

pub mod analysis;
pub mod bbit;
pub mod corpus;
mod error;
pub mod hashing;
pub mod minwise;
pub mod mle;
pub mod oracle;
pub mod scalar;
pub mod types;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};
pub use types::{
    validate_ground_truth, ContingencyTable, PairCounts3, PairGroundTruth, SetRecord,
    UniverseConfig,
};

/// Arbitrary-precision rational used by the exact paths.
pub type Exact = num_rational::BigRational;

pub type Rates = bbit::RateTriple<f64>;
pub type Estimate = minwise::EstimateResult<f64>;
pub type Solution = mle::MleSolution<f64>;
pub type ThreeCellProbs = minwise::ThreeCell<f64>;
pub type ExactThreeCellProbs = minwise::ThreeCell<Exact>;
pub type SummaryProbs = bbit::SummaryProbs<f64>;

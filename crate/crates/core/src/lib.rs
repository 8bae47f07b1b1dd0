//! Multiscale correlation analysis for financial time series.
//!
//! The crate is organised around a handful of pipelines:
//!
//! * [`ingest`]: tick parsing, uniform resampling, log-returns and activity statistics.
//! * [`distributions`]: return-distribution tails and linear autocorrelation.
//! * [`detrended`]: profiles, bidirectional segmentation, polynomial detrending and
//!   q-order fluctuation functions (MFDFA / MFCCA kernel).
//! * [`scaling`]: generalized Hurst exponents, singularity spectra and the
//!   q-dependent detrended cross-correlation coefficient.
//! * [`surrogates`]: Fourier phase-randomized and shuffled null models.
//! * [`arbitrage`]: triangular and cross-venue arbitrage signals.
//! * [`matrix`]: correlation matrices, Marchenko–Pastur reference, market-factor
//!   removal, quasi-idempotence and base-currency re-expression.
//! * [`network`]: correlation distances, minimal spanning trees and dendrograms.
//!
//! All standard deviations use the population (1/N) convention.

pub mod arbitrage;
pub mod detrended;
pub mod distributions;
mod error;
pub mod ingest;
pub mod matrix;
pub mod network;
pub mod plot;
pub mod scaling;
pub mod stats;
pub mod surrogates;
pub mod synthetic;

pub use error::{Error, Result};

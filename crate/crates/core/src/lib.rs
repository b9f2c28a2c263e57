//! Numerical toolkit for Hermite variations of stationary Gaussian sequences.
//!
//! The crate covers the full desk-scale pipeline for studying partial sums
//! `X_n = sum_{k<n} H_q(Z_k)` of a subordinated Gaussian sequence:
//!
//! - [`covariance`]: exact fractional-Gaussian-noise autocovariances, the
//!   subordinated covariances `q! rho^q`, partial-sum variances and the
//!   asymptotic constants `sigma_q^2` (summable regime) and `c_q` (critical
//!   regime `H = 1 - 1/(2q)`).
//! - [`sampler`]: exact-in-distribution simulation by circulant embedding,
//!   with deterministic counter-style replicate streams.
//! - [`hermite`]: Hermite polynomials, variation statistics, normalizers,
//!   the carre-du-champ statistic and blocking subsequences.
//! - [`stein`]: Stein factors and matrices, identity residual tests and
//!   moment reports.
//! - [`distances`]: Kolmogorov and Wasserstein distances on empirical
//!   measures plus the Stein-based and dimension-logarithmic bounds.
//! - [`experiments`]: seeded, reproducible audit suites gluing the above
//!   into pass/fail decay checks.

pub mod covariance;
pub mod distances;
mod error;
pub mod experiments;
mod gaussian;
pub mod hermite;
mod quadrature;
pub mod sampler;
pub mod stein;

pub use covariance::{CovarianceModel, ChaosOrder, HurstParam};
pub use error::{Error, Result};
pub use gaussian::{gaussian_abs_moment, normal_cdf, normal_pdf};
pub use hermite::{BlockingSubsequence, Regime, VariationSpec};
pub use sampler::{GaussianPath, PathEnsemble, SamplerPlan};

//! Feasible generalized least squares for linear panels whose regressors and
//! residuals share a latent factor structure.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is a pure function of its inputs: file formats,
//! the command line and the thread pool live in the companion `panelgls`
//! crate.
//!
//! Layout:
//!
//! - [`linalg`]: orthonormal complements, Woodbury inversion, the
//!   Moore–Penrose sandwich, SPD factorizations.
//! - [`panel`]: observed panel, the complement transform, the latent
//!   structure used by simulation and oracle estimators.
//! - [`weight`]: GLS weight matrices and their factorizations.
//! - [`estimators`]: OLS, unfeasible GLS, feasible GLS, iterated GLS, the
//!   joint common-regressor estimators and the cross-sectional dual.
//! - [`inference`]: Bartlett HAC sandwiches and Wald statistics.
//! - [`dgp`]: the factor-model data generating process.
//! - [`mc`]: replication engine and mean/rmse aggregation.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dgp;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod linalg;
pub mod mc;
pub mod panel;
pub mod weight;

pub use error::{Error, Result};
pub use estimators::{EstimateSet, Method};
pub use linalg::{Matrix, OrthoComplement};
pub use panel::{LatentStructure, PanelData, TransformedPanel};
pub use weight::WeightMatrix;

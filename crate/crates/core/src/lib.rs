//! Imaging of small second-harmonic generating scatterers in random media.
//!
//! The crate reproduces, at desk scale, a complete numerical experiment:
//!
//! 1. [`medium`] synthesizes a random susceptibility field with Gaussian
//!    autocorrelation and rasterizes the small scatterers.
//! 2. [`solver`] solves the coupled Helmholtz system for the fundamental
//!    wave `u₁` and the second harmonic `u₂` with a finite-difference scheme
//!    surrounded by a perfectly matched layer.
//! 3. [`acquisition`] loops over the incident plane waves and records the
//!    array data `d₁`, `d₂`.
//! 4. [`imaging`] forms Kirchhoff migration and coherent interferometric
//!    (CINT) images at either harmonic.
//! 5. [`gomodel`] provides a geometrical-optics phase-screen surrogate for
//!    the data together with closed-form predictions of scattering lengths,
//!    decoherence lengths and CINT point spread functions.
//! 6. [`stats`] runs Monte-Carlo ensembles and measures statistical stability.
//!
//! All lengths are expressed in units of the wavelength `λ` of the incident
//! field unless stated otherwise; the reference wave speed is normalized to 1.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod error;
pub mod geometry;
pub mod gomodel;
pub mod imaging;
pub mod io;
pub mod medium;
pub mod solver;
pub mod special;
pub mod stats;
pub mod waves;

pub use error::{Error, Result};
pub use geometry::{Grid2, Point2};

/// Complex scalar used for all wave fields.
pub type C64 = num_complex::Complex64;

//! Link-level simulation and optimization for fluid reconfigurable
//! intelligent surfaces (FRIS).
//!
//! A FRIS is a reflecting surface whose elements may each relocate inside
//! their own subarea besides applying a reflection phase. The crate models
//! position-dependent Rician channels, optimizes element positions (PSO or
//! grid search), reflection phases (semidefinite relaxation with successive
//! convex approximation) and BS precoding (WMMSE), and runs Monte Carlo
//! comparisons against a conventional fixed-position RIS.

// `!(x > 0.0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod link;
pub mod numerics;
pub mod phase_sdr;
pub mod precoder;
pub mod pso;

pub use error::{Error, Result};

/// Dense complex matrix used throughout.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
pub use num_complex::Complex64;

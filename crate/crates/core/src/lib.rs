//! Probability representation of spin states.
//!
//! A spin-`j` density matrix is mapped to the family of probabilities
//! `w(i, u)` of measuring projection `i` along the axis obtained by rotating
//! the quantization axis with Euler angles `u`. The map is invertible: the
//! density matrix is recovered by integrating the tomogram against Wigner
//! D-functions with 3j-symbol weights. The same construction with two
//! independent rotations covers the `(2j+1)²`-dimensional rotational states
//! of a symmetric top.
//!
//! Modules:
//!
//! - [`angular`]: half-integers, Euler angles, Wigner d/D functions, 3j symbols
//! - [`quadrature`]: exact product quadrature over the rotation group
//! - [`states`]: spinors, density matrices, Bloch vectors, purity, fidelity
//! - [`spin`]: forward map, closed forms, reconstruction, physical projection
//! - [`top`]: symmetric-top energies, double-rotation tomograms and their inverse
//! - [`shots`]: finite-shot measurement simulation and convergence studies
//! - [`files`]: JSON state and tomogram files
//!
//! Grid tabulation and the inversion integrals run on rayon when the
//! `parallel` feature is enabled (the default); see [`Exec`].

pub mod angular;
mod error;
mod exec;
pub mod files;
pub mod linalg;
pub mod quadrature;
pub mod shots;
pub mod spin;
pub mod states;
pub mod top;

pub use angular::{EulerAngles, HalfInt};
pub use error::{Error, Result};
pub use exec::Exec;
pub use quadrature::{build_grid, minimal_grid, QuadratureGrid};
pub use spin::SpinTomogram;
pub use states::{BlochVector, DensityMatrix, Fiducial, Spinor};
pub use top::{TopDensityMatrix, TopTomogram};

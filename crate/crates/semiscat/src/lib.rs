//! Semiclassical forward scattering for potentials with homogeneous
//! tails, and the matching inverse pipeline.
//!
//! The library builds matrix elements of the scattering operator at
//! small semiclassical parameter h as a power expansion whose leading
//! exponents encode the homogeneity degrees of the potential, then
//! runs the reverse direction: fit sampled matrix elements to the
//! exponent lattice, strip the layers one by one, and invert a
//! regularized X-ray transform to recover each angular profile.
//!
//! Module map:
//! - [`potential`]: finite homogeneous expansions with a smooth core
//!   cutoff, exact symbolic derivatives per term.
//! - [`flow`]: the classical Hamiltonian flow and a Monte Carlo
//!   non-trapping certifier.
//! - [`xray`]: full-line and half-line integrals of the potential and
//!   the ray-sampling operator matrix.
//! - [`symbols`]: the exponent lattice, recursive transport solutions,
//!   and the coefficient operators of the expansion.
//! - [`forward`]: oscillatory test functions on a Fourier grid,
//!   support verification, and synthesis of matrix elements over an
//!   h-grid.
//! - [`inversion`]: power-series fitting, layer stripping, and
//!   regularized recovery of angular profiles, plus decay diagnostics.
//! - Support layers: [`poly`], [`smooth`], [`quad`], [`ode`],
//!   [`sphere`], [`linalg`], [`config`], [`manifest`].

pub mod config;
pub mod flow;
pub mod forward;
pub mod inversion;
pub mod manifest;
pub mod linalg;
pub mod ode;
pub mod poly;
pub mod potential;
pub mod quad;
pub mod smooth;
pub mod sphere;
pub mod symbols;
pub mod xray;

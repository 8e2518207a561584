//! Reconstruction of a rigid 2-D obstacle from time-domain elastic scattered-field
//! data of a single incident plane wave.
//!
//! The displacement field is split by a Helmholtz decomposition into compressional
//! and shear potentials, which turns the exterior Navier problem into a pair of
//! coupled wave equations. Single-layer ansatzes reduce those to coupled boundary
//! integral equations; BDF2 convolution quadrature decouples the time axis into a
//! family of complex frequencies, and each frequency problem is solved with a
//! Nyström method using trigonometric quadrature for the logarithmic and Cauchy
//! singularities. The inverse solver sweeps the quadrature frequencies with
//! Tikhonov-regularized Newton updates of a star-shaped boundary parametrization.
//!
//! Pipeline in terms of the crate modules:
//!
//! * [`specfun`] — modified Bessel functions of complex argument backing every
//!   frequency-domain kernel.
//! * [`geometry`] — star-shaped boundary curves and the observation circle.
//! * [`cq`] — BDF2 convolution-quadrature grid and the scaled discrete Fourier
//!   transform connecting time samples with the contour frequencies.
//! * [`bie`] — per-frequency Nyström assembly, dense solve, and evaluation of the
//!   scattered field at the observation points.
//! * [`forward`] — synthetic data generation (incident waves, full forward sweep,
//!   multiplicative noise).
//! * [`inverse`] — boundary reconstruction: residuals, shape derivatives,
//!   regularized updates, frequency-sweeping iteration.
//! * [`config`] / [`cli`] — run configuration, file formats and the command-line
//!   entry points (`simulate`, `invert`, `verify`, `plotdata`).
//!
//! The `examples/` directory contains one runnable program per capability; start
//! with `cargo run --release --example forward_simulation`.

pub mod bie;
pub mod cli;
pub mod config;
pub mod cq;
pub mod forward;
pub mod geometry;
pub mod inverse;
pub mod specfun;
pub mod verify;

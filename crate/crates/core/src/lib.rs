//! Center-outward distribution and quantile functions.
//!
//! The center-outward quantile function `Q` of a probability density `p` on
//! `R^d` is the gradient of a convex potential pushing the spherical-uniform
//! measure `U_d` (uniform radius times uniform direction) onto `p`; its inverse
//! `F` is the center-outward distribution function. Images of the spheres
//! `|x| = r` under `Q` are closed, nested quantile contours.
//!
//! Two solvers compute `Q`:
//!
//! - [`semidiscrete`]: exact transport in the plane to a discrete target, via
//!   Laguerre cells of the unit disk with closed-form `U_2` cell integrals and a
//!   damped Newton method on the dual weights.
//! - [`entropic`]: log-domain Sinkhorn on a polar grid of the ball (`d = 2, 3`)
//!   with barycentric map extraction.
//!
//! [`quantile`] turns either solution into evaluators and contours,
//! [`diagnostics`] checks the structural properties expected of `Q`
//! (pushforward, monotonicity, Monge–Ampère identity, injectivity), and
//! [`measures`] holds the reference measure, target densities and the closed
//! form radial oracle.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod entropic;
pub mod error;
pub mod geometry;
pub mod io;
pub mod measures;
pub mod quantile;
pub mod semidiscrete;

pub use error::{Error, Result};

/// Crate version embedded into every artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

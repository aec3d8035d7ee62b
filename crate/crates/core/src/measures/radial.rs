use std::fmt;
use std::sync::Arc;

use super::quadrature::integrate_with_breaks;
use super::{norm, sphere_area};
use crate::error::{domain, Error, Result};

const QUAD_TOL: f64 = 1e-12;
const ROOT_TOL: f64 = 1e-12;

/// Scalar profile `r -> p(r)` of a radially symmetric density on `R^d`.
#[derive(Clone)]
pub struct RadialProfile {
    dim: usize,
    profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Radii where the profile is not smooth (e.g. the edge of a uniform disk).
    breaks: Vec<f64>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("dim", &self.dim)
            .field("breaks", &self.breaks)
            .finish()
    }
}

impl RadialProfile {
    pub fn new<F>(dim: usize, profile: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            dim,
            profile: Arc::new(profile),
            breaks: Vec::new(),
        }
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    /// Standard Gaussian with covariance `sigma^2 I`.
    pub fn gaussian(dim: usize, sigma: f64) -> Self {
        let norm_const = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-(dim as f64) / 2.0);
        Self::new(dim, move |r| {
            norm_const * (-r * r / (2.0 * sigma * sigma)).exp()
        })
    }

    /// Uniform density on the ball of the given radius.
    pub fn uniform_ball(dim: usize, radius: f64) -> Self {
        let vol = sphere_area(dim) * radius.powi(dim as i32) / dim as f64;
        Self::new(dim, move |r| if r <= radius { 1.0 / vol } else { 0.0 }).with_breaks(vec![radius])
    }

    /// Profile of `U_d` itself, `c_d / r^(d-1)` on the unit ball.
    pub fn spherical_uniform(dim: usize) -> Self {
        let c = 1.0 / sphere_area(dim);
        Self::new(dim, move |r| {
            if r < 1.0 {
                c / r.powi(dim as i32 - 1)
            } else {
                0.0
            }
        })
        .with_breaks(vec![1.0])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.profile)(r)
    }

    /// `P(B_q) = |S^(d-1)| * int_0^q r^(d-1) p(r) dr`.
    pub fn cumulative(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return 0.0;
        }
        let d = self.dim as i32;
        let integrand = |r: f64| r.powi(d - 1) * (self.profile)(r);
        sphere_area(self.dim) * integrate_with_breaks(&integrand, 0.0, q, &self.breaks, QUAD_TOL)
    }

    /// Total mass, integrating until the tail contribution is negligible.
    pub fn total_mass(&self) -> f64 {
        let mut hi = self.breaks.iter().copied().fold(1.0, f64::max);
        let mut total = self.cumulative(hi);
        for _ in 0..64 {
            let next = self.cumulative(2.0 * hi);
            let done = (next - total).abs() < 1e-15;
            total = next;
            hi *= 2.0;
            if done {
                break;
            }
        }
        total
    }
}

/// Radius `q(s)` solving `s = |S^(d-1)| int_0^q r^(d-1) p(r) dr`, by geometric
/// bracketing followed by bisection on the monotone cumulative integral.
pub fn radial_quantile_oracle(profile: &RadialProfile, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("quantile order {s} outside (0, 1)"));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut grow = 0;
    while profile.cumulative(hi) < s {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Convergence {
                iterations: grow,
                residual: s - profile.cumulative(hi),
            });
        }
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if profile.cumulative(mid) < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Radial quantile map `x -> q(|x|) x / |x|` on the punctured unit ball.
pub fn radial_quantile_map(profile: &RadialProfile, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != profile.dim() {
        return domain("point dimension does not match profile");
    }
    let r = norm(x);
    if r == 0.0 {
        return domain("radial quantile map is undefined at the origin");
    }
    if r >= 1.0 {
        return domain(format!("|x| = {r} is outside the open unit ball"));
    }
    let q = radial_quantile_oracle(profile, r)?;
    Ok(x.iter().map(|c| q * c / r).collect())
}

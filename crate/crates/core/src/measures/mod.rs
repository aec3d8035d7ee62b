//! Reference measure on the unit ball, target densities and the radial oracle.
//!
//! The reference measure `U_d` is the law of `R * Theta` with `R ~ Uniform[0, 1]`
//! and `Theta` uniform on the unit sphere. Its Lebesgue density is
//! `c_d / |x|^(d-1)` on the open unit ball, where `c_d` is the reciprocal of the
//! area of the unit sphere.

mod density;
pub mod quadrature;
mod radial;

pub use density::{builtin_density, monte_carlo_mass, Density, Gaussian, GaussianMixture};
pub use radial::{radial_quantile_map, radial_quantile_oracle, RadialProfile};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};

/// Area of the unit sphere `S^(d-1)` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    use std::f64::consts::PI;
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 2.0) * sphere_area(d - 2),
    }
}

/// The spherical-uniform measure `U_d` on the unit ball.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBall {
    d: usize,
    c_d: f64,
}

impl UniformBall {
    pub fn new(d: usize) -> Result<Self> {
        if d < 1 {
            return domain("dimension must be at least 1");
        }
        Ok(Self {
            d,
            c_d: 1.0 / sphere_area(d),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Normalizing constant `1 / H^(d-1)(S^(d-1))`.
    pub fn c_d(&self) -> f64 {
        self.c_d
    }

    /// `U_d(B_r)`; the radial coordinate is uniform so this is `r` clamped to `[0, 1]`.
    pub fn ball_mass(&self, r: f64) -> f64 {
        r.clamp(0.0, 1.0)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        uniform_ball_density(self.d, x)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_uniform_ball(self.d, n, seed)
    }
}

/// Lebesgue density of `U_d` at `x`: `c_d / |x|^(d-1)` inside the ball, zero outside.
///
/// The density is singular at the origin; callers integrating near zero must
/// use the closed-form radial measure instead of pointwise evaluation.
pub fn uniform_ball_density(d: usize, x: &[f64]) -> Result<f64> {
    if d < 2 {
        return domain("spherical-uniform density requires d >= 2");
    }
    if x.len() != d {
        return domain(format!("point has {} coordinates, expected {d}", x.len()));
    }
    let norm = norm(x);
    if norm == 0.0 {
        return Err(Error::Singularity);
    }
    if norm >= 1.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (sphere_area(d) * norm.powi(d as i32 - 1)))
}

/// Draws `n` points from `U_d` using the radius-times-direction product law.
pub fn sample_uniform_ball(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let r: f64 = rng.random();
            let mut dir = random_direction(&mut rng, d);
            dir.iter_mut().for_each(|c| *c *= r);
            dir
        })
        .collect()
}

pub fn random_direction<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    if d == 2 {
        let theta = rng.random::<f64>() * std::f64::consts::TAU;
        return vec![theta.cos(), theta.sin()];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn normalizing_constants() {
        assert_relative_eq!(UniformBall::new(2).unwrap().c_d(), 1.0 / (2.0 * PI));
        assert_relative_eq!(UniformBall::new(3).unwrap().c_d(), 1.0 / (4.0 * PI));
        assert_relative_eq!(sphere_area(4), 2.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn density_examples() {
        let v = uniform_ball_density(2, &[0.5, 0.0]).unwrap();
        assert_relative_eq!(v, 1.0 / PI, epsilon = 1e-15);
        assert_eq!(uniform_ball_density(2, &[2.0, 0.0]).unwrap(), 0.0);
        let v3 = uniform_ball_density(3, &[0.0, 0.5, 0.0]).unwrap();
        assert_relative_eq!(v3, 1.0 / PI, epsilon = 1e-15);
        assert!(matches!(
            uniform_ball_density(2, &[0.0, 0.0]),
            Err(Error::Singularity)
        ));
    }

    #[test]
    fn total_mass_is_one_in_polar_coordinates() {
        // Integrate c_d r^(1-d) * r^(d-1) * |S^(d-1)| dr over [0, 1] by midpoint rule.
        for d in [2usize, 3] {
            let n = 1000;
            let mass: f64 = (0..n)
                .map(|k| {
                    let r = (k as f64 + 0.5) / n as f64;
                    let u = uniform_ball_density(d, &{
                        let mut x = vec![0.0; d];
                        x[0] = r;
                        x
                    })
                    .unwrap();
                    u * sphere_area(d) * r.powi(d as i32 - 1) / n as f64
                })
                .sum();
            assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampler_moments_and_determinism() {
        let pts = sample_uniform_ball(2, 100_000, 7);
        let radii: Vec<f64> = pts.iter().map(|p| norm(p)).collect();
        let mean = radii.iter().sum::<f64>() / radii.len() as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean radius {mean}");
        let frac = radii.iter().filter(|&&r| r <= 0.3).count() as f64 / radii.len() as f64;
        assert!((frac - 0.3).abs() < 0.01, "fraction {frac}");
        assert_eq!(pts, sample_uniform_ball(2, 100_000, 7));
        assert_ne!(pts[0], sample_uniform_ball(2, 1, 8)[0]);
    }

    #[test]
    fn sampler_radius_passes_ks() {
        for d in [2usize, 3] {
            let n = 100_000;
            let mut radii: Vec<f64> = sample_uniform_ball(d, n, 11)
                .iter()
                .map(|p| norm(p))
                .collect();
            radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let ks = crate::diagnostics::ks_uniform_sorted(&radii);
            assert!(ks < 1.63 / (n as f64).sqrt(), "d={d} ks={ks}");
        }
    }
}

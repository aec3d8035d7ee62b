use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use super::{norm, sample_uniform_ball, uniform_ball_density, RadialProfile, UniformBall};
use crate::error::{Error, Result};

/// Multivariate normal density.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    /// Lower Cholesky factor of the covariance, row-major.
    chol: Vec<f64>,
    peak: f64,
    min_variance: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let d = mean.len();
        if d > 8 {
            return Err(Error::Density(
                "Gaussian dimension above 8 is unsupported".into(),
            ));
        }
        if d == 0 || cov.len() != d || cov.iter().any(|row| row.len() != d) {
            return Err(Error::Density(format!(
                "covariance must be {d}x{d} to match the mean"
            )));
        }
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        if (0..d).any(|i| (0..i).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
            return Err(Error::Density("covariance is not symmetric".into()));
        }
        let chol = m
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Density("covariance is not positive definite".into()))?;
        let l = chol.l();
        let det_l: f64 = (0..d).map(|i| l[(i, i)]).product();
        let min_variance = m.symmetric_eigenvalues().min();
        if !(min_variance > 0.0) {
            return Err(Error::Density("covariance is not positive definite".into()));
        }
        Ok(Self {
            mean,
            chol: (0..d * d).map(|k| l[(k / d, k % d)]).collect(),
            peak: 1.0 / ((2.0 * PI).powf(d as f64 / 2.0) * det_l),
            min_variance,
        })
    }

    pub fn standard(d: usize) -> Self {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(vec![0.0; d], cov).expect("identity covariance")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.chol[i * self.dim() + j]
    }

    /// Squared Mahalanobis distance to the mean.
    fn mahalanobis2(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut z = [0.0f64; 8];
        let mut acc = 0.0;
        for i in 0..d {
            let mut v = x[i] - self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i) {
                v -= self.l(i, j) * zj;
            }
            z[i] = v / self.l(i, i);
            acc += z[i] * z[i];
        }
        acc
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.peak * (-0.5 * self.mahalanobis2(x)).exp()
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.l(i, j) * z[j]).sum::<f64>())
            .collect()
    }

    fn bounds(&self, r: f64) -> (f64, f64) {
        let far = r + norm(&self.mean);
        (
            self.peak * (-0.5 * far * far / self.min_variance).exp(),
            self.peak,
        )
    }

    fn std_devs(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|i| (0..=i).map(|j| self.l(i, j).powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Radial profile when the mean is zero and the covariance is isotropic.
    fn radial_profile(&self) -> Option<RadialProfile> {
        let d = self.dim();
        if self.mean.iter().any(|&m| m != 0.0) {
            return None;
        }
        let s = self.l(0, 0);
        for i in 0..d {
            for j in 0..=i {
                let expect = if i == j { s } else { 0.0 };
                if (self.l(i, j) - expect).abs() > 1e-14 {
                    return None;
                }
            }
        }
        Some(RadialProfile::gaussian(d, s))
    }
}

/// Finite mixture of Gaussians.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::Density(
                "mixture needs one positive weight per component".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Density("mixture weights must be positive".into()));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::Density(
                "mixture components differ in dimension".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
            components,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.eval(x))
            .sum()
    }
}

/// Target density `p` on `R^d` together with its sampler and local bounds.
#[derive(Debug, Clone)]
pub enum Density {
    Gaussian(Gaussian),
    Mixture(GaussianMixture),
    /// Uniform law on the disk `|y| <= radius` in the plane.
    UniformDisk {
        radius: f64,
    },
    /// Twisted Gaussian: `y1 ~ N(0, sigma1^2)`, `y2 = z + bend (y1^2 - sigma1^2)`.
    Banana {
        sigma1: f64,
        bend: f64,
    },
    /// The reference measure `U_d` itself; transporting it to itself gives the identity.
    SphericalUniform(UniformBall),
}

impl Density {
    pub fn name(&self) -> &'static str {
        match self {
            Density::Gaussian(_) => "gaussian",
            Density::Mixture(_) => "gaussian-mixture",
            Density::UniformDisk { .. } => "uniform-disk",
            Density::Banana { .. } => "banana",
            Density::SphericalUniform(_) => "spherical-uniform",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Density::Gaussian(g) => g.dim(),
            Density::Mixture(m) => m.components[0].dim(),
            Density::UniformDisk { .. } | Density::Banana { .. } => 2,
            Density::SphericalUniform(u) => u.dim(),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Density::Gaussian(g) => g.eval(y),
            Density::Mixture(m) => m.eval(y),
            Density::UniformDisk { radius } => {
                if norm(y) <= *radius {
                    1.0 / (PI * radius * radius)
                } else {
                    0.0
                }
            }
            Density::Banana { sigma1, bend } => {
                let z = y[1] - bend * (y[0] * y[0] - sigma1 * sigma1);
                let a = y[0] / sigma1;
                (-0.5 * (a * a + z * z)).exp() / (2.0 * PI * sigma1)
            }
            Density::SphericalUniform(u) => {
                uniform_ball_density(u.dim(), y).unwrap_or(f64::INFINITY)
            }
        }
    }

    /// Lower and upper bounds `(lambda_R, Lambda_R)` of `p` on the ball `B_R`.
    pub fn bounds(&self, r: f64) -> (f64, f64) {
        match self {
            Density::Gaussian(g) => g.bounds(r),
            Density::Mixture(m) => {
                m.weights
                    .iter()
                    .zip(&m.components)
                    .fold((0.0, 0.0), |(lo, hi), (w, c)| {
                        let (l, h) = c.bounds(r);
                        (lo + w * l, hi + w * h)
                    })
            }
            Density::UniformDisk { radius } => {
                let v = 1.0 / (PI * radius * radius);
                (if r <= *radius { v } else { 0.0 }, v)
            }
            Density::Banana { sigma1, bend } => {
                let a = r / sigma1;
                let z = r + bend.abs() * (r * r + sigma1 * sigma1);
                (
                    (-0.5 * (a * a + z * z)).exp() / (2.0 * PI * sigma1),
                    1.0 / (2.0 * PI * sigma1),
                )
            }
            Density::SphericalUniform(u) => {
                let lo = if r < 1.0 {
                    u.c_d() / r.powi(u.dim() as i32 - 1)
                } else {
                    0.0
                };
                (lo, f64::INFINITY)
            }
        }
    }

    /// Whether `p` is locally bounded away from zero and infinity on every ball.
    /// The two compactly supported reference families fail this and are only
    /// accepted as oracle targets.
    pub fn satisfies_hypotheses(&self) -> bool {
        !matches!(
            self,
            Density::UniformDisk { .. } | Density::SphericalUniform(_)
        )
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        if let Density::SphericalUniform(u) = self {
            return sample_uniform_ball(u.dim(), n, seed);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Density::Gaussian(g) => g.draw(rng),
            Density::Mixture(m) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = m.components.len() - 1;
                for (k, w) in m.weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        pick = k;
                        break;
                    }
                }
                m.components[pick].draw(rng)
            }
            Density::UniformDisk { radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                vec![r * t.cos(), r * t.sin()]
            }
            Density::Banana { sigma1, bend } => {
                let y1 = sigma1 * rng.sample::<f64, _>(StandardNormal);
                let z: f64 = rng.sample(StandardNormal);
                vec![y1, z + bend * (y1 * y1 - sigma1 * sigma1)]
            }
            Density::SphericalUniform(u) => sample_uniform_ball(u.dim(), 1, rng.random())
                .pop()
                .expect("one sample"),
        }
    }

    /// Radial profile for radially symmetric families.
    pub fn radial_profile(&self) -> Option<RadialProfile> {
        match self {
            Density::Gaussian(g) => g.radial_profile(),
            Density::UniformDisk { radius } => Some(RadialProfile::uniform_ball(2, *radius)),
            Density::SphericalUniform(u) => Some(RadialProfile::spherical_uniform(u.dim())),
            _ => None,
        }
    }

    /// Axis-aligned box holding all but a negligible fraction of the mass.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        const K: f64 = 6.0;
        match self {
            Density::Gaussian(g) => {
                let s = g.std_devs();
                (
                    g.mean.iter().zip(&s).map(|(m, s)| m - K * s).collect(),
                    g.mean.iter().zip(&s).map(|(m, s)| m + K * s).collect(),
                )
            }
            Density::Mixture(m) => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for c in &m.components {
                    let (l, h) = Density::Gaussian(c.clone()).bounding_box();
                    for i in 0..d {
                        lo[i] = lo[i].min(l[i]);
                        hi[i] = hi[i].max(h[i]);
                    }
                }
                (lo, hi)
            }
            Density::UniformDisk { radius } => (vec![-radius; 2], vec![*radius; 2]),
            Density::Banana { sigma1, bend } => {
                let x = 5.0 * sigma1;
                let lift = bend * (x * x - sigma1 * sigma1);
                let sink = -bend * sigma1 * sigma1;
                (vec![-x, lift.min(sink) - K], vec![x, lift.max(sink) + K])
            }
            Density::SphericalUniform(u) => (vec![-1.0; u.dim()], vec![1.0; u.dim()]),
        }
    }

    /// Characteristic length used to pick default grid spacings.
    pub fn length_scale(&self) -> f64 {
        match self {
            Density::Gaussian(g) => g.min_variance.sqrt(),
            Density::Mixture(m) => m
                .components
                .iter()
                .map(|c| c.min_variance.sqrt())
                .fold(f64::INFINITY, f64::min),
            Density::UniformDisk { radius } => radius / 3.0,
            Density::Banana { sigma1, .. } => sigma1.min(1.0),
            Density::SphericalUniform(_) => 0.2,
        }
    }
}

fn param_f64(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::Density(format!("parameter `{key}` must be a number"))),
    }
}

fn param_usize(params: &Value, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_u64()
            .map(|u| u as usize)
            .ok_or_else(|| Error::Density(format!("parameter `{key}` must be a positive integer"))),
    }
}

fn as_vector(v: &Value, key: &str) -> Result<Vec<f64>> {
    v.as_array()
        .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
        .ok_or_else(|| Error::Density(format!("parameter `{key}` must be a list of numbers")))
}

fn as_matrix(v: &Value, key: &str) -> Result<Vec<Vec<f64>>> {
    v.as_array()
        .ok_or_else(|| Error::Density(format!("parameter `{key}` must be a matrix")))?
        .iter()
        .map(|row| as_vector(row, key))
        .collect()
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect())
        .collect()
}

fn check_keys(params: &Value, allowed: &[&str]) -> Result<()> {
    if let Some(obj) = params.as_object() {
        if let Some(k) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Density(format!("unknown parameter `{k}`")));
        }
    } else if !params.is_null() {
        return Err(Error::Density("parameters must be an object".into()));
    }
    Ok(())
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Density(format!(
            "parameter `{key}` must be positive"
        )))
    }
}

/// Builds one of the named density families from a JSON parameter object.
///
/// | name | parameters (defaults) |
/// |------|-----------------------|
/// | `gaussian` | `dim` (2), `mean` (0), `cov` (identity) |
/// | `gaussian-mixture` | `weights` ([0.5, 0.5]), `means` ([[-2,0],[2,0]]), `covs` (identities) |
/// | `uniform-disk` | `radius` (1) |
/// | `banana` | `sigma1` (1), `bend` (0.5) |
/// | `spherical-uniform` | `dim` (2) |
pub fn builtin_density(name: &str, params: &Value) -> Result<Density> {
    match name {
        "gaussian" => {
            check_keys(params, &["dim", "mean", "cov"])?;
            let mean = match params.get("mean") {
                Some(m) => as_vector(m, "mean")?,
                None => vec![0.0; param_usize(params, "dim", 2)?],
            };
            let d = mean.len();
            if params.get("dim").is_some() && param_usize(params, "dim", d)? != d {
                return Err(Error::Density("`dim` disagrees with `mean`".into()));
            }
            let cov = match params.get("cov") {
                Some(c) => as_matrix(c, "cov")?,
                None => identity(d),
            };
            Ok(Density::Gaussian(Gaussian::new(mean, cov)?))
        }
        "gaussian-mixture" => {
            check_keys(params, &["weights", "means", "covs"])?;
            let means = match params.get("means") {
                Some(m) => as_matrix(m, "means")?,
                None => vec![vec![-2.0, 0.0], vec![2.0, 0.0]],
            };
            let k = means.len();
            let weights = match params.get("weights") {
                Some(w) => as_vector(w, "weights")?,
                None => vec![1.0 / k as f64; k],
            };
            let covs = match params.get("covs") {
                Some(Value::Array(cs)) => cs
                    .iter()
                    .map(|c| as_matrix(c, "covs"))
                    .collect::<Result<Vec<_>>>()?,
                Some(_) => return Err(Error::Density("`covs` must be a list of matrices".into())),
                None => means.iter().map(|m| identity(m.len())).collect(),
            };
            if covs.len() != k {
                return Err(Error::Density("`covs` and `means` differ in length".into()));
            }
            let comps = means
                .into_iter()
                .zip(covs)
                .map(|(m, c)| Gaussian::new(m, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(Density::Mixture(GaussianMixture::new(weights, comps)?))
        }
        "uniform-disk" => {
            check_keys(params, &["radius"])?;
            let radius = positive(param_f64(params, "radius", 1.0)?, "radius")?;
            Ok(Density::UniformDisk { radius })
        }
        "banana" => {
            check_keys(params, &["sigma1", "bend"])?;
            let sigma1 = positive(param_f64(params, "sigma1", 1.0)?, "sigma1")?;
            let bend = param_f64(params, "bend", 0.5)?;
            if !bend.is_finite() {
                return Err(Error::Density("parameter `bend` must be finite".into()));
            }
            Ok(Density::Banana { sigma1, bend })
        }
        "spherical-uniform" => {
            check_keys(params, &["dim"])?;
            let d = param_usize(params, "dim", 2)?;
            if d < 2 {
                return Err(Error::Density("spherical-uniform needs dim >= 2".into()));
            }
            Ok(Density::SphericalUniform(UniformBall::new(d)?))
        }
        other => Err(Error::Density(format!("unknown density family `{other}`"))),
    }
}

/// Monte-Carlo estimate of `int_{B_R} p`, drawing uniform points in the ball.
pub fn monte_carlo_mass(density: &Density, radius: f64, n: usize, seed: u64) -> f64 {
    let d = density.dim();
    let vol = super::sphere_area(d) * radius.powi(d as i32) / d as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..n {
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        let dir = super::random_direction(&mut rng, d);
        let x: Vec<f64> = dir.iter().map(|c| r * c).collect();
        acc += density.eval(&x);
    }
    acc * vol / n as f64
}

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::measures::Density;

/// Flat list of points in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut out = Self::new(dim);
        for p in points {
            if p.len() != dim {
                return domain(format!("point of dimension {} in a {dim}-d cloud", p.len()));
            }
            out.coords.extend_from_slice(p);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.coords.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim.max(1))
    }
}

/// Polar (d = 2) or spherical (d = 3) product grid of the unit ball carrying
/// the exact `U_d` mass of each grid cell.
///
/// Radii sit at the midpoints of `n_r` equal radial shells; every shell has
/// mass `1 / n_r`. In the plane each shell is split into `n_ang` equal angular
/// sectors. In space it is split into `n_ang` polar bands (by spherical-cap
/// area) times `2 n_ang` azimuthal sectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub dim: usize,
    pub n_r: usize,
    pub n_ang: usize,
    pub nodes: PointCloud,
    /// Polar coordinates per node: `[r, theta]` or `[r, polar, azimuth]`.
    pub polar: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl BallGrid {
    pub fn radius(&self, k: usize) -> f64 {
        (k as f64 + 0.5) / self.n_r as f64
    }

    /// Planar angle of column `m`.
    pub fn angle(&self, m: usize) -> f64 {
        (m as f64 + 0.5) * TAU / self.n_ang as f64
    }

    pub fn n_azimuth(&self) -> usize {
        if self.dim == 2 {
            self.n_ang
        } else {
            2 * self.n_ang
        }
    }

    /// Node index of ring `k`, column `m` in the planar grid.
    #[inline]
    pub fn index(&self, k: usize, m: usize) -> usize {
        k * self.n_ang + m
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

/// Builds the product grid of the unit ball for `d` in {2, 3}.
pub fn build_ball_grid(d: usize, n_r: usize, n_ang: usize) -> Result<BallGrid> {
    if d != 2 && d != 3 {
        return domain(format!("ball grids exist for d = 2 or 3, got {d}"));
    }
    if n_r < 2 || n_ang < 2 {
        return domain("grid needs at least 2 radii and 2 angles");
    }
    let shell_mass = 1.0 / n_r as f64;
    let mut nodes = PointCloud::new(d);
    let mut polar = Vec::new();
    let mut masses = Vec::new();
    for k in 0..n_r {
        let r = (k as f64 + 0.5) / n_r as f64;
        if d == 2 {
            for m in 0..n_ang {
                let t = (m as f64 + 0.5) * TAU / n_ang as f64;
                nodes.push(&[r * t.cos(), r * t.sin()]);
                polar.push(vec![r, t]);
                masses.push(shell_mass / n_ang as f64);
            }
        } else {
            let n_az = 2 * n_ang;
            for p in 0..n_ang {
                let lo = PI * p as f64 / n_ang as f64;
                let hi = PI * (p + 1) as f64 / n_ang as f64;
                let band = 0.5 * (lo.cos() - hi.cos());
                let polar_angle = 0.5 * (lo + hi);
                for a in 0..n_az {
                    let az = (a as f64 + 0.5) * TAU / n_az as f64;
                    let s = polar_angle.sin();
                    nodes.push(&[r * s * az.cos(), r * s * az.sin(), r * polar_angle.cos()]);
                    polar.push(vec![r, polar_angle, az]);
                    masses.push(shell_mass * band / n_az as f64);
                }
            }
        }
    }
    Ok(BallGrid {
        dim: d,
        n_r,
        n_ang,
        nodes,
        polar,
        masses,
    })
}

/// How a target density is discretized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetMode {
    /// Regular grid with spacing `length_scale / divisor`; the lightest nodes
    /// holding a `tail` fraction of the mass are dropped.
    Grid { divisor: f64, tail: f64 },
    /// `n` i.i.d. draws with equal masses.
    Sample { n: usize },
}

impl Default for TargetMode {
    fn default() -> Self {
        TargetMode::Grid {
            divisor: 15.0,
            tail: 1e-4,
        }
    }
}

/// Discretization of the target measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetGrid {
    pub nodes: PointCloud,
    pub masses: Vec<f64>,
}

impl TargetGrid {
    pub fn new(nodes: PointCloud, masses: Vec<f64>) -> Result<Self> {
        if nodes.len() != masses.len() || masses.is_empty() {
            return domain("target grid needs one mass per node");
        }
        if masses.iter().any(|&m| !(m >= 0.0 && m.is_finite())) {
            return domain("target masses must be nonnegative");
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return domain("target masses sum to zero");
        }
        Ok(Self {
            nodes,
            masses: masses.iter().map(|m| m / total).collect(),
        })
    }

    /// `n` i.i.d. draws with masses `1 / n`.
    pub fn sample(density: &Density, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return domain("sample size must be positive");
        }
        let pts = density.sample(n, seed);
        Self::new(PointCloud::from_points(density.dim(), &pts)?, vec![1.0; n])
    }

    /// Regular Cartesian grid of the given spacing over the density's bounding
    /// box, masses proportional to `p`; the lightest nodes carrying a combined
    /// `tail` fraction of the mass are dropped.
    pub fn regular(density: &Density, spacing: f64, tail: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return domain("grid spacing must be positive");
        }
        let d = density.dim();
        let (lo, hi) = density.bounding_box();
        let counts: Vec<usize> = (0..d)
            .map(|i| ((hi[i] - lo[i]) / spacing).ceil() as usize + 1)
            .collect();
        let total: usize = counts.iter().product();
        if total > 5_000_000 {
            return domain(format!("regular grid would have {total} candidate nodes"));
        }
        let centers: Vec<f64> = (0..d).map(|i| 0.5 * (lo[i] + hi[i])).collect();
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        let mut idx = vec![0usize; d];
        let mut y = vec![0.0; d];
        for _ in 0..total {
            for i in 0..d {
                // Grid symmetric about the box center.
                y[i] = centers[i] + (idx[i] as f64 - 0.5 * (counts[i] - 1) as f64) * spacing;
            }
            let p = density.eval(&y);
            if p > 0.0 && p.is_finite() {
                pts.push(y.clone());
                vals.push(p);
            }
            for i in 0..d {
                idx[i] += 1;
                if idx[i] < counts[i] {
                    break;
                }
                idx[i] = 0;
            }
        }
        let mass: f64 = vals.iter().sum();
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        // Nodes with equal density are dropped or kept together, so the grid
        // keeps every symmetry of the density.
        let mut dropped = 0.0;
        let mut keep = vec![true; vals.len()];
        for group in order.chunk_by(|&a, &b| vals[a] == vals[b]) {
            let w: f64 = group.iter().map(|&i| vals[i]).sum();
            if dropped + w > tail * mass {
                break;
            }
            dropped += w;
            for &i in group {
                keep[i] = false;
            }
        }
        let mut nodes = PointCloud::new(d);
        let mut masses = Vec::new();
        for (i, p) in pts.iter().enumerate() {
            if keep[i] {
                nodes.push(p);
                masses.push(vals[i]);
            }
        }
        Self::new(nodes, masses)
    }

    /// Discretizes `density` according to `mode`. In grid mode the
    /// spherical-uniform density is discretized by the ball grid itself.
    pub fn build(density: &Density, mode: &TargetMode, grid: &BallGrid, seed: u64) -> Result<Self> {
        if density.dim() != grid.dim {
            return domain(format!(
                "density is {}-d but the ball grid is {}-d",
                density.dim(),
                grid.dim
            ));
        }
        match *mode {
            TargetMode::Grid { divisor, tail } => {
                if !(divisor > 0.0 && (0.0..0.5).contains(&tail)) {
                    return domain("grid target needs divisor > 0 and tail in [0, 0.5)");
                }
                if let Density::SphericalUniform(_) = density {
                    return Ok(Self::from_ball_grid(grid));
                }
                Self::regular(density, density.length_scale() / divisor, tail)
            }
            TargetMode::Sample { n } => Self::sample(density, n, seed),
        }
    }

    /// The ball grid itself as a target (self-transport).
    pub fn from_ball_grid(grid: &BallGrid) -> Self {
        Self {
            nodes: grid.nodes.clone(),
            masses: grid.masses.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn planar_masses_are_uniform() {
        let g = build_ball_grid(2, 10, 16).unwrap();
        assert_eq!(g.len(), 160);
        for &m in &g.masses {
            assert_abs_diff_eq!(m, 1.0 / 160.0, epsilon = 1e-16);
        }
        assert_abs_diff_eq!(g.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let outer: f64 = g
            .nodes
            .iter()
            .zip(&g.masses)
            .filter(|(p, _)| crate::measures::norm(p) > 0.5)
            .map(|(_, m)| m)
            .sum();
        assert_abs_diff_eq!(outer, 0.5, epsilon = 1e-12);
        assert!(g.nodes.iter().all(|p| crate::measures::norm(p) > 0.0));
    }

    #[test]
    fn spatial_masses_sum_to_one() {
        let g = build_ball_grid(3, 6, 8).unwrap();
        assert_eq!(g.len(), 6 * 8 * 16);
        assert_abs_diff_eq!(g.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let inner: f64 = g
            .nodes
            .iter()
            .zip(&g.masses)
            .filter(|(p, _)| crate::measures::norm(p) < 0.5)
            .map(|(_, m)| m)
            .sum();
        assert_abs_diff_eq!(inner, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn invalid_grids() {
        assert!(build_ball_grid(4, 10, 10).is_err());
        assert!(build_ball_grid(2, 1, 10).is_err());
    }

    #[test]
    fn regular_target_grid_is_normalized_and_symmetric() {
        let g = crate::measures::builtin_density("gaussian", &serde_json::json!({})).unwrap();
        let t = TargetGrid::regular(&g, 0.25, 1e-4).unwrap();
        assert_abs_diff_eq!(t.masses.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        let mean: Vec<f64> = (0..2)
            .map(|i| t.nodes.iter().zip(&t.masses).map(|(p, m)| p[i] * m).sum())
            .collect();
        assert_abs_diff_eq!(mean[0], 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(mean[1], 0.0, epsilon = 1e-4);
    }
}

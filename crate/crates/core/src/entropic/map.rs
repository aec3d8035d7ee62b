use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::measures::{norm, sphere_area, Density};

use super::grid::{BallGrid, PointCloud, TargetGrid};
use super::sinkhorn::{half_sq_dist, solve_transport, GridCoupling, SinkhornOptions};
use super::symmetric::self_transport_potential;

/// Which conditional mean to extract from a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

/// Conditional means `sum_j pi_kj y_j / sum_j pi_kj` at the nodes of one side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycentricTable {
    pub direction: Direction,
    pub points: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    /// Nodes whose row of the plan carries no mass; their image is the node itself.
    pub flagged: Vec<usize>,
}

/// Log-weights `ln w_i + h_i / eps` of a Gibbs mixture over `points`.
pub(crate) fn gibbs_log_weights(masses: &[f64], potential: &[f64], eps: f64) -> Vec<f64> {
    masses
        .iter()
        .zip(potential)
        .map(|(w, h)| w.ln() + h / eps)
        .collect()
}

/// Mean of `points` under weights `exp(log_w_i - |x - p_i|^2 / (2 eps))`.
/// `None` when every weight underflows.
pub(crate) fn gibbs_mean(
    x: &[f64],
    points: &PointCloud,
    log_w: &[f64],
    eps: f64,
) -> Option<Vec<f64>> {
    let z: Vec<f64> = points
        .iter()
        .zip(log_w)
        .map(|(p, lw)| lw - half_sq_dist(x, p) / eps)
        .collect();
    let zmax = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !zmax.is_finite() {
        return None;
    }
    let mut mean = vec![0.0; points.dim];
    let mut total = 0.0;
    for (p, &zi) in points.iter().zip(&z) {
        let e = zi - zmax;
        if e > -40.0 {
            let w = e.exp();
            total += w;
            mean.iter_mut().zip(p).for_each(|(m, c)| *m += w * c);
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    Some(mean)
}

/// Barycentric projection of a converged coupling at the nodes of one side.
pub fn barycentric_map(coupling: &GridCoupling, direction: Direction) -> BarycentricTable {
    let eps = coupling.epsilon;
    let (nodes, other, log_w) = match direction {
        Direction::SourceToTarget => (
            &coupling.source,
            &coupling.target,
            gibbs_log_weights(&coupling.target_masses, &coupling.g, eps),
        ),
        Direction::TargetToSource => (
            &coupling.target,
            &coupling.source,
            gibbs_log_weights(&coupling.source_masses, &coupling.f, eps),
        ),
    };
    let results: Vec<Option<Vec<f64>>> = (0..nodes.len())
        .into_par_iter()
        .map(|k| gibbs_mean(nodes.point(k), other, &log_w, eps))
        .collect();
    let mut flagged = Vec::new();
    let images = results
        .into_iter()
        .enumerate()
        .map(|(k, r)| {
            r.unwrap_or_else(|| {
                flagged.push(k);
                nodes.point(k).to_vec()
            })
        })
        .collect();
    BarycentricTable {
        direction,
        points: nodes.iter().map(<[f64]>::to_vec).collect(),
        images,
        flagged,
    }
}

/// Forward map on the ball grid: `{epsilon, nodes: [[r, theta], ...], images}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapTable {
    pub epsilon: f64,
    pub dim: usize,
    pub n_r: usize,
    pub n_ang: usize,
    pub debiased: bool,
    /// Polar coordinates of the ball-grid nodes.
    pub nodes: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub flagged: Vec<usize>,
}

/// Settings of an entropic quantile solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropicOptions {
    pub sinkhorn: SinkhornOptions,
    /// Subtract the self-transport bias `T_{U,U} - Id` from the forward map.
    pub debias: bool,
}

impl Default for EntropicOptions {
    fn default() -> Self {
        Self {
            sinkhorn: SinkhornOptions::default(),
            debias: true,
        }
    }
}

/// Entropic approximation of the center-outward quantile map.
///
/// The forward map at grid nodes is the barycentric projection of the
/// `U_d -> P` coupling, optionally debiased by the `U_d -> U_d` self-transport
/// barycentric map (`T(x) = T_UP(x) - T_UU(x) + x`), which cancels the
/// first-order entropic bias coming from the singular source density.
#[derive(Debug, Clone)]
pub struct EntropicSolution {
    pub grid: BallGrid,
    pub target: TargetGrid,
    pub coupling: GridCoupling,
    /// Potential of the source self-transport (same masses on both sides).
    pub self_potential: Option<Vec<f64>>,
    pub table: MapTable,
    /// Undebiased barycentric images at the nodes.
    pub raw_images: Vec<Vec<f64>>,
    target_log_w: Vec<f64>,
    source_log_w: Vec<f64>,
    self_log_w: Option<Vec<f64>>,
}

/// Solves `U_d -> P` (and the debiasing self-transport) and tabulates the map.
pub fn solve_entropic(
    grid: &BallGrid,
    target: &TargetGrid,
    opts: &EntropicOptions,
) -> Result<EntropicSolution> {
    if target.nodes.dim != grid.dim {
        return domain(format!(
            "target is {}-d but the grid is {}-d",
            target.nodes.dim, grid.dim
        ));
    }
    let coupling = solve_transport(
        &grid.nodes,
        &grid.masses,
        &target.nodes,
        &target.masses,
        &opts.sinkhorn,
    )?;
    let self_potential = if opts.debias {
        // Orbit-reduced and cheap, so solved well below the main tolerance.
        let sym = SinkhornOptions {
            tol: opts.sinkhorn.tol * 1e-3,
            ..opts.sinkhorn.clone()
        };
        Some(self_transport_potential(grid, &sym)?)
    } else {
        None
    };
    EntropicSolution::from_parts(grid.clone(), target.clone(), coupling, self_potential)
}

impl EntropicSolution {
    /// Reassembles a solution from converged potentials (e.g. loaded from disk).
    pub fn from_parts(
        grid: BallGrid,
        target: TargetGrid,
        coupling: GridCoupling,
        self_potential: Option<Vec<f64>>,
    ) -> Result<Self> {
        if coupling.source.len() != grid.len() || coupling.target.len() != target.len() {
            return domain("coupling does not match the grids");
        }
        if let Some(h) = &self_potential {
            if h.len() != grid.len() {
                return domain("self-transport potential does not match the grid");
            }
        }
        let eps = coupling.epsilon;
        let raw = barycentric_map(&coupling, Direction::SourceToTarget);
        let self_log_w = self_potential
            .as_ref()
            .map(|h| gibbs_log_weights(&grid.masses, h, eps));
        let mut images = raw.images.clone();
        let mut flagged = raw.flagged.clone();
        if let Some(lw) = &self_log_w {
            let shifts: Vec<Option<Vec<f64>>> = (0..grid.len())
                .into_par_iter()
                .map(|k| gibbs_mean(grid.nodes.point(k), &grid.nodes, lw, eps))
                .collect();
            for (k, s) in shifts.into_iter().enumerate() {
                match s {
                    Some(s) => {
                        let x = grid.nodes.point(k);
                        for i in 0..grid.dim {
                            images[k][i] += x[i] - s[i];
                        }
                    }
                    None => flagged.push(k),
                }
            }
            flagged.sort_unstable();
            flagged.dedup();
        }
        let table = MapTable {
            epsilon: eps,
            dim: grid.dim,
            n_r: grid.n_r,
            n_ang: grid.n_ang,
            debiased: self_potential.is_some(),
            nodes: grid.polar.clone(),
            images,
            flagged,
        };
        Ok(Self {
            target_log_w: gibbs_log_weights(&coupling.target_masses, &coupling.g, eps),
            source_log_w: gibbs_log_weights(&coupling.source_masses, &coupling.f, eps),
            self_log_w,
            grid,
            target,
            coupling,
            self_potential,
            table,
            raw_images: raw.images,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.coupling.epsilon
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// `Q(x)` off the grid: bilinear in `(r, theta)` for `d = 2`, the entropic
    /// extension of the barycentric map for `d = 3`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_ball_point(x, self.grid.dim)?;
        if self.grid.dim == 2 {
            Ok(self.bilinear(x))
        } else {
            Ok(self.forward_extension(x))
        }
    }

    /// Entropic extension `E[Y | X = x]`, debiased when available.
    pub fn forward_extension(&self, x: &[f64]) -> Vec<f64> {
        let eps = self.epsilon();
        let mut y = gibbs_mean(x, &self.target.nodes, &self.target_log_w, eps)
            .unwrap_or_else(|| x.to_vec());
        if let Some(lw) = &self.self_log_w {
            if let Some(s) = gibbs_mean(x, &self.grid.nodes, lw, eps) {
                y.iter_mut()
                    .zip(x.iter().zip(&s))
                    .for_each(|(yi, (xi, si))| *yi += xi - si);
            }
        }
        y
    }

    /// `F(y) = E[X | Y = y]` through the entropic extension; always inside the
    /// convex hull of the grid nodes.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.grid.dim || y.iter().any(|c| !c.is_finite()) {
            return domain(format!("expected a finite {}-d point", self.grid.dim));
        }
        gibbs_mean(y, &self.grid.nodes, &self.source_log_w, self.epsilon())
            .ok_or_else(|| crate::Error::Domain("inverse weights underflow".into()))
    }

    /// Bilinear interpolation of the node images expressed in each node's
    /// polar frame `(e_r, e_theta)`, mapped back with the frame at `x`; radial
    /// maps are reproduced exactly along rings.
    fn bilinear(&self, x: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let r = norm(x);
        let theta = x[1].atan2(x[0]).rem_euclid(TAU);
        let tr = (r * g.n_r as f64 - 0.5).clamp(0.0, (g.n_r - 1) as f64);
        let k0 = (tr.floor() as usize).min(g.n_r - 2);
        let wr = tr - k0 as f64;
        let ta = theta * g.n_ang as f64 / TAU - 0.5;
        let m_floor = ta.floor();
        let wa = ta - m_floor;
        let m0 = (m_floor as i64).rem_euclid(g.n_ang as i64) as usize;
        let m1 = (m0 + 1) % g.n_ang;
        let local = |k: usize, m: usize| {
            let p = &self.table.images[g.index(k, m)];
            let (s, c) = g.angle(m).sin_cos();
            [p[0] * c + p[1] * s, -p[0] * s + p[1] * c]
        };
        let mut a = [0.0; 2];
        for (w, p) in [
            ((1.0 - wr) * (1.0 - wa), local(k0, m0)),
            ((1.0 - wr) * wa, local(k0, m1)),
            (wr * (1.0 - wa), local(k0 + 1, m0)),
            (wr * wa, local(k0 + 1, m1)),
        ] {
            a[0] += w * p[0];
            a[1] += w * p[1];
        }
        let (s, c) = theta.sin_cos();
        vec![a[0] * c - a[1] * s, a[0] * s + a[1] * c]
    }

    /// Table image of node `(k, m)` of the planar grid.
    pub fn node_image(&self, k: usize, m: usize) -> &[f64] {
        &self.table.images[self.grid.index(k, m)]
    }
}

pub(crate) fn check_ball_point(x: &[f64], d: usize) -> Result<()> {
    if x.len() != d {
        return domain(format!("point has {} coordinates, expected {d}", x.len()));
    }
    let r = norm(x);
    if !(r > 0.0 && r < 1.0) {
        return domain(format!(
            "point must lie in the punctured open unit ball, |x| = {r}"
        ));
    }
    Ok(())
}

/// Per-node Monge–Ampère residuals over an annulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaResidual {
    pub r_lo: f64,
    pub r_hi: f64,
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
    /// `(radius, det grad Q)` averaged over each ring in the annulus.
    pub ring_det: Vec<(f64, f64)>,
}

/// Central finite-difference Jacobian determinant of the tabulated map at an
/// interior node, in polar (`d = 2`) or spherical (`d = 3`) coordinates.
fn node_det(sol: &EntropicSolution, idx: usize) -> Option<f64> {
    let g = &sol.grid;
    let imgs = &sol.table.images;
    let dr = 1.0 / g.n_r as f64;
    let diff = |a: usize, b: usize, h: f64| -> Vec<f64> {
        imgs[a]
            .iter()
            .zip(&imgs[b])
            .map(|(p, q)| (p - q) / h)
            .collect()
    };
    if g.dim == 2 {
        let (k, m) = (idx / g.n_ang, idx % g.n_ang);
        if k == 0 || k + 1 >= g.n_r {
            return None;
        }
        let r = g.radius(k);
        let dth = TAU / g.n_ang as f64;
        let mp = (m + 1) % g.n_ang;
        let mm = (m + g.n_ang - 1) % g.n_ang;
        let qr = diff(g.index(k + 1, m), g.index(k - 1, m), 2.0 * dr);
        let qt = diff(g.index(k, mp), g.index(k, mm), 2.0 * dth);
        Some((qr[0] * qt[1] - qr[1] * qt[0]) / r)
    } else {
        let n_pol = g.n_ang;
        let n_az = 2 * g.n_ang;
        let per_shell = n_pol * n_az;
        let k = idx / per_shell;
        let p = (idx % per_shell) / n_az;
        let a = idx % n_az;
        if k == 0 || k + 1 >= g.n_r || p == 0 || p + 1 >= n_pol {
            return None;
        }
        let at = |k: usize, p: usize, a: usize| (k * n_pol + p) * n_az + a;
        let r = g.radius(k);
        let polar = sol.grid.polar[idx][1];
        let dpol = PI / n_pol as f64;
        let daz = TAU / n_az as f64;
        let ap = (a + 1) % n_az;
        let am = (a + n_az - 1) % n_az;
        let qr = diff(at(k + 1, p, a), at(k - 1, p, a), 2.0 * dr);
        let qp = diff(at(k, p + 1, a), at(k, p - 1, a), 2.0 * dpol);
        let qa = diff(at(k, p, ap), at(k, p, am), 2.0 * daz);
        let det = qr[0] * (qp[1] * qa[2] - qp[2] * qa[1]) - qr[1] * (qp[0] * qa[2] - qp[2] * qa[0])
            + qr[2] * (qp[0] * qa[1] - qp[1] * qa[0]);
        Some(det / (r * r * polar.sin()))
    }
}

/// Relative residual `|det(grad Q) p(Q) / u_d - 1|` over grid nodes with radius
/// in `[r_lo, r_hi]`.
pub fn ma_residual_field(
    sol: &EntropicSolution,
    density: &Density,
    annulus: (f64, f64),
) -> Result<MaResidual> {
    let (r_lo, r_hi) = annulus;
    if !(r_lo > 0.0 && r_lo < r_hi && r_hi < 1.0) {
        return domain(format!("annulus [{r_lo}, {r_hi}] must lie inside (0, 1)"));
    }
    if density.dim() != sol.dim() {
        return domain("density dimension does not match the map");
    }
    let g = &sol.grid;
    let c_d = 1.0 / sphere_area(g.dim);
    let mut residuals = Vec::new();
    let mut ring_det = Vec::new();
    let per_shell = g.len() / g.n_r;
    for k in 0..g.n_r {
        let r = g.radius(k);
        if r < r_lo || r > r_hi {
            continue;
        }
        let u = c_d / r.powi(g.dim as i32 - 1);
        let mut sum = 0.0;
        let mut count = 0usize;
        for idx in k * per_shell..(k + 1) * per_shell {
            if let Some(det) = node_det(sol, idx) {
                let p = density.eval(&sol.table.images[idx]);
                residuals.push((det * p / u - 1.0).abs());
                sum += det;
                count += 1;
            }
        }
        if count > 0 {
            ring_det.push((r, sum / count as f64));
        }
    }
    if residuals.is_empty() {
        return domain("no interior grid nodes in the annulus");
    }
    residuals.sort_by(f64::total_cmp);
    Ok(MaResidual {
        r_lo,
        r_hi,
        count: residuals.len(),
        median: quantile_sorted(&residuals, 0.5),
        p90: quantile_sorted(&residuals, 0.9),
        max: *residuals.last().unwrap(),
        ring_det,
    })
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (pos - i as f64) * (v[j] - v[i])
}

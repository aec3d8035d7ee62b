//! Quantile and distribution maps from either backend, quantile contours and
//! the estimate of the degenerate set `K`.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropic::{
    build_ball_grid, check_ball_point, quantile_sorted, solve_entropic, BallGrid, EntropicOptions,
    EntropicSolution, TargetGrid, TargetMode,
};
use crate::error::{domain, Error, Result};
use crate::geometry::{
    convex_hull, dedup_loop, dist, loop_self_intersection, signed_area, winding_number, P2,
};
use crate::measures::{norm, Density};
use crate::semidiscrete::{dual_ascent, DiscreteTarget, SemidiscreteSolution};

/// Default number of vertices per contour.
pub const DEFAULT_VERTICES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Semidiscrete,
    Entropic,
}

/// Settings of the semidiscrete backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemidiscreteParams {
    /// Number of atoms sampled from the target density.
    pub atoms: usize,
    pub mass_tol: f64,
    pub max_iter: usize,
}

impl Default for SemidiscreteParams {
    fn default() -> Self {
        Self {
            atoms: 512,
            mass_tol: 1e-7,
            max_iter: 200,
        }
    }
}

/// Settings of the entropic backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropicParams {
    pub n_r: usize,
    /// Angles per ring (`d = 2`) or polar bands (`d = 3`).
    pub n_ang: usize,
    pub epsilons: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub debias: bool,
    pub target: TargetMode,
}

impl Default for EntropicParams {
    fn default() -> Self {
        let opts = EntropicOptions::default();
        Self {
            n_r: 64,
            n_ang: 128,
            epsilons: opts.sinkhorn.epsilons,
            tol: opts.sinkhorn.tol,
            max_iter: opts.sinkhorn.max_iter,
            debias: opts.debias,
            target: TargetMode::default(),
        }
    }
}

impl EntropicParams {
    pub fn options(&self) -> EntropicOptions {
        let mut opts = EntropicOptions::default();
        opts.sinkhorn.epsilons = self.epsilons.clone();
        opts.sinkhorn.tol = self.tol;
        opts.sinkhorn.max_iter = self.max_iter;
        opts.debias = self.debias;
        opts
    }
}

/// Solver settings and outcome attached to a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub backend: Backend,
    pub dim: usize,
    /// Final regularization (entropic only).
    pub epsilon: Option<f64>,
    /// Mass tolerance (semidiscrete) or marginal tolerance (entropic) requested.
    pub tolerance: Option<f64>,
    pub iterations: usize,
    /// Achieved worst mass or marginal residual.
    pub residual: f64,
    pub atoms: Option<usize>,
    pub n_r: Option<usize>,
    pub n_ang: Option<usize>,
    pub target_nodes: Option<usize>,
    pub debiased: Option<bool>,
}

#[derive(Debug, Clone)]
enum Solver {
    Semidiscrete(Box<SemidiscreteSolution>),
    Entropic(Box<EntropicSolution>),
}

/// Atom `y_i`, its weight and the barycenter of its cell (`F` at the atom).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomValue {
    pub y: P2,
    pub weight: f64,
    pub f: Option<P2>,
}

/// Center-outward quantile map `Q` and distribution map `F` from a solved backend.
#[derive(Debug, Clone)]
pub struct QuantileMap {
    solver: Solver,
    pub metadata: MapMetadata,
}

impl QuantileMap {
    pub fn from_semidiscrete(sol: SemidiscreteSolution, mass_tol: Option<f64>) -> Self {
        let metadata = MapMetadata {
            backend: Backend::Semidiscrete,
            dim: 2,
            epsilon: None,
            tolerance: mass_tol,
            iterations: sol.iterations,
            residual: sol.max_residual,
            atoms: Some(sol.target.len()),
            n_r: None,
            n_ang: None,
            target_nodes: None,
            debiased: None,
        };
        Self {
            solver: Solver::Semidiscrete(Box::new(sol)),
            metadata,
        }
    }

    pub fn from_entropic(sol: EntropicSolution, tol: Option<f64>) -> Self {
        let metadata = MapMetadata {
            backend: Backend::Entropic,
            dim: sol.dim(),
            epsilon: Some(sol.epsilon()),
            tolerance: tol,
            iterations: sol.coupling.iterations,
            residual: sol.coupling.marginal_err,
            atoms: None,
            n_r: Some(sol.grid.n_r),
            n_ang: Some(sol.grid.n_ang),
            target_nodes: Some(sol.target.len()),
            debiased: Some(sol.self_potential.is_some()),
        };
        Self {
            solver: Solver::Entropic(Box::new(sol)),
            metadata,
        }
    }

    /// Samples `params.atoms` atoms from `density` and runs the dual ascent.
    pub fn solve_semidiscrete(
        density: &Density,
        params: &SemidiscreteParams,
        seed: u64,
    ) -> Result<Self> {
        let target = DiscreteTarget::sample(density, params.atoms, seed)?;
        Self::solve_semidiscrete_target(&target, params)
    }

    pub fn solve_semidiscrete_target(
        target: &DiscreteTarget,
        params: &SemidiscreteParams,
    ) -> Result<Self> {
        let sol = dual_ascent(target, params.mass_tol, params.max_iter)?;
        Ok(Self::from_semidiscrete(sol, Some(params.mass_tol)))
    }

    /// Builds the ball grid and the target discretization, then solves.
    pub fn solve_entropic(density: &Density, params: &EntropicParams, seed: u64) -> Result<Self> {
        let grid = build_ball_grid(density.dim(), params.n_r, params.n_ang)?;
        let target = TargetGrid::build(density, &params.target, &grid, seed)?;
        Self::solve_entropic_target(&grid, &target, params)
    }

    pub fn solve_entropic_target(
        grid: &BallGrid,
        target: &TargetGrid,
        params: &EntropicParams,
    ) -> Result<Self> {
        let sol = solve_entropic(grid, target, &params.options())?;
        Ok(Self::from_entropic(sol, Some(params.tol)))
    }

    pub fn backend(&self) -> Backend {
        self.metadata.backend
    }

    pub fn dim(&self) -> usize {
        self.metadata.dim
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.metadata.epsilon
    }

    /// Entropic blur length `sqrt(eps)`; zero for the semidiscrete backend.
    pub fn blur(&self) -> f64 {
        self.epsilon().map_or(0.0, f64::sqrt)
    }

    pub fn semidiscrete(&self) -> Option<&SemidiscreteSolution> {
        match &self.solver {
            Solver::Semidiscrete(s) => Some(s),
            Solver::Entropic(_) => None,
        }
    }

    pub fn entropic(&self) -> Option<&EntropicSolution> {
        match &self.solver {
            Solver::Entropic(s) => Some(s),
            Solver::Semidiscrete(_) => None,
        }
    }

    /// `Q(x)` for `0 < |x| < 1`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_ball_point(x, self.dim())?;
        match &self.solver {
            Solver::Semidiscrete(s) => Ok(s.evaluate([x[0], x[1]])?.to_vec()),
            Solver::Entropic(s) => s.forward(x),
        }
    }

    /// `F(y)`; only the entropic backend has a pointwise inverse.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.solver {
            Solver::Entropic(s) => s.inverse(y),
            Solver::Semidiscrete(_) => Err(Error::State(
                "the semidiscrete backend provides F only at its atoms".into(),
            )),
        }
    }

    /// Atom-level values of `F` (semidiscrete backend).
    pub fn atom_values(&self) -> Option<Vec<AtomValue>> {
        let s = self.semidiscrete()?;
        let f = s.atom_distribution();
        Some(
            s.target
                .points()
                .iter()
                .zip(s.target.weights())
                .zip(f)
                .map(|((&y, &weight), f)| AtomValue { y, weight, f })
                .collect(),
        )
    }

    /// Copy whose dual potentials carry a seeded uniform perturbation of the
    /// given magnitude. Used as a negative control for the diagnostics.
    pub fn corrupted(&self, magnitude: f64, seed: u64) -> Result<Self> {
        match &self.solver {
            Solver::Semidiscrete(s) => {
                let psi = s.potential.perturbed(magnitude, seed);
                let sol = SemidiscreteSolution::from_potential(s.target.clone(), psi)?;
                Ok(Self::from_semidiscrete(sol, self.metadata.tolerance))
            }
            Solver::Entropic(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut coupling = s.coupling.clone();
                for v in coupling.f.iter_mut().chain(coupling.g.iter_mut()) {
                    *v += magnitude * (2.0 * rng.random::<f64>() - 1.0);
                }
                let sol = EntropicSolution::from_parts(
                    s.grid.clone(),
                    s.target.clone(),
                    coupling,
                    s.self_potential.clone(),
                )?;
                Ok(Self::from_entropic(sol, self.metadata.tolerance))
            }
        }
    }
}

/// Image `Q(r S^1)` sampled at `M` equally spaced angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub r: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub vertices: Vec<P2>,
    pub closed: bool,
}

impl Contour {
    /// Absolute enclosed area (shoelace, after removing repeated vertices).
    pub fn area(&self) -> f64 {
        signed_area(&dedup_loop(&self.vertices)).abs()
    }

    pub fn diameter(&self) -> f64 {
        crate::geometry::polyline_diameter(&self.vertices)
    }
}

/// Evaluates `Q(r cos t_m, r sin t_m)` for `t_m = 2 pi m / M`.
pub fn extract_contour(map: &QuantileMap, r: f64, m: usize) -> Result<Contour> {
    if map.dim() != 2 {
        return domain("contours are extracted in the plane only");
    }
    if !(r > 0.0 && r < 1.0) {
        return domain(format!("contour radius {r} is outside (0, 1)"));
    }
    if m < 8 {
        return domain("a contour needs at least 8 vertices");
    }
    let vertices = (0..m)
        .into_par_iter()
        .map(|i| {
            let t = TAU * i as f64 / m as f64;
            map.forward(&[r * t.cos(), r * t.sin()])
                .map(|y| [y[0], y[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Contour {
        r,
        m,
        vertices,
        closed: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopCheck {
    pub r: f64,
    pub simple: bool,
    /// Indices of two crossing edges.
    pub intersection: Option<(usize, usize)>,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub r_inner: f64,
    pub r_outer: f64,
    pub nested: bool,
    /// Inner vertices outside the outer loop by more than the slack.
    pub outside: Vec<usize>,
    /// Largest distance of an inner vertex outside the outer loop.
    pub worst_excess: f64,
    pub area_increases: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestednessReport {
    pub slack: f64,
    pub loops: Vec<LoopCheck>,
    pub pairs: Vec<PairCheck>,
    pub pass: bool,
}

fn point_segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn distance_to_loop(p: P2, pts: &[P2]) -> f64 {
    (0..pts.len())
        .map(|k| point_segment_distance(p, pts[k], pts[(k + 1) % pts.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Checks that every loop is simple, every pair `r_a < r_b` is nested (each
/// vertex of the inner loop inside the outer one, or within `slack` of it) and
/// that enclosed areas strictly increase with `r`.
pub fn nestedness_check(contours: &[Contour], slack: f64) -> NestednessReport {
    let mut sorted: Vec<&Contour> = contours.iter().collect();
    sorted.sort_by(|a, b| a.r.total_cmp(&b.r));
    let loops: Vec<Vec<P2>> = sorted.iter().map(|c| dedup_loop(&c.vertices)).collect();
    let checks: Vec<LoopCheck> = sorted
        .iter()
        .zip(&loops)
        .map(|(c, l)| {
            let intersection = loop_self_intersection(l);
            LoopCheck {
                r: c.r,
                simple: intersection.is_none() && l.len() >= 3,
                intersection,
                area: signed_area(l).abs(),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..sorted.len() {
        for b in a + 1..sorted.len() {
            let mut outside = Vec::new();
            let mut worst = 0.0f64;
            for (i, &v) in sorted[a].vertices.iter().enumerate() {
                if winding_number(v, &loops[b]) != 0 {
                    continue;
                }
                let d = distance_to_loop(v, &loops[b]);
                worst = worst.max(d);
                if d > slack {
                    outside.push(i);
                }
            }
            pairs.push(PairCheck {
                r_inner: sorted[a].r,
                r_outer: sorted[b].r,
                nested: outside.is_empty(),
                outside,
                worst_excess: worst,
                area_increases: checks[b].area > checks[a].area,
            });
        }
    }
    let pass =
        checks.iter().all(|c| c.simple) && pairs.iter().all(|p| p.nested && p.area_increases);
    NestednessReport {
        slack,
        loops: checks,
        pairs,
        pass,
    }
}

/// Contour diameters along shrinking radii and the hull of the innermost contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KEstimate {
    pub radii: Vec<f64>,
    pub diameters: Vec<f64>,
    /// Convex hull of the innermost contour (empty for `d = 3`).
    pub hull_vertices: Vec<P2>,
    pub hull_area: Option<f64>,
    pub decreasing: bool,
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// `m` nearly uniform directions on the unit 2-sphere (Fibonacci lattice).
pub(crate) fn sphere_directions(m: usize) -> Vec<Vec<f64>> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..m)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / m as f64;
            let s = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            vec![s * t.cos(), s * t.sin(), z]
        })
        .collect()
}

/// Diameters of `Q(r S^{d-1})` for decreasing radii. In the plane the convex
/// hull of the innermost contour is the surrogate for `K`; in space only the
/// diameters are reported.
pub fn estimate_k(map: &QuantileMap, radii: &[f64], m: usize) -> Result<KEstimate> {
    if radii.is_empty() {
        return domain("estimate_k needs at least one radius");
    }
    if radii.windows(2).any(|w| w[1] >= w[0]) {
        return domain("radii must be strictly decreasing");
    }
    let mut diameters = Vec::with_capacity(radii.len());
    let mut hull_vertices = Vec::new();
    let mut hull_area = None;
    for &r in radii {
        if map.dim() == 2 {
            let c = extract_contour(map, r, m)?;
            diameters.push(c.diameter());
            hull_vertices = convex_hull(&c.vertices);
        } else {
            if !(r > 0.0 && r < 1.0) {
                return domain(format!("radius {r} is outside (0, 1)"));
            }
            let images = sphere_directions(m)
                .into_par_iter()
                .map(|u| map.forward(&u.iter().map(|c| r * c).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            diameters.push(diameter(&images));
        }
    }
    if map.dim() == 2 {
        hull_area = Some(signed_area(&hull_vertices).abs());
    }
    Ok(KEstimate {
        radii: radii.to_vec(),
        decreasing: diameters.windows(2).all(|w| w[1] < w[0]),
        diameters,
        hull_vertices,
        hull_area,
    })
}

/// Distribution of `|F(Q(x)) - x|` over probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripStats {
    pub count: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

pub fn roundtrip_error(map: &QuantileMap, probes: &[Vec<f64>]) -> Result<RoundtripStats> {
    if map.backend() != Backend::Entropic {
        return Err(Error::State(
            "round trips need the inverse map of the entropic backend".into(),
        ));
    }
    if probes.is_empty() {
        return domain("no probes");
    }
    let mut errs = probes
        .par_iter()
        .map(|x| {
            let y = map.forward(x)?;
            let back = map.inverse(&y)?;
            Ok(norm(
                &back.iter().zip(x).map(|(b, x)| b - x).collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<f64>>>()?;
    errs.sort_by(f64::total_cmp);
    Ok(RoundtripStats {
        count: errs.len(),
        median: quantile_sorted(&errs, 0.5),
        p90: quantile_sorted(&errs, 0.9),
        max: *errs.last().unwrap(),
    })
}

/// `n` equally spaced planar probes on the circle of radius `r`.
pub fn ring_probes(r: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = TAU * (i as f64 + 0.5) / n as f64;
            vec![r * t.cos(), r * t.sin()]
        })
        .collect()
}

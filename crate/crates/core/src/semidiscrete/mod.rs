//! Exact semidiscrete transport from `U_2` to a discrete target in the plane.
//!
//! For weights `psi` the convex potential is `phi(x) = max_i (<x, y_i> - psi_i)`
//! and its gradient sends the Laguerre cell of atom `i` onto `y_i`. The weights
//! maximize the concave dual
//!
//! ```text
//! D(psi) = -int phi dU_2 - sum_i nu_i psi_i,    dD/dpsi_i = mass_i(psi) - nu_i,
//! ```
//!
//! whose Hessian is minus a weighted graph Laplacian with edge weights
//! `int_{facet ij} u_2 ds / |y_i - y_j|`.

mod laguerre;

pub use laguerre::{build_laguerre, cell_diameter, locate, Cell, Facet, LaguerreDiagram};

use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{dot, norm2, P2};
use crate::measures::Density;

/// Atoms `y_i` with weights `nu_i` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTarget {
    points: Vec<P2>,
    weights: Vec<f64>,
}

impl DiscreteTarget {
    pub fn new(points: Vec<P2>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Geometry("target needs at least one atom".into()));
        }
        if weights.len() != points.len() {
            return domain("one weight per atom is required");
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return domain("atom weights must be nonnegative and finite");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("atom weights sum to {total}, expected 1"));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return domain("atom coordinates must be finite");
        }
        laguerre::check_distinct(&points)?;
        Ok(Self { points, weights })
    }

    /// Equal weights `1 / n`.
    pub fn uniform(points: Vec<P2>) -> Result<Self> {
        let n = points.len().max(1);
        Self::new(points, vec![1.0 / n as f64; n])
    }

    /// Rescales arbitrary nonnegative weights to sum to one.
    pub fn normalized(points: Vec<P2>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return domain("atom weights must have a positive finite sum");
        }
        Self::new(points, weights.iter().map(|w| w / total).collect())
    }

    /// `n` i.i.d. atoms drawn from a planar density, equal weights.
    pub fn sample(density: &Density, n: usize, seed: u64) -> Result<Self> {
        if density.dim() != 2 {
            return domain("semidiscrete targets are planar");
        }
        let pts = density
            .sample(n, seed)
            .into_iter()
            .map(|p| [p[0], p[1]])
            .collect();
        Self::uniform(pts)
    }

    /// Reads `y1,y2[,weight]` rows; a non-numeric first row is a header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let rows = crate::io::read_sample_csv(path)?;
        let mut points = Vec::with_capacity(rows.len());
        let mut weights = Vec::with_capacity(rows.len());
        let mut weighted = None;
        for (line, row) in rows {
            let has_weight = match row.len() {
                2 => false,
                3 => true,
                k => {
                    return Err(Error::Config(format!(
                        "line {line}: expected `y1,y2[,weight]`, found {k} fields"
                    )))
                }
            };
            if *weighted.get_or_insert(has_weight) != has_weight {
                return Err(Error::Config(format!(
                    "line {line}: weight column present on some rows only"
                )));
            }
            points.push([row[0], row[1]]);
            weights.push(if has_weight { row[2] } else { 1.0 });
        }
        Self::normalized(points, weights)
    }

    pub fn points(&self) -> &[P2] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Dual weights `psi_i`, normalized so that `psi_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotential {
    psi: Vec<f64>,
}

impl DualPotential {
    pub fn new(psi: Vec<f64>) -> Self {
        Self { psi }
    }

    pub fn values(&self) -> &[f64] {
        &self.psi
    }

    /// Shifts so the first weight is zero; the dual is invariant under constants.
    pub fn normalize(&mut self) {
        if let Some(&first) = self.psi.first() {
            self.psi.iter_mut().for_each(|p| *p -= first);
        }
    }

    /// `phi(x) = max_i (<x, y_i> - psi_i)`.
    pub fn phi(&self, target: &DiscreteTarget, x: P2) -> f64 {
        target
            .points
            .iter()
            .zip(&self.psi)
            .map(|(&y, &p)| dot(x, y) - p)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Concave dual objective `-int phi dU_2 - sum nu_i psi_i`.
    pub fn objective(&self, target: &DiscreteTarget, diagram: &LaguerreDiagram) -> f64 {
        let mut acc = 0.0;
        for (i, cell) in diagram.cells.iter().enumerate() {
            acc -= dot(target.points[i], cell.moment) - self.psi[i] * cell.mass;
            acc -= target.weights[i] * self.psi[i];
        }
        acc
    }

    /// Adds a seeded uniform perturbation in `[-magnitude, magnitude]` to every
    /// weight. Used to build negative controls for the diagnostics.
    pub fn perturbed(&self, magnitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Self {
            psi: self
                .psi
                .iter()
                .map(|p| p + magnitude * (2.0 * rng.random::<f64>() - 1.0))
                .collect(),
        };
        out.normalize();
        out
    }
}

/// Per-iteration record of the dual ascent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AscentStep {
    pub iteration: usize,
    pub kind: StepKind,
    pub step: f64,
    pub max_residual: f64,
    pub objective: f64,
    pub total_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Newton,
    Gradient,
}

/// Converged semidiscrete transport plan.
#[derive(Debug, Clone)]
pub struct SemidiscreteSolution {
    pub target: DiscreteTarget,
    pub potential: DualPotential,
    pub diagram: LaguerreDiagram,
    pub iterations: usize,
    pub max_residual: f64,
    pub log: Vec<AscentStep>,
}

impl SemidiscreteSolution {
    /// Rebuilds the solution object around a given potential (no solve).
    pub fn from_potential(target: DiscreteTarget, potential: DualPotential) -> Result<Self> {
        let diagram = build_laguerre(&target, &potential)?;
        let max_residual = max_residual(&diagram, &target);
        Ok(Self {
            target,
            potential,
            diagram,
            iterations: 0,
            max_residual,
            log: Vec::new(),
        })
    }

    pub fn evaluate(&self, x: P2) -> Result<P2> {
        evaluate_map(&self.target, &self.potential, x)
    }

    pub fn atom_distribution(&self) -> Vec<Option<P2>> {
        f_plusminus_on_atoms(&self.diagram, self.target.min_weight() * 1e-9)
    }
}

fn max_residual(diagram: &LaguerreDiagram, target: &DiscreteTarget) -> f64 {
    diagram
        .cells
        .iter()
        .zip(&target.weights)
        .map(|(c, w)| (c.mass - w).abs())
        .fold(0.0, f64::max)
}

/// Weights whose cells are the Voronoi cells of the atoms scaled into the disk;
/// every cell then contains its scaled site and has positive mass.
fn initial_potential(target: &DiscreteTarget) -> DualPotential {
    let scale = target
        .points
        .iter()
        .map(|&y| norm2(y))
        .fold(0.0, f64::max)
        .max(1e-12)
        / 0.95;
    let mut psi = DualPotential::new(
        target
            .points
            .iter()
            .map(|&y| dot(y, y) / (2.0 * scale))
            .collect(),
    );
    psi.normalize();
    psi
}

/// Newton direction solving `L d = g` with `d_0 = 0`, `L` the facet Laplacian.
fn newton_direction(
    target: &DiscreteTarget,
    diagram: &LaguerreDiagram,
    grad: &[f64],
) -> Option<Vec<f64>> {
    let n = target.len();
    let mut lap = DMatrix::<f64>::zeros(n - 1, n - 1);
    for (i, cell) in diagram.cells.iter().enumerate() {
        for f in &cell.facets {
            let j = f.neighbor;
            let dy = crate::geometry::dist(target.points[i], target.points[j]);
            let w = f.u2_length / dy;
            if i > 0 {
                lap[(i - 1, i - 1)] += w;
                if j > 0 {
                    lap[(i - 1, j - 1)] -= w;
                }
            }
        }
    }
    // Facets are seen from both sides; symmetrize against rounding.
    let lap = (&lap + lap.transpose()) * 0.5;
    let rhs = DVector::from_iterator(n - 1, grad[1..].iter().copied());
    let chol = lap.cholesky()?;
    let sol = chol.solve(&rhs);
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut d = Vec::with_capacity(n);
    d.push(0.0);
    d.extend(sol.iter().copied());
    Some(d)
}

/// Maximizes the semidiscrete dual until every cell mass is within `mass_tol`
/// of its target weight.
///
/// Damped Newton steps are taken while every cell keeps at least a mass floor;
/// otherwise a backtracking gradient step is used.
pub fn dual_ascent(
    target: &DiscreteTarget,
    mass_tol: f64,
    max_iter: usize,
) -> Result<SemidiscreteSolution> {
    if !(mass_tol > 0.0) {
        return domain("mass tolerance must be positive");
    }
    let n = target.len();
    let mut psi = initial_potential(target);
    let mut diagram = build_laguerre(target, &psi)?;
    if n == 1 {
        return Ok(SemidiscreteSolution {
            target: target.clone(),
            potential: psi,
            diagram,
            iterations: 0,
            max_residual: 0.0,
            log: Vec::new(),
        });
    }
    let initial_min = diagram.masses().into_iter().fold(f64::INFINITY, f64::min);
    let floor = (target.min_weight() / 10.0).min(0.5 * initial_min);
    let mut objective = psi.objective(target, &diagram);
    let mut grad_step = 1.0;
    let mut log = Vec::new();

    for iteration in 0..=max_iter {
        let grad: Vec<f64> = diagram
            .cells
            .iter()
            .zip(&target.weights)
            .map(|(c, w)| c.mass - w)
            .collect();
        let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if residual <= mass_tol {
            return Ok(SemidiscreteSolution {
                target: target.clone(),
                potential: psi,
                diagram,
                iterations: iteration,
                max_residual: residual,
                log,
            });
        }
        if iteration == max_iter {
            return Err(Error::Convergence {
                iterations: max_iter,
                residual,
            });
        }

        let min_mass = diagram.masses().into_iter().fold(f64::INFINITY, f64::min);
        let mut accepted = None;
        if min_mass >= floor {
            if let Some(dir) = newton_direction(target, &diagram, &grad) {
                let mut tau = 1.0;
                for _ in 0..40 {
                    let cand = DualPotential::new(
                        psi.psi.iter().zip(&dir).map(|(p, d)| p + tau * d).collect(),
                    );
                    let cand_diag = build_laguerre(target, &cand)?;
                    let cand_min = cand_diag.masses().into_iter().fold(f64::INFINITY, f64::min);
                    let cand_res = max_residual(&cand_diag, target);
                    let cand_obj = cand.objective(target, &cand_diag);
                    if cand_min >= floor
                        && cand_res <= (1.0 - 0.5 * tau) * residual
                        && cand_obj >= objective
                    {
                        accepted = Some((cand, cand_diag, cand_obj, StepKind::Newton, tau));
                        break;
                    }
                    tau *= 0.5;
                }
            }
        }
        if accepted.is_none() {
            // Backtracking gradient ascent with an Armijo condition.
            let g2: f64 = grad.iter().map(|g| g * g).sum();
            let mut step = grad_step * 4.0;
            for _ in 0..60 {
                let cand = DualPotential::new(
                    psi.psi
                        .iter()
                        .zip(&grad)
                        .map(|(p, g)| p + step * g)
                        .collect(),
                );
                let cand_diag = build_laguerre(target, &cand)?;
                let cand_obj = cand.objective(target, &cand_diag);
                if cand_obj >= objective + 1e-4 * step * g2 {
                    accepted = Some((cand, cand_diag, cand_obj, StepKind::Gradient, step));
                    grad_step = step;
                    break;
                }
                step *= 0.5;
            }
        }
        let Some((mut cand, cand_diag, cand_obj, kind, step)) = accepted else {
            return Err(Error::Convergence {
                iterations: iteration,
                residual,
            });
        };
        cand.normalize();
        psi = cand;
        diagram = cand_diag;
        objective = cand_obj;
        let rec = AscentStep {
            iteration,
            kind,
            step,
            max_residual: max_residual(&diagram, target),
            objective,
            total_mass: diagram.total_mass(),
        };
        debug!(
            "ascent {:>3} {:?} step {:.3e} residual {:.3e}",
            rec.iteration, rec.kind, rec.step, rec.max_residual
        );
        log.push(rec);
    }
    unreachable!("loop returns on its last iteration")
}

/// `Q(x) = grad phi(x)`: the atom whose cell contains `x`.
pub fn evaluate_map(target: &DiscreteTarget, psi: &DualPotential, x: P2) -> Result<P2> {
    let r = norm2(x);
    if !(r < 1.0) {
        return domain(format!("|x| = {r} is outside the open unit disk"));
    }
    Ok(target.points[locate(&target.points, &psi.psi, x)])
}

/// Atom-level distribution function: the `U_2`-barycenter of each cell, or
/// `None` when the cell mass does not exceed `floor`.
pub fn f_plusminus_on_atoms(diagram: &LaguerreDiagram, floor: f64) -> Vec<Option<P2>> {
    diagram.cells.iter().map(|c| c.barycenter(floor)).collect()
}

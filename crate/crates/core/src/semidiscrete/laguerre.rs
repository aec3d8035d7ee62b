use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, norm2, sub, ArcPolygon, LabeledPolygon, Piece, P2};

use super::{DiscreteTarget, DualPotential};

/// Half-width of the square every cell is clipped from; contains the unit disk.
const BOX: f64 = 1.5;

/// Shared boundary between a cell and one neighbour.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Facet {
    pub neighbor: usize,
    /// `int_facet u_2 ds`.
    pub u2_length: f64,
}

/// One Laguerre cell `Lag_i` intersected with the unit disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub region: ArcPolygon,
    pub mass: f64,
    /// `int_{Lag_i} x u_2(x) dx`.
    pub moment: P2,
    pub facets: Vec<Facet>,
}

impl Cell {
    /// `U_2`-barycenter, `None` for cells whose mass is below `floor`.
    pub fn barycenter(&self, floor: f64) -> Option<P2> {
        (self.mass > floor).then(|| [self.moment[0] / self.mass, self.moment[1] / self.mass])
    }
}

/// Power diagram of the unit disk for scores `<x, y_i> - psi_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LaguerreDiagram {
    pub cells: Vec<Cell>,
}

impl LaguerreDiagram {
    pub fn masses(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.mass).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(|c| c.mass).sum()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Builds the Laguerre diagram of the unit disk. Cell `i` is the set where
/// `<x, y_i> - psi_i` is maximal; boundaries are the lines
/// `<x, y_i - y_j> = psi_i - psi_j`.
pub fn build_laguerre(target: &DiscreteTarget, psi: &DualPotential) -> Result<LaguerreDiagram> {
    let points = target.points();
    if points.is_empty() {
        return Err(Error::Geometry("target has no atoms".into()));
    }
    if psi.values().len() != points.len() {
        return Err(Error::Geometry(format!(
            "{} potentials for {} atoms",
            psi.values().len(),
            points.len()
        )));
    }
    check_distinct(points)?;
    let cells = (0..points.len())
        .into_par_iter()
        .map(|i| build_cell(points, psi.values(), i))
        .collect();
    Ok(LaguerreDiagram { cells })
}

pub(crate) fn check_distinct(points: &[P2]) -> Result<()> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a][0]
            .total_cmp(&points[b][0])
            .then(points[a][1].total_cmp(&points[b][1]))
    });
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::Geometry(format!(
                "duplicate atoms {} and {} at {:?}",
                w[0].min(w[1]),
                w[0].max(w[1]),
                points[w[0]]
            )));
        }
    }
    Ok(())
}

fn build_cell(points: &[P2], psi: &[f64], i: usize) -> Cell {
    let yi = points[i];
    // Half-planes <x, y_j - y_i> <= psi_j - psi_i, most restrictive first.
    let mut planes: Vec<(f64, usize, P2, f64)> = Vec::with_capacity(points.len());
    for (j, &yj) in points.iter().enumerate() {
        if j == i {
            continue;
        }
        let normal = sub(yj, yi);
        let offset = psi[j] - psi[i];
        let reach = offset / norm2(normal);
        if reach >= 1.0 {
            continue;
        }
        planes.push((reach, j, normal, offset));
    }
    planes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut poly = LabeledPolygon::square(BOX);
    for &(reach, j, normal, offset) in &planes {
        if reach < -1.0 {
            poly = LabeledPolygon {
                vertices: Vec::new(),
                labels: Vec::new(),
            };
            break;
        }
        // The remaining half-planes all contain the disk of radius `reach`.
        if reach >= poly.max_norm().min(1.0) {
            break;
        }
        poly.clip(normal, offset, j);
        if poly.is_empty() {
            break;
        }
    }
    let region = poly.intersect_unit_disk();
    let (mass, moment) = region.mass_and_moment();
    let mut facets: Vec<Facet> = Vec::new();
    for piece in &region.pieces {
        if let Piece::Segment {
            from,
            to,
            label: Some(j),
        } = *piece
        {
            let w = crate::geometry::segment_u2_integral(from, to);
            match facets.iter_mut().find(|f| f.neighbor == j) {
                Some(f) => f.u2_length += w,
                None => facets.push(Facet {
                    neighbor: j,
                    u2_length: w,
                }),
            }
        }
    }
    Cell {
        region,
        mass: mass.max(0.0),
        moment,
        facets,
    }
}

/// Index of the cell containing `x`: the maximizer of `<x, y_i> - psi_i`,
/// ties broken towards the lower index.
pub fn locate(points: &[P2], psi: &[f64], x: P2) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, (&y, &p)) in points.iter().zip(psi).enumerate() {
        let s = dot(x, y) - p;
        if s > best_score {
            best_score = s;
            best = i;
        }
    }
    best
}

/// Distance between the farthest pair of boundary points of a cell.
pub fn cell_diameter(cell: &Cell) -> f64 {
    if cell.region.is_empty() {
        return 0.0;
    }
    cell.region.diameter()
}

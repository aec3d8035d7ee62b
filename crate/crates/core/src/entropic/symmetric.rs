use rayon::prelude::*;

use crate::error::{Error, Result};

use super::grid::BallGrid;
use super::sinkhorn::{half_sq_dist, log_sum_exp, SinkhornOptions};

/// Potential of the entropic self-transport `U_d -> U_d` on a ball grid.
///
/// The grid and its masses are invariant under the azimuthal rotation by one
/// angular step, so the symmetric Sinkhorn potential is constant on each orbit
/// (a ring in the plane, a ring of a polar band in space). Only one
/// representative per orbit is updated, with the averaged symmetric iteration
/// `h <- (h + T h) / 2`. Returns the potential expanded to every node.
pub fn self_transport_potential(grid: &BallGrid, opts: &SinkhornOptions) -> Result<Vec<f64>> {
    opts.validate()?;
    let orbit_len = grid.n_azimuth();
    let n_orbits = grid.len() / orbit_len;
    let reps: Vec<usize> = (0..n_orbits).map(|o| o * orbit_len).collect();
    let cost: Vec<Vec<f64>> = reps
        .par_iter()
        .map(|&r| {
            let xr = grid.nodes.point(r);
            grid.nodes.iter().map(|p| half_sq_dist(xr, p)).collect()
        })
        .collect();
    let ln_a: Vec<f64> = grid.masses.iter().map(|m| m.ln()).collect();
    let mass: Vec<f64> = reps.iter().map(|&r| grid.masses[r]).collect();
    let mut h = vec![0.0; n_orbits];
    let mut iterations = 0usize;
    let last = opts.epsilons.len() - 1;
    for (stage, &eps) in opts.epsilons.iter().enumerate() {
        let tol = if stage == last {
            opts.tol
        } else {
            10.0 * opts.tol
        };
        loop {
            let th: Vec<f64> = cost
                .par_iter()
                .map(|c| {
                    let z = c
                        .iter()
                        .zip(&ln_a)
                        .enumerate()
                        .map(|(i, (c, la))| la + (h[i / orbit_len] - c) / eps);
                    -eps * log_sum_exp(z)
                })
                .collect();
            let err = h
                .iter()
                .zip(&th)
                .zip(&mass)
                .map(|((h, t), a)| a * (((h - t) / eps).exp() - 1.0).abs())
                .fold(0.0, f64::max);
            if err <= tol {
                break;
            }
            if iterations >= opts.max_iter {
                return Err(Error::Convergence {
                    iterations,
                    residual: err,
                });
            }
            iterations += 1;
            h.iter_mut().zip(&th).for_each(|(h, t)| *h = 0.5 * (*h + t));
        }
    }
    Ok((0..grid.len()).map(|i| h[i / orbit_len]).collect())
}

#[cfg(test)]
mod tests {
    use super::super::grid::build_ball_grid;
    use super::super::sinkhorn::solve_transport;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matches_general_solver() {
        for (d, n_r, n_ang) in [(2, 8, 12), (3, 4, 4)] {
            let grid = build_ball_grid(d, n_r, n_ang).unwrap();
            let opts = SinkhornOptions {
                epsilons: vec![0.1, 0.03],
                tol: 1e-11,
                max_iter: 100_000,
                record_objective: false,
            };
            let h = self_transport_potential(&grid, &opts).unwrap();
            let c = solve_transport(&grid.nodes, &grid.masses, &grid.nodes, &grid.masses, &opts)
                .unwrap();
            // The general solver's potentials are defined up to f + t, g - t.
            let shift = 0.5 * (c.f[0] - c.g[0]);
            for ((f, g), h) in c.f.iter().zip(&c.g).zip(&h) {
                assert_abs_diff_eq!(f - shift, h, epsilon = 1e-7);
                assert_abs_diff_eq!(g + shift, h, epsilon = 1e-7);
            }
        }
    }
}

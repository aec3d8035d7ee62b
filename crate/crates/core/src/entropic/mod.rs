//! Entropic optimal transport between a polar discretization of `U_d` and a
//! discretization of the target, for `d = 2, 3`.

mod grid;
mod map;
mod sinkhorn;
mod symmetric;

pub use grid::{build_ball_grid, BallGrid, PointCloud, TargetGrid, TargetMode};
pub use map::{
    barycentric_map, ma_residual_field, solve_entropic, BarycentricTable, Direction,
    EntropicOptions, EntropicSolution, MaResidual, MapTable,
};
pub(crate) use map::{check_ball_point, quantile_sorted};
pub use sinkhorn::{solve_transport, GridCoupling, SinkhornOptions, StageLog};
pub use symmetric::self_transport_potential;

/// Solves the entropic problem from a ball grid to a target grid.
pub fn sinkhorn_solve(
    src: &BallGrid,
    tgt: &TargetGrid,
    opts: &SinkhornOptions,
) -> crate::Result<GridCoupling> {
    solve_transport(&src.nodes, &src.masses, &tgt.nodes, &tgt.masses, opts)
}

//! Simple discs, their dual lens maps, tabulated lens grids and the boundary-pair maps.

pub mod disc;
pub mod grid;
pub mod map;
pub mod pq;

pub use disc::{
    check_simple, simplicity_radius, simplicity_radius_report, trace, BoundaryCovector,
    CertificationRecord, Chord, ConditionResult, Direction, SimpleDisc, SimplicityEstimate,
};
pub use grid::{
    build_lens_grid, build_lens_grid_with, defect_samples, symplectic_defect, LensGrid, LensNode,
};
pub use map::{
    lens_map, ExactLens, PlanarMap, Postcomposed, Precomposed, Scale, Shear, TransitionMap,
};
pub use pq::{consistency_integral, lambda_sigma, p_inv, p_map, q_inv, q_map, solve_angle};

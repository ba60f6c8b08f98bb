//! Area-preserving bumps, perturbed transition and section maps, and hybrid systems.

pub mod bump;
pub mod compose;
pub mod hybrid;
pub mod poincare;
pub mod section;

pub use bump::{
    calibrate_constant, make_bump, make_bump_with, SymplecticBump, DEFAULT_BUMP_CONSTANT,
};
pub use compose::{
    check_support, perturb_lens, reversibility_defect, reversible_symmetrize,
    reversible_symmetrize_region, Region, Symmetrized,
};
pub use hybrid::{
    agreement_defect, hybrid_orbit, hybrid_section_map, hybrid_watch, Crossing, HybridOptions,
    HybridOrbit, HybridSystem, Transition, Watch,
};
pub use poincare::{perturb_poincare, PerturbedPoincare};
pub use section::{poincare_map, poincare_map_with, PoincareOptions, Section};

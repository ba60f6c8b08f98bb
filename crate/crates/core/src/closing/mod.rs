//! Closing orbits: recurrence search, Newton refinement of periodic orbits, the
//! one-disc and two-disc closing constructions, Hamiltonian closing on sections,
//! conformal-family scans and orbit censuses.

pub mod census;
pub mod conformal;
pub mod directional;
pub mod hamiltonian;
pub mod local;
pub mod periodic;
pub mod recurrence;

pub use census::{
    katok_census, torus_density, CensusOptions, DensityOptions, DensityReport, FoundOrbit,
    KatokCensus, OrbitClass,
};
pub use conformal::{conformal_scan, ScanHit, ScanOptions};
pub use directional::{
    directional_close, Connector, DirectionalClosing, DirectionalOptions, DownstreamCorrection,
};
pub use hamiltonian::{ham_close, HamCloseOptions, HamClosing};
pub use local::{local_close, LocalClosing, LocalOptions};
pub use periodic::{
    refine_on_section, refine_periodic, return_map, PeriodicOrbit, RefineOptions, ReturnSelect,
};
pub use recurrence::{find_recurrent, RecurrenceEvent};

use crate::error::Result;
use crate::perturb::Section;
use crate::phase::{hamiltonian_vector_field, Hamiltonian, PhasePoint};
use serde::{Deserialize, Serialize};

/// Half-width of the local line sections used away from the torus.
pub const LOCAL_HALF_WIDTH: f64 = 0.5;

/// An open ball in phase space around a covector, in chart coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Neighbourhood {
    pub center: PhasePoint,
    pub radius: f64,
}

impl Neighbourhood {
    pub fn new(center: PhasePoint, radius: f64) -> Self {
        Neighbourhood { center, radius }
    }

    pub fn distance(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> f64 {
        let surface = ham.surface();
        let z = z.to_chart(&surface, self.center.chart);
        let dq = surface.min_image(&(z.q - self.center.q));
        (dq.norm_squared() + (z.p - self.center.p).norm_squared()).sqrt()
    }

    pub fn contains(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> bool {
        self.distance(ham, z) < self.radius
    }
}

/// A section through `z` crossed by its orbit: a closed-up axis section on a torus,
/// a short line normal to the velocity elsewhere.
pub fn section_through(ham: &dyn Hamiltonian, z: &PhasePoint) -> Result<Section> {
    let v = hamiltonian_vector_field(ham, z).0;
    let level = ham.value(z);
    let surface = ham.surface();
    if surface.periods().is_some() {
        let axis = if v.x.abs() >= v.y.abs() { 0 } else { 1 };
        return Section::axis(&surface, z.q, axis, v[axis], level);
    }
    Ok(Section::new(z.q, v, level)?
        .in_chart(z.chart)
        .with_half_width(LOCAL_HALF_WIDTH))
}

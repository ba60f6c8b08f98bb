//! Cotangent phase space: dual norms, Legendre transforms, Hamiltonians and
//! their flows, distances, geodesic discs and Reeb reparametrization.

pub mod distance;
pub mod dual;
pub mod flow;
pub mod hamiltonian;
pub mod ode;
pub mod reeb;

use crate::error::{Error, Result};
use crate::geometry::SurfacePatch;
use crate::Vec2;
use serde::{Deserialize, Serialize};

pub use distance::{
    distance, distance_report, geodesic_disc, DiscSign, DistanceReport, GeodesicDisc,
};
pub use dual::{dual_norm, legendre, legendre_inverse};
pub use flow::{
    flow_to, integrate_flow, run_flow, Event, EventDirection, EventHit, FlowOptions, FlowOutcome,
    Trajectory,
};
pub use hamiltonian::{
    hamiltonian_vector_field, ClassicalHamiltonian, CosineTerm, FlowBox, FnHamiltonian,
    GeodesicHamiltonian, Hamiltonian, Potential,
};
pub use reeb::reeb_reparametrize;

/// A point of `T*M` in one chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub chart: u8,
    pub q: Vec2,
    pub p: Vec2,
}

impl PhasePoint {
    pub fn new(q: Vec2, p: Vec2) -> Self {
        PhasePoint { chart: 0, q, p }
    }

    pub fn in_chart(chart: u8, q: Vec2, p: Vec2) -> Self {
        PhasePoint { chart, q, p }
    }

    pub fn validate(&self, surface: &SurfacePatch) -> Result<()> {
        if !(self.p.x.is_finite() && self.p.y.is_finite()) {
            return Err(Error::Domain(format!("non-finite covector {:?}", self.p)));
        }
        surface.check_point(self.chart, &self.q)
    }

    /// The same point expressed in the given chart (sphere only changes anything).
    pub fn to_chart(&self, surface: &SurfacePatch, chart: u8) -> PhasePoint {
        if chart == self.chart || surface.chart_count() == 1 {
            return *self;
        }
        let (q, p) = surface.rechart_covector(&self.q, &self.p);
        PhasePoint { chart, q, p }
    }

    /// Position in chart 0 of the sphere (identity elsewhere).
    pub fn base_in_chart0(&self, surface: &SurfacePatch) -> Vec2 {
        if self.chart == 0 {
            self.q
        } else {
            surface.transition(&self.q)
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.q.x, self.q.y, self.p.x, self.p.y]
    }
}

/// A covector certified to lie on the unit cotangent bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCovector {
    pub point: PhasePoint,
    pub certified: bool,
}

/// Allowed distance of a certified unit covector from the unit level.
pub const UNIT_TOL: f64 = 1e-9;

impl UnitCovector {
    /// Certify a covector, failing if it is not unit to [`UNIT_TOL`].
    pub fn certify(metric: &crate::geometry::FinslerMetric, point: PhasePoint) -> Result<Self> {
        point.validate(&metric.surface)?;
        let n = metric.dual(point.chart, &point.q, &point.p);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Precondition(format!(
                "covector has dual norm {n}, not 1"
            )));
        }
        Ok(UnitCovector {
            point,
            certified: true,
        })
    }

    /// Scale a nonzero covector onto the unit level.
    pub fn normalize(metric: &crate::geometry::FinslerMetric, point: PhasePoint) -> Result<Self> {
        point.validate(&metric.surface)?;
        let n = metric.dual(point.chart, &point.q, &point.p);
        if !(n > 0.0) {
            return Err(Error::Precondition(
                "cannot normalize the zero covector".into(),
            ));
        }
        Ok(UnitCovector {
            point: PhasePoint {
                p: point.p / n,
                ..point
            },
            certified: true,
        })
    }
}

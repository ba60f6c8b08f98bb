//! Engineered levels that fail the contact criteria, and the affine change `aH + b`.

use crate::geometry::SurfacePatch;
use crate::phase::{FnHamiltonian, Hamiltonian, PhasePoint};
use crate::Vec2;
use std::f64::consts::PI;
use std::sync::Arc;

/// `|w - c1|^2 |w - c2|^2` for the foci `(-0.5, 0)` and `(c, 0)`.
fn cassini(w: [f64; 4], c: f64) -> f64 {
    let a: f64 = (w[0] + 0.5).powi(2) + w[1..].iter().map(|x| x * x).sum::<f64>();
    let b: f64 = (w[0] - c).powi(2) + w[1..].iter().map(|x| x * x).sum::<f64>();
    a * b
}

/// Level of the engineered counterexamples: the neck of the dumbbell is narrow enough
/// that rays from the origin leave it and re-enter the far lobe.
pub const DUMBBELL_LEVEL: f64 = 5.2;

/// A dumbbell in `R^4` around the origin: two lobes about `(-0.5, 0, 0, 0)` and
/// `(2.5, 0, 0, 0)` joined by a thin neck. Returns the Hamiltonian and its level.
pub fn dumbbell() -> (FnHamiltonian, f64) {
    let h = FnHamiltonian::new("dumbbell", |q: &Vec2, p: &Vec2| {
        cassini([q.x, q.y, p.x, p.y], 2.5)
    });
    (h, DUMBBELL_LEVEL)
}

/// A Hamiltonian on `T*T^2` whose fibre is a disc about `(-0.5, 0)` for `q1 = 1/2`
/// and folds into the planar dumbbell near `q1 = 0`.
pub fn folded_fiber() -> (FnHamiltonian, f64) {
    let mut h = FnHamiltonian::new("folded-fibre", |q: &Vec2, p: &Vec2| {
        let c = -0.5 + 3.0 * (PI * q.x).cos().powi(2);
        let a = (p.x + 0.5).powi(2) + p.y * p.y;
        let b = (p.x - c).powi(2) + p.y * p.y;
        a * b
    });
    h.surface = SurfacePatch::unit_torus();
    (h, DUMBBELL_LEVEL)
}

/// `scale * H + shift`.
#[derive(Clone)]
pub struct AffineHamiltonian {
    pub inner: Arc<dyn Hamiltonian>,
    pub scale: f64,
    pub shift: f64,
}

impl AffineHamiltonian {
    pub fn new(inner: Arc<dyn Hamiltonian>, scale: f64, shift: f64) -> Self {
        AffineHamiltonian {
            inner,
            scale,
            shift,
        }
    }
}

impl Hamiltonian for AffineHamiltonian {
    fn surface(&self) -> SurfacePatch {
        self.inner.surface()
    }
    fn value(&self, z: &PhasePoint) -> f64 {
        self.scale * self.inner.value(z) + self.shift
    }
    fn gradient(&self, z: &PhasePoint) -> (Vec2, Vec2) {
        let (a, b) = self.inner.gradient(z);
        (a * self.scale, b * self.scale)
    }
    fn name(&self) -> String {
        format!("{} * {} + {}", self.scale, self.inner.name(), self.shift)
    }
}

//! Hamiltonians on charted cotangent bundles and their vector fields.

use super::PhasePoint;
use crate::geometry::{FinslerMetric, SurfacePatch};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// A smooth function on `T*M` with first derivatives.
pub trait Hamiltonian: Send + Sync {
    fn surface(&self) -> SurfacePatch;
    fn value(&self, z: &PhasePoint) -> f64;
    /// `(dH/dq, dH/dp)`.
    fn gradient(&self, z: &PhasePoint) -> (Vec2, Vec2);
    fn name(&self) -> String;
    /// The Finsler metric behind a geodesic or mechanical Hamiltonian.
    fn metric(&self) -> Option<&FinslerMetric> {
        None
    }
    /// True for kinetic-plus-potential Hamiltonians with a Finsler kinetic term.
    fn is_classical(&self) -> bool {
        false
    }
}

/// `X_H = (dH/dp, -dH/dq)` in Darboux coordinates.
pub fn hamiltonian_vector_field(h: &dyn Hamiltonian, z: &PhasePoint) -> (Vec2, Vec2) {
    let (hq, hp) = h.gradient(z);
    (hp, -hq)
}

/// `H = (phi*)^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicHamiltonian {
    pub metric: FinslerMetric,
}

impl GeodesicHamiltonian {
    pub fn new(metric: FinslerMetric) -> Self {
        GeodesicHamiltonian { metric }
    }
}

fn kinetic(metric: &FinslerMetric, z: &PhasePoint) -> (f64, Vec2, Vec2) {
    if z.p.x == 0.0 && z.p.y == 0.0 {
        return (0.0, Vec2::zeros(), Vec2::zeros());
    }
    let (n, gp, gq) = metric.randers_at(z.chart, &z.q).dual_with_grad(&z.p);
    (0.5 * n * n, gq * n, gp * n)
}

impl Hamiltonian for GeodesicHamiltonian {
    fn surface(&self) -> SurfacePatch {
        self.metric.surface
    }
    fn value(&self, z: &PhasePoint) -> f64 {
        kinetic(&self.metric, z).0
    }
    fn gradient(&self, z: &PhasePoint) -> (Vec2, Vec2) {
        let (_, gq, gp) = kinetic(&self.metric, z);
        (gq, gp)
    }
    fn name(&self) -> String {
        format!("geodesic[{}]", self.metric.name())
    }
    fn metric(&self) -> Option<&FinslerMetric> {
        Some(&self.metric)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineTerm {
    pub amplitude: f64,
    pub wavevector: [f64; 2],
}

/// Potentials on the plane or torus (chart coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    #[default]
    Zero,
    /// `sum a cos(2 pi k . q)`.
    Cosine { terms: Vec<CosineTerm> },
    /// `sum omega_i^2 q_i^2 / 2`.
    Harmonic { omega: [f64; 2] },
}

impl Potential {
    pub fn cosine(amplitude: f64, wavevector: [f64; 2]) -> Self {
        Potential::Cosine {
            terms: vec![CosineTerm {
                amplitude,
                wavevector,
            }],
        }
    }

    pub fn value_grad(&self, q: &Vec2) -> (f64, Vec2) {
        match self {
            Potential::Zero => (0.0, Vec2::zeros()),
            Potential::Cosine { terms } => {
                let mut v = 0.0;
                let mut g = Vec2::zeros();
                for t in terms {
                    let k = Vec2::new(t.wavevector[0], t.wavevector[1]);
                    let arg = TAU * k.dot(q);
                    v += t.amplitude * arg.cos();
                    g -= k * (TAU * t.amplitude * arg.sin());
                }
                (v, g)
            }
            Potential::Harmonic { omega } => {
                let w2 = Vec2::new(omega[0] * omega[0], omega[1] * omega[1]);
                (
                    0.5 * (w2.x * q.x * q.x + w2.y * q.y * q.y),
                    w2.component_mul(q),
                )
            }
        }
    }

    /// Upper bound of the potential (infinite for unbounded ones).
    pub fn sup(&self) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Cosine { terms } => terms.iter().map(|t| t.amplitude.abs()).sum(),
            Potential::Harmonic { .. } => f64::INFINITY,
        }
    }
}

/// `H = (phi*)^2/2 + V(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalHamiltonian {
    pub metric: FinslerMetric,
    pub potential: Potential,
}

impl ClassicalHamiltonian {
    pub fn new(metric: FinslerMetric, potential: Potential) -> Self {
        ClassicalHamiltonian { metric, potential }
    }

    /// `(|q|^2 + |p|^2)/2` on the plane.
    pub fn harmonic_oscillator() -> Self {
        Self::new(
            FinslerMetric::euclidean(),
            Potential::Harmonic { omega: [1.0, 1.0] },
        )
    }
}

impl Hamiltonian for ClassicalHamiltonian {
    fn surface(&self) -> SurfacePatch {
        self.metric.surface
    }
    fn value(&self, z: &PhasePoint) -> f64 {
        kinetic(&self.metric, z).0 + self.potential.value_grad(&z.q).0
    }
    fn gradient(&self, z: &PhasePoint) -> (Vec2, Vec2) {
        let (_, gq, gp) = kinetic(&self.metric, z);
        (gq + self.potential.value_grad(&z.q).1, gp)
    }
    fn name(&self) -> String {
        format!("classical[{}]", self.metric.name())
    }
    fn metric(&self) -> Option<&FinslerMetric> {
        Some(&self.metric)
    }
    fn is_classical(&self) -> bool {
        true
    }
}

/// The flow-box model `H = p_k` on the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowBox {
    pub index: usize,
}

impl Hamiltonian for FlowBox {
    fn surface(&self) -> SurfacePatch {
        SurfacePatch::plane()
    }
    fn value(&self, z: &PhasePoint) -> f64 {
        z.p[self.index]
    }
    fn gradient(&self, _: &PhasePoint) -> (Vec2, Vec2) {
        let mut e = Vec2::zeros();
        e[self.index] = 1.0;
        (Vec2::zeros(), e)
    }
    fn name(&self) -> String {
        format!("flow-box[p{}]", self.index + 1)
    }
}

type ScalarFn = dyn Fn(&Vec2, &Vec2) -> f64 + Send + Sync;

/// A Hamiltonian given as a closure, differentiated by fourth-order central differences.
#[derive(Clone)]
pub struct FnHamiltonian {
    pub label: String,
    pub surface: SurfacePatch,
    f: Arc<ScalarFn>,
    step: f64,
}

impl std::fmt::Debug for FnHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnHamiltonian")
            .field("label", &self.label)
            .finish()
    }
}

impl FnHamiltonian {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&Vec2, &Vec2) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnHamiltonian {
            label: label.into(),
            surface: SurfacePatch::plane(),
            f: Arc::new(f),
            step: 1e-3,
        }
    }

    pub fn eval(&self, q: &Vec2, p: &Vec2) -> f64 {
        (self.f)(q, p)
    }

    fn diff(&self, g: impl Fn(f64) -> f64) -> f64 {
        let h = self.step;
        (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
    }
}

impl Hamiltonian for FnHamiltonian {
    fn surface(&self) -> SurfacePatch {
        self.surface
    }
    fn value(&self, z: &PhasePoint) -> f64 {
        (self.f)(&z.q, &z.p)
    }
    fn gradient(&self, z: &PhasePoint) -> (Vec2, Vec2) {
        let mut gq = Vec2::zeros();
        let mut gp = Vec2::zeros();
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = 1.0;
            gq[k] = self.diff(|h| (self.f)(&(z.q + e * h), &z.p));
            gp[k] = self.diff(|h| (self.f)(&z.q, &(z.p + e * h)));
        }
        (gq, gp)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

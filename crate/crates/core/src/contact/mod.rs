//! Energy levels of Hamiltonians on four-dimensional phase spaces and sampled
//! contact-type criteria: transversality of the radial field in `R^4`, and
//! star-shaped fibres in a cotangent bundle.

pub mod check;
pub mod models;
pub mod rays;

pub use check::{
    contact_type_check, radial_transverse_check, star_shaped_fiber_check, ContactReport, Criterion,
    Witness,
};
pub use models::{dumbbell, folded_fiber, AffineHamiltonian};

use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, SurfacePatch};
use crate::phase::{ClassicalHamiltonian, Hamiltonian, PhasePoint, Potential};
use crate::Vec2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rays::{crossings, outer_bound, RAY_CELLS};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

/// Samples farther than this from the level are rejected.
pub const LEVEL_TOL: f64 = 1e-9;

/// `H = (phi*)^2 / 2 + V`.
pub fn classical_hamiltonian(metric: FinslerMetric, potential: Potential) -> ClassicalHamiltonian {
    ClassicalHamiltonian::new(metric, potential)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambient {
    /// `R^4` with coordinates `(q, p)` on the plane.
    Euclidean,
    /// The cotangent bundle of the Hamiltonian's surface.
    Cotangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    /// Rays from the origin of `R^4`.
    pub rays: usize,
    pub n_base: usize,
    /// Rays in each fibre.
    pub n_fiber: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            rays: 512,
            n_base: 256,
            n_fiber: 64,
            seed: 7,
        }
    }
}

/// A sampled level `H^-1(h)`.
#[derive(Clone)]
pub struct LevelSet {
    pub ham: Arc<dyn Hamiltonian>,
    pub level: f64,
    pub ambient: Ambient,
    pub samples: Vec<PhasePoint>,
    /// Smallest `|dH|` over the samples.
    pub regularity_margin: f64,
    pub compact: bool,
}

impl std::fmt::Debug for LevelSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevelSet")
            .field("ham", &self.ham.name())
            .field("level", &self.level)
            .field("ambient", &self.ambient)
            .field("samples", &self.samples.len())
            .field("regularity_margin", &self.regularity_margin)
            .finish()
    }
}

/// A ray in `R^4`, as `(q, p)` directions.
pub(crate) type Ray = (Vec2, Vec2);

pub(crate) fn sphere_directions(n: usize, seed: u64) -> Vec<Ray> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            (Vec2::new(x[0], x[1]) / r, Vec2::new(x[2], x[3]) / r)
        })
        .collect()
}

/// Crossings of `H = h` along each ray from the origin of `R^4`, scanned out to twice
/// the farthest first exit.
pub(crate) fn ray_scan(
    ham: &dyn Hamiltonian,
    level: f64,
    rays: &[Ray],
) -> Result<Vec<Vec<PhasePoint>>> {
    let at = |(a, b): Ray, r: f64| PhasePoint::new(a * r, b * r);
    let mut reach = 0.0f64;
    for &d in rays {
        reach = reach.max(outer_bound(&|r| ham.value(&at(d, r)) - level, 1.0)?);
    }
    Ok(rays
        .iter()
        .map(|&d| {
            crossings(&|r| ham.value(&at(d, r)) - level, 2.0 * reach, RAY_CELLS)
                .into_iter()
                .map(|r| at(d, r))
                .collect()
        })
        .collect())
}

/// Base points covering the surface (or the region `H(x, 0) < h` of the plane).
pub(crate) fn base_points(
    ham: &dyn Hamiltonian,
    level: f64,
    n: usize,
) -> Result<(Vec<(u8, Vec2)>, bool)> {
    let k = (n as f64).sqrt().ceil().max(1.0) as usize;
    match ham.surface() {
        SurfacePatch::FlatTorus { periods } => {
            let mut out = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    let q = Vec2::new(
                        (i as f64 + 0.5) / k as f64 * periods[0],
                        (j as f64 + 0.5) / k as f64 * periods[1],
                    );
                    out.push((0, q));
                }
            }
            Ok((out, true))
        }
        SurfacePatch::SphereTwoCharts { radius } => {
            // each chart covers its closed hemisphere |q| <= R
            let m = ((2.0 * n as f64 / std::f64::consts::PI).sqrt().ceil() as usize).max(2);
            let mut out = Vec::new();
            for chart in 0..2u8 {
                for i in 0..m {
                    for j in 0..m {
                        let q = Vec2::new(
                            -1.0 + (2 * i + 1) as f64 / m as f64,
                            -1.0 + (2 * j + 1) as f64 / m as f64,
                        ) * radius;
                        if q.norm() <= radius {
                            out.push((chart, q));
                        }
                    }
                }
            }
            Ok((out, true))
        }
        SurfacePatch::PlaneDisc { radius } => {
            let zero = |q: Vec2| ham.value(&PhasePoint::new(q, Vec2::zeros())) - level;
            let mut bound = 0.0f64;
            let mut compact = true;
            for a in 0..8 {
                let e = Vec2::new((TAU * a as f64 / 8.0).cos(), (TAU * a as f64 / 8.0).sin());
                match outer_bound(&|r| zero(e * r), 0.25) {
                    Ok(r) => bound = bound.max(r),
                    Err(_) => {
                        compact = false;
                        bound = bound.max(2.0);
                    }
                }
            }
            if let Some(r) = radius {
                bound = bound.min(r * (1.0 - 1e-9));
            }
            let mut out = Vec::new();
            for i in 0..k {
                for j in 0..k {
                    let q = Vec2::new(
                        -1.0 + (2 * i + 1) as f64 / k as f64,
                        -1.0 + (2 * j + 1) as f64 / k as f64,
                    ) * bound;
                    out.push((0, q));
                }
            }
            Ok((out, compact))
        }
    }
}

/// Crossings of the level along `n` rays of the fibre over `(chart, x)`.
pub(crate) fn fiber_scan(
    ham: &dyn Hamiltonian,
    level: f64,
    chart: u8,
    x: Vec2,
    n: usize,
) -> Result<Vec<Vec<PhasePoint>>> {
    let at = |e: Vec2, r: f64| PhasePoint::in_chart(chart, x, e * r);
    let dirs: Vec<Vec2> = (0..n)
        .map(|k| TAU * (k as f64 + 0.5) / n as f64)
        .map(|a| Vec2::new(a.cos(), a.sin()))
        .collect();
    let mut reach = 0.0f64;
    for &e in &dirs {
        let r = outer_bound(&|r| ham.value(&at(e, r)) - level, 1.0).map_err(|_| {
            Error::Domain(format!(
                "fibre over {x:?} is unbounded; the projection is not proper"
            ))
        })?;
        reach = reach.max(r);
    }
    Ok(dirs
        .iter()
        .map(|&e| {
            crossings(&|r| ham.value(&at(e, r)) - level, 2.0 * reach, RAY_CELLS)
                .into_iter()
                .map(|r| at(e, r))
                .collect()
        })
        .collect())
}

fn gradient_norm(ham: &dyn Hamiltonian, z: &PhasePoint) -> f64 {
    let (a, b) = ham.gradient(z);
    (a.norm_squared() + b.norm_squared()).sqrt()
}

impl LevelSet {
    pub fn new(ham: Arc<dyn Hamiltonian>, level: f64, ambient: Ambient) -> Result<Self> {
        Self::sampled(ham, level, ambient, &Sampling::default())
    }

    pub fn sampled(
        ham: Arc<dyn Hamiltonian>,
        level: f64,
        ambient: Ambient,
        sampling: &Sampling,
    ) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::Precondition(format!(
                "level must be finite, got {level}"
            )));
        }
        let (samples, compact) = match ambient {
            Ambient::Euclidean => {
                if !matches!(ham.surface(), SurfacePatch::PlaneDisc { radius: None }) {
                    return Err(Error::Unsupported(
                        "R^4 levels need a Hamiltonian on the whole plane".into(),
                    ));
                }
                let rays = sphere_directions(sampling.rays, sampling.seed);
                (ray_scan(&*ham, level, &rays)?.concat(), true)
            }
            Ambient::Cotangent => {
                let (bases, compact) = base_points(&*ham, level, sampling.n_base)?;
                let mut out = Vec::new();
                for (chart, x) in bases {
                    out.extend(fiber_scan(&*ham, level, chart, x, sampling.n_fiber)?.concat());
                }
                (out, compact)
            }
        };
        if samples.is_empty() {
            return Err(Error::Domain(format!(
                "level {level} is empty on the sampled region"
            )));
        }
        let mut margin = f64::INFINITY;
        for z in &samples {
            let off = (ham.value(z) - level).abs();
            if off > LEVEL_TOL {
                return Err(Error::Numeric(format!(
                    "sample {z:?} lies {off:.3e} off the level"
                )));
            }
            margin = margin.min(gradient_norm(&*ham, z));
        }
        if !(margin > LEVEL_TOL) {
            return Err(Error::Precondition(format!(
                "level {level} is not regular: |dH| = {margin:.3e} at a sample"
            )));
        }
        Ok(LevelSet {
            ham,
            level,
            ambient,
            samples,
            regularity_margin: margin,
            compact,
        })
    }

    /// The same hypersurface as the level `h` of `2H - h`.
    pub fn replaced(&self) -> Result<LevelSet> {
        let ham: Arc<dyn Hamiltonian> =
            Arc::new(AffineHamiltonian::new(self.ham.clone(), 2.0, -self.level));
        LevelSet::new(ham, self.level, self.ambient)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classical_value_on_the_torus() {
        let h = classical_hamiltonian(
            FinslerMetric::flat_torus(),
            Potential::cosine(0.05, [1.0, 0.0]),
        );
        let z = PhasePoint::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        assert!((h.value(&z) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn level_above_the_potential_is_regular() {
        let h = classical_hamiltonian(
            FinslerMetric::flat_torus(),
            Potential::cosine(0.05, [1.0, 0.0]),
        );
        let level = LevelSet::new(Arc::new(h), 0.6, Ambient::Cotangent).unwrap();
        // oracle: |dH| >= |p| = sqrt(2 (h - V)) >= sqrt(2 (0.6 - 0.05))
        assert!(level.regularity_margin >= (2.0f64 * 0.55).sqrt() - 1e-9);
        assert!(level.compact);
        for z in &level.samples {
            assert!((level.ham.value(z) - 0.6).abs() <= LEVEL_TOL);
        }
    }

    #[test]
    fn oscillator_sphere_samples_lie_on_the_sphere() {
        let level = LevelSet::new(
            Arc::new(ClassicalHamiltonian::harmonic_oscillator()),
            0.5,
            Ambient::Euclidean,
        )
        .unwrap();
        assert_eq!(level.samples.len(), Sampling::default().rays);
        for z in &level.samples {
            assert!(((z.q.norm_squared() + z.p.norm_squared()) - 1.0).abs() < 1e-12);
        }
    }
}

//! Sampled contact-type criteria.

use super::{base_points, fiber_scan, ray_scan, sphere_directions, Ambient, LevelSet, Sampling};
use crate::error::{Error, Result};
use crate::phase::reeb::{liouville, radial_liouville};
use crate::phase::{reeb_reparametrize, PhasePoint};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Compact regular energy surface of a classical Hamiltonian.
    ClassicalEnergy,
    /// Transverse to the radial field of `R^4`.
    RadialTransverse,
    /// Every fibre star-shaped about the zero covector.
    StarShapedFiber,
}

/// A sample where the criterion fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: PhasePoint,
    /// `<z, dH>` (radial) or `<p, dH/dp>` (fibre) at the point.
    pub transversality: f64,
    /// Crossings of the level along the ray through the point.
    pub crossings: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactReport {
    pub passed: bool,
    pub criterion: Criterion,
    /// Smallest transversality over the samples (the regularity margin for classical levels).
    pub margin: f64,
    pub regularity_margin: f64,
    pub samples: usize,
    pub witness: Option<Witness>,
    /// Smallest `|lambda(X_H)|` of the transverse primitive, when it was checked.
    pub reeb_margin: Option<f64>,
    pub note: String,
}

struct Tally {
    margin: f64,
    samples: usize,
    witness: Option<Witness>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            margin: f64::INFINITY,
            samples: 0,
            witness: None,
        }
    }

    /// Record a ray with its crossings and their transversalities; one positive crossing passes.
    fn ray(&mut self, points: &[PhasePoint], values: &[f64], expect_one: bool) {
        self.samples += points.len();
        for (z, &g) in points.iter().zip(values) {
            self.margin = self.margin.min(g.abs());
            if self.witness.is_some() {
                continue;
            }
            if !(g > 0.0) {
                self.witness = Some(Witness {
                    point: *z,
                    transversality: g,
                    crossings: points.len(),
                    reason: format!("transversality {g:.3e} is not positive"),
                });
            }
        }
        if self.witness.is_none() && points.len() != usize::from(expect_one) {
            let z = points
                .last()
                .copied()
                .unwrap_or_else(|| PhasePoint::new(Default::default(), Default::default()));
            self.witness = Some(Witness {
                point: z,
                transversality: values.last().copied().unwrap_or(f64::NAN),
                crossings: points.len(),
                reason: format!("ray crosses the level {} times", points.len()),
            });
        }
    }
}

fn radial(z: &PhasePoint, level: &LevelSet) -> f64 {
    let (a, b) = level.ham.gradient(z);
    z.q.dot(&a) + z.p.dot(&b)
}

fn fibre(z: &PhasePoint, level: &LevelSet) -> f64 {
    z.p.dot(&level.ham.gradient(z).1)
}

/// `<z, dH(z)>` of one sign on every sampled ray crossing, each ray crossing once.
pub fn radial_transverse_check(level: &LevelSet, n_samples: usize) -> Result<ContactReport> {
    if level.ambient != Ambient::Euclidean {
        return Err(Error::Unsupported(
            "the radial criterion needs a level in R^4".into(),
        ));
    }
    let ham = &*level.ham;
    let origin = PhasePoint::new(Default::default(), Default::default());
    let h0 = ham.value(&origin) - level.level;
    if h0.abs() <= 1e-12 * (1.0 + level.level.abs()) {
        return Err(Error::Domain("the origin lies on the hypersurface".into()));
    }
    if h0 > 0.0 {
        return Err(Error::Precondition(
            "the hypersurface does not enclose the origin".into(),
        ));
    }
    let rays = sphere_directions(n_samples, Sampling::default().seed);
    let mut tally = Tally::new();
    for points in ray_scan(ham, level.level, &rays)? {
        let values: Vec<f64> = points.iter().map(|z| radial(z, level)).collect();
        tally.ray(&points, &values, true);
    }
    let passed = tally.witness.is_none();
    let reeb_margin = if passed {
        Some(reeb_margin(level, &radial_liouville)?)
    } else {
        None
    };
    Ok(ContactReport {
        passed,
        criterion: Criterion::RadialTransverse,
        margin: tally.margin,
        regularity_margin: level.regularity_margin,
        samples: tally.samples,
        witness: tally.witness,
        reeb_margin,
        note: "star-shaped about the origin: transverse to the radial Liouville field".into(),
    })
}

/// Every sampled fibre `{p : H(x, p) = h}` crossed once by each ray from `p = 0`,
/// with `<p, dH/dp> > 0` there.
pub fn star_shaped_fiber_check(
    level: &LevelSet,
    n_base: usize,
    n_fiber: usize,
) -> Result<ContactReport> {
    if level.ambient != Ambient::Cotangent {
        return Err(Error::Unsupported(
            "the fibre criterion needs a level in a cotangent bundle".into(),
        ));
    }
    let ham = &*level.ham;
    let (bases, _) = base_points(ham, level.level, n_base)?;
    let per_base: Vec<Result<Tally>> = bases
        .par_iter()
        .map(|&(chart, x)| {
            let mut tally = Tally::new();
            let h0 = ham.value(&PhasePoint::in_chart(chart, x, Default::default())) - level.level;
            for points in fiber_scan(ham, level.level, chart, x, n_fiber)? {
                if h0 >= 0.0 && points.is_empty() {
                    continue;
                }
                let values: Vec<f64> = points.iter().map(|z| fibre(z, level)).collect();
                tally.ray(&points, &values, h0 < 0.0);
                if h0 >= 0.0 && tally.witness.is_none() {
                    tally.witness = Some(Witness {
                        point: points[0],
                        transversality: values[0],
                        crossings: points.len(),
                        reason: "the fibre does not enclose the zero covector".into(),
                    });
                }
            }
            Ok(tally)
        })
        .collect();
    let mut total = Tally::new();
    for t in per_base {
        let t = t?;
        total.margin = total.margin.min(t.margin);
        total.samples += t.samples;
        if total.witness.is_none() {
            total.witness = t.witness;
        }
    }
    let passed = total.witness.is_none();
    let reeb_margin = if passed {
        Some(reeb_margin(level, &liouville)?)
    } else {
        None
    };
    Ok(ContactReport {
        passed,
        criterion: Criterion::StarShapedFiber,
        margin: total.margin,
        regularity_margin: level.regularity_margin,
        samples: total.samples,
        witness: total.witness,
        reeb_margin,
        note: "fibrewise star-shaped: transverse to the fibre Liouville field".into(),
    })
}

/// Smallest `|lambda(X_H)|` over the level's samples; fails if the Reeb rescaling does.
fn reeb_margin(level: &LevelSet, lambda: &crate::phase::reeb::OneForm<'_>) -> Result<f64> {
    let ham = &*level.ham;
    let mut worst = f64::INFINITY;
    for z in &level.samples {
        reeb_reparametrize(lambda, ham, z)?;
        let (qd, pd) = crate::phase::hamiltonian_vector_field(ham, z);
        let (a, b) = lambda(z);
        worst = worst.min((a.dot(&qd) + b.dot(&pd)).abs());
    }
    Ok(worst)
}

/// Certify a level as of contact type by the criterion that fits it.
pub fn contact_type_check(level: &LevelSet) -> Result<ContactReport> {
    if level.ham.is_classical() && level.compact && level.regularity_margin > 0.0 {
        return Ok(ContactReport {
            passed: true,
            criterion: Criterion::ClassicalEnergy,
            margin: level.regularity_margin,
            regularity_margin: level.regularity_margin,
            samples: level.samples.len(),
            witness: None,
            reeb_margin: None,
            note:
                "any compact regular energy surface of a classical Hamiltonian is of contact type"
                    .into(),
        });
    }
    let s = Sampling::default();
    match level.ambient {
        Ambient::Euclidean => radial_transverse_check(level, s.rays),
        Ambient::Cotangent => star_shaped_fiber_check(level, s.n_base, s.n_fiber),
    }
}

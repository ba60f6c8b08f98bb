//! Scans of the conformal family `(1 + t h) phi` for periodic orbits meeting the
//! support of `h`. Best effort: a run that finds nothing is a valid outcome.

use super::periodic::{refine_on_section, PeriodicOrbit, RefineOptions, ReturnSelect};
use super::recurrence::find_recurrent;
use super::section_through;
use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, MetricPerturbation, PerturbationKind};
use crate::perturb::{HybridSystem, Watch};
use crate::phase::{legendre, run_flow, FlowOptions, GeodesicHamiltonian, Hamiltonian, PhasePoint};
use crate::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanOptions {
    /// Seeds per value of `t`.
    pub seeds: usize,
    pub seed: u64,
    pub t_max: f64,
    /// Returns closer than this are refined.
    pub recurrence_eps: f64,
    /// Seeds are drawn from the disc of this fraction of the support radius.
    pub seed_fraction: f64,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            seeds: 20,
            seed: 0,
            t_max: 6.0,
            recurrence_eps: 0.02,
            seed_fraction: 0.9,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanHit {
    pub t: f64,
    pub seed_index: usize,
    pub orbit: PeriodicOrbit,
    /// A point of the orbit whose base lies in the support.
    pub witness: PhasePoint,
    /// Distance from the witness base point to the bump centre.
    pub witness_distance: f64,
}

/// For each `t` in `t_grid`, seed unit covectors over the support of `h`, look for
/// returns and refine them on the metric `(1 + t h) phi`. Only orbits whose base
/// curve enters the support are kept; orbits of equal period at the same `t` are
/// reported once.
pub fn conformal_scan(
    metric: &FinslerMetric,
    h: &MetricPerturbation,
    t_grid: &[f64],
    opts: &ScanOptions,
) -> Result<Vec<ScanHit>> {
    if h.kind != PerturbationKind::ConformalBump {
        return Err(Error::Precondition(
            "conformal_scan needs a conformal bump".into(),
        ));
    }
    h.validate()?;
    if let Some(t) = t_grid.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Precondition(format!("t = {t} outside [0, 1]")));
    }
    let systems = t_grid
        .iter()
        .map(|&t| {
            let m = metric.perturbed(&MetricPerturbation {
                amplitude: t * h.amplitude,
                ..*h
            })?;
            Ok(HybridSystem::new(Arc::new(GeodesicHamiltonian::new(m))))
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..t_grid.len())
        .flat_map(|i| (0..opts.seeds).map(move |k| (i, k)))
        .collect();
    let found: Vec<Option<ScanHit>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream((i * opts.seeds + k) as u64);
            // numerical failures of single seeds are misses, not errors
            scan_seed(&systems[i], h, &mut rng, opts)
                .ok()
                .flatten()
                .map(|(orbit, witness, d)| ScanHit {
                    t: t_grid[i],
                    seed_index: k,
                    orbit,
                    witness,
                    witness_distance: d,
                })
        })
        .collect();
    let mut hits: Vec<ScanHit> = Vec::new();
    for hit in found.into_iter().flatten() {
        let dup = hits
            .iter()
            .any(|o| o.t == hit.t && (o.orbit.period - hit.orbit.period).abs() <= 1e-7);
        if !dup {
            hits.push(hit);
        }
    }
    Ok(hits)
}

fn scan_seed(
    system: &HybridSystem,
    h: &MetricPerturbation,
    rng: &mut ChaCha8Rng,
    opts: &ScanOptions,
) -> Result<Option<(PeriodicOrbit, PhasePoint, f64)>> {
    let ham = &*system.ham;
    let metric = match system.ham.metric() {
        Some(m) => m,
        None => {
            return Err(Error::Unsupported(
                "conformal scans need a geodesic Hamiltonian".into(),
            ))
        }
    };
    let centre = Vec2::new(h.center[0], h.center[1]);
    let r = opts.seed_fraction * h.radius * rng.gen::<f64>().sqrt();
    let a = TAU * rng.gen::<f64>();
    let q = centre + Vec2::new(a.cos(), a.sin()) * r;
    let b = TAU * rng.gen::<f64>();
    let v = Vec2::new(b.cos(), b.sin());
    let alpha = legendre(metric, 0, &q, &(v / metric.eval(0, &q, &v)?))?;
    let z = alpha.point;
    let section = section_through(ham, &z)?;
    let rec = find_recurrent(
        system,
        &z,
        &Watch::Section(section),
        opts.t_max,
        opts.recurrence_eps,
    )?;
    if !rec.found {
        return Ok(None);
    }
    let w = section.coordinates(&z.to_chart(&ham.surface(), section.chart));
    let refine = RefineOptions {
        tol: opts.tol,
        ..Default::default()
    };
    let orbit = refine_on_section(
        system,
        &section,
        w,
        ReturnSelect::Nearest(rec.time),
        &refine,
    )?;
    Ok(support_witness(ham, &orbit, h)?.map(|(w, d)| (orbit, w, d)))
}

/// The sampled point of the orbit nearest the bump centre, if it lies in the support.
fn support_witness(
    ham: &dyn Hamiltonian,
    orbit: &PeriodicOrbit,
    h: &MetricPerturbation,
) -> Result<Option<(PhasePoint, f64)>> {
    let surface = ham.surface();
    let centre = Vec2::new(h.center[0], h.center[1]);
    let opts = FlowOptions {
        tol: 1e-10,
        record: true,
        max_step: 0.25 * h.radius,
        ..Default::default()
    };
    let traj = run_flow(ham, &orbit.point, orbit.period, &opts, &[])?
        .trajectory
        .expect("recording requested");
    let best = traj
        .points
        .iter()
        .map(|p| {
            let p0 = p.to_chart(&surface, 0);
            (*p, surface.min_image(&(p0.q - centre)).norm())
        })
        .min_by(|a, b| a.1.total_cmp(&b.1));
    Ok(best.filter(|(_, d)| *d < h.radius))
}

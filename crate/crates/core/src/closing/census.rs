//! Orbit censuses: the closed geodesics of a Katok metric found from random seeds on
//! a global section, and the density of periodic orbits of a perturbed flat torus.

use super::periodic::{refine_on_section, PeriodicOrbit, RefineOptions, ReturnSelect};
use super::recurrence::find_recurrent;
use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, MetricPerturbation};
use crate::perturb::{hybrid_watch, HybridOptions, HybridSystem, Section, Watch};
use crate::phase::{legendre, run_flow, FlowOptions, GeodesicHamiltonian, Hamiltonian, PhasePoint};
use crate::Vec2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CensusOptions {
    pub seeds: usize,
    pub seed: u64,
    /// Seeds are drawn on `|x| <= half_width` of the line `y = 0` in chart 0.
    pub half_width: f64,
    /// Periods closer than this belong to one class.
    pub cluster_tol: f64,
    /// Largest initial return mismatch handed to Newton.
    pub max_initial: f64,
    pub tol: f64,
}

impl Default for CensusOptions {
    fn default() -> Self {
        CensusOptions {
            seeds: 200,
            seed: 0,
            half_width: 3.0,
            cluster_tol: 1e-5,
            max_initial: 10.0,
            tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClass {
    pub period: f64,
    pub members: usize,
    pub representative: PeriodicOrbit,
    /// Largest distance from a member's point to the representative's curve.
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatokCensus {
    pub alpha: f64,
    pub seeds: usize,
    pub converged: usize,
    /// Classes by increasing period.
    pub classes: Vec<OrbitClass>,
    /// Longest over shortest class period.
    pub ratio: Option<f64>,
}

/// Closed geodesics of `katok(alpha)` with one crossing of the section `y = 0`.
pub fn katok_census(alpha: f64, opts: &CensusOptions) -> Result<KatokCensus> {
    let metric = FinslerMetric::katok(alpha)?;
    let ham: Arc<dyn Hamiltonian> = Arc::new(GeodesicHamiltonian::new(metric.clone()));
    let level = 0.5;
    let section =
        Section::new(Vec2::zeros(), Vec2::new(0.0, 1.0), level)?.with_half_width(opts.half_width);
    let system = HybridSystem::new(ham.clone());
    let refine = RefineOptions {
        tol: opts.tol,
        max_initial: opts.max_initial,
        ..Default::default()
    };
    let coarse = RefineOptions {
        tol: 1e-8,
        residual: 1e-6,
        ..refine
    };

    let orbits: Vec<Option<PeriodicOrbit>> = (0..opts.seeds)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(k as u64);
            let x = (2.0 * rng.gen::<f64>() - 1.0) * 0.9 * opts.half_width;
            let a = PI * (0.05 + 0.9 * rng.gen::<f64>());
            let q = Vec2::new(x, 0.0);
            let v = Vec2::new(a.cos(), a.sin());
            let seed = legendre(&metric, 0, &q, &(v / metric.eval(0, &q, &v).ok()?)).ok()?;
            let w = section.coordinates(&seed.point);
            // converge at a loose tolerance, then polish; seeds that fail are counted, not fatal
            let rough =
                refine_on_section(&system, &section, w, ReturnSelect::First, &coarse).ok()?;
            let w = section.coordinates(&rough.point);
            refine_on_section(&system, &section, w, ReturnSelect::First, &refine).ok()
        })
        .collect();
    let converged: Vec<PeriodicOrbit> = orbits.into_iter().flatten().collect();
    let classes = cluster(&*ham, &converged, opts.cluster_tol)?;
    let ratio = match (classes.first(), classes.last()) {
        (Some(a), Some(b)) if classes.len() > 1 => Some(b.period / a.period),
        _ => None,
    };
    Ok(KatokCensus {
        alpha,
        seeds: opts.seeds,
        converged: converged.len(),
        classes,
        ratio,
    })
}

/// Group orbits by period; chains closer than `tol` are one class.
fn cluster(ham: &dyn Hamiltonian, orbits: &[PeriodicOrbit], tol: f64) -> Result<Vec<OrbitClass>> {
    let mut sorted: Vec<&PeriodicOrbit> = orbits.iter().collect();
    sorted.sort_by(|a, b| a.period.total_cmp(&b.period));
    let mut groups: Vec<Vec<&PeriodicOrbit>> = Vec::new();
    for o in sorted {
        match groups.last_mut() {
            Some(g) if o.period - g.last().unwrap().period <= tol => g.push(o),
            _ => groups.push(vec![o]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let rep = g[0];
            let curve = sample_curve(ham, rep, 0.01)?;
            let spread = g
                .iter()
                .map(|o| curve_distance(ham, &curve, &o.point))
                .fold(0.0, f64::max);
            Ok(OrbitClass {
                period: rep.period,
                members: g.len(),
                representative: rep.clone(),
                spread,
            })
        })
        .collect()
}

fn sample_curve(
    ham: &dyn Hamiltonian,
    orbit: &PeriodicOrbit,
    step: f64,
) -> Result<Vec<PhasePoint>> {
    let opts = FlowOptions {
        tol: 1e-11,
        record: true,
        max_step: step,
        ..Default::default()
    };
    Ok(run_flow(ham, &orbit.point, orbit.period, &opts, &[])?
        .trajectory
        .expect("recording requested")
        .points)
}

/// Distance in chart 0 phase coordinates from `z` to the nearest curve sample.
fn curve_distance(ham: &dyn Hamiltonian, curve: &[PhasePoint], z: &PhasePoint) -> f64 {
    let surface = ham.surface();
    let z = z.to_chart(&surface, 0);
    curve
        .iter()
        .map(|c| {
            let c = c.to_chart(&surface, 0);
            (surface.min_image(&(c.q - z.q)).norm_squared() + (c.p - z.p).norm_squared()).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DensityOptions {
    /// Cells per side of the grid of section coordinates on `y = 0`.
    pub grid: usize,
    /// Recurrence horizons, increasing.
    pub budgets: Vec<f64>,
    /// Returns closer than this are refined.
    pub recurrence_eps: f64,
    /// A cell is covered when a found orbit crosses the section within this of it.
    pub cover: f64,
    pub tol: f64,
}

impl Default for DensityOptions {
    fn default() -> Self {
        DensityOptions {
            grid: 32,
            budgets: vec![4.0, 8.0, 16.0, 32.0],
            recurrence_eps: 0.05,
            cover: 1e-2,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoundOrbit {
    /// Recurrence time at which the orbit was found.
    pub found_at: f64,
    pub orbit: PeriodicOrbit,
    /// Section coordinates of its crossings over one period.
    pub crossings: Vec<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub grid: usize,
    pub budgets: Vec<f64>,
    /// Fraction of covered cells for each budget.
    pub fractions: Vec<f64>,
    pub monotone: bool,
    pub orbits: Vec<FoundOrbit>,
}

/// Seed the centres of an equal-area grid on the section `y = 0` of the flat torus
/// carrying `bumps`, refine the orbits of returns within each budget and report the
/// fraction of grid cells a found orbit passes close to.
pub fn torus_density(bumps: &[MetricPerturbation], opts: &DensityOptions) -> Result<DensityReport> {
    if opts.grid == 0 || opts.budgets.is_empty() || opts.budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition(
            "density needs a nonempty grid and increasing budgets".into(),
        ));
    }
    let mut metric = FinslerMetric::flat_torus();
    for b in bumps {
        metric = metric.perturbed(b)?;
    }
    let ham: Arc<dyn Hamiltonian> = Arc::new(GeodesicHamiltonian::new(metric.clone()));
    let section = Section::axis(&ham.surface(), Vec2::zeros(), 1, 1.0, 0.5)?;
    let system = HybridSystem::new(ham.clone());
    let t_max = *opts.budgets.last().unwrap();
    let n = opts.grid;

    // equal-area cells of the section coordinates u in [-1/2, 1/2), v in (-1, 1)
    let (hu, hv) = (0.5 / n as f64, 1.0 / n as f64);
    let centres: Vec<Vec2> = (0..n * n)
        .map(|c| {
            Vec2::new(
                -0.5 + (2 * (c / n) + 1) as f64 * hu,
                -1.0 + (2 * (c % n) + 1) as f64 * hv,
            )
        })
        .collect();

    let refine = RefineOptions {
        tol: opts.tol,
        ..Default::default()
    };
    let found: Vec<Option<FoundOrbit>> = centres
        .par_iter()
        .map(|&w| {
            let z = section.lift(&*ham, w).ok()?;
            let rec = find_recurrent(
                &system,
                &z,
                &Watch::Section(section),
                t_max,
                opts.recurrence_eps,
            )
            .ok()?;
            if !rec.found {
                return None;
            }
            let orbit = refine_on_section(
                &system,
                &section,
                w,
                ReturnSelect::Nearest(rec.time),
                &refine,
            )
            .ok()?;
            let watch = [Watch::Section(section)];
            let hybrid = HybridOptions {
                tol: opts.tol,
                ..Default::default()
            };
            let pass = hybrid_watch(
                &system,
                &orbit.point,
                orbit.period * (1.0 - 1e-9),
                &hybrid,
                &watch,
            )
            .ok()?;
            let mut crossings = vec![section.coordinates(&orbit.point)];
            crossings.extend(
                pass.crossings
                    .iter()
                    .filter(|c| c.t > 1e-9)
                    .map(|c| c.coords),
            );
            Some(FoundOrbit {
                found_at: rec.time,
                orbit,
                crossings,
            })
        })
        .collect();
    let orbits: Vec<FoundOrbit> = found.into_iter().flatten().collect();

    let fractions: Vec<f64> = opts
        .budgets
        .iter()
        .map(|&b| {
            let near = |c: Vec2, w: Vec2| {
                let d = section.offset(c, w);
                Vec2::new((d.x.abs() - hu).max(0.0), (d.y.abs() - hv).max(0.0)).norm() <= opts.cover
            };
            let covered = centres
                .iter()
                .filter(|&&w| {
                    orbits
                        .iter()
                        .filter(|o| o.found_at <= b)
                        .any(|o| o.crossings.iter().any(|&c| near(c, w)))
                })
                .count();
            covered as f64 / centres.len() as f64
        })
        .collect();
    let monotone = fractions.windows(2).all(|w| w[1] >= w[0]);
    Ok(DensityReport {
        grid: n,
        budgets: opts.budgets.clone(),
        fractions,
        monotone,
        orbits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn katok_census_finds_the_two_equators() {
        let census = katok_census(0.3, &CensusOptions::default()).unwrap();
        assert_eq!(
            census.classes.len(),
            2,
            "{:?}",
            census.classes.iter().map(|c| c.period).collect::<Vec<_>>()
        );
        // oracle: the equator has speed 1 +- alpha in the two directions
        let (fast, slow) = (2.0 * PI / 1.3, 2.0 * PI / 0.7);
        assert!((census.classes[0].period - fast).abs() <= 1e-6);
        assert!((census.classes[1].period - slow).abs() <= 1e-6);
        assert!((census.ratio.unwrap() - 13.0 / 7.0).abs() <= 1e-3);
        for c in &census.classes {
            assert!(c.spread <= 1e-2, "{}", c.spread);
        }
    }

    #[test]
    fn density_is_monotone_in_the_budget() {
        let bump = MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.02);
        let opts = DensityOptions {
            grid: 8,
            budgets: vec![2.0, 4.0, 8.0],
            ..Default::default()
        };
        let report = torus_density(&[bump], &opts).unwrap();
        assert!(report.monotone);
        assert!(report.fractions.iter().all(|f| (0.0..=1.0).contains(f)));
        assert!(*report.fractions.last().unwrap() > 0.0);
    }

    #[test]
    fn unperturbed_density_orbits_have_lattice_periods() {
        let opts = DensityOptions {
            grid: 6,
            budgets: vec![8.0],
            ..Default::default()
        };
        let report = torus_density(&[], &opts).unwrap();
        assert!(!report.orbits.is_empty());
        for o in &report.orbits {
            let t = o.orbit.period;
            let ok = (0..9i32)
                .any(|a| (1..9i32).any(|b| (((a * a + b * b) as f64).sqrt() - t).abs() <= 1e-8));
            assert!(ok, "{t}");
        }
    }
}

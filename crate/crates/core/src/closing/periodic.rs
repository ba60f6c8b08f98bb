//! Periodic orbits by Newton shooting on a section return map.

use super::section_through;
use crate::error::{Error, Result};
use crate::perturb::{hybrid_watch, HybridOptions, HybridSystem, Section, Watch};
use crate::phase::PhasePoint;
use crate::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub point: PhasePoint,
    pub period: f64,
    /// Return-map mismatch in section coordinates.
    pub residual: f64,
    /// Eigenvalues of the return map's derivative as `(re, im)`.
    pub floquet: Option<[(f64, f64); 2]>,
    pub tags: Vec<String>,
    pub section: Section,
    pub iterations: usize,
    /// Residual recomputed at a ten times tighter tolerance.
    pub verified_residual: Option<f64>,
}

/// Which crossing of the section counts as the return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnSelect {
    /// The first crossing after the start.
    First,
    /// The crossing whose time is nearest the given one.
    Nearest(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub tol: f64,
    pub residual: f64,
    pub max_iterations: usize,
    /// Largest accepted initial residual.
    pub max_initial: f64,
    /// Finite-difference step for the Jacobian.
    pub step: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            tol: 1e-12,
            residual: 1e-9,
            max_iterations: 30,
            max_initial: 0.1,
            step: 1e-6,
        }
    }
}

/// Return of the orbit through `w` on `section`: coordinates, time and point.
pub fn return_map(
    system: &HybridSystem,
    section: &Section,
    w: Vec2,
    select: ReturnSelect,
    tol: f64,
) -> Result<(Vec2, f64, PhasePoint)> {
    let ham = &*system.ham;
    let z = section.lift(ham, w)?;
    let horizon = match select {
        ReturnSelect::First => 100.0,
        ReturnSelect::Nearest(t0) => 1.5 * t0 + 1.0,
    };
    let opts = HybridOptions {
        tol,
        ..Default::default()
    };
    let watch = [Watch::Section(*section)];
    let orbit = hybrid_watch(system, &z, horizon, &opts, &watch)?;
    let candidates = orbit.crossings.iter().filter(|c| c.t > 1e-6);
    let hit = match select {
        ReturnSelect::First => candidates.min_by(|a, b| a.t.total_cmp(&b.t)),
        ReturnSelect::Nearest(t0) => {
            candidates.min_by(|a, b| (a.t - t0).abs().total_cmp(&(b.t - t0).abs()))
        }
    };
    let hit = hit.ok_or(Error::Escape(horizon))?;
    Ok((hit.coords, hit.t, hit.z))
}

/// Refine a periodic orbit from a phase point near it with approximate period `t0`,
/// on the section through that point.
pub fn refine_periodic(system: &HybridSystem, z0: &PhasePoint, t0: f64) -> Result<PeriodicOrbit> {
    let section = section_through(&*system.ham, z0)?;
    let w0 = section.coordinates(&z0.to_chart(&system.ham.surface(), section.chart));
    refine_on_section(
        system,
        &section,
        w0,
        ReturnSelect::Nearest(t0),
        &RefineOptions::default(),
    )
}

/// Newton iteration on `R(w) - w`. The step uses the pseudo-inverse of `DR - I`, so
/// orbits in degenerate families converge to the nearest member.
pub fn refine_on_section(
    system: &HybridSystem,
    section: &Section,
    w0: Vec2,
    select: ReturnSelect,
    opts: &RefineOptions,
) -> Result<PeriodicOrbit> {
    let f = |w: Vec2| -> Result<(Vec2, f64, PhasePoint)> {
        let (r, t, z) = return_map(system, section, w, select, opts.tol)?;
        Ok((section.offset(r, w), t, z))
    };
    let mut w = w0;
    let (mut res, mut period, _) = f(w)?;
    if res.norm() > opts.max_initial {
        return Err(Error::Precondition(format!(
            "initial residual {:.3e} exceeds {:.1e}; the seed is not near a periodic orbit",
            res.norm(),
            opts.max_initial
        )));
    }
    let mut history = vec![res.norm()];
    let mut iterations = 0;
    while res.norm() > opts.residual {
        if iterations >= opts.max_iterations {
            return Err(Error::Numeric(format!(
                "periodic refinement did not converge; residuals {history:?}"
            )));
        }
        iterations += 1;
        let jac = jacobian(&f, w, opts.step)? - Mat2::identity();
        let svd = jac.svd(true, true);
        let cut = 1e-9 * svd.singular_values.max();
        let step = svd
            .solve(&res, cut)
            .map_err(|e| Error::Numeric(e.to_string()))?;
        // damp steps that do not reduce the residual
        let mut lambda = 1.0;
        loop {
            let trial = w - step * lambda;
            match f(trial) {
                Ok((r, t, _)) if r.norm() < res.norm() || lambda < 1e-3 => {
                    w = trial;
                    res = r;
                    period = t;
                    break;
                }
                _ if lambda < 1e-3 => {
                    return Err(Error::Numeric(format!(
                        "periodic refinement stalled; residuals {history:?}"
                    )));
                }
                _ => lambda *= 0.5,
            }
        }
        history.push(res.norm());
    }
    let point = section.lift(&*system.ham, w)?;
    let dr = jacobian(&f, w, opts.step)?;
    let floquet = Some(eigenvalues(&dr));
    let tight = RefineOptions {
        tol: 0.1 * opts.tol,
        ..*opts
    };
    let verified = return_map(system, section, w, select, tight.tol)
        .map(|(r, _, _)| section.offset(r, w).norm())
        .ok();
    Ok(PeriodicOrbit {
        point,
        period,
        residual: res.norm(),
        floquet,
        tags: Vec::new(),
        section: *section,
        iterations,
        verified_residual: verified,
    })
}

/// `D R` by central differences, with `R(w) - w` supplied.
fn jacobian(f: &dyn Fn(Vec2) -> Result<(Vec2, f64, PhasePoint)>, w: Vec2, h: f64) -> Result<Mat2> {
    let mut j = Mat2::identity();
    for k in 0..2 {
        let mut e = Vec2::zeros();
        e[k] = h;
        let col = (f(w + e)?.0 - f(w - e)?.0) / (2.0 * h);
        for i in 0..2 {
            j[(i, k)] += col[i];
        }
    }
    Ok(j)
}

fn eigenvalues(m: &Mat2) -> [(f64, f64); 2] {
    let half = 0.5 * m.trace();
    let disc = half * half - m.determinant();
    if disc >= 0.0 {
        let r = disc.sqrt();
        [(half + r, 0.0), (half - r, 0.0)]
    } else {
        let r = (-disc).sqrt();
        [(half, r), (half, -r)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::phase::flow::run_flow;
    use crate::phase::{FlowOptions, GeodesicHamiltonian, Hamiltonian};
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn system(metric: FinslerMetric) -> HybridSystem {
        HybridSystem::new(Arc::new(GeodesicHamiltonian::new(metric)))
    }

    #[test]
    fn great_circle_has_period_two_pi() {
        let sys = system(FinslerMetric::round_sphere());
        // unit covector on the equator |q| = 1, where the chart factor is 1
        let z = PhasePoint::new(Vec2::new(1.0, 0.0), Vec2::new(0.02, 1.0).normalize());
        let orbit = refine_periodic(&sys, &z, TAU).unwrap();
        assert!((orbit.period - TAU).abs() <= 1e-9, "{}", orbit.period);
        assert!(orbit.residual <= 1e-9);
        assert!(orbit.verified_residual.unwrap() <= 1e-8);
    }

    #[test]
    fn torus_rational_period_is_the_lattice_length() {
        let sys = system(FinslerMetric::flat_torus());
        let z = PhasePoint::new(Vec2::new(0.3, 0.1), Vec2::new(1.0, 2.0) / 5f64.sqrt());
        let orbit = refine_periodic(&sys, &z, 5f64.sqrt()).unwrap();
        assert!((orbit.period - 5f64.sqrt()).abs() <= 1e-10);
        // parabolic: both multipliers equal one
        for (re, im) in orbit.floquet.unwrap() {
            assert!((re - 1.0).abs() < 1e-5 && im.abs() < 1e-5);
        }
    }

    /// Period of the equatorial orbit by direct integration to the first return to the x axis.
    fn equator_period(ham: &dyn Hamiltonian, sign: f64) -> f64 {
        let metric = ham.metric().unwrap();
        let z = crate::phase::UnitCovector::normalize(
            metric,
            PhasePoint::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, sign)),
        )
        .unwrap()
        .point;
        let ev = crate::phase::Event::new(
            move |z: &PhasePoint| sign * z.q.y,
            crate::phase::EventDirection::Rising,
            true,
        );
        let opts = FlowOptions {
            tol: 1e-12,
            min_event_time: 1.0,
            ..Default::default()
        };
        let out = run_flow(ham, &z, 30.0, &opts, &[ev]).unwrap();
        assert!((out.end.q - z.q).norm() < 1e-8);
        out.t
    }

    #[test]
    fn katok_equators_have_periods_in_the_ratio() {
        let alpha = 0.3;
        let sys = system(FinslerMetric::katok(alpha).unwrap());
        let metric = sys.ham.metric().unwrap().clone();
        let mut periods = Vec::new();
        for sign in [1.0, -1.0] {
            let z = PhasePoint::new(Vec2::new(1.0, 0.0), Vec2::new(0.01, sign));
            let z = crate::phase::UnitCovector::normalize(&metric, z)
                .unwrap()
                .point;
            let oracle = equator_period(&*sys.ham, sign);
            let orbit = refine_periodic(&sys, &z, oracle).unwrap();
            assert!(
                (orbit.period - oracle).abs() <= 1e-8,
                "{} {}",
                orbit.period,
                oracle
            );
            periods.push(orbit.period);
        }
        let ratio = periods[0].max(periods[1]) / periods[0].min(periods[1]);
        assert!(
            (ratio - (1.0 + alpha) / (1.0 - alpha)).abs() <= 1e-5,
            "{ratio}"
        );
    }
}

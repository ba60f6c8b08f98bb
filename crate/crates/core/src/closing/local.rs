//! Closing an orbit through a given open set with one perturbed disc.
//!
//! A certified disc `D` is placed upstream of the centre covector `v`, the orbit of
//! `v` is followed until it re-enters `D` close to its first entry `alpha`, and the
//! lens map of `D` is replaced by `sigma o psi^-1` with a bump `psi` taking `alpha`
//! to the return `alpha_1`. The orbit entering at `alpha_1` then leaves `D` as the
//! orbit of `v` did and closes up.

use super::periodic::{refine_on_section, PeriodicOrbit, RefineOptions, ReturnSelect};
use super::recurrence::{find_recurrent, RecurrenceEvent};
use super::{section_through, Neighbourhood};
use crate::error::{Error, Result};
use crate::geometry::FinslerMetric;
use crate::lens::{consistency_integral, simplicity_radius, ExactLens, SimpleDisc, TransitionMap};
use crate::perturb::{
    calibrate_constant, hybrid_orbit, make_bump_with, perturb_lens, reversibility_defect,
    reversible_symmetrize, HybridOptions, HybridSystem, SymplecticBump, Watch,
};
use crate::phase::{flow_to, GeodesicHamiltonian, Hamiltonian, PhasePoint, UnitCovector};
use crate::Vec2;
use std::sync::Arc;

/// Returns closer than this are treated as exact and closed with the identity.
pub const EXACT_RETURN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub t_max: f64,
    /// Disc radius; by default the simplicity radius capped at `rho_cap`.
    pub rho: Option<f64>,
    pub rho_cap: f64,
    /// Fraction of the calibrated displacement budget a usable return may use.
    pub budget_share: f64,
    pub reversible: bool,
    pub n_quad: usize,
    pub tol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions {
            t_max: 1000.0,
            rho: None,
            rho_cap: 0.25,
            budget_share: 0.9,
            reversible: false,
            n_quad: 64,
            tol: 1e-12,
        }
    }
}

#[derive(Clone)]
pub struct LocalClosing {
    pub system: HybridSystem,
    pub orbit: PeriodicOrbit,
    pub disc: SimpleDisc,
    pub bump: SymplecticBump,
    pub recurrence: RecurrenceEvent,
    pub override_map: Arc<dyn TransitionMap>,
    /// `|psi(alpha) - alpha_1|`.
    pub bump_match: f64,
    /// `(s_p, int lambda)` for the overriding map.
    pub integrals: Vec<(f64, f64)>,
    /// Distance between the closed orbit and the unperturbed flow up to the perturbed passage.
    pub outside_defect: f64,
    pub reversibility_defect: Option<f64>,
    pub in_neighbourhood: bool,
}

/// Disc of radius `rho` centred `2 rho` upstream of `v`.
pub(crate) fn upstream_disc(
    metric: &FinslerMetric,
    ham: &dyn Hamiltonian,
    v: &PhasePoint,
    shift: f64,
    rho: f64,
) -> Result<SimpleDisc> {
    let x0 = flow_to(ham, v, -shift, 1e-12)?.to_chart(&metric.surface, v.chart);
    SimpleDisc::certified(metric, v.chart, x0.q, rho)
}

/// A point on the orbit of `v` upstream of `disc`, outside it.
pub(crate) fn upstream_start(
    ham: &dyn Hamiltonian,
    disc: &SimpleDisc,
    v: &PhasePoint,
    from: f64,
) -> Result<PhasePoint> {
    let mut t = from;
    for _ in 0..12 {
        let z = flow_to(ham, v, -t, 1e-12)?;
        if !disc.contains(&z)
            && (disc.local(&z).q - disc.center).norm() > disc.radius * (1.0 + 1e-6)
        {
            return Ok(z);
        }
        t *= 1.25;
    }
    Err(Error::Geometry(
        "could not find a starting point upstream of the disc".into(),
    ))
}

/// Bump taking `alpha` to `alpha + d` whose support avoids the other entries at
/// distance `earlier` or more; `period` is that of the first coordinate, if any.
pub(crate) fn closing_bump(
    period: Option<f64>,
    alpha: Vec2,
    d: Vec2,
    earlier: f64,
    rho: f64,
    eps: f64,
) -> Result<SymplecticBump> {
    if d.norm() <= EXACT_RETURN {
        let delta = (0.5 * rho).min(0.3).min(0.5 * earlier);
        let mut b = SymplecticBump::identity(alpha, delta);
        b.period = period;
        return Ok(b);
    }
    // the support, of radius delta - |d| / 2 about the midpoint, must miss the other entries
    let delta = (0.95 * earlier).min(0.5 * rho).min(0.3);
    if !(delta > 1.5 * d.norm()) {
        return Err(Error::NotFound(format!(
            "an earlier entry lies {earlier:.3e} from the reference, too close for a return displaced by {:.3e}",
            d.norm()
        )));
    }
    let c = calibrate_constant(delta, 0, eps)?;
    let bump = make_bump_with(alpha, alpha + d, delta, 0, eps, c, period)?;
    let size = bump.cr_size(0)?;
    if size > eps {
        return Err(Error::Precondition(format!(
            "bump C^0 size {size:.3e} exceeds eps = {eps:.3e}; a larger T_max gives a closer return"
        )));
    }
    Ok(bump)
}

/// Sample covectors of the bump support and of its mirror, for reversibility checks.
pub(crate) fn mirror_samples(
    sigma: &dyn TransitionMap,
    bump: &SymplecticBump,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            let z = bump.center + Vec2::new(i as f64 - 2.0, j as f64 - 2.0) * (0.4 * bump.delta);
            if bump.contains(z) {
                out.push((z.x, z.y));
                let (s, t) = sigma.apply(z.x, z.y)?;
                out.push((s, -t));
            }
        }
    }
    Ok(out)
}

/// The orbit of a start point closed on one override disc.
pub(crate) struct DiscClosing {
    pub recurrence: RecurrenceEvent,
    pub bump: SymplecticBump,
    pub override_map: Arc<dyn TransitionMap>,
    pub bump_match: f64,
    pub reversibility_defect: Option<f64>,
}

/// Follow `start` until it re-enters `disc` near its first entry and replace the lens
/// map of `disc` so that the return leaves as the first entry did.
pub(crate) fn close_on_disc(
    ham: &Arc<dyn Hamiltonian>,
    disc: &SimpleDisc,
    start: &PhasePoint,
    eps: f64,
    opts: &LocalOptions,
) -> Result<DiscClosing> {
    let base = HybridSystem::new(ham.clone());
    let budget = opts.budget_share * calibrate_constant(0.5 * disc.radius, 0, eps)? * eps;
    let recurrence = find_recurrent(&base, start, &Watch::Disc(disc.clone()), opts.t_max, budget)?;
    if !recurrence.found {
        return Err(Error::NotFound(format!(
            "no return within {budget:.3e} of the entry before T = {}; the closest misses by {:.3e}",
            opts.t_max,
            recurrence.displacement.norm()
        )));
    }
    let alpha = recurrence.reference.coords;
    let d = recurrence.displacement;
    let bump = closing_bump(
        Some(disc.boundary_length()),
        alpha,
        d,
        recurrence.earlier_min,
        disc.radius,
        eps,
    )?;
    let bump_match = (bump.apply(alpha)? - (alpha + d)).norm();
    let sigma: Arc<dyn TransitionMap> = Arc::new(ExactLens::new(disc.clone()));
    let tilde: Arc<dyn TransitionMap> = Arc::new(perturb_lens(sigma.clone(), &bump)?);
    let (override_map, reversibility_defect) = if opts.reversible {
        let hat = reversible_symmetrize(tilde, sigma.clone(), &bump)?;
        let defect = reversibility_defect(&hat, &mirror_samples(&*sigma, &bump)?)?;
        (Arc::new(hat) as Arc<dyn TransitionMap>, Some(defect))
    } else {
        (tilde, None)
    };
    Ok(DiscClosing {
        recurrence,
        bump,
        override_map,
        bump_match,
        reversibility_defect,
    })
}

/// Close an orbit through `u` on the geodesic flow of `metric` by one disc override.
pub fn local_close(
    metric: &FinslerMetric,
    u: &Neighbourhood,
    eps: f64,
    opts: &LocalOptions,
) -> Result<LocalClosing> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be > 0, got {eps}")));
    }
    let ham: Arc<dyn Hamiltonian> = Arc::new(GeodesicHamiltonian::new(metric.clone()));
    let v = UnitCovector::certify(metric, u.center)?.point;
    let rho = match opts.rho {
        Some(r) => r,
        None => simplicity_radius(metric, v.chart, &v.q)?.min(opts.rho_cap),
    };
    let disc = upstream_disc(metric, &*ham, &v, 2.0 * rho, rho)?;
    let start = upstream_start(&*ham, &disc, &v, 4.0 * rho)?;
    let closing = close_on_disc(&ham, &disc, &start, eps, opts)?;
    let DiscClosing {
        recurrence,
        bump,
        override_map,
        bump_match,
        reversibility_defect: rev,
    } = closing;
    let alpha = recurrence.reference.coords;
    let mut system = HybridSystem::new(ham.clone());
    system.add_disc(override_map.clone())?;

    let section = section_through(&*ham, &v)?;
    let w = section.coordinates(&v);
    let refine = RefineOptions {
        tol: opts.tol,
        ..Default::default()
    };
    let mut orbit = refine_on_section(
        &system,
        &section,
        w,
        ReturnSelect::Nearest(recurrence.time),
        &refine,
    )?;
    let in_neighbourhood = u.contains(&*ham, &orbit.point);
    orbit.tags.push("disc-override".into());
    if in_neighbourhood {
        orbit.tags.push("meets-U".into());
    }

    let mut integrals = Vec::new();
    for k in 0..4 {
        let sp = disc.wrap_s(alpha.x + (k as f64 - 1.5) * 0.5 * bump.delta);
        integrals.push((sp, consistency_integral(&*override_map, sp, opts.n_quad)?));
    }
    let outside_defect = outside_defect(&system, &orbit, &bump, opts.tol)?;
    Ok(LocalClosing {
        system,
        orbit,
        disc,
        bump,
        recurrence,
        override_map,
        bump_match,
        integrals,
        outside_defect,
        reversibility_defect: rev,
        in_neighbourhood,
    })
}

/// Distance between the hybrid orbit and the base flow just before the first passage
/// that the override changes.
pub(crate) fn outside_defect(
    system: &HybridSystem,
    orbit: &PeriodicOrbit,
    bump: &SymplecticBump,
    tol: f64,
) -> Result<f64> {
    let opts = HybridOptions {
        tol,
        ..Default::default()
    };
    let run = hybrid_orbit(system, &orbit.point, orbit.period, &opts)?;
    let Some(first) = run
        .log
        .iter()
        .find(|tr| bump.contains(Vec2::new(tr.s_in, tr.t_in)))
    else {
        return Ok(0.0);
    };
    let t = first.time * (1.0 - 1e-9);
    let hybrid = hybrid_orbit(system, &orbit.point, t, &opts)?.end;
    let plain = flow_to(&*system.ham, &orbit.point, t, tol)?;
    let surface = system.ham.surface();
    let (a, b) = (hybrid.to_chart(&surface, 0), plain.to_chart(&surface, 0));
    Ok((surface.min_image(&(a.q - b.q)).norm_squared() + (a.p - b.p).norm_squared()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_u(p: Vec2) -> Neighbourhood {
        Neighbourhood::new(PhasePoint::new(Vec2::new(0.3, 0.2), p.normalize()), 0.05)
    }

    #[test]
    fn rational_direction_closes_with_the_identity() {
        let metric = FinslerMetric::flat_torus();
        let u = torus_u(Vec2::new(1.0, 2.0));
        let opts = LocalOptions {
            t_max: 5.0,
            rho: Some(0.2),
            ..Default::default()
        };
        let c = local_close(&metric, &u, 1e-2, &opts).unwrap();
        assert_eq!(c.bump.amplitude, 0.0);
        assert!((c.orbit.period - 5f64.sqrt()).abs() < 1e-9);
        assert!(c.orbit.residual <= 1e-9 && c.in_neighbourhood);
    }

    #[test]
    fn golden_direction_closes_within_budget() {
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let metric = FinslerMetric::flat_torus();
        let u = torus_u(Vec2::new(1.0, phi));
        let eps = 1e-2;
        let c = local_close(
            &metric,
            &u,
            eps,
            &LocalOptions {
                rho: Some(0.2),
                ..Default::default()
            },
        )
        .unwrap();
        // oracle: the first return this close comes along the lattice vector (377, 610)
        let lattice = (377f64.powi(2) + 610f64.powi(2)).sqrt();
        assert!(
            (c.recurrence.time - lattice).abs() < 1e-2,
            "{}",
            c.recurrence.time
        );
        assert!((c.orbit.period - lattice).abs() < 1e-2);
        assert!(c.orbit.residual <= 1e-9 && c.in_neighbourhood);
        assert!(c.bump.cr_size(0).unwrap() <= eps);
        assert!(c.bump_match <= 1e-10);
        assert!(c.integrals.iter().all(|(_, i)| i.abs() <= 1e-4));
        assert!(c.outside_defect <= 1e-8);
    }
}

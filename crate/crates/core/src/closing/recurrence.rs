//! Recurrence search: the first return of an orbit close to where it crossed a
//! watched disc or section.

use crate::error::{Error, Result};
use crate::perturb::{hybrid_watch, Crossing, HybridOptions, HybridSystem, Watch};
use crate::phase::PhasePoint;
use crate::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceEvent {
    pub start: PhasePoint,
    pub watch: Watch,
    /// The crossing returned to.
    pub reference: Crossing,
    pub returned: Crossing,
    /// Return time `returned.t - reference.t`.
    pub time: f64,
    pub displacement: Vec2,
    /// False if no return came within the tolerance; the closest one is reported.
    pub found: bool,
    /// Smallest displacement among the crossings between the reference and the return.
    pub earlier_min: f64,
}

/// Watch the orbit of `v0` under `system` up to `t_max` and return its first crossing
/// within `eps` of the reference crossing. The reference is `v0` itself when it lies
/// on the watched set, its first crossing otherwise.
pub fn find_recurrent(
    system: &HybridSystem,
    v0: &PhasePoint,
    watch: &Watch,
    t_max: f64,
    eps: f64,
) -> Result<RecurrenceEvent> {
    find_recurrent_with(system, v0, watch, t_max, eps, &HybridOptions::default())
}

pub fn find_recurrent_with(
    system: &HybridSystem,
    v0: &PhasePoint,
    watch: &Watch,
    t_max: f64,
    eps: f64,
    opts: &HybridOptions,
) -> Result<RecurrenceEvent> {
    if !(t_max > 0.0 && eps > 0.0) {
        return Err(Error::Precondition(format!(
            "recurrence search needs T_max, eps > 0 (got {t_max}, {eps})"
        )));
    }
    let ham = &*system.ham;
    let orbit = hybrid_watch(system, v0, t_max, opts, std::slice::from_ref(watch))?;
    let mut crossings = orbit.crossings.into_iter().filter(|c| c.t > 1e-9);
    let reference = match watch.coordinates(ham, v0).filter(|_| watch.is_on(ham, v0)) {
        Some(coords) => Crossing {
            watch: 0,
            t: 0.0,
            z: *v0,
            coords,
        },
        None => crossings.next().ok_or_else(|| {
            Error::NotFound(format!(
                "the orbit does not cross the watched set before T = {t_max}"
            ))
        })?,
    };
    let mut best: Option<(Crossing, f64)> = None;
    let mut earlier_min = f64::INFINITY;
    for c in crossings {
        let d = watch.offset(c.coords, reference.coords).norm();
        if d < eps {
            return Ok(event(v0, watch, reference, c, true, earlier_min));
        }
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((c, earlier_min));
        }
        earlier_min = earlier_min.min(d);
    }
    let (c, before) = best.ok_or_else(|| {
        Error::NotFound(format!("no return to the watched set before T = {t_max}"))
    })?;
    Ok(event(v0, watch, reference, c, false, before))
}

fn event(
    v0: &PhasePoint,
    watch: &Watch,
    reference: Crossing,
    returned: Crossing,
    found: bool,
    earlier_min: f64,
) -> RecurrenceEvent {
    RecurrenceEvent {
        start: *v0,
        watch: watch.clone(),
        reference,
        returned,
        time: returned.t - reference.t,
        displacement: watch.offset(returned.coords, reference.coords),
        found,
        earlier_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closing::section_through;
    use crate::geometry::FinslerMetric;
    use crate::phase::GeodesicHamiltonian;
    use std::sync::Arc;

    fn torus() -> HybridSystem {
        HybridSystem::new(Arc::new(GeodesicHamiltonian::new(
            FinslerMetric::flat_torus(),
        )))
    }

    #[test]
    fn rational_direction_returns_exactly() {
        let sys = torus();
        let p = Vec2::new(1.0, 2.0) / 5f64.sqrt();
        let z = PhasePoint::new(Vec2::new(0.2, 0.3), p);
        let sec = section_through(&*sys.ham, &z).unwrap();
        let ev = find_recurrent(&sys, &z, &Watch::Section(sec), 5.0, 1e-6).unwrap();
        assert!(ev.found);
        assert!(ev.displacement.norm() <= 1e-9, "{:?}", ev.displacement);
        assert!((ev.time - 5f64.sqrt()).abs() <= 1e-9, "{}", ev.time);
    }

    #[test]
    fn golden_direction_best_return_matches_lattice_oracle() {
        let sys = torus();
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        let p = Vec2::new(1.0, phi).normalize();
        let z = PhasePoint::new(Vec2::new(0.1, 0.0), p);
        let sec = section_through(&*sys.ham, &z).unwrap();
        let ev = find_recurrent(&sys, &z, &Watch::Section(sec), 60.0, 1e-6).unwrap();
        assert!(!ev.found);
        // oracle: the k-th crossing of y = const sits at x0 + k / phi, at time k / p_y
        let (mut best, mut best_k) = (f64::INFINITY, 0);
        for k in 1..=((60.0 * p.y) as i64) {
            let x = k as f64 / phi;
            let miss = (x - x.round()).abs();
            if miss < best {
                best = miss;
                best_k = k;
            }
        }
        assert_eq!(best_k, 34);
        assert!((ev.displacement.norm() - best).abs() <= 1e-6);
        assert!((ev.time - best_k as f64 / p.y).abs() <= 1e-6);
    }

    #[test]
    fn disc_watch_reports_entry_coordinates() {
        let sys = torus();
        let metric = FinslerMetric::flat_torus();
        let disc =
            crate::lens::SimpleDisc::candidate(&metric, 0, Vec2::new(0.5, 0.5), 0.1).unwrap();
        let z = PhasePoint::new(Vec2::new(0.5, 0.2), Vec2::new(0.0, 1.0));
        let ev = find_recurrent(&sys, &z, &Watch::Disc(disc.clone()), 3.0, 1e-9).unwrap();
        assert!(ev.found);
        assert!((ev.time - 1.0).abs() < 1e-9);
        // entry at the bottom of the disc, moving along the inward normal
        assert!((ev.reference.coords.x - disc.s_of(&Vec2::new(0.5, 0.4))).abs() < 1e-9);
        assert!(ev.reference.coords.y.abs() < 1e-9);
        assert!((sys.ham.value(&ev.returned.z) - 0.5).abs() < 1e-10);
    }
}

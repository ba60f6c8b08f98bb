//! Closing an orbit through an open set of a contact-type energy level by a bump on
//! a Poincaré section.
//!
//! With `x1 = g_{-2 tau}(z)` and `x2 = g_{-tau}(z)` for the centre `z` of `U`, the
//! orbit of `x1` is followed until it returns to the section `S1` through `x1` at
//! `w1`. A bump `psi(w0) = w1` on `S1` turns the map `S1 -> S2` into `P o psi^-1`,
//! so the return leaves `S2` where `x2` lies and the orbit closes through `z`.

use super::local::{closing_bump, LocalOptions, EXACT_RETURN};
use super::periodic::{refine_on_section, PeriodicOrbit, RefineOptions, ReturnSelect};
use super::recurrence::{find_recurrent, RecurrenceEvent};
use super::{section_through, Neighbourhood};
use crate::contact::{contact_type_check, Ambient, ContactReport, LevelSet};
use crate::error::{Error, Result};
use crate::perturb::{
    calibrate_constant, perturb_poincare, HybridSystem, PoincareOptions, Section, SymplecticBump,
    Watch,
};
use crate::phase::{flow_to, hamiltonian_vector_field, Hamiltonian};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamCloseOptions {
    pub t_max: f64,
    /// Flow time between the sections and the centre; by default `0.2 / |dq/dt|`.
    pub tau: Option<f64>,
    /// Largest bump support radius on the section.
    pub support_cap: f64,
    pub budget_share: f64,
    /// Phase space of the level for the contact check.
    pub ambient: Ambient,
    pub tol: f64,
}

impl Default for HamCloseOptions {
    fn default() -> Self {
        HamCloseOptions {
            t_max: 1000.0,
            tau: None,
            support_cap: 0.05,
            budget_share: 0.9,
            ambient: Ambient::Cotangent,
            tol: 1e-12,
        }
    }
}

#[derive(Clone)]
pub struct HamClosing {
    pub system: HybridSystem,
    pub orbit: PeriodicOrbit,
    pub first: Section,
    pub second: Section,
    pub tau: f64,
    pub recurrence: RecurrenceEvent,
    pub bump: SymplecticBump,
    /// `|psi(w0) - w1|`.
    pub bump_match: f64,
    pub contact: ContactReport,
    pub in_neighbourhood: bool,
}

/// Close an orbit of `ham` on the level `h` through `u`.
pub fn ham_close(
    ham: Arc<dyn Hamiltonian>,
    h: f64,
    u: &Neighbourhood,
    eps: f64,
    opts: &HamCloseOptions,
) -> Result<HamClosing> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be > 0, got {eps}")));
    }
    let z = u.center;
    let off = (ham.value(&z) - h).abs();
    if off > 1e-9 * (1.0 + h.abs()) {
        return Err(Error::Precondition(format!(
            "the centre of U lies {off:.3e} off the level {h}"
        )));
    }
    let level = LevelSet::new(ham.clone(), h, opts.ambient)?;
    let contact = contact_type_check(&level)?;
    if !contact.passed {
        return Err(Error::Precondition(format!(
            "level {h} failed the contact check: {:?}",
            contact.witness
        )));
    }

    let speed = hamiltonian_vector_field(&*ham, &z).0.norm();
    let tau = opts.tau.unwrap_or(0.2 / speed);
    let x2 = flow_to(&*ham, &z, -tau, opts.tol)?;
    let x1 = flow_to(&*ham, &z, -2.0 * tau, opts.tol)?;
    if u.contains(&*ham, &x2) || u.contains(&*ham, &x1) {
        return Err(Error::Precondition(format!(
            "tau = {tau} does not move U off itself"
        )));
    }
    let first = section_through(&*ham, &x1)?;
    let second = section_through(&*ham, &x2)?;
    let w0 = first.coordinates(&x1.to_chart(&ham.surface(), first.chart));

    let base = HybridSystem::new(ham.clone());
    let budget = opts.budget_share * calibrate_constant(opts.support_cap, 0, eps)? * eps;
    let recurrence = find_recurrent(&base, &x1, &Watch::Section(first), opts.t_max, budget)?;
    if !recurrence.found {
        return Err(Error::NotFound(format!(
            "no return within {budget:.3e} before T = {}; the closest misses by {:.3e}",
            opts.t_max,
            recurrence.displacement.norm()
        )));
    }
    let d = recurrence.displacement;
    let bump = closing_bump(
        first.wrap,
        w0,
        d,
        recurrence.earlier_min,
        2.0 * opts.support_cap,
        eps,
    )?;
    let bump_match = first.offset(bump.apply(w0)?, w0 + d).norm();

    let system = if d.norm() <= EXACT_RETURN {
        base
    } else {
        let poincare = PoincareOptions {
            tol: opts.tol,
            ..Default::default()
        };
        perturb_poincare(ham.clone(), &first, &second, &bump, &poincare)?.system
    };

    let section = section_through(&*ham, &z)?;
    let w = section.coordinates(&z.to_chart(&ham.surface(), section.chart));
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
    orbit.tags.push("section-override".into());
    if in_neighbourhood {
        orbit.tags.push("meets-U".into());
    }
    Ok(HamClosing {
        system,
        orbit,
        first,
        second,
        tau,
        recurrence,
        bump,
        bump_match,
        contact,
        in_neighbourhood,
    })
}

/// Local closing options suited to a given `ham_close` budget.
impl From<&HamCloseOptions> for LocalOptions {
    fn from(o: &HamCloseOptions) -> Self {
        LocalOptions {
            t_max: o.t_max,
            budget_share: o.budget_share,
            tol: o.tol,
            ..Default::default()
        }
    }
}

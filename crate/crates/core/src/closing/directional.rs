//! Closing the orbit through a given covector with two discs on either side of it.
//!
//! The discs `D-` and `D+` sit just upstream and downstream of `v`. A third disc
//! further along closes the orbit of `v`, and the closed loop re-enters `D-` at some
//! `beta` near the entry `alpha` of `v`. The bump `psi(alpha) = beta` on `D-` sends the
//! loop out of `D-` through `v` itself, and the correction
//! `sigma+ eta sigma- (sigma~-)^-1 eta^-1` on `D+` puts it back onto the loop.

use super::local::{
    close_on_disc, closing_bump, mirror_samples, upstream_disc, upstream_start, LocalOptions,
};
use super::periodic::{refine_on_section, PeriodicOrbit, RefineOptions, ReturnSelect};
use super::recurrence::RecurrenceEvent;
use super::{section_through, Neighbourhood};
use crate::error::{Error, Result};
use crate::geometry::FinslerMetric;
use crate::lens::{simplicity_radius, Direction, ExactLens, SimpleDisc, TransitionMap};
use crate::perturb::{
    hybrid_watch, perturb_lens, reversibility_defect, reversible_symmetrize,
    reversible_symmetrize_region, HybridOptions, HybridSystem, Region, SymplecticBump, Watch,
};
use crate::phase::{
    flow_to, run_flow, Event, EventDirection, FlowOptions, GeodesicHamiltonian, Hamiltonian,
    PhasePoint, UnitCovector,
};
use crate::Vec2;
use std::f64::consts::TAU;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalOptions {
    /// Options for the closing disc further along the orbit.
    pub local: LocalOptions,
    /// Radius of `D-` and `D+`; by default `0.8` of the simplicity radius, capped.
    pub rho: Option<f64>,
    pub rho_cap: f64,
    /// Gap left between each disc and `v`, as a fraction of the radius.
    pub gap: f64,
    pub reversible: bool,
    /// Side of the sample grid for the composition identity.
    pub grid: usize,
    pub tol: f64,
}

impl Default for DirectionalOptions {
    fn default() -> Self {
        DirectionalOptions {
            local: LocalOptions::default(),
            rho: None,
            rho_cap: 0.2,
            gap: 0.05,
            reversible: false,
            grid: 7,
            tol: 1e-12,
        }
    }
}

/// The flow map `eta` from outward covectors of one disc to inward covectors of the next.
#[derive(Clone)]
pub struct Connector {
    pub ham: Arc<dyn Hamiltonian>,
    pub from: SimpleDisc,
    pub to: SimpleDisc,
    pub time_cap: f64,
    pub tol: f64,
}

fn boundary_event(disc: &SimpleDisc) -> Event<'_> {
    Event::new(
        move |z: &PhasePoint| (disc.local(z).q - disc.center).norm() - disc.radius,
        EventDirection::Falling,
        true,
    )
}

fn boundary_coords(disc: &SimpleDisc, z: &PhasePoint) -> (f64, f64) {
    let zc = disc.local(z);
    let s = disc.s_of(&zc.q);
    (s, zc.p.dot(&disc.tangent(s)))
}

impl Connector {
    fn run(
        &self,
        start: &SimpleDisc,
        target: &SimpleDisc,
        s: f64,
        t: f64,
        dir: Direction,
        time: f64,
    ) -> Result<(f64, f64)> {
        let p = start.covector(s, t, dir)?;
        let z = PhasePoint::in_chart(start.chart, start.point(s), p);
        let opts = FlowOptions {
            tol: self.tol,
            ..Default::default()
        };
        let out = run_flow(&*self.ham, &z, time, &opts, &[boundary_event(target)])?;
        if out.stopped_by.is_none() {
            return Err(Error::Domain(format!(
                "no passage between the discs within {}",
                self.time_cap
            )));
        }
        Ok(boundary_coords(target, &out.end))
    }

    /// `eta(s, t)`: the first entry into `to` of the orbit leaving `from` at `(s, t)`.
    pub fn forward(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        self.run(
            &self.from,
            &self.to,
            s,
            t,
            Direction::Outward,
            self.time_cap,
        )
    }

    /// `eta^-1`, by flowing backwards to `from`.
    pub fn backward(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        self.run(
            &self.to,
            &self.from,
            s,
            t,
            Direction::Inward,
            -self.time_cap,
        )
    }
}

/// The lens map of `D+` corrected on the image of the bump support of `D-`.
#[derive(Clone)]
pub struct DownstreamCorrection {
    pub sigma_plus: Arc<dyn TransitionMap>,
    pub sigma_minus: Arc<dyn TransitionMap>,
    /// The map actually used on `D-`.
    pub tilde_minus: Arc<dyn TransitionMap>,
    pub connector: Connector,
    pub bump: SymplecticBump,
    /// `eta(sigma-(alpha))`, the entry into `D+` of the orbit of `v`.
    pub anchor: Vec2,
    /// Inward covectors farther than this from the anchor are left alone.
    pub reach: f64,
}

impl DownstreamCorrection {
    /// The inward covector of `D-` an entry into `D+` came from, if it lies in the bump support.
    pub fn source(&self, s: f64, t: f64) -> Result<Option<Vec2>> {
        let disc = self.sigma_plus.disc();
        if Vec2::new(disc.s_offset(s, self.anchor.x), t - self.anchor.y).norm() > self.reach {
            return Ok(None);
        }
        let Ok((a, b)) = self.connector.backward(s, t) else {
            return Ok(None);
        };
        let x = match self.tilde_minus.invert(a, b) {
            Ok((x, y)) => Vec2::new(x, y),
            Err(Error::Domain(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(self.bump.contains(x).then_some(x))
    }

    pub fn in_region(&self, s: f64, t: f64) -> Result<bool> {
        Ok(self.source(s, t)?.is_some())
    }
}

impl TransitionMap for DownstreamCorrection {
    fn disc(&self) -> &SimpleDisc {
        self.sigma_plus.disc()
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        match self.source(s, t)? {
            Some(x) => {
                let (a, b) = self.sigma_minus.apply(x.x, x.y)?;
                let (s2, t2) = self.connector.forward(a, b)?;
                self.sigma_plus.apply(s2, t2)
            }
            None => self.sigma_plus.apply(s, t),
        }
    }
    /// The correction permutes its region, so the inverse undoes it after `sigma+^-1`.
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (a, b) = self.sigma_plus.invert(s, t)?;
        if self.source(a, b)?.is_none() {
            return Ok((a, b));
        }
        let (c, d) = self.connector.backward(a, b)?;
        let (e, f) = self.sigma_minus.invert(c, d)?;
        let (g, h) = self.tilde_minus.apply(e, f)?;
        self.connector.forward(g, h)
    }
    fn name(&self) -> String {
        format!("corrected({})", self.sigma_plus.name())
    }
}

#[derive(Clone)]
pub struct DirectionalClosing {
    pub system: HybridSystem,
    pub orbit: PeriodicOrbit,
    pub minus: SimpleDisc,
    pub plus: SimpleDisc,
    /// The disc on which the orbit of `v` is closed first.
    pub closing_disc: SimpleDisc,
    pub recurrence: RecurrenceEvent,
    pub alpha_minus: Vec2,
    pub beta_minus: Vec2,
    pub bump_minus: SymplecticBump,
    pub closing_bump: SymplecticBump,
    pub correction: DownstreamCorrection,
    /// Distance from the closed orbit's point on the section through `v` to `v`.
    pub passage: f64,
    /// `|sigma~+ eta sigma~- - sigma+ eta sigma-|` over the bump support.
    pub identity_defect: f64,
    /// `|sigma~+ - sigma+|` at sample covectors outside the corrected region.
    pub outside_agreement: f64,
    pub reversibility_defect: Option<f64>,
}

/// `D-`, `D+` of radius `rho` with gap `m` to `v`, checked disjoint.
fn disc_pair(
    metric: &FinslerMetric,
    ham: &dyn Hamiltonian,
    v: &PhasePoint,
    rho: f64,
    m: f64,
) -> Result<(SimpleDisc, SimpleDisc)> {
    let minus = upstream_disc(metric, ham, v, rho + m, rho)?;
    let plus = upstream_disc(metric, ham, v, -(rho + m), rho)?;
    if separation(&minus, &plus) <= 0.0 {
        return Err(Error::Geometry(format!(
            "discs of radius {rho:.4} on either side of v overlap"
        )));
    }
    Ok((minus, plus))
}

/// Gap between two discs, measured in the first one's chart.
fn separation(a: &SimpleDisc, b: &SimpleDisc) -> f64 {
    let c = PhasePoint::in_chart(b.chart, b.center, Vec2::zeros());
    (a.local(&c).q - a.center).norm() - a.radius - b.radius
}

/// A certified disc centred on the orbit of `v` downstream of `D+`, clear of both discs.
fn closing_disc(
    metric: &FinslerMetric,
    ham: &dyn Hamiltonian,
    v: &PhasePoint,
    pair: (&SimpleDisc, &SimpleDisc),
    first: f64,
    radius: f64,
) -> Result<SimpleDisc> {
    let margin = 0.1 * radius;
    let step = 0.05 * radius;
    let mut t = first + radius + margin;
    while t < first + 30.0 {
        let c = flow_to(ham, v, t, 1e-12)?.to_chart(&metric.surface, v.chart);
        if let Ok(d) = SimpleDisc::candidate(metric, v.chart, c.q, radius) {
            let clear = separation(&d, pair.0) > margin && separation(&d, pair.1) > margin;
            if clear && !d.contains(v) {
                if let Ok(d) = SimpleDisc::certified(metric, v.chart, c.q, radius) {
                    return Ok(d);
                }
            }
        }
        t += step;
    }
    Err(Error::Geometry(
        "no room for a closing disc along the orbit of v".into(),
    ))
}

/// Close an orbit through the covector `v` itself.
pub fn directional_close(
    metric: &FinslerMetric,
    v: PhasePoint,
    eps: f64,
    opts: &DirectionalOptions,
) -> Result<DirectionalClosing> {
    if !(eps > 0.0) {
        return Err(Error::Precondition(format!("eps must be > 0, got {eps}")));
    }
    let ham: Arc<dyn Hamiltonian> = Arc::new(GeodesicHamiltonian::new(metric.clone()));
    let v = UnitCovector::certify(metric, v)?.point;
    let simple = simplicity_radius(metric, v.chart, &v.q)?;
    let mut rho = opts.rho.unwrap_or((0.8 * simple).min(opts.rho_cap));
    let local_rho = opts.local.rho.unwrap_or(simple.min(opts.local.rho_cap));
    let (minus, plus, far) = loop {
        let m = opts.gap * rho;
        let attempt = disc_pair(metric, &*ham, &v, rho, m).and_then(|(minus, plus)| {
            let far = closing_disc(metric, &*ham, &v, (&minus, &plus), 2.0 * rho + m, local_rho)?;
            Ok((minus, plus, far))
        });
        match attempt {
            Ok(found) => break found,
            Err(e) if opts.rho.is_some() || rho < 1e-3 => return Err(e),
            Err(_) => rho *= 0.5,
        }
    };
    let m = opts.gap * rho;

    // the entry alpha of v into D-
    let base = HybridSystem::new(ham.clone());
    let hopts = HybridOptions {
        tol: opts.tol,
        ..Default::default()
    };
    let before = upstream_start(&*ham, &minus, &v, 2.5 * rho + m)?;
    let lead = hybrid_watch(
        &base,
        &before,
        8.0 * rho + 4.0 * m,
        &hopts,
        &[Watch::Disc(minus.clone())],
    )?;
    let alpha = lead
        .crossings
        .first()
        .ok_or_else(|| Error::Geometry("the orbit of v does not enter the upstream disc".into()))?
        .coords;

    // close the orbit of v on the far disc
    let first = close_on_disc(&ham, &far, &v, eps, &opts.local)?;
    let rec = first.recurrence.clone();

    // the loop's entries into D-; the last one precedes the return
    let run = hybrid_watch(
        &base,
        &v,
        rec.returned.t,
        &hopts,
        &[Watch::Disc(minus.clone())],
    )?;
    let entries: Vec<_> = run
        .crossings
        .iter()
        .filter(|c| c.t > rec.reference.t && c.t < rec.returned.t)
        .collect();
    let last = entries
        .last()
        .ok_or_else(|| Error::Geometry("the closed loop does not pass the upstream disc".into()))?;
    let watch = Watch::Disc(minus.clone());
    let beta = last.coords;
    let d = watch.offset(beta, alpha);
    let avoid = entries[..entries.len() - 1]
        .iter()
        .map(|c| watch.offset(c.coords, alpha).norm())
        .fold(f64::INFINITY, f64::min);
    // a narrow support keeps every orbit through it on its way to D+
    let bump = closing_bump(
        Some(minus.boundary_length()),
        alpha,
        d,
        avoid,
        0.1 * rho,
        eps,
    )?;

    let sigma_minus: Arc<dyn TransitionMap> = Arc::new(ExactLens::new(minus.clone()));
    let sigma_plus: Arc<dyn TransitionMap> = Arc::new(ExactLens::new(plus.clone()));
    let tilde: Arc<dyn TransitionMap> = Arc::new(perturb_lens(sigma_minus.clone(), &bump)?);
    let tilde_minus: Arc<dyn TransitionMap> = if opts.reversible {
        Arc::new(reversible_symmetrize(tilde, sigma_minus.clone(), &bump)?)
    } else {
        tilde
    };

    let connector = Connector {
        ham: ham.clone(),
        from: minus.clone(),
        to: plus.clone(),
        time_cap: 4.0 * (rho + m) + 1.0,
        tol: opts.tol,
    };
    let through = |x: Vec2| -> Result<Vec2> {
        let (a, b) = sigma_minus.apply(x.x, x.y)?;
        let (s, t) = connector.forward(a, b)?;
        Ok(Vec2::new(s, t))
    };
    let anchor = through(alpha)?;
    let mut periodic_bump = bump;
    periodic_bump.period = Some(minus.boundary_length());
    let mut reach = 0.0f64;
    for k in 0..32 {
        let th = TAU * k as f64 / 32.0;
        let x = bump.center + Vec2::new(th.cos(), th.sin()) * bump.delta;
        if let Ok(y) = through(x) {
            reach = reach.max(Vec2::new(plus.s_offset(y.x, anchor.x), y.y - anchor.y).norm());
        }
    }
    let correction = DownstreamCorrection {
        sigma_plus: sigma_plus.clone(),
        sigma_minus: sigma_minus.clone(),
        tilde_minus: tilde_minus.clone(),
        connector: connector.clone(),
        bump: periodic_bump,
        anchor,
        reach: 1.5 * reach + 1e-9,
    };

    // covectors of the bump support and their images on D+
    let n = opts.grid.max(2);
    let mut support = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let b = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            let x = bump.center + Vec2::new(a, b) * bump.delta;
            if bump.contains(x) {
                support.push(x);
            }
        }
    }
    let plus_map: Arc<dyn TransitionMap> = if opts.reversible {
        let touched_by = correction.clone();
        let touched: Region = Arc::new(move |s, t| touched_by.in_region(s, t));
        let samples = support
            .iter()
            .filter_map(|&x| through(x).ok())
            .map(|y| (y.x, y.y))
            .collect::<Vec<_>>();
        Arc::new(reversible_symmetrize_region(
            Arc::new(correction.clone()),
            sigma_plus.clone(),
            touched,
            &samples,
        )?)
    } else {
        Arc::new(correction.clone())
    };

    let mut system = HybridSystem::new(ham.clone());
    system.add_disc(first.override_map.clone())?;
    system.add_disc(tilde_minus.clone())?;
    system.add_disc(plus_map.clone())?;

    // sigma~+ eta sigma~- against sigma+ eta sigma- on the support
    let mut identity_defect = 0.0f64;
    for &x in &support {
        let (a, b) = tilde_minus.apply(x.x, x.y)?;
        let (s, t) = connector.forward(a, b)?;
        let lhs = plus_map.apply(s, t)?;
        let y = through(x)?;
        let rhs = sigma_plus.apply(y.x, y.y)?;
        identity_defect =
            identity_defect.max(Vec2::new(plus.s_offset(lhs.0, rhs.0), lhs.1 - rhs.1).norm());
    }

    // away from the corrected region the map is the lens map of D+
    let mut outside_agreement = 0.0f64;
    for k in 0..24 {
        let th = TAU * k as f64 / 24.0;
        let x = Vec2::new(
            plus.wrap_s(anchor.x + 3.0 * reach * th.cos()),
            anchor.y + 3.0 * reach * th.sin(),
        );
        if correction.in_region(x.x, x.y)? {
            continue;
        }
        if let (Ok(a), Ok(b)) = (plus_map.apply(x.x, x.y), sigma_plus.apply(x.x, x.y)) {
            outside_agreement =
                outside_agreement.max(Vec2::new(plus.s_offset(a.0, b.0), a.1 - b.1).norm());
        }
    }

    let reversibility = if opts.reversible {
        let mut samples = mirror_samples(&*sigma_minus, &bump)?;
        let mut worst = reversibility_defect(&*tilde_minus, &samples)?;
        samples.clear();
        for &x in &support {
            let y = through(x)?;
            samples.push((y.x, y.y));
            let (s, t) = sigma_plus.apply(y.x, y.y)?;
            samples.push((s, -t));
        }
        worst = worst.max(reversibility_defect(&*plus_map, &samples)?);
        if let Some(w) = first.reversibility_defect {
            worst = worst.max(w);
        }
        Some(worst)
    } else {
        None
    };

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
        ReturnSelect::Nearest(rec.time),
        &refine,
    )?;
    let passage = Neighbourhood::new(v, 0.0).distance(&*ham, &orbit.point);
    orbit.tags.push("two-disc".into());

    Ok(DirectionalClosing {
        system,
        orbit,
        minus,
        plus,
        closing_disc: far,
        recurrence: rec,
        alpha_minus: alpha,
        beta_minus: beta,
        bump_minus: bump,
        closing_bump: first.bump,
        correction,
        passage,
        identity_defect,
        outside_agreement,
        reversibility_defect: reversibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> PhasePoint {
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        PhasePoint::new(Vec2::new(0.3, 0.2), Vec2::new(1.0, phi).normalize())
    }

    #[test]
    fn golden_orbit_closes_through_v() {
        let metric = FinslerMetric::flat_torus();
        let c = directional_close(&metric, golden(), 1e-2, &DirectionalOptions::default()).unwrap();
        assert!(c.passage <= 1e-7, "{}", c.passage);
        assert!(c.orbit.residual <= 1e-9);
        assert!(c.identity_defect <= 1e-7, "{}", c.identity_defect);
        assert!(c.outside_agreement <= 1e-12);
        assert!(c.bump_minus.amplitude > 0.0);
        // oracle: psi moves alpha onto beta exactly
        let moved = c.bump_minus.apply(c.alpha_minus).unwrap();
        assert!(
            Watch::Disc(c.minus.clone())
                .offset(moved, c.beta_minus)
                .norm()
                <= 1e-10
        );
    }

    #[test]
    fn reversible_variant_is_reversible() {
        let metric = FinslerMetric::flat_torus();
        let opts = DirectionalOptions {
            reversible: true,
            ..Default::default()
        };
        let c = directional_close(&metric, golden(), 1e-2, &opts).unwrap();
        assert!(c.reversibility_defect.unwrap() <= 1e-6);
        assert!(c.passage <= 1e-7 && c.orbit.residual <= 1e-9);
    }

    #[test]
    fn periodic_covector_needs_no_bumps() {
        let metric = FinslerMetric::flat_torus();
        let v = PhasePoint::new(Vec2::new(0.3, 0.2), Vec2::new(1.0, 2.0) / 5f64.sqrt());
        let local = LocalOptions {
            t_max: 5.0,
            rho: Some(0.1),
            ..Default::default()
        };
        let opts = DirectionalOptions {
            local,
            rho: Some(0.1),
            ..Default::default()
        };
        let c = directional_close(&metric, v, 1e-2, &opts).unwrap();
        assert_eq!(c.bump_minus.amplitude, 0.0);
        assert_eq!(c.closing_bump.amplitude, 0.0);
        assert!((c.orbit.period - 5f64.sqrt()).abs() <= 1e-9);
        assert!(c.passage <= 1e-7);
    }
}

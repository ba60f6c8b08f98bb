//! Hybrid systems: a base flow whose passage through designated discs or across
//! designated sections is replaced by a given map.

use super::section::Section;
use crate::error::{Error, Result};
use crate::lens::{trace, Direction, ExactLens, PlanarMap, SimpleDisc, TransitionMap};
use crate::phase::flow::run_flow;
use crate::phase::{
    hamiltonian_vector_field, Event, EventDirection, FlowOptions, Hamiltonian, PhasePoint,
    Trajectory,
};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// Entries closer than this (in sine of the angle to the boundary) to tangency are refused.
pub const ENTRY_GRAZING_SIN: f64 = 1e-6;
/// Crossings this soon after a transition are ignored.
const REARM_TIME: f64 = 1e-7;

#[derive(Clone)]
pub struct DiscOverride {
    pub disc: SimpleDisc,
    pub map: Arc<dyn TransitionMap>,
}

#[derive(Clone)]
pub struct SectionOverride {
    pub section: Section,
    pub map: Arc<dyn PlanarMap>,
}

/// One replaced passage; for section overrides `s` and `t` are the section coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub time: f64,
    pub disc_id: usize,
    pub s_in: f64,
    pub t_in: f64,
    pub s_out: f64,
    pub t_out: f64,
}

/// A place whose crossings are recorded without changing the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Watch {
    Section(Section),
    /// Entries into a disc, in its `(s, t)` coordinates.
    Disc(SimpleDisc),
}

impl Watch {
    fn event<'a>(&'a self, ham: &'a dyn Hamiltonian) -> Event<'a> {
        match self {
            Watch::Section(sec) => {
                let surface = ham.surface();
                Event::new(
                    move |z: &PhasePoint| sec.height(&z.to_chart(&surface, sec.chart).q),
                    EventDirection::Rising,
                    false,
                )
            }
            Watch::Disc(disc) => Event::new(
                move |z: &PhasePoint| (disc.local(z).q - disc.center).norm() - disc.radius,
                EventDirection::Falling,
                false,
            ),
        }
    }

    /// Difference `a - b` of crossing coordinates, periodic where the coordinates are.
    pub fn offset(&self, a: Vec2, b: Vec2) -> Vec2 {
        match self {
            Watch::Section(sec) => sec.offset(a, b),
            Watch::Disc(disc) => Vec2::new(disc.s_offset(a.x, b.x), a.y - b.y),
        }
    }

    /// Whether `z` lies on the watched set, entering it.
    pub fn is_on(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> bool {
        match self {
            Watch::Section(sec) => {
                let zc = z.to_chart(&ham.surface(), sec.chart);
                sec.height(&zc.q).abs() < 1e-12
                    && sec.accepts(ham, z)
                    && sec.transversality(ham, &zc) > 0.0
            }
            Watch::Disc(disc) => {
                let zc = disc.local(z);
                let d = zc.q - disc.center;
                (d.norm() - disc.radius).abs() < 1e-12
                    && hamiltonian_vector_field(ham, &zc).0.dot(&d) < 0.0
            }
        }
    }

    /// Coordinates of a crossing at `z`, or `None` if it is off the watched set.
    pub fn coordinates(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> Option<Vec2> {
        match self {
            Watch::Section(sec) => sec
                .accepts(ham, z)
                .then(|| sec.coordinates(&z.to_chart(&ham.surface(), sec.chart))),
            Watch::Disc(disc) => {
                let zc = disc.local(z);
                let s = disc.s_of(&zc.q);
                Some(Vec2::new(s, zc.p.dot(&disc.tangent(s))))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub watch: usize,
    pub t: f64,
    pub z: PhasePoint,
    pub coords: Vec2,
}

#[derive(Clone)]
pub struct HybridSystem {
    pub ham: Arc<dyn Hamiltonian>,
    pub discs: Vec<DiscOverride>,
    pub sections: Vec<SectionOverride>,
}

#[derive(Debug, Clone)]
pub struct HybridOrbit {
    pub end: PhasePoint,
    pub t: f64,
    pub log: Vec<Transition>,
    pub crossings: Vec<Crossing>,
    pub trajectory: Option<Trajectory>,
}

impl HybridOrbit {
    /// Event log as JSON lines.
    pub fn write_log(&self, w: &mut dyn Write) -> Result<()> {
        for tr in &self.log {
            writeln!(
                w,
                "{}",
                serde_json::to_string(tr).map_err(|e| Error::Io(e.to_string()))?
            )?;
        }
        Ok(())
    }
}

impl HybridSystem {
    pub fn new(ham: Arc<dyn Hamiltonian>) -> Self {
        HybridSystem {
            ham,
            discs: Vec::new(),
            sections: Vec::new(),
        }
    }

    /// Add a disc whose passages are replaced by `map`. The disc must be certified for
    /// the base geodesic flow and disjoint from the discs already present.
    pub fn add_disc(&mut self, map: Arc<dyn TransitionMap>) -> Result<usize> {
        let disc = map.disc().clone();
        if !disc.is_certified() {
            return Err(Error::Precondition("override disc is not certified".into()));
        }
        if self.ham.is_classical() || self.ham.metric().map(|m| m != &disc.metric).unwrap_or(true) {
            return Err(Error::Precondition(
                "disc overrides need the geodesic flow of the disc's metric".into(),
            ));
        }
        for other in &self.discs {
            let o = &other.disc;
            let c = PhasePoint::in_chart(o.chart, o.center, Vec2::zeros());
            let gap = (disc.local(&c).q - disc.center).norm();
            if gap <= disc.radius + o.radius {
                return Err(Error::Precondition(format!(
                    "override discs overlap (centre gap {gap:.4})"
                )));
            }
        }
        self.discs.push(DiscOverride { disc, map });
        Ok(self.discs.len() - 1)
    }

    pub fn add_section(&mut self, section: Section, map: Arc<dyn PlanarMap>) -> usize {
        self.sections.push(SectionOverride { section, map });
        self.discs.len() + self.sections.len() - 1
    }

    fn entry_events(&self) -> Vec<Event<'_>> {
        let mut ev = Vec::new();
        for d in &self.discs {
            let disc = &d.disc;
            ev.push(Event::new(
                move |z: &PhasePoint| (disc.local(z).q - disc.center).norm() - disc.radius,
                EventDirection::Falling,
                true,
            ));
        }
        for s in &self.sections {
            ev.push(s.section.event(&*self.ham));
        }
        ev
    }

    /// Replace the passage through disc `k` entered at `z`; returns the exit point and transit time.
    fn pass_disc(&self, k: usize, z: &PhasePoint) -> Result<(PhasePoint, f64, Transition)> {
        let DiscOverride { disc, map } = &self.discs[k];
        let zc = disc.local(z);
        let lattice = z.to_chart(&disc.metric.surface, disc.chart).q - zc.q;
        let s = disc.s_of(&zc.q);
        let t = zc.p.dot(&disc.tangent(s));
        let v = hamiltonian_vector_field(&*self.ham, &zc).0;
        let sin_in = -v.dot(&disc.normal(s)) / v.norm();
        if !(sin_in > ENTRY_GRAZING_SIN) {
            return Err(Error::Tangency(format!(
                "entry into override disc {k} at s = {s:.6} is tangential"
            )));
        }
        let ham = disc.hamiltonian();
        let chord = trace(disc, &ham, s, &zc.p)?;
        let (s_out, t_out) = match map.apply(s, t) {
            Ok(v) => v,
            // outside the replacement's tabulated range the base passage is used
            Err(Error::Domain(_)) => (chord.exit.s, chord.exit.t),
            Err(e) => return Err(e),
        };
        let p = disc.covector(s_out, t_out, Direction::Outward)?;
        let exit = PhasePoint::in_chart(disc.chart, disc.point(s_out) + lattice, p);
        Ok((
            exit,
            chord.length,
            Transition {
                time: 0.0,
                disc_id: k,
                s_in: s,
                t_in: t,
                s_out,
                t_out,
            },
        ))
    }

    fn pass_section(&self, k: usize, z: &PhasePoint) -> Result<(PhasePoint, Transition)> {
        let SectionOverride { section, map } = &self.sections[k];
        let zc = z.to_chart(&self.ham.surface(), section.chart);
        let w = section.coordinates(&zc);
        let w1 = map.try_forward(w)?;
        // keep the lift of the section copy the orbit crossed
        let shift = section.normal * (section.normal.dot(&(zc.q - section.origin)));
        let out = section.lift(&*self.ham, w1)?;
        let out = PhasePoint {
            q: out.q + shift,
            ..out
        };
        let id = self.discs.len() + k;
        Ok((
            out,
            Transition {
                time: 0.0,
                disc_id: id,
                s_in: w.x,
                t_in: w.y,
                s_out: w1.x,
                t_out: w1.y,
            },
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridOptions {
    pub tol: f64,
    pub record: bool,
    pub max_transitions: usize,
}

impl Default for HybridOptions {
    fn default() -> Self {
        HybridOptions {
            tol: 1e-11,
            record: false,
            max_transitions: 100_000,
        }
    }
}

pub fn hybrid_orbit(
    system: &HybridSystem,
    z0: &PhasePoint,
    t_end: f64,
    opts: &HybridOptions,
) -> Result<HybridOrbit> {
    Ok(hybrid_run(system, z0, t_end, opts, None, &[])?.0)
}

/// Hybrid orbit that also records its crossings of `watches`.
pub fn hybrid_watch(
    system: &HybridSystem,
    z0: &PhasePoint,
    t_end: f64,
    opts: &HybridOptions,
    watches: &[Watch],
) -> Result<HybridOrbit> {
    Ok(hybrid_run(system, z0, t_end, opts, None, watches)?.0)
}

/// Section-to-section map of the hybrid flow, from coordinates `w` on `from` to the
/// first crossing of `to`.
pub fn hybrid_section_map(
    system: &HybridSystem,
    from: &Section,
    to: &Section,
    w: Vec2,
    time_cap: f64,
) -> Result<Vec2> {
    let z0 = from.lift(&*system.ham, w)?;
    let opts = HybridOptions {
        tol: 1e-12,
        ..Default::default()
    };
    let (orbit, stopped) = hybrid_run(system, &z0, time_cap, &opts, Some(to), &[])?;
    if !stopped {
        return Err(Error::Escape(time_cap));
    }
    Ok(to.coordinates(&orbit.end.to_chart(&system.ham.surface(), to.chart)))
}

fn hybrid_run(
    system: &HybridSystem,
    z0: &PhasePoint,
    t_end: f64,
    opts: &HybridOptions,
    stop: Option<&Section>,
    watches: &[Watch],
) -> Result<(HybridOrbit, bool)> {
    for (k, d) in system.discs.iter().enumerate() {
        if d.disc.contains(z0) {
            return Err(Error::Precondition(format!(
                "initial point lies inside override disc {k}"
            )));
        }
    }
    if !(t_end >= 0.0) {
        return Err(Error::Precondition(
            "hybrid orbits run forward in time".into(),
        ));
    }
    let mut events = system.entry_events();
    let stop_index = events.len();
    if let Some(sec) = stop {
        events.push(sec.event(&*system.ham));
    }
    let watch_base = events.len();
    events.extend(watches.iter().map(|w| w.event(&*system.ham)));
    // steps must not jump across a disc or a period of a section
    let speed = hamiltonian_vector_field(&*system.ham, z0)
        .0
        .norm()
        .max(1e-12);
    let mut scale = f64::INFINITY;
    for d in &system.discs {
        scale = scale.min(d.disc.radius);
    }
    let watched = watches.iter().filter_map(|w| match w {
        Watch::Section(sec) => Some(sec),
        Watch::Disc(_) => None,
    });
    for sec in system
        .sections
        .iter()
        .map(|o| &o.section)
        .chain(stop)
        .chain(watched)
    {
        if let Some(w) = sec.spacing {
            scale = scale.min(w);
        }
    }
    for w in watches {
        if let Watch::Disc(d) = w {
            scale = scale.min(d.radius);
        }
    }
    let max_step = 0.25 * scale / speed;
    let mut stopped = false;
    let mut z = *z0;
    let mut rearm = if stop.is_some() { REARM_TIME } else { 0.0 };
    let mut t = 0.0;
    let mut log = Vec::new();
    let mut crossings = Vec::new();
    let mut trajectory: Option<Trajectory> = None;
    loop {
        let flow_opts = FlowOptions {
            tol: opts.tol,
            record: opts.record,
            min_event_time: rearm,
            max_step,
            ..Default::default()
        };
        let out = run_flow(&*system.ham, &z, t_end - t, &flow_opts, &events)?;
        if let Some(mut piece) = out.trajectory {
            piece.times.iter_mut().for_each(|x| *x += t);
            match trajectory.as_mut() {
                Some(tr) => tr.extend_with(&piece),
                None => trajectory = Some(piece),
            }
        }
        for h in out.hits.iter().filter(|h| h.index >= watch_base) {
            let watch = h.index - watch_base;
            if let Some(coords) = watches[watch].coordinates(&*system.ham, &h.z) {
                crossings.push(Crossing {
                    watch,
                    t: t + h.t,
                    z: h.z,
                    coords,
                });
            }
        }
        t += out.t;
        z = out.end;
        let Some(k) = out.stopped_by else { break };
        if k == stop_index {
            if stop.is_some_and(|sec| sec.accepts(&*system.ham, &z)) {
                stopped = true;
                break;
            }
            rearm = REARM_TIME;
            continue;
        }
        if k >= system.discs.len()
            && !system.sections[k - system.discs.len()]
                .section
                .accepts(&*system.ham, &z)
        {
            rearm = REARM_TIME;
            continue;
        }
        let overrides = system.discs.len() + system.sections.len();
        if out
            .hits
            .iter()
            .filter(|h| (h.t - out.t).abs() < 1e-12 && h.index != k && h.index < overrides)
            .count()
            > 0
        {
            return Err(Error::Numeric(format!(
                "simultaneous override events at t = {t}"
            )));
        }
        if log.len() >= opts.max_transitions {
            return Err(Error::Numeric("transition budget exhausted".into()));
        }
        if k < system.discs.len() {
            let (exit, transit, mut tr) = system.pass_disc(k, &z)?;
            tr.time = t;
            log.push(tr);
            if t + transit > t_end {
                // the replaced passage is not resolved in time; stop at the entry
                break;
            }
            t += transit;
            z = exit;
        } else {
            let (next, mut tr) = system.pass_section(k - system.discs.len(), &z)?;
            tr.time = t;
            log.push(tr);
            z = next;
        }
        rearm = REARM_TIME;
        if t >= t_end {
            break;
        }
    }
    Ok((
        HybridOrbit {
            end: z,
            t,
            log,
            crossings,
            trajectory,
        },
        stopped,
    ))
}

/// Largest difference between `replacement` and the exact lens map on a circle of
/// radius `radius` about `center` in `(s, t)` coordinates.
pub fn agreement_defect(replacement: &dyn TransitionMap, center: Vec2, radius: f64) -> Result<f64> {
    let exact = ExactLens::new(replacement.disc().clone());
    let disc = replacement.disc();
    let mut worst = 0.0f64;
    for k in 0..16 {
        let a = std::f64::consts::TAU * k as f64 / 16.0;
        let z = center + Vec2::new(a.cos(), a.sin()) * radius;
        let (s0, t0) = exact.apply(disc.wrap_s(z.x), z.y)?;
        let (s1, t1) = replacement.apply(disc.wrap_s(z.x), z.y)?;
        worst = worst.max(Vec2::new(disc.s_offset(s1, s0), t1 - t0).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::phase::{integrate_flow, GeodesicHamiltonian};

    fn torus_ham() -> Arc<dyn Hamiltonian> {
        Arc::new(GeodesicHamiltonian::new(FinslerMetric::flat_torus()))
    }

    #[test]
    fn empty_system_matches_plain_flow() {
        let sys = HybridSystem::new(torus_ham());
        let z0 = PhasePoint::new(Vec2::new(0.1, 0.2), Vec2::new(0.6, 0.8));
        let h = hybrid_orbit(&sys, &z0, 5.0, &HybridOptions::default()).unwrap();
        let plain = integrate_flow(&*sys.ham, &z0, 5.0, 1e-11).unwrap();
        let (_, zp) = plain.last().unwrap();
        assert!((h.end.q - zp.q).norm() < 1e-10 && h.log.is_empty());
    }

    #[test]
    fn exact_override_reproduces_the_flow_and_logs_deterministically() {
        let metric = FinslerMetric::flat_torus();
        let disc = SimpleDisc::certified(&metric, 0, Vec2::new(0.5, 0.5), 0.2).unwrap();
        let mut sys = HybridSystem::new(torus_ham());
        sys.add_disc(Arc::new(ExactLens::new(disc))).unwrap();
        let z0 = PhasePoint::new(Vec2::new(0.05, 0.1), Vec2::new(0.8, 0.6));
        let a = hybrid_orbit(&sys, &z0, 6.0, &HybridOptions::default()).unwrap();
        let plain = integrate_flow(&*sys.ham, &z0, a.t, 1e-11).unwrap();
        assert!(!a.log.is_empty());
        assert!((a.end.q - plain.last().unwrap().1.q).norm() < 1e-8);
        assert!((a.end.p - z0.p).norm() < 1e-8);
        let b = hybrid_orbit(&sys, &z0, 6.0, &HybridOptions::default()).unwrap();
        let (mut la, mut lb) = (Vec::new(), Vec::new());
        a.write_log(&mut la).unwrap();
        b.write_log(&mut lb).unwrap();
        assert_eq!(la, lb);
    }

    #[test]
    fn overlapping_discs_are_rejected() {
        let metric = FinslerMetric::flat_torus();
        let mut sys = HybridSystem::new(torus_ham());
        sys.add_disc(Arc::new(ExactLens::new(
            SimpleDisc::certified(&metric, 0, Vec2::new(0.5, 0.5), 0.2).unwrap(),
        )))
        .unwrap();
        let second =
            ExactLens::new(SimpleDisc::certified(&metric, 0, Vec2::new(0.7, 0.5), 0.2).unwrap());
        assert!(sys.add_disc(Arc::new(second)).is_err());
    }
}

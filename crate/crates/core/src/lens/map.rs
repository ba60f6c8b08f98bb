//! Dual lens maps and maps between inward and outward boundary covectors.

use super::disc::{BoundaryCovector, Direction, SimpleDisc, GRAZING_SIN, LENS_TOL};
use crate::error::{Error, Result};
use crate::phase::flow::{run_flow, Event, EventDirection, FlowOptions};
use crate::phase::{GeodesicHamiltonian, PhasePoint};
use crate::{Mat2, Vec2};
use std::f64::consts::PI;
use std::sync::Arc;

/// A map from inward to outward boundary covectors of a disc, in `(s, t)` coordinates.
pub trait TransitionMap: Send + Sync {
    fn disc(&self) -> &SimpleDisc;

    /// Image of the inward covector `(s, t)`.
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)>;

    /// Preimage of the outward covector `(s, t)`; by default a Newton solve in
    /// `(s, chi)` seeded from the chord geometry.
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let disc = self.disc();
        let l = disc.boundary_length();
        let chi_out = disc.angle_from_t(s, t, Direction::Outward)?;
        let mut x = Vec2::new(s - chi_out * l / PI, chi_out);
        let residual = |x: &Vec2| -> Result<Vec2> {
            let t_in = disc.t_from_angle(x.x, x.y, Direction::Inward);
            let (so, to) = self.apply(disc.wrap_s(x.x), t_in)?;
            Ok(Vec2::new(disc.s_offset(so, s), to - t))
        };
        for _ in 0..50 {
            let r = residual(&x)?;
            if r.norm() < 1e-13 * (1.0 + l) {
                let t_in = disc.t_from_angle(x.x, x.y, Direction::Inward);
                return Ok((disc.wrap_s(x.x), t_in));
            }
            let h = 1e-7;
            let mut j = Mat2::zeros();
            for k in 0..2 {
                let mut e = Vec2::zeros();
                e[k] = h;
                let d = (residual(&(x + e))? - residual(&(x - e))?) / (2.0 * h);
                j.set_column(k, &d);
            }
            let step = j
                .try_inverse()
                .ok_or_else(|| Error::Numeric("singular Jacobian in map inversion".into()))?
                * r;
            x -= step;
            x.y = x.y.clamp(1e-9, PI - 1e-9);
        }
        Err(Error::Numeric(format!(
            "inversion of {} at ({s}, {t}) did not converge",
            self.name()
        )))
    }

    fn name(&self) -> String;
}

/// The true dual lens map, by geodesic integration.
#[derive(Debug, Clone)]
pub struct ExactLens {
    pub disc: SimpleDisc,
    ham: GeodesicHamiltonian,
}

impl ExactLens {
    pub fn new(disc: SimpleDisc) -> Self {
        let ham = disc.hamiltonian();
        ExactLens { disc, ham }
    }

    pub fn hamiltonian(&self) -> &GeodesicHamiltonian {
        &self.ham
    }

    /// Trace the chord of an inward covector.
    pub fn chord(&self, s: f64, t: f64) -> Result<super::disc::Chord> {
        let p = self.disc.covector(s, t, Direction::Inward)?;
        super::disc::trace(&self.disc, &self.ham, s, &p)
    }

    /// Trace backwards from an outward covector to its entry point.
    pub fn back_chord(&self, s: f64, t: f64) -> Result<BoundaryCovector> {
        let disc = &self.disc;
        let p = disc.covector(s, t, Direction::Outward)?;
        let q0 = disc.point(s);
        let d = disc.metric.randers_at(disc.chart, &q0);
        let (_, v, _) = d.dual_with_grad(&p);
        let speed = v.norm();
        let outward = v.dot(&disc.normal(s)) / speed;
        if !(outward > 0.0) {
            return Err(Error::Tangency(format!(
                "covector at s = {s} is not strictly outward"
            )));
        }
        let c = disc.center;
        let r2 = disc.radius * disc.radius;
        let ev = Event::new(
            move |z: &PhasePoint| (z.q - c).norm_squared() - r2,
            EventDirection::Rising,
            true,
        );
        let opts = FlowOptions {
            tol: LENS_TOL,
            max_step: (0.5 * disc.radius * outward).max(1e-9 * disc.radius) / speed,
            ..Default::default()
        };
        let cap = 50.0 * disc.radius / speed + 10.0;
        let out = run_flow(
            &self.ham,
            &PhasePoint::in_chart(disc.chart, q0, p),
            -cap,
            &opts,
            &[ev],
        )?;
        if out.stopped_by.is_none() {
            return Err(Error::Numeric(format!(
                "backward geodesic from s = {s} stayed in the disc"
            )));
        }
        let z = out.end;
        let s_in = disc.s_of(&z.q);
        let (_, vi, _) = disc
            .metric
            .randers_at(disc.chart, &z.q)
            .dual_with_grad(&z.p);
        if -vi.dot(&disc.normal(s_in)) / vi.norm() < GRAZING_SIN {
            return Err(Error::Tangency(format!("grazing entry at s = {s_in}")));
        }
        Ok(BoundaryCovector {
            s: s_in,
            t: z.p.dot(&disc.tangent(s_in)),
            direction: Direction::Inward,
            p: z.p,
        })
    }
}

impl TransitionMap for ExactLens {
    fn disc(&self) -> &SimpleDisc {
        &self.disc
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let ch = self.chord(self.disc.wrap_s(s), t)?;
        Ok((ch.exit.s, ch.exit.t))
    }
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let b = self.back_chord(self.disc.wrap_s(s), t)?;
        Ok((b.s, b.t))
    }
    fn name(&self) -> String {
        "exact-lens".into()
    }
}

/// The dual lens map of a certified disc applied to an inward boundary covector.
pub fn lens_map(disc: &SimpleDisc, alpha_in: &BoundaryCovector) -> Result<BoundaryCovector> {
    if !disc.is_certified() {
        return Err(Error::Precondition(
            "lens_map needs a certified disc".into(),
        ));
    }
    if alpha_in.direction != Direction::Inward {
        return Err(Error::Precondition(
            "lens_map needs an inward covector".into(),
        ));
    }
    let (lo, hi) = disc.t_range(alpha_in.s);
    if !(alpha_in.t > lo && alpha_in.t < hi) {
        return Err(Error::Precondition(format!(
            "t = {} not strictly inside ({lo}, {hi})",
            alpha_in.t
        )));
    }
    let ham = disc.hamiltonian();
    Ok(super::disc::trace(disc, &ham, alpha_in.s, &alpha_in.p)?.exit)
}

/// An area-preserving (or deliberately not) map of the `(s, t)` plane.
pub trait PlanarMap: Send + Sync {
    fn forward(&self, z: Vec2) -> Vec2;
    /// `forward` for maps whose evaluation can fail.
    fn try_forward(&self, z: Vec2) -> Result<Vec2> {
        Ok(self.forward(z))
    }
    fn inverse(&self, z: Vec2) -> Result<Vec2>;
    /// Point near which the map acts; `s` is unwrapped relative to it before applying.
    fn anchor(&self) -> Vec2 {
        Vec2::zeros()
    }
    fn name(&self) -> String;
}

/// `(s, t) -> (s, t + shift)`.
#[derive(Debug, Clone, Copy)]
pub struct Shear {
    pub shift: f64,
}

impl PlanarMap for Shear {
    fn forward(&self, z: Vec2) -> Vec2 {
        Vec2::new(z.x, z.y + self.shift)
    }
    fn inverse(&self, z: Vec2) -> Result<Vec2> {
        Ok(Vec2::new(z.x, z.y - self.shift))
    }
    fn name(&self) -> String {
        format!("shear({})", self.shift)
    }
}

/// `(s, t) -> (s, factor t)`.
#[derive(Debug, Clone, Copy)]
pub struct Scale {
    pub factor: f64,
}

impl PlanarMap for Scale {
    fn forward(&self, z: Vec2) -> Vec2 {
        Vec2::new(z.x, z.y * self.factor)
    }
    fn inverse(&self, z: Vec2) -> Result<Vec2> {
        Ok(Vec2::new(z.x, z.y / self.factor))
    }
    fn name(&self) -> String {
        format!("scale({})", self.factor)
    }
}

fn apply_planar(
    disc: &SimpleDisc,
    m: &dyn PlanarMap,
    s: f64,
    t: f64,
    inverse: bool,
) -> Result<(f64, f64)> {
    let a = m.anchor();
    let z = Vec2::new(a.x + disc.s_offset(s, a.x), t);
    let w = if inverse {
        m.inverse(z)?
    } else {
        m.try_forward(z)?
    };
    Ok((disc.wrap_s(w.x), w.y))
}

/// `sigma o psi^-1`.
#[derive(Clone)]
pub struct Precomposed {
    pub sigma: Arc<dyn TransitionMap>,
    pub psi: Arc<dyn PlanarMap>,
}

impl TransitionMap for Precomposed {
    fn disc(&self) -> &SimpleDisc {
        self.sigma.disc()
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (s1, t1) = apply_planar(self.disc(), &*self.psi, s, t, true)?;
        self.sigma.apply(s1, t1)
    }
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (s1, t1) = self.sigma.invert(s, t)?;
        apply_planar(self.disc(), &*self.psi, s1, t1, false)
    }
    fn name(&self) -> String {
        format!("{} o {}^-1", self.sigma.name(), self.psi.name())
    }
}

/// `psi o sigma`.
#[derive(Clone)]
pub struct Postcomposed {
    pub sigma: Arc<dyn TransitionMap>,
    pub psi: Arc<dyn PlanarMap>,
}

impl TransitionMap for Postcomposed {
    fn disc(&self) -> &SimpleDisc {
        self.sigma.disc()
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (s1, t1) = self.sigma.apply(s, t)?;
        apply_planar(self.disc(), &*self.psi, s1, t1, false)
    }
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (s1, t1) = apply_planar(self.disc(), &*self.psi, s, t, true)?;
        self.sigma.invert(s1, t1)
    }
    fn name(&self) -> String {
        format!("{} o {}", self.psi.name(), self.sigma.name())
    }
}

/// Closed-form chord map of a Euclidean disc: `s_out = s + 2 r chi`, `t_out = t = cos chi`.
pub fn euclidean_chord(disc: &SimpleDisc, s: f64, t: f64) -> (f64, f64) {
    let chi = t.clamp(-1.0, 1.0).acos();
    (disc.wrap_s(s + 2.0 * disc.radius * chi), t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;

    fn unit_disc() -> SimpleDisc {
        SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap()
    }

    #[test]
    fn euclidean_lens_matches_chord_formula() {
        let disc = unit_disc();
        for k in 0..40 {
            let s = disc.boundary_length() * (k as f64 + 0.3) / 40.0;
            for t in [-0.95, -0.5, 0.0, 0.2, 0.77, 0.99] {
                let a = disc.boundary_covector(s, t, Direction::Inward).unwrap();
                let b = lens_map(&disc, &a).unwrap();
                let (so, to) = euclidean_chord(&disc, s, t);
                assert!(disc.s_offset(b.s, so).abs() < 1e-9, "s {s} t {t}");
                assert!((b.t - to).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn chord_through_angle_psi() {
        // entering at boundary angle pi towards angle psi: t = -sin(psi/2) at both ends
        let disc = unit_disc();
        for psi in [-2.5, -1.0, 0.3, 1.7, 3.0] {
            let t = -(psi / 2.0f64).sin();
            let b = lens_map(
                &disc,
                &disc.boundary_covector(PI, t, Direction::Inward).unwrap(),
            )
            .unwrap();
            assert!(disc.s_offset(b.s, psi).abs() < 1e-9);
            assert!((b.t - t).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_inverse_undoes_lens() {
        let m = FinslerMetric::katok(0.3).unwrap();
        let disc = SimpleDisc::certified(&m, 0, Vec2::new(0.1, 0.2), 0.3).unwrap();
        let lens = ExactLens::new(disc.clone());
        for (s, f) in [(0.1, 0.3), (1.0, 0.5), (1.7, 0.8)] {
            let (lo, hi) = disc.t_range(s);
            let t = lo + f * (hi - lo);
            let (so, to) = lens.apply(s, t).unwrap();
            let (si, ti) = lens.invert(so, to).unwrap();
            assert!(disc.s_offset(si, s).abs() < 1e-9 && (ti - t).abs() < 1e-9);
            // the generic Newton inversion agrees
            let generic = Precomposed {
                sigma: Arc::new(lens.clone()),
                psi: Arc::new(Shear { shift: 0.0 }),
            };
            let (sg, tg) = TransitionMap::invert(&GenericInverse(&generic), so, to).unwrap();
            assert!(disc.s_offset(sg, s).abs() < 1e-8 && (tg - t).abs() < 1e-8);
        }
    }

    struct GenericInverse<'a>(&'a Precomposed);
    impl TransitionMap for GenericInverse<'_> {
        fn disc(&self) -> &SimpleDisc {
            self.0.disc()
        }
        fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
            self.0.apply(s, t)
        }
        fn name(&self) -> String {
            "generic".into()
        }
    }

    #[test]
    fn uncertified_disc_is_rejected() {
        let disc =
            SimpleDisc::candidate(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap();
        let a = disc.boundary_covector(0.0, 0.0, Direction::Inward).unwrap();
        assert!(matches!(lens_map(&disc, &a), Err(Error::Precondition(_))));
    }
}

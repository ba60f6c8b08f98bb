//! Chart-round discs, boundary coordinates `(s, t)`, and simplicity certification.
//!
//! The boundary of a disc of chart radius `r` is parametrized by chart arc length
//! `s = r theta`, with unit tangent `T = (-sin theta, cos theta)` and outward
//! normal `N = (cos theta, sin theta)`. A boundary covector is recorded by `s`
//! and its tangential component `t = p(T)`; its normal component is recovered
//! from the unit condition, the smaller root for inward covectors and the larger
//! one for outward covectors.

use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, SurfacePatch};
use crate::phase::distance::distance_report;
use crate::phase::flow::{run_flow, Event, EventDirection, FlowOptions};
use crate::phase::{GeodesicHamiltonian, PhasePoint};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Per-step tolerance for lens-map integration.
pub const LENS_TOL: f64 = 1e-12;
/// Exits with `sin(angle to the boundary)` below this are reported as grazing.
pub const GRAZING_SIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Inward,
    Outward,
}

/// A unit covector based on the disc boundary, in boundary coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCovector {
    pub s: f64,
    pub t: f64,
    pub direction: Direction,
    /// The full covector at the boundary point, in the disc chart.
    pub p: Vec2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub passed: bool,
    /// Worst value of the condition's diagnostic.
    pub worst: f64,
    pub witness: Option<String>,
}

impl ConditionResult {
    fn pass(worst: f64) -> Self {
        ConditionResult {
            passed: true,
            worst,
            witness: None,
        }
    }
}

/// Outcome of [`check_simple`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationRecord {
    /// Unique connecting geodesic for sampled boundary pairs.
    pub uniqueness: ConditionResult,
    /// Endpoint map well conditioned: smallest normalized slope of the exit point
    /// in the launch angle, with the ratio of largest to smallest slope.
    pub smooth_dependence: ConditionResult,
    pub condition_number: f64,
    /// Strict convexity: tangent geodesics leave the disc and chords stay interior.
    pub convexity: ConditionResult,
    pub passed: bool,
}

/// A disc that is round in a chart, with its certification if performed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleDisc {
    pub metric: FinslerMetric,
    pub chart: u8,
    pub center: Vec2,
    pub radius: f64,
    pub certification: Option<CertificationRecord>,
}

impl SimpleDisc {
    /// An uncertified candidate disc.
    pub fn candidate(metric: &FinslerMetric, chart: u8, center: Vec2, radius: f64) -> Result<Self> {
        metric.surface.check_point(chart, &center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Precondition(format!(
                "disc radius must be > 0, got {radius}"
            )));
        }
        match metric.surface {
            SurfacePatch::SphereTwoCharts { radius: big } => {
                if center.norm() + radius >= crate::geometry::surface::SPHERE_RECHART_FACTOR * big {
                    return Err(Error::Domain(
                        "disc leaves the chart switching region".into(),
                    ));
                }
            }
            SurfacePatch::PlaneDisc { radius: Some(big) } if center.norm() + radius > big => {
                return Err(Error::Domain("disc leaves the chart domain".into()));
            }
            SurfacePatch::FlatTorus { periods } if 2.0 * radius >= periods[0].min(periods[1]) => {
                return Err(Error::Domain("disc overlaps itself on the torus".into()));
            }
            _ => {}
        }
        Ok(SimpleDisc {
            metric: metric.clone(),
            chart,
            center,
            radius,
            certification: None,
        })
    }

    /// A disc certified by [`check_simple`]; fails if any condition fails.
    pub fn certified(metric: &FinslerMetric, chart: u8, center: Vec2, radius: f64) -> Result<Self> {
        let mut d = Self::candidate(metric, chart, center, radius)?;
        let rec = check_simple(&d);
        if !rec.passed {
            return Err(Error::Certification(format!(
                "disc of radius {radius} at {center:?}: {rec:?}"
            )));
        }
        d.certification = Some(rec);
        Ok(d)
    }

    pub fn is_certified(&self) -> bool {
        self.certification.as_ref().is_some_and(|c| c.passed)
    }

    /// Total boundary length `2 pi r` (chart arc length).
    pub fn boundary_length(&self) -> f64 {
        TAU * self.radius
    }

    pub fn wrap_s(&self, s: f64) -> f64 {
        let l = self.boundary_length();
        let w = s.rem_euclid(l);
        if w >= l {
            0.0
        } else {
            w
        }
    }

    /// Signed boundary offset of `s` from `s0`, in `[-L/2, L/2)`.
    pub fn s_offset(&self, s: f64, s0: f64) -> f64 {
        let l = self.boundary_length();
        (s - s0 + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    pub fn point(&self, s: f64) -> Vec2 {
        let th = s / self.radius;
        self.center + Vec2::new(th.cos(), th.sin()) * self.radius
    }

    pub fn tangent(&self, s: f64) -> Vec2 {
        let th = s / self.radius;
        Vec2::new(-th.sin(), th.cos())
    }

    pub fn normal(&self, s: f64) -> Vec2 {
        let th = s / self.radius;
        Vec2::new(th.cos(), th.sin())
    }

    /// Boundary coordinate of a chart point (its angle about the centre).
    pub fn s_of(&self, q: &Vec2) -> f64 {
        let d = self.metric.surface.min_image(&(q - self.center));
        self.wrap_s(d.y.atan2(d.x).rem_euclid(TAU) * self.radius)
    }

    /// Chart point in the disc's coordinate image (handles torus unwrapping and sphere charts).
    pub fn local(&self, z: &PhasePoint) -> PhasePoint {
        let z = z.to_chart(&self.metric.surface, self.chart);
        let d = self.metric.surface.min_image(&(z.q - self.center));
        PhasePoint {
            q: self.center + d,
            ..z
        }
    }

    /// Whether a chart point lies in the open disc.
    pub fn contains(&self, z: &PhasePoint) -> bool {
        (self.local(z).q - self.center).norm() < self.radius
    }

    /// Admissible open interval `(-phi(-T), phi(T))` of tangential components at `s`.
    pub fn t_range(&self, s: f64) -> (f64, f64) {
        let d = self.metric.randers_at(self.chart, &self.point(s));
        let t = self.tangent(s);
        (-d.norm(&-t), d.norm(&t))
    }

    /// The unit covector at `s` with tangential component `t`.
    pub fn covector(&self, s: f64, t: f64, dir: Direction) -> Result<Vec2> {
        let x = self.point(s);
        let d = self.metric.randers_at(self.chart, &x);
        let tv = self.tangent(s);
        let nv = self.normal(s);
        let (lo, hi) = self.t_range(s);
        if !(t > lo && t < hi) {
            return Err(Error::Domain(format!(
                "t = {t} outside ({lo}, {hi}) at s = {s}"
            )));
        }
        // phi*(tT + nN) = 1 is a quadratic in n for Randers duals
        let m = d.a - d.b * d.b.transpose();
        let g = m
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular dual form".into()))?;
        let u = g * d.b;
        let kappa = 1.0 + d.b.dot(&u);
        let tu = 1.0 + t * tv.dot(&u);
        let nu = nv.dot(&u);
        let a = kappa * nv.dot(&(g * nv)) - nu * nu;
        let b = 2.0 * kappa * t * tv.dot(&(g * nv)) - 2.0 * tu * nu;
        let c = kappa * t * t * tv.dot(&(g * tv)) - tu * tu;
        let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
        let (r1, r2) = if b >= 0.0 {
            let qq = -0.5 * (b + disc);
            (qq / a, c / qq)
        } else {
            let qq = -0.5 * (b - disc);
            (c / qq, qq / a)
        };
        let (small, large) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let mut n = match dir {
            Direction::Inward => small,
            Direction::Outward => large,
        };
        for _ in 0..3 {
            let p = tv * t + nv * n;
            let (val, gp, _) = d.dual_with_grad(&p);
            let slope = gp.dot(&nv);
            if slope == 0.0 {
                break;
            }
            n -= (val - 1.0) / slope;
        }
        Ok(tv * t + nv * n)
    }

    pub fn boundary_covector(&self, s: f64, t: f64, dir: Direction) -> Result<BoundaryCovector> {
        let s = self.wrap_s(s);
        Ok(BoundaryCovector {
            s,
            t,
            direction: dir,
            p: self.covector(s, t, dir)?,
        })
    }

    /// Boundary coordinates of a unit covector at a boundary point.
    pub fn coordinates(&self, q: &Vec2, p: &Vec2, dir: Direction) -> BoundaryCovector {
        let s = self.s_of(q);
        BoundaryCovector {
            s,
            t: p.dot(&self.tangent(s)),
            direction: dir,
            p: *p,
        }
    }

    /// Chart angle `chi` in `(0, pi)` of the velocity of a boundary covector:
    /// `v ~ cos(chi) T - sin(chi) N` inward, `cos(chi) T + sin(chi) N` outward.
    pub fn angle_of(&self, s: f64, p: &Vec2, dir: Direction) -> f64 {
        let d = self.metric.randers_at(self.chart, &self.point(s));
        let (_, v, _) = d.dual_with_grad(p);
        let along = v.dot(&self.tangent(s));
        let across = v.dot(&self.normal(s));
        match dir {
            Direction::Inward => (-across).atan2(along),
            Direction::Outward => across.atan2(along),
        }
    }

    /// Unit covector whose velocity makes chart angle `chi` with the tangent.
    pub fn covector_from_angle(&self, s: f64, chi: f64, dir: Direction) -> Vec2 {
        let d = self.metric.randers_at(self.chart, &self.point(s));
        let sign = match dir {
            Direction::Inward => -1.0,
            Direction::Outward => 1.0,
        };
        let u = self.tangent(s) * chi.cos() + self.normal(s) * (sign * chi.sin());
        d.legendre(&(u / d.norm(&u)))
    }

    pub fn t_from_angle(&self, s: f64, chi: f64, dir: Direction) -> f64 {
        self.covector_from_angle(s, chi, dir).dot(&self.tangent(s))
    }

    pub fn angle_from_t(&self, s: f64, t: f64, dir: Direction) -> Result<f64> {
        Ok(self.angle_of(s, &self.covector(s, t, dir)?, dir))
    }

    /// Unit geodesic Hamiltonian of the disc metric.
    pub fn hamiltonian(&self) -> GeodesicHamiltonian {
        GeodesicHamiltonian::new(self.metric.clone())
    }
}

/// One traced chord of the disc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chord {
    pub exit: BoundaryCovector,
    /// Geodesic length (the flow time of the unit-speed geodesic).
    pub length: f64,
    /// Sine of the exit angle against the boundary.
    pub exit_sine: f64,
}

/// Follow the geodesic of an inward boundary covector to its first exit.
pub fn trace(disc: &SimpleDisc, ham: &GeodesicHamiltonian, s: f64, p: &Vec2) -> Result<Chord> {
    let q0 = disc.point(s);
    let z0 = PhasePoint::in_chart(disc.chart, q0, *p);
    let d = disc.metric.randers_at(disc.chart, &q0);
    let (_, v, _) = d.dual_with_grad(p);
    let speed = v.norm();
    let inward = -v.dot(&disc.normal(s)) / speed;
    if !(inward > 0.0) {
        return Err(Error::Tangency(format!(
            "covector at s = {s} is not strictly inward"
        )));
    }
    let chord = 2.0 * disc.radius * inward;
    let c = disc.center;
    let r2 = disc.radius * disc.radius;
    let surface = disc.metric.surface;
    let chart = disc.chart;
    let exit = Event::new(
        move |z: &PhasePoint| {
            let q = if z.chart == chart {
                z.q
            } else {
                surface.transition(&z.q)
            };
            (q - c).norm_squared() - r2
        },
        EventDirection::Rising,
        true,
    );
    let opts = FlowOptions {
        tol: LENS_TOL,
        max_step: (0.25 * chord).max(1e-9 * disc.radius) / speed,
        min_event_time: 0.0,
        ..Default::default()
    };
    let cap = 50.0 * disc.radius / speed + 10.0;
    let out = run_flow(ham, &z0, cap, &opts, &[exit])?;
    if out.stopped_by.is_none() {
        return Err(Error::Numeric(format!(
            "geodesic from s = {s} did not leave the disc by t = {cap}"
        )));
    }
    let z = out.end.to_chart(&surface, chart);
    let s_out = disc.s_of(&z.q);
    let (_, vo, _) = disc.metric.randers_at(chart, &z.q).dual_with_grad(&z.p);
    let exit_sine = vo.dot(&disc.normal(s_out)) / vo.norm();
    if exit_sine < GRAZING_SIN {
        return Err(Error::Tangency(format!(
            "grazing exit at s = {s_out} (sine {exit_sine:.2e})"
        )));
    }
    Ok(Chord {
        exit: BoundaryCovector {
            s: s_out,
            t: z.p.dot(&disc.tangent(s_out)),
            direction: Direction::Outward,
            p: z.p,
        },
        length: out.t,
        exit_sine,
    })
}

const CERT_POINTS: usize = 7;
const CERT_ANGLES: usize = 33;
const CERT_EDGE: f64 = 0.02;

/// Certify the three simplicity conditions on sampled boundary data.
pub fn check_simple(disc: &SimpleDisc) -> CertificationRecord {
    let ham = disc.hamiltonian();
    let l = disc.boundary_length();
    let mut convexity = ConditionResult::pass(f64::INFINITY);
    let mut uniqueness = ConditionResult::pass(0.0);
    let mut min_slope = f64::INFINITY;
    let mut max_slope: f64 = 0.0;
    let mut slope_witness = None;
    let fail = |c: &mut ConditionResult, worst: f64, w: String| {
        if c.passed || worst < c.worst {
            c.worst = worst;
        }
        if c.passed {
            c.witness = Some(w);
        }
        c.passed = false;
    };
    for i in 0..CERT_POINTS {
        let s = l * i as f64 / CERT_POINTS as f64;
        // tangent geodesics must bend out of the disc
        for sign in [1.0, -1.0] {
            let tv = disc.tangent(s) * sign;
            let d = disc.metric.randers_at(disc.chart, &disc.point(s));
            let p = d.legendre(&(tv / d.norm(&tv)));
            let tau = 0.05 * disc.radius * d.norm(&tv);
            let z0 = PhasePoint::in_chart(disc.chart, disc.point(s), p);
            match run_flow(&ham, &z0, tau, &FlowOptions::with_tol(LENS_TOL), &[]) {
                Ok(out) => {
                    let q = disc.local(&out.end).q;
                    let margin = ((q - disc.center).norm() - disc.radius) / (tau * tau);
                    if margin <= 0.0 {
                        fail(
                            &mut convexity,
                            margin,
                            format!("tangent geodesic at s = {s:.6} (sign {sign}) enters the disc"),
                        );
                    } else if convexity.passed {
                        convexity.worst = convexity.worst.min(margin);
                    }
                }
                Err(e) => fail(&mut convexity, f64::NEG_INFINITY, e.to_string()),
            }
        }
        // sweep of launch angles: exit offset must increase from 0 to L
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..CERT_ANGLES {
            let chi = CERT_EDGE + (PI - 2.0 * CERT_EDGE) * j as f64 / (CERT_ANGLES - 1) as f64;
            let p = disc.covector_from_angle(s, chi, Direction::Inward);
            let delta = match trace(disc, &ham, s, &p) {
                Ok(ch) => (ch.exit.s - s).rem_euclid(l),
                Err(e) => {
                    fail(
                        &mut convexity,
                        f64::NEG_INFINITY,
                        format!("chord from s = {s:.6}, chi = {chi:.4}: {e}"),
                    );
                    prev = None;
                    continue;
                }
            };
            if j == 0 && delta > 0.05 * l {
                fail(
                    &mut convexity,
                    -delta / l,
                    format!("near-tangent chord at s = {s:.6} exits {delta:.4} away"),
                );
            }
            if j == CERT_ANGLES - 1 && delta < 0.95 * l {
                fail(
                    &mut convexity,
                    -(l - delta) / l,
                    format!("near-tangent chord at s = {s:.6} exits {delta:.4} away"),
                );
            }
            if let Some((c0, d0)) = prev {
                let slope = (delta - d0) / (chi - c0) / (l / PI);
                if slope < min_slope {
                    min_slope = slope;
                    slope_witness = Some(format!("s = {s:.6}, chi = {chi:.4}"));
                }
                max_slope = max_slope.max(slope);
                if slope <= 0.0 {
                    fail(
                        &mut uniqueness,
                        slope,
                        format!("exit offset not monotone at s = {s:.6}, chi = {chi:.4}"),
                    );
                }
            }
            prev = Some((chi, delta));
        }
    }
    // on the torus a shorter or equally short geodesic may run outside the disc
    if matches!(disc.metric.surface, SurfacePatch::FlatTorus { .. }) && uniqueness.passed {
        let lens = super::map::ExactLens::new(disc.clone());
        'pairs: for i in 0..CERT_POINTS {
            for j in 0..CERT_POINTS {
                if i == j {
                    continue;
                }
                let sp = l * i as f64 / CERT_POINTS as f64;
                let sq = l * j as f64 / CERT_POINTS as f64;
                let connecting = super::pq::solve_angle(&lens, sp, sq).and_then(|(chi, _, _)| {
                    trace(
                        disc,
                        &ham,
                        sp,
                        &disc.covector_from_angle(sp, chi, Direction::Inward),
                    )
                });
                let inside = match connecting {
                    Ok(c) => c.length,
                    Err(e) => {
                        fail(&mut uniqueness, f64::NEG_INFINITY, e.to_string());
                        break 'pairs;
                    }
                };
                match distance_report(&disc.metric, disc.chart, &disc.point(sp), &disc.point(sq)) {
                    Ok(rep) => {
                        let competitors = rep
                            .solutions
                            .iter()
                            .filter(|s| s.1 <= inside + 1e-7)
                            .count();
                        if competitors > 1 || rep.length < inside - 1e-7 {
                            fail(
                                &mut uniqueness,
                                rep.length - inside,
                                format!("{competitors} geodesics from s = {sp:.4} to s = {sq:.4} no longer than the chord"),
                            );
                            break 'pairs;
                        }
                    }
                    Err(e) => {
                        fail(&mut uniqueness, f64::NEG_INFINITY, e.to_string());
                        break 'pairs;
                    }
                }
            }
        }
    }
    let smooth = if min_slope > 1e-3 && min_slope.is_finite() {
        ConditionResult::pass(min_slope)
    } else {
        ConditionResult {
            passed: false,
            worst: min_slope,
            witness: slope_witness,
        }
    };
    let passed = uniqueness.passed && smooth.passed && convexity.passed;
    CertificationRecord {
        uniqueness,
        smooth_dependence: smooth,
        condition_number: if min_slope > 0.0 {
            max_slope / min_slope
        } else {
            f64::INFINITY
        },
        convexity,
        passed,
    }
}

/// Outcome of [`simplicity_radius_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplicityEstimate {
    /// Largest certified radius times the safety factor.
    pub radius: f64,
    pub largest_passing: f64,
    /// The search bound itself passed.
    pub upper_bound_reached: bool,
}

pub const SIMPLICITY_SAFETY: f64 = 0.8;

fn search_bounds(metric: &FinslerMetric, x: &Vec2) -> (f64, f64) {
    match metric.surface {
        SurfacePatch::PlaneDisc { radius: None } => (1e-3, 10.0),
        SurfacePatch::PlaneDisc { radius: Some(r) } => (1e-3 * r, r - x.norm()),
        SurfacePatch::FlatTorus { periods } => {
            // chords longer than half a period compete with geodesics around the torus
            let m = periods[0].min(periods[1]);
            (1e-3 * m, 0.25 * m * (1.0 - 1e-9))
        }
        SurfacePatch::SphereTwoCharts { radius } => (
            1e-3 * radius,
            (crate::geometry::surface::SPHERE_RECHART_FACTOR * radius - x.norm()) * (1.0 - 1e-9),
        ),
    }
}

/// Bisection for the largest chart radius whose disc about `x` passes [`check_simple`].
pub fn simplicity_radius_report(
    metric: &FinslerMetric,
    chart: u8,
    x: &Vec2,
) -> Result<SimplicityEstimate> {
    metric.surface.check_point(chart, x)?;
    let (lo0, hi0) = search_bounds(metric, x);
    let passes = |r: f64| {
        SimpleDisc::candidate(metric, chart, *x, r)
            .map(|d| check_simple(&d).passed)
            .unwrap_or(false)
    };
    if passes(hi0) {
        return Ok(SimplicityEstimate {
            radius: SIMPLICITY_SAFETY * hi0,
            largest_passing: hi0,
            upper_bound_reached: true,
        });
    }
    if !passes(lo0) {
        return Err(Error::Certification(format!(
            "no simple disc about {x:?} with radius >= {lo0}"
        )));
    }
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if passes(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SimplicityEstimate {
        radius: SIMPLICITY_SAFETY * lo,
        largest_passing: lo,
        upper_bound_reached: false,
    })
}

/// Safe simple-disc radius at `x` (the largest certified radius times 0.8).
pub fn simplicity_radius(metric: &FinslerMetric, chart: u8, x: &Vec2) -> Result<f64> {
    Ok(simplicity_radius_report(metric, chart, x)?.radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covector_reconstruction_round_trips() {
        let m = FinslerMetric::katok(0.3).unwrap();
        let disc = SimpleDisc::candidate(&m, 0, Vec2::new(0.2, -0.1), 0.3).unwrap();
        for k in 0..10 {
            let s = disc.boundary_length() * k as f64 / 10.0;
            let (lo, hi) = disc.t_range(s);
            for f in [0.1, 0.5, 0.93] {
                let t = lo + f * (hi - lo);
                for dir in [Direction::Inward, Direction::Outward] {
                    let p = disc.covector(s, t, dir).unwrap();
                    assert!((m.dual(0, &disc.point(s), &p) - 1.0).abs() < 1e-13);
                    assert!((p.dot(&disc.tangent(s)) - t).abs() < 1e-13);
                    let chi = disc.angle_of(s, &p, dir);
                    assert!(chi > 0.0 && chi < PI);
                    assert!((disc.t_from_angle(s, chi, dir) - t).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn euclidean_diameter_chord() {
        let disc =
            SimpleDisc::candidate(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap();
        let s = PI; // the point (-1, 0)
        let p = disc.covector(s, 0.0, Direction::Inward).unwrap();
        let ch = trace(&disc, &disc.hamiltonian(), s, &p).unwrap();
        assert!((disc.point(ch.exit.s) - Vec2::new(1.0, 0.0)).norm() < 1e-10);
        assert!(ch.exit.t.abs() < 1e-10);
        assert!((ch.length - 2.0).abs() < 1e-10);
    }

    #[test]
    fn euclidean_unit_disc_is_simple() {
        let disc =
            SimpleDisc::candidate(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap();
        let rec = check_simple(&disc);
        assert!(rec.passed, "{rec:?}");
        assert!((rec.condition_number - 1.0).abs() < 1e-6);
    }

    #[test]
    fn oversized_spherical_cap_fails_convexity() {
        // chart radius tan(theta/2) gives a cap of angular radius theta about the chart origin
        let theta: f64 = PI / 2.0 + 0.1;
        let disc = SimpleDisc::candidate(
            &FinslerMetric::round_sphere(),
            0,
            Vec2::zeros(),
            (theta / 2.0).tan(),
        )
        .unwrap();
        let rec = check_simple(&disc);
        assert!(!rec.convexity.passed);
        assert!(rec.convexity.witness.is_some());
    }

    #[test]
    fn large_torus_disc_fails_uniqueness() {
        let disc =
            SimpleDisc::candidate(&FinslerMetric::flat_torus(), 0, Vec2::new(0.5, 0.5), 0.45)
                .unwrap();
        let rec = check_simple(&disc);
        assert!(rec.convexity.passed);
        assert!(!rec.uniqueness.passed, "{rec:?}");
    }
}

//! Geodesic distance by shooting, and forward/backward geodesic discs.

use super::flow::{brent, run_flow, Event, EventDirection, FlowOptions};
use super::hamiltonian::{GeodesicHamiltonian, Hamiltonian};
use super::{PhasePoint, UnitCovector};
use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, SurfacePatch};
use crate::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Shooting tolerance on the final miss distance.
const HIT_TOL: f64 = 1e-9;
/// Lengths within this of the minimum are reported as a near-tie.
const TIE_TOL: f64 = 1e-6;
const FLOW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub length: f64,
    /// Initial unit covector of the minimizing geodesic.
    pub initial: Option<PhasePoint>,
    /// Start angles tried (chart angle of the initial velocity).
    pub tried: Vec<f64>,
    /// `(angle, length)` of every converged connecting geodesic.
    pub solutions: Vec<(f64, f64)>,
    /// Another connecting geodesic has length within 1e-6 of the minimum.
    pub near_tie: bool,
}

/// Unit covector at `x` whose geodesic leaves in chart direction `theta`.
pub fn covector_towards(metric: &FinslerMetric, chart: u8, x: &Vec2, theta: f64) -> PhasePoint {
    let d = metric.randers_at(chart, x);
    let u = Vec2::new(theta.cos(), theta.sin());
    let v = u / d.norm(&u);
    PhasePoint::in_chart(chart, *x, d.legendre(&v))
}

/// Length of the straight chart segment from `x` to `y`.
fn segment_length(metric: &FinslerMetric, chart: u8, x: &Vec2, y: &Vec2) -> f64 {
    let d = y - x;
    let n = 32;
    (0..n)
        .map(|k| {
            let s = (k as f64 + 0.5) / n as f64;
            metric.randers_at(chart, &(x + d * s)).norm(&d)
        })
        .sum::<f64>()
        / n as f64
}

struct Shot {
    miss: f64,
    length: f64,
}

/// Fire a unit-speed geodesic and report the signed miss at its first closest approach to `target`.
fn shoot(
    ham: &GeodesicHamiltonian,
    chart: u8,
    x: &Vec2,
    target: &Vec2,
    theta: f64,
    cap: f64,
) -> Option<Shot> {
    let surface = ham.metric.surface;
    let z0 = covector_towards(&ham.metric, chart, x, theta);
    let target_other = if surface.chart_count() == 2 {
        surface.transition(target)
    } else {
        *target
    };
    let in_chart = |z: &PhasePoint| {
        if z.chart == chart {
            *target
        } else {
            target_other
        }
    };
    let metric = &ham.metric;
    let approach = Event::new(
        move |z: &PhasePoint| {
            let (_, gp, _) = metric.randers_at(z.chart, &z.q).dual_with_grad(&z.p);
            (z.q - in_chart(z)).dot(&gp)
        },
        EventDirection::Rising,
        true,
    );
    let opts = FlowOptions {
        tol: FLOW_TOL,
        min_event_time: 1e-12,
        ..Default::default()
    };
    let out = run_flow(ham, &z0, cap, &opts, &[approach]).ok()?;
    out.stopped_by?;
    let z = out.end;
    let (_, gp, _) = metric.randers_at(z.chart, &z.q).dual_with_grad(&z.p);
    let off = in_chart(&z) - z.q;
    let miss = (gp.x * off.y - gp.y * off.x) / gp.norm();
    Some(Shot {
        miss,
        length: out.t,
    })
}

/// Bracket the miss function around `theta0` and solve it with Brent's method.
fn solve_from(
    ham: &GeodesicHamiltonian,
    chart: u8,
    x: &Vec2,
    target: &Vec2,
    theta0: f64,
    cap: f64,
) -> Option<(f64, f64)> {
    let m = |th: f64| shoot(ham, chart, x, target, th, cap).map(|s| s.miss);
    let m0 = m(theta0)?;
    if m0.abs() < HIT_TOL * 1e-3 {
        return Some((theta0, shoot(ham, chart, x, target, theta0, cap)?.length));
    }
    let mut width = 0.01;
    let mut bracket = None;
    while width <= PI / 2.0 {
        for side in [1.0, -1.0] {
            let th = theta0 + side * width;
            if let Some(v) = m(th) {
                if v.signum() != m0.signum() {
                    bracket = Some(if side > 0.0 {
                        (theta0, th, m0, v)
                    } else {
                        (th, theta0, v, m0)
                    });
                    break;
                }
            }
        }
        if bracket.is_some() {
            break;
        }
        width *= 2.0;
    }
    let (a, b, fa, fb) = bracket?;
    let f = |th: f64| m(th).unwrap_or(f64::NAN);
    let th = brent(&f, a, b, fa, fb, 1e-14);
    let shot = shoot(ham, chart, x, target, th, cap)?;
    (shot.miss.abs() < HIT_TOL).then_some((th, shot.length))
}

/// Shooting distance with diagnostics.
pub fn distance_report(
    metric: &FinslerMetric,
    chart: u8,
    x: &Vec2,
    y: &Vec2,
) -> Result<DistanceReport> {
    metric.surface.check_point(chart, x)?;
    metric.surface.check_point(chart, y)?;
    if metric.surface.min_image(&(y - x)).norm() == 0.0 {
        return Ok(DistanceReport {
            length: 0.0,
            initial: None,
            tried: vec![],
            solutions: vec![],
            near_tie: false,
        });
    }
    let ham = GeodesicHamiltonian::new(metric.clone());
    // (start angle, lift of the target, time cap)
    let mut starts: Vec<(f64, Vec2, f64)> = Vec::new();
    match metric.surface {
        SurfacePatch::FlatTorus { periods } => {
            let base = x + metric.surface.min_image(&(y - x));
            let mut lifts = Vec::new();
            for i in -1..=1 {
                for j in -1..=1 {
                    let l = base + Vec2::new(i as f64 * periods[0], j as f64 * periods[1]);
                    lifts.push((segment_length(metric, chart, x, &l), l));
                }
            }
            lifts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (len, l) in &lifts {
                let d = l - x;
                starts.push((d.y.atan2(d.x), *l, 2.0 * len));
            }
            // remaining multistarts aimed at the nearest lift from evenly spaced angles
            let (len, l) = lifts[0];
            let d0 = (l - x).y.atan2((l - x).x);
            for k in 1..8 {
                starts.push((d0 + TAU * k as f64 / 8.0, l, 2.0 * len));
            }
            starts.truncate(16);
        }
        _ => {
            let len = segment_length(metric, chart, x, y);
            let d = y - x;
            let d0 = d.y.atan2(d.x);
            starts.push((d0, *y, 2.0 * len));
            for k in 1..16 {
                starts.push((d0 + TAU * k as f64 / 16.0, *y, 2.0 * len));
            }
        }
    }
    let mut tried = Vec::new();
    let mut solutions: Vec<(f64, f64)> = Vec::new();
    let flat_like = !matches!(metric.surface, SurfacePatch::FlatTorus { .. });
    for (k, (th, target, cap)) in starts.iter().enumerate() {
        tried.push(*th);
        if let Some(sol) = solve_from(&ham, chart, x, target, *th, *cap) {
            if !solutions
                .iter()
                .any(|s| angle_gap(s.0, sol.0) < 1e-7 && (s.1 - sol.1).abs() < 1e-7)
            {
                solutions.push(sol);
            }
        }
        // off the torus a converged first start is the connecting geodesic
        if flat_like && k == 0 && !solutions.is_empty() {
            break;
        }
    }
    if solutions.is_empty() {
        return Err(Error::Numeric(format!(
            "shooting did not converge; tried start angles {tried:?}"
        )));
    }
    solutions.sort_by(|a, b| a.1.total_cmp(&b.1));
    let best = solutions[0];
    let near_tie = solutions
        .iter()
        .skip(1)
        .any(|s| s.1 - best.1 < TIE_TOL && angle_gap(s.0, best.0) > 1e-7);
    Ok(DistanceReport {
        length: best.1,
        initial: Some(covector_towards(metric, chart, x, best.0)),
        tried,
        solutions,
        near_tie,
    })
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

/// `d(x, y)`: the length of the shortest connecting geodesic found by shooting.
pub fn distance(metric: &FinslerMetric, chart: u8, x: &Vec2, y: &Vec2) -> Result<f64> {
    Ok(distance_report(metric, chart, x, y)?.length)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscSign {
    /// `D+ = closure of B-(pi(g_r v), r)`.
    Forward,
    /// `D- = closure of B+(pi(g_-r v), r)`.
    Backward,
}

/// A forward or backward geodesic disc of a unit covector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicDisc {
    pub sign: DiscSign,
    /// Centre, in the chart of the base point of the covector.
    pub center: PhasePoint,
    pub radius: f64,
    pub base: Vec2,
}

impl GeodesicDisc {
    /// Membership through the quasimetric, with a small relative slack.
    pub fn contains(&self, metric: &FinslerMetric, w: &Vec2) -> Result<bool> {
        let c = self.center.q;
        let d = match self.sign {
            DiscSign::Forward => distance(metric, self.center.chart, w, &c)?,
            DiscSign::Backward => distance(metric, self.center.chart, &c, w)?,
        };
        Ok(d <= self.radius * (1.0 + 1e-9))
    }
}

/// `D±(v, r)` given an upper bound `rho` for admissible radii.
pub fn geodesic_disc_bounded(
    metric: &FinslerMetric,
    v: &UnitCovector,
    r: f64,
    sign: DiscSign,
    rho: f64,
) -> Result<GeodesicDisc> {
    if !(r > 0.0 && r <= rho) {
        return Err(Error::Precondition(format!(
            "disc radius {r} not in (0, {rho}]"
        )));
    }
    let ham = GeodesicHamiltonian::new(metric.clone());
    let t = match sign {
        DiscSign::Forward => r,
        DiscSign::Backward => -r,
    };
    let end = run_flow(&ham, &v.point, t, &FlowOptions::with_tol(FLOW_TOL), &[])?.end;
    let center = end.to_chart(&ham.surface(), v.point.chart);
    Ok(GeodesicDisc {
        sign,
        center,
        radius: r,
        base: v.point.q,
    })
}

/// `D±(v, r)`; `r` must not exceed the simplicity radius estimate at the base point.
pub fn geodesic_disc(
    metric: &FinslerMetric,
    v: &UnitCovector,
    r: f64,
    sign: DiscSign,
) -> Result<GeodesicDisc> {
    let rho = crate::lens::simplicity_radius(metric, v.point.chart, &v.point.q)?;
    geodesic_disc_bounded(metric, v, r, sign, rho)
}

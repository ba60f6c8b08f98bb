//! Numerical dual norm and Legendre transform by maximization over the unit circle.

use super::{PhasePoint, UnitCovector, UNIT_TOL};
use crate::error::{Error, Result};
use crate::geometry::{FinslerMetric, RandersData};
use crate::Vec2;
use std::f64::consts::TAU;

const STARTS: usize = 8;
const MAX_NEWTON: usize = 60;

/// `f(theta) = alpha(u) / phi(u)` for `u = (cos theta, sin theta)` and its first derivative.
fn objective(d: &RandersData, alpha: &Vec2, theta: f64) -> (f64, f64) {
    let u = Vec2::new(theta.cos(), theta.sin());
    let du = Vec2::new(-theta.sin(), theta.cos());
    let phi = d.norm(&u);
    let dphi = d.norm_grad(&u).dot(&du);
    let a = alpha.dot(&u);
    (a / phi, (alpha.dot(&du) * phi - a * dphi) / (phi * phi))
}

/// Angle of the maximizer of `alpha` over the unit circle, with the maximum.
fn maximize(d: &RandersData, alpha: &Vec2) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut diagnostics = Vec::new();
    for k in 0..STARTS {
        let mut theta = TAU * k as f64 / STARTS as f64;
        let mut converged = false;
        for _ in 0..MAX_NEWTON {
            let (_, g) = objective(d, alpha, theta);
            let h = 1e-4;
            let curv =
                (objective(d, alpha, theta + h).1 - objective(d, alpha, theta - h).1) / (2.0 * h);
            // ascend when the Newton step points the wrong way
            let step = if curv < 0.0 {
                -g / curv
            } else {
                g.signum() * 0.2
            };
            let step = step.clamp(-0.5, 0.5);
            theta += step;
            if step.abs() < 1e-14 || g.abs() < 1e-16 {
                converged = true;
                break;
            }
        }
        let (f, g) = objective(d, alpha, theta);
        if !converged && g.abs() > 1e-10 {
            diagnostics.push(format!("start {k}: theta={theta:.6}, f'={g:.2e}"));
            continue;
        }
        if best.is_none_or(|(_, b)| f > b) {
            best = Some((theta.rem_euclid(TAU), f));
        }
    }
    best.ok_or_else(|| {
        Error::Numeric(format!(
            "dual norm maximization failed: {}",
            diagnostics.join("; ")
        ))
    })
}

/// `phi*(x, alpha) = sup { alpha(v) : phi(x, v) = 1 }`, by Newton on the circle
/// parameter with eight starts.
pub fn dual_norm(metric: &FinslerMetric, chart: u8, x: &Vec2, alpha: &Vec2) -> Result<f64> {
    metric.surface.check_point(chart, x)?;
    if alpha.x == 0.0 && alpha.y == 0.0 {
        return Ok(0.0);
    }
    Ok(maximize(&metric.randers_at(chart, x), alpha)?.1)
}

/// The unique unit covector `alpha` with `alpha(v) = 1` for a unit vector `v`:
/// the vertical derivative of `phi^2/2` at `v`.
pub fn legendre(metric: &FinslerMetric, chart: u8, x: &Vec2, v: &Vec2) -> Result<UnitCovector> {
    let phi = metric.eval(chart, x, v)?;
    if (phi - 1.0).abs() > UNIT_TOL {
        return Err(Error::Precondition(format!(
            "legendre needs a unit vector, phi(v) = {phi}"
        )));
    }
    let p = metric.randers_at(chart, x).legendre(v);
    Ok(UnitCovector {
        point: PhasePoint::in_chart(chart, *x, p),
        certified: true,
    })
}

/// The unit vector maximizing a unit covector over the unit circle.
pub fn legendre_inverse(metric: &FinslerMetric, alpha: &UnitCovector) -> Result<Vec2> {
    let z = alpha.point;
    let d = metric.randers_at(z.chart, &z.q);
    if !alpha.certified {
        let n = d.dual(&z.p);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::Precondition(format!(
                "covector has dual norm {n}, not 1"
            )));
        }
    }
    let (theta, _) = maximize(&d, &z.p)?;
    let u = Vec2::new(theta.cos(), theta.sin());
    Ok(u / d.norm(&u))
}

/// Velocity of the unit-speed geodesic through a unit covector, from the
/// closed-form gradient of the dual norm.
pub fn velocity(metric: &FinslerMetric, z: &PhasePoint) -> Vec2 {
    let (_, gp, _) = metric.randers_at(z.chart, &z.q).dual_with_grad(&z.p);
    gp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_max(d: &RandersData, alpha: &Vec2, n: usize) -> (f64, f64) {
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..n {
            let th = TAU * k as f64 / n as f64;
            let u = Vec2::new(th.cos(), th.sin());
            let f = alpha.dot(&u) / d.norm(&u);
            if f > best.1 {
                best = (th, f);
            }
        }
        best
    }

    #[test]
    fn euclidean_dual_is_self() {
        let m = FinslerMetric::euclidean();
        let x = Vec2::new(0.2, 0.1);
        assert!((dual_norm(&m, 0, &x, &Vec2::new(3.0, 4.0)).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(dual_norm(&m, 0, &x, &Vec2::zeros()).unwrap(), 0.0);
        let a = legendre(&m, 0, &x, &Vec2::new(1.0, 0.0)).unwrap();
        assert!((a.point.p - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        let back = legendre_inverse(
            &m,
            &UnitCovector {
                point: PhasePoint::new(x, Vec2::new(0.0, 1.0)),
                certified: true,
            },
        )
        .unwrap();
        assert!((back - Vec2::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn randers_dual_matches_grid_oracle() {
        let m = FinslerMetric::randers([0.3, 0.0]);
        let d = m.randers_at(0, &Vec2::zeros());
        let alpha = Vec2::new(1.0, 0.0);
        let (_, oracle) = grid_max(&d, &alpha, 1_000_000);
        let numeric = dual_norm(&m, 0, &Vec2::zeros(), &alpha).unwrap();
        assert!((numeric - oracle).abs() < 1e-6);
        assert!((numeric - d.dual(&alpha)).abs() < 1e-12);
    }

    #[test]
    fn randers_legendre_matches_hand_gradient() {
        let m = FinslerMetric::randers([0.3, 0.0]);
        let v = Vec2::new(1.0, 0.0) / 1.3;
        let a = legendre(&m, 0, &Vec2::zeros(), &v).unwrap();
        // grad of (|v| + 0.3 v1)^2/2 = phi (v/|v| + (0.3, 0)) with phi = 1
        let hand = Vec2::new(1.3, 0.0);
        assert!((a.point.p - hand).norm() < 1e-8);
        assert!((dual_norm(&m, 0, &Vec2::zeros(), &a.point.p).unwrap() - 1.0).abs() < 1e-9);
        assert!(legendre(&m, 0, &Vec2::zeros(), &Vec2::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn katok_maximizer_matches_grid_argmax() {
        let m = FinslerMetric::katok(0.3).unwrap();
        let x = Vec2::new(0.3, -0.5);
        let d = m.randers_at(0, &x);
        let p = Vec2::new(0.7, 1.1);
        let p = p / d.dual(&p);
        let v = legendre_inverse(
            &m,
            &UnitCovector {
                point: PhasePoint::new(x, p),
                certified: true,
            },
        )
        .unwrap();
        let (th, _) = grid_max(&d, &p, 1_000_000);
        let ang = v.y.atan2(v.x).rem_euclid(TAU);
        let diff = (ang - th).abs().min(TAU - (ang - th).abs());
        assert!(diff < 1e-5, "{diff}");
    }
}

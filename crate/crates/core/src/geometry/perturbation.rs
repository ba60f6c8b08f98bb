//! Compactly supported bump profiles and the metric perturbations built from them.

use crate::error::{Error, Result};
use crate::geometry::surface::SurfacePatch;
use crate::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Radial profile `rho(u)` supported on `|u| < 1`, with `rho(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpProfile {
    /// `exp(1 - 1/(1-u^2))`.
    #[default]
    Smooth,
    /// Identically 1 on `u <= 1/2`, smooth step down to 0 at `u = 1`.
    Plateau,
    /// `(1-u^2)^2 exp(1 - 1/(1-u^2))`.
    PolyExp,
}

fn g(x: f64) -> (f64, f64, f64) {
    // exp(-1/x) and its first two derivatives, zero for x <= 0
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / x).exp();
    let x2 = x * x;
    (e, e / x2, e * (1.0 / (x2 * x2) - 2.0 / (x2 * x)))
}

impl BumpProfile {
    /// `(rho, rho', rho'')` at `u >= 0`.
    pub fn eval(&self, u: f64) -> (f64, f64, f64) {
        let u = u.abs();
        if u >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        match self {
            BumpProfile::Smooth => smooth(u),
            BumpProfile::PolyExp => {
                let (e, e1, e2) = smooth(u);
                let w = 1.0 - u * u;
                let w1 = -2.0 * u;
                let w2 = -2.0;
                (
                    w * w * e,
                    2.0 * w * w1 * e + w * w * e1,
                    2.0 * (w1 * w1 + w * w2) * e + 4.0 * w * w1 * e1 + w * w * e2,
                )
            }
            BumpProfile::Plateau => {
                if u <= 0.5 {
                    return (1.0, 0.0, 0.0);
                }
                let x = 2.0 * (u - 0.5);
                let (a, a1, a2) = g(x);
                let (b, gb1, gb2) = g(1.0 - x);
                let b1 = -gb1;
                let b2 = gb2;
                let d = a + b;
                let d1 = a1 + b1;
                let d2 = a2 + b2;
                let s = a / d;
                let num1 = a1 * d - a * d1;
                let s1 = num1 / (d * d);
                let s2 = (a2 * d - a * d2) / (d * d) - 2.0 * d1 * num1 / (d * d * d);
                (1.0 - s, -2.0 * s1, -4.0 * s2)
            }
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        self.eval(u).0
    }
}

fn smooth(u: f64) -> (f64, f64, f64) {
    let w = 1.0 - u * u;
    let e = (1.0 - 1.0 / w).exp();
    let f1 = -2.0 * u / (w * w);
    let f2 = -2.0 / (w * w) - 8.0 * u * u / (w * w * w);
    (e, e * f1, e * (f1 * f1 + f2))
}

/// A radial scalar bump `amplitude * rho(|x - center| / radius)` on a chart.
/// On the torus the distance uses the minimal image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialBump {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub profile: BumpProfile,
}

impl RadialBump {
    pub fn center(&self) -> Vec2 {
        Vec2::new(self.center[0], self.center[1])
    }

    fn offset(&self, surface: &SurfacePatch, x: &Vec2) -> Vec2 {
        surface.min_image(&(x - self.center()))
    }

    /// Value and gradient at a chart-0 point.
    pub fn value_grad(&self, surface: &SurfacePatch, x: &Vec2) -> (f64, Vec2) {
        let d = self.offset(surface, x);
        let r = d.norm();
        let (rho, rho1, _) = self.profile.eval(r / self.radius);
        let grad = if r > 0.0 {
            d * (self.amplitude * rho1 / (self.radius * r))
        } else {
            Vec2::zeros()
        };
        (self.amplitude * rho, grad)
    }

    pub fn value(&self, surface: &SurfacePatch, x: &Vec2) -> f64 {
        let r = self.offset(surface, x).norm();
        self.amplitude * self.profile.value(r / self.radius)
    }

    /// Hessian at a chart-0 point.
    pub fn hessian(&self, surface: &SurfacePatch, x: &Vec2) -> Mat2 {
        let d = self.offset(surface, x);
        let r = d.norm();
        let u = r / self.radius;
        let (_, rho1, rho2) = self.profile.eval(u);
        let s2 = self.radius * self.radius;
        if r < 1e-12 * self.radius {
            return Mat2::identity() * (self.amplitude * rho2 / s2);
        }
        let n = d / r;
        let nn = n * n.transpose();
        (nn * (rho2 / s2) + (Mat2::identity() - nn) * (rho1 / (self.radius * r))) * self.amplitude
    }

    pub fn contains(&self, surface: &SurfacePatch, x: &Vec2) -> bool {
        self.offset(surface, x).norm() < self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    /// `phi -> (1 + h(x)) phi`.
    ConformalBump,
    /// `phi -> phi + h(x) w(v)` for a fixed one-form `w` (a local drift).
    Localized,
}

/// A compactly supported perturbation of a Finsler metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricPerturbation {
    pub kind: PerturbationKind,
    pub center: [f64; 2],
    /// Support radius.
    pub radius: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub profile: BumpProfile,
    /// One-form `w` for localized perturbations (ignored for conformal bumps).
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
}

fn default_direction() -> [f64; 2] {
    [1.0, 0.0]
}

impl MetricPerturbation {
    pub fn conformal(center: [f64; 2], radius: f64, amplitude: f64) -> Self {
        MetricPerturbation {
            kind: PerturbationKind::ConformalBump,
            center,
            radius,
            amplitude,
            profile: BumpProfile::Smooth,
            direction: default_direction(),
        }
    }

    pub fn localized(center: [f64; 2], radius: f64, amplitude: f64, direction: [f64; 2]) -> Self {
        MetricPerturbation {
            kind: PerturbationKind::Localized,
            center,
            radius,
            amplitude,
            profile: BumpProfile::Smooth,
            direction,
        }
    }

    pub fn bump(&self) -> RadialBump {
        RadialBump {
            center: self.center,
            radius: self.radius,
            amplitude: self.amplitude,
            profile: self.profile,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Precondition(format!(
                "bump radius must be > 0, got {}",
                self.radius
            )));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::Precondition("bump amplitude must be finite".into()));
        }
        Ok(())
    }
}

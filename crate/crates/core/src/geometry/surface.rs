//! Charted surfaces: the Euclidean plane (optionally restricted to a disc),
//! the flat torus, and the round sphere covered by two stereographic charts.

use crate::error::{Error, Result};
use crate::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Charts on the sphere are switched once `|q|` exceeds this multiple of the radius.
pub const SPHERE_RECHART_FACTOR: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SurfacePatch {
    /// The plane; `radius` bounds the chart domain when present.
    PlaneDisc {
        #[serde(default)]
        radius: Option<f64>,
    },
    /// `R^2 / (period_1 Z x period_2 Z)` with the flat chart.
    FlatTorus { periods: [f64; 2] },
    /// Round sphere of the given radius. Chart 0 is stereographic projection from
    /// the north pole, chart 1 from the south pole; both are conformal with factor
    /// `2R^2/(R^2+|q|^2)` and the transition is the inversion `q -> R^2 q/|q|^2`.
    SphereTwoCharts { radius: f64 },
}

impl SurfacePatch {
    pub fn plane() -> Self {
        SurfacePatch::PlaneDisc { radius: None }
    }

    pub fn unit_torus() -> Self {
        SurfacePatch::FlatTorus {
            periods: [1.0, 1.0],
        }
    }

    pub fn unit_sphere() -> Self {
        SurfacePatch::SphereTwoCharts { radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SurfacePatch::PlaneDisc { radius: Some(r) } if !(r > 0.0 && r.is_finite()) => Err(
                Error::Domain(format!("plane chart radius must be > 0, got {r}")),
            ),
            SurfacePatch::FlatTorus { periods } if !(periods[0] > 0.0 && periods[1] > 0.0) => Err(
                Error::Domain(format!("torus periods must be > 0, got {periods:?}")),
            ),
            SurfacePatch::SphereTwoCharts { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::Domain(format!(
                    "sphere radius must be > 0, got {radius}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn chart_count(&self) -> u8 {
        match self {
            SurfacePatch::SphereTwoCharts { .. } => 2,
            _ => 1,
        }
    }

    pub fn check_point(&self, chart: u8, q: &Vec2) -> Result<()> {
        if chart >= self.chart_count() {
            return Err(Error::Domain(format!(
                "chart id {chart} invalid for {self:?}"
            )));
        }
        if !(q.x.is_finite() && q.y.is_finite()) {
            return Err(Error::Domain(format!("non-finite point {q:?}")));
        }
        if let SurfacePatch::PlaneDisc { radius: Some(r) } = *self {
            if q.norm() > r {
                return Err(Error::Domain(format!(
                    "point {q:?} outside chart disc of radius {r}"
                )));
            }
        }
        Ok(())
    }

    /// Whether a sphere trajectory should move to the other chart.
    pub fn needs_rechart(&self, q: &Vec2) -> bool {
        match *self {
            SurfacePatch::SphereTwoCharts { radius } => q.norm() > SPHERE_RECHART_FACTOR * radius,
            _ => false,
        }
    }

    /// Sphere chart transition (an involution). Identity on other surfaces.
    pub fn transition(&self, q: &Vec2) -> Vec2 {
        match *self {
            SurfacePatch::SphereTwoCharts { radius } => q * (radius * radius / q.norm_squared()),
            _ => *q,
        }
    }

    /// Jacobian of [`Self::transition`] at `q`.
    pub fn transition_jacobian(&self, q: &Vec2) -> Mat2 {
        match *self {
            SurfacePatch::SphereTwoCharts { radius } => {
                let r2 = radius * radius;
                let n2 = q.norm_squared();
                (Mat2::identity() / n2 - q * q.transpose() * (2.0 / (n2 * n2))) * r2
            }
            _ => Mat2::identity(),
        }
    }

    /// Move a covector based at `q` (chart `c`) to the other chart.
    /// Returns the new point and covector.
    pub fn rechart_covector(&self, q: &Vec2, p: &Vec2) -> (Vec2, Vec2) {
        let q_new = self.transition(q);
        // T is an involution: the Jacobian of the inverse map at q_new is DT(q_new).
        let j = self.transition_jacobian(&q_new);
        (q_new, j.transpose() * p)
    }

    /// Reduce a torus displacement to its minimal image. Identity elsewhere.
    pub fn min_image(&self, d: &Vec2) -> Vec2 {
        match *self {
            SurfacePatch::FlatTorus { periods } => Vec2::new(
                d.x - periods[0] * (d.x / periods[0]).round(),
                d.y - periods[1] * (d.y / periods[1]).round(),
            ),
            _ => *d,
        }
    }

    /// Canonical representative of a torus point in `[0, L1) x [0, L2)`.
    pub fn wrap(&self, q: &Vec2) -> Vec2 {
        match *self {
            SurfacePatch::FlatTorus { periods } => {
                Vec2::new(q.x.rem_euclid(periods[0]), q.y.rem_euclid(periods[1]))
            }
            _ => *q,
        }
    }

    pub fn periods(&self) -> Option<[f64; 2]> {
        match *self {
            SurfacePatch::FlatTorus { periods } => Some(periods),
            _ => None,
        }
    }

    /// Same surface kind and parameters.
    pub fn same_as(&self, other: &SurfacePatch) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_transition_is_involution() {
        let s = SurfacePatch::SphereTwoCharts { radius: 1.3 };
        for k in 0..50 {
            let a = k as f64 * 0.37;
            let r = 0.8 + 0.02 * k as f64;
            let q = Vec2::new(r * a.cos(), r * a.sin());
            let back = s.transition(&s.transition(&q));
            assert!((back - q).norm() <= 1e-12, "{q:?} -> {back:?}");
        }
    }

    #[test]
    fn transition_jacobian_matches_finite_differences() {
        let s = SurfacePatch::unit_sphere();
        let q = Vec2::new(0.7, -1.1);
        let j = s.transition_jacobian(&q);
        let h = 1e-6;
        for i in 0..2 {
            let mut e = Vec2::zeros();
            e[i] = h;
            let col = (s.transition(&(q + e)) - s.transition(&(q - e))) / (2.0 * h);
            assert!((col - j.column(i)).norm() < 1e-8);
        }
    }

    #[test]
    fn validation_rejects_bad_parameters() {
        assert!(SurfacePatch::FlatTorus {
            periods: [1.0, 0.0]
        }
        .validate()
        .is_err());
        assert!(SurfacePatch::SphereTwoCharts { radius: -1.0 }
            .validate()
            .is_err());
        assert!(SurfacePatch::unit_torus().validate().is_ok());
    }

    #[test]
    fn min_image_on_torus() {
        let t = SurfacePatch::unit_torus();
        let d = t.min_image(&Vec2::new(0.9, -1.7));
        assert!((d - Vec2::new(-0.1, 0.3)).norm() < 1e-12);
    }
}

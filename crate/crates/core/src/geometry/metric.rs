//! Finsler metric families on charted surfaces.
//!
//! Every family shipped here is, at each point, a Randers norm
//! `phi(v) = sqrt(v^T A v) + b . v` with `A` positive definite and
//! `b^T A^{-1} b < 1`. That gives closed forms for the dual norm, the Legendre
//! transform and the first derivatives of `(phi*)^2 / 2` in both `q` and `p`,
//! which the flow integrator relies on. The generic numerical routes (Newton on
//! the unit circle, finite differences) live in [`crate::phase::dual`] and are
//! used as independent checks.

use crate::error::{Error, Result};
use crate::geometry::perturbation::{MetricPerturbation, PerturbationKind, RadialBump};
use crate::geometry::surface::SurfacePatch;
use crate::{Mat2, Vec2};
use serde::{Deserialize, Serialize};

/// Pointwise Randers data with first derivatives along the two chart directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandersData {
    pub a: Mat2,
    pub b: Vec2,
    pub da: [Mat2; 2],
    pub db: [Vec2; 2],
}

impl RandersData {
    pub fn riemannian(a: Mat2, da: [Mat2; 2]) -> Self {
        RandersData {
            a,
            b: Vec2::zeros(),
            da,
            db: [Vec2::zeros(); 2],
        }
    }

    pub fn euclidean() -> Self {
        Self::riemannian(Mat2::identity(), [Mat2::zeros(); 2])
    }

    pub fn norm(&self, v: &Vec2) -> f64 {
        let q = v.dot(&(self.a * v));
        q.max(0.0).sqrt() + self.b.dot(v)
    }

    /// Gradient of `phi` in `v` (undefined at `v = 0`).
    pub fn norm_grad(&self, v: &Vec2) -> Vec2 {
        let av = self.a * v;
        av / v.dot(&av).sqrt() + self.b
    }

    /// Hessian of `phi^2 / 2` in `v` (the fundamental tensor).
    pub fn fundamental_tensor(&self, v: &Vec2) -> Mat2 {
        let av = self.a * v;
        let s = v.dot(&av).sqrt();
        let phi = s + self.b.dot(v);
        let grad = av / s + self.b;
        let hess_phi = self.a / s - av * av.transpose() / (s * s * s);
        hess_phi * phi + grad * grad.transpose()
    }

    /// `b^T A^{-1} b`; the norm is valid iff this is below 1.
    pub fn drift_squared(&self) -> f64 {
        match self.a.try_inverse() {
            Some(ai) => self.b.dot(&(ai * self.b)),
            None => f64::INFINITY,
        }
    }

    fn dual_parts(&self) -> (Mat2, Vec2, f64) {
        let m = self.a - self.b * self.b.transpose();
        let minv = m
            .try_inverse()
            .unwrap_or_else(|| Mat2::from_element(f64::NAN));
        let u = minv * self.b;
        let kappa = 1.0 + self.b.dot(&u);
        (minv, u, kappa)
    }

    /// Closed-form dual norm: the unit ball is the ellipse
    /// `(v - c)^T M (v - c) <= kappa` with `M = A - b b^T`, `c = -M^{-1} b`.
    pub fn dual(&self, p: &Vec2) -> f64 {
        let (minv, u, kappa) = self.dual_parts();
        (kappa * p.dot(&(minv * p))).max(0.0).sqrt() - p.dot(&u)
    }

    /// Dual norm with gradients in `p` and in the base point.
    pub fn dual_with_grad(&self, p: &Vec2) -> (f64, Vec2, Vec2) {
        let (minv, u, kappa) = self.dual_parts();
        let mp = minv * p;
        let quad = p.dot(&mp);
        let root = (kappa * quad).max(0.0).sqrt();
        let value = root - p.dot(&u);
        let grad_p = if root > 0.0 {
            mp * (kappa / root) - u
        } else {
            -u
        };
        let mut grad_q = Vec2::zeros();
        for k in 0..2 {
            let dm = self.da[k] - self.db[k] * self.b.transpose() - self.b * self.db[k].transpose();
            let dminv = -minv * dm * minv;
            let du = dminv * self.b + minv * self.db[k];
            let dkappa = self.db[k].dot(&u) + self.b.dot(&du);
            let dquad = p.dot(&(dminv * p));
            let droot = if root > 0.0 {
                (dkappa * quad + kappa * dquad) / (2.0 * root)
            } else {
                0.0
            };
            grad_q[k] = droot - p.dot(&du);
        }
        (value, grad_p, grad_q)
    }

    /// Legendre transform of a tangent vector: the vertical derivative of `phi^2/2`.
    pub fn legendre(&self, v: &Vec2) -> Vec2 {
        self.norm_grad(v) * self.norm(v)
    }

    /// Conformal rescaling `(1+h) phi` with `h` and its gradient.
    pub fn conformal(&self, h: f64, grad_h: &Vec2) -> Self {
        let f = 1.0 + h;
        let mut out = RandersData {
            a: self.a * (f * f),
            b: self.b * f,
            da: self.da,
            db: self.db,
        };
        for k in 0..2 {
            out.da[k] = self.a * (2.0 * f * grad_h[k]) + self.da[k] * (f * f);
            out.db[k] = self.b * grad_h[k] + self.db[k] * f;
        }
        out
    }

    /// Add a drift one-form `h(x) w`.
    pub fn add_drift(&self, h: f64, grad_h: &Vec2, w: &Vec2) -> Self {
        let mut out = *self;
        out.b += w * h;
        for k in 0..2 {
            out.db[k] += w * grad_h[k];
        }
        out
    }

    /// Randers data from Zermelo navigation data: Riemannian `h` and wind `W`
    /// with `|W|_h < 1`. Returns `A = h/l + W_b W_b^T / l^2`, `b = -W_b / l`
    /// where `W_b = h W` and `l = 1 - |W|_h^2`.
    pub fn from_navigation(h: &Mat2, dh: &[Mat2; 2], w: &Vec2, dw: &[Vec2; 2]) -> Self {
        let wb = h * w;
        let l = 1.0 - w.dot(&wb);
        let a = h / l + wb * wb.transpose() / (l * l);
        let b = -wb / l;
        let mut da = [Mat2::zeros(); 2];
        let mut db = [Vec2::zeros(); 2];
        for k in 0..2 {
            let dwb = dh[k] * w + h * dw[k];
            let dl = -(w.dot(&(dh[k] * w)) + 2.0 * dw[k].dot(&wb));
            da[k] = dh[k] / l - h * (dl / (l * l))
                + (dwb * wb.transpose() + wb * dwb.transpose()) / (l * l)
                - wb * wb.transpose() * (2.0 * dl / (l * l * l));
            db[k] = -dwb / l + wb * (dl / (l * l));
        }
        RandersData { a, b, da, db }
    }
}

/// Metric family. Families nest: a conformal or localized perturbation wraps a base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricFamily {
    /// The Euclidean norm in the chart.
    Euclidean,
    /// Flat metric (same as Euclidean; the name used on the torus).
    Flat,
    /// Round metric of the sphere in stereographic charts.
    Round,
    /// `sqrt(a(v,v)) + beta . v` with `a` the surface's flat metric and constant `beta`.
    Randers { beta: [f64; 2] },
    /// Katok's irreversible sphere: Zermelo navigation on the round sphere with
    /// the rotation wind of equatorial speed `alpha` (`0 < alpha < 1`).
    Katok { alpha: f64 },
    /// `(1 + sum of bumps) * base`.
    Conformal {
        base: Box<MetricFamily>,
        bumps: Vec<RadialBump>,
    },
    /// `base + sum of bump_i(x) w_i(v)`.
    Localized {
        base: Box<MetricFamily>,
        drifts: Vec<LocalDrift>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalDrift {
    pub bump: RadialBump,
    pub direction: [f64; 2],
}

impl MetricFamily {
    pub fn name(&self) -> String {
        match self {
            MetricFamily::Euclidean => "euclidean".into(),
            MetricFamily::Flat => "flat".into(),
            MetricFamily::Round => "round".into(),
            MetricFamily::Randers { beta } => format!("randers({},{})", beta[0], beta[1]),
            MetricFamily::Katok { alpha } => format!("katok({alpha})"),
            MetricFamily::Conformal { base, .. } => format!("conformal[{}]", base.name()),
            MetricFamily::Localized { base, .. } => format!("localized[{}]", base.name()),
        }
    }

    fn is_reversible(&self) -> bool {
        match self {
            MetricFamily::Euclidean | MetricFamily::Flat | MetricFamily::Round => true,
            MetricFamily::Randers { beta } => beta[0] == 0.0 && beta[1] == 0.0,
            MetricFamily::Katok { alpha } => *alpha == 0.0,
            MetricFamily::Conformal { base, .. } => base.is_reversible(),
            MetricFamily::Localized { base, drifts } => {
                base.is_reversible() && drifts.iter().all(|d| d.bump.amplitude == 0.0)
            }
        }
    }

    fn check_surface(&self, surface: &SurfacePatch) -> Result<()> {
        let sphere = matches!(surface, SurfacePatch::SphereTwoCharts { .. });
        match self {
            MetricFamily::Round | MetricFamily::Katok { .. } if !sphere => Err(Error::Domain(
                format!("{} requires the sphere", self.name()),
            )),
            MetricFamily::Euclidean | MetricFamily::Flat | MetricFamily::Randers { .. }
                if sphere =>
            {
                Err(Error::Domain(format!(
                    "{} is not defined on the sphere charts",
                    self.name()
                )))
            }
            MetricFamily::Localized { .. } if sphere => Err(Error::Unsupported(
                "localized drift perturbations on the sphere".into(),
            )),
            MetricFamily::Conformal { base, .. } | MetricFamily::Localized { base, .. } => {
                base.check_surface(surface)
            }
            _ => Ok(()),
        }
    }
}

/// A Finsler metric on a charted surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricSpec", into = "MetricSpec")]
pub struct FinslerMetric {
    pub surface: SurfacePatch,
    pub family: MetricFamily,
    /// Derived from the family at construction.
    pub reversible: bool,
}

/// Serialized form of [`FinslerMetric`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub surface: SurfacePatch,
    pub metric: MetricFamily,
    #[serde(default)]
    pub perturbations: Vec<MetricPerturbation>,
}

impl TryFrom<MetricSpec> for FinslerMetric {
    type Error = Error;
    fn try_from(spec: MetricSpec) -> Result<Self> {
        let mut m = FinslerMetric::new(spec.surface, spec.metric)?;
        for p in &spec.perturbations {
            m = m.perturbed(p)?;
        }
        Ok(m)
    }
}

impl From<FinslerMetric> for MetricSpec {
    fn from(m: FinslerMetric) -> Self {
        MetricSpec {
            surface: m.surface,
            metric: m.family,
            perturbations: vec![],
        }
    }
}

impl FinslerMetric {
    pub fn new(surface: SurfacePatch, family: MetricFamily) -> Result<Self> {
        surface.validate()?;
        family.check_surface(&surface)?;
        if let MetricFamily::Katok { alpha } = family {
            if !(0.0..1.0).contains(&alpha) {
                return Err(Error::Domain(format!(
                    "katok parameter must lie in [0,1), got {alpha}"
                )));
            }
        }
        let reversible = family.is_reversible();
        Ok(FinslerMetric {
            surface,
            family,
            reversible,
        })
    }

    pub fn euclidean() -> Self {
        Self::new(SurfacePatch::plane(), MetricFamily::Euclidean).unwrap()
    }

    pub fn flat_torus() -> Self {
        Self::new(SurfacePatch::unit_torus(), MetricFamily::Flat).unwrap()
    }

    pub fn round_sphere() -> Self {
        Self::new(SurfacePatch::unit_sphere(), MetricFamily::Round).unwrap()
    }

    pub fn randers(beta: [f64; 2]) -> Self {
        Self::new(SurfacePatch::plane(), MetricFamily::Randers { beta }).unwrap()
    }

    pub fn katok(alpha: f64) -> Result<Self> {
        Self::new(SurfacePatch::unit_sphere(), MetricFamily::Katok { alpha })
    }

    pub fn name(&self) -> String {
        self.family.name()
    }

    /// Apply a compactly supported perturbation.
    pub fn perturbed(&self, p: &MetricPerturbation) -> Result<Self> {
        p.validate()?;
        let family = match p.kind {
            PerturbationKind::ConformalBump => match &self.family {
                MetricFamily::Conformal { base, bumps } => {
                    let mut bumps = bumps.clone();
                    bumps.push(p.bump());
                    MetricFamily::Conformal {
                        base: base.clone(),
                        bumps,
                    }
                }
                other => MetricFamily::Conformal {
                    base: Box::new(other.clone()),
                    bumps: vec![p.bump()],
                },
            },
            PerturbationKind::Localized => {
                let drift = LocalDrift {
                    bump: p.bump(),
                    direction: p.direction,
                };
                match &self.family {
                    MetricFamily::Localized { base, drifts } => {
                        let mut drifts = drifts.clone();
                        drifts.push(drift);
                        MetricFamily::Localized {
                            base: base.clone(),
                            drifts,
                        }
                    }
                    other => MetricFamily::Localized {
                        base: Box::new(other.clone()),
                        drifts: vec![drift],
                    },
                }
            }
        };
        Self::new(self.surface, family)
    }

    /// Pointwise Randers data at `q` in the given chart.
    pub fn randers_at(&self, chart: u8, q: &Vec2) -> RandersData {
        family_data(&self.family, &self.surface, chart, q)
    }

    /// `phi(x, v)` with domain checks.
    pub fn eval(&self, chart: u8, q: &Vec2, v: &Vec2) -> Result<f64> {
        self.surface.check_point(chart, q)?;
        if v.x == 0.0 && v.y == 0.0 {
            return Ok(0.0);
        }
        Ok(self.randers_at(chart, q).norm(v))
    }

    /// Closed-form dual norm `phi*(x, p)`.
    pub fn dual(&self, chart: u8, q: &Vec2, p: &Vec2) -> f64 {
        if p.x == 0.0 && p.y == 0.0 {
            return 0.0;
        }
        self.randers_at(chart, q).dual(p)
    }
}

fn sphere_factor(radius: f64, q: &Vec2) -> (f64, Vec2) {
    let r2 = radius * radius;
    let c = 2.0 * r2 / (r2 + q.norm_squared());
    (c, -q * (c * c / r2))
}

fn family_data(family: &MetricFamily, surface: &SurfacePatch, chart: u8, q: &Vec2) -> RandersData {
    match family {
        MetricFamily::Euclidean | MetricFamily::Flat => RandersData::euclidean(),
        MetricFamily::Round => {
            let radius = sphere_radius(surface);
            let (c, dc) = sphere_factor(radius, q);
            let a = Mat2::identity() * (c * c);
            RandersData::riemannian(
                a,
                [
                    Mat2::identity() * (2.0 * c * dc.x),
                    Mat2::identity() * (2.0 * c * dc.y),
                ],
            )
        }
        MetricFamily::Randers { beta } => {
            let mut d = RandersData::euclidean();
            d.b = Vec2::new(beta[0], beta[1]);
            d
        }
        MetricFamily::Katok { alpha } => {
            let radius = sphere_radius(surface);
            let (c, dc) = sphere_factor(radius, q);
            let h = Mat2::identity() * (c * c);
            let dh = [
                Mat2::identity() * (2.0 * c * dc.x),
                Mat2::identity() * (2.0 * c * dc.y),
            ];
            // rotation field commutes with the chart inversion, so both charts share it
            let k = alpha / radius;
            let w = Vec2::new(-q.y, q.x) * k;
            let dw = [Vec2::new(0.0, k), Vec2::new(-k, 0.0)];
            RandersData::from_navigation(&h, &dh, &w, &dw)
        }
        MetricFamily::Conformal { base, bumps } => {
            let d = family_data(base, surface, chart, q);
            let (h, gh) = scalar_field(bumps, surface, chart, q);
            d.conformal(h, &gh)
        }
        MetricFamily::Localized { base, drifts } => {
            let mut d = family_data(base, surface, chart, q);
            for drift in drifts {
                let (h, gh) = drift.bump.value_grad(surface, q);
                d = d.add_drift(h, &gh, &Vec2::new(drift.direction[0], drift.direction[1]));
            }
            d
        }
    }
}

fn sphere_radius(surface: &SurfacePatch) -> f64 {
    match surface {
        SurfacePatch::SphereTwoCharts { radius } => *radius,
        _ => 1.0,
    }
}

/// Sum of bumps and its gradient. Bump centres are chart-0 coordinates; on the
/// sphere's chart 1 the field is pulled back through the transition map.
fn scalar_field(bumps: &[RadialBump], surface: &SurfacePatch, chart: u8, q: &Vec2) -> (f64, Vec2) {
    let (x, jac) = if chart == 1 && q.norm_squared() > 0.0 {
        (surface.transition(q), Some(surface.transition_jacobian(q)))
    } else if chart == 1 {
        return (0.0, Vec2::zeros());
    } else {
        (*q, None)
    };
    let mut h = 0.0;
    let mut g = Vec2::zeros();
    for b in bumps {
        let (v, gr) = b.value_grad(surface, &x);
        h += v;
        g += gr;
    }
    if let Some(j) = jac {
        g = j.transpose() * g;
    }
    (h, g)
}

/// Scalar conformal factor `h` of a conformal family at a point (0 for others).
pub fn conformal_factor(metric: &FinslerMetric, chart: u8, q: &Vec2) -> f64 {
    match &metric.family {
        MetricFamily::Conformal { bumps, .. } => scalar_field(bumps, &metric.surface, chart, q).0,
        _ => 0.0,
    }
}

/// Support bumps of a perturbed metric, if any.
pub fn support_bumps(metric: &FinslerMetric) -> Vec<RadialBump> {
    match &metric.family {
        MetricFamily::Conformal { bumps, .. } => bumps.clone(),
        MetricFamily::Localized { drifts, .. } => drifts.iter().map(|d| d.bump).collect(),
        _ => vec![],
    }
}

/// Base metric of a perturbed metric (the metric itself otherwise).
pub fn base_metric(metric: &FinslerMetric) -> FinslerMetric {
    match &metric.family {
        MetricFamily::Conformal { base, .. } | MetricFamily::Localized { base, .. } => {
            FinslerMetric::new(metric.surface, (**base).clone()).expect("base family valid")
        }
        _ => metric.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_randers_derivatives(m: &FinslerMetric, chart: u8, q: Vec2) {
        let d = m.randers_at(chart, &q);
        let h = 1e-6;
        for k in 0..2 {
            let mut e = Vec2::zeros();
            e[k] = h;
            let dp = m.randers_at(chart, &(q + e));
            let dm = m.randers_at(chart, &(q - e));
            let da = (dp.a - dm.a) / (2.0 * h);
            let db = (dp.b - dm.b) / (2.0 * h);
            assert!(
                (da - d.da[k]).norm() < 1e-7 * (1.0 + da.norm()),
                "{}: dA_{k}",
                m.name()
            );
            assert!(
                (db - d.db[k]).norm() < 1e-7 * (1.0 + db.norm()),
                "{}: db_{k}",
                m.name()
            );
        }
    }

    #[test]
    fn analytic_field_derivatives_match_finite_differences() {
        let k = FinslerMetric::katok(0.3).unwrap();
        fd_randers_derivatives(&k, 0, Vec2::new(0.4, -0.7));
        fd_randers_derivatives(&k, 1, Vec2::new(-0.2, 0.9));
        fd_randers_derivatives(&FinslerMetric::round_sphere(), 0, Vec2::new(1.2, 0.3));
        let c = FinslerMetric::flat_torus()
            .perturbed(&MetricPerturbation::conformal([0.5, 0.5], 0.2, 0.05))
            .unwrap();
        fd_randers_derivatives(&c, 0, Vec2::new(0.55, 0.43));
        let l = FinslerMetric::flat_torus()
            .perturbed(&MetricPerturbation::localized(
                [0.5, 0.5],
                0.2,
                0.1,
                [0.3, -0.4],
            ))
            .unwrap();
        fd_randers_derivatives(&l, 0, Vec2::new(0.62, 0.45));
    }

    #[test]
    fn euclidean_norm_of_three_four_is_five() {
        let m = FinslerMetric::euclidean();
        assert_eq!(
            m.eval(0, &Vec2::new(0.3, 2.0), &Vec2::new(3.0, 4.0))
                .unwrap(),
            5.0
        );
        assert_eq!(m.eval(0, &Vec2::zeros(), &Vec2::zeros()).unwrap(), 0.0);
    }

    #[test]
    fn randers_drift_along_x() {
        let m = FinslerMetric::randers([0.3, 0.0]);
        let v = m
            .eval(0, &Vec2::new(-4.0, 1.0), &Vec2::new(1.0, 0.0))
            .unwrap();
        assert!((v - 1.3).abs() < 1e-15);
        assert!(!m.reversible);
    }

    #[test]
    fn randers_dual_closed_form_on_axis() {
        // sup of v_1 over |v| + b v_1 <= 1 is 1/(1+b)
        let d = FinslerMetric::randers([0.3, 0.0]).randers_at(0, &Vec2::zeros());
        assert!((d.dual(&Vec2::new(1.0, 0.0)) - 1.0 / 1.3).abs() < 1e-15);
        assert!((d.dual(&Vec2::new(-1.0, 0.0)) - 1.0 / 0.7).abs() < 1e-14);
    }

    #[test]
    fn katok_equator_speeds() {
        // unit sphere equator is |q| = 1; with-wind speed 1+alpha, against 1-alpha
        let m = FinslerMetric::katok(0.3).unwrap();
        let q = Vec2::new(1.0, 0.0);
        let east = Vec2::new(0.0, 1.0);
        assert!((m.eval(0, &q, &east).unwrap() - 1.0 / 1.3).abs() < 1e-14);
        assert!((m.eval(0, &q, &(-east)).unwrap() - 1.0 / 0.7).abs() < 1e-14);
    }

    #[test]
    fn surface_family_mismatch_is_rejected() {
        assert!(FinslerMetric::new(SurfacePatch::plane(), MetricFamily::Round).is_err());
        assert!(FinslerMetric::new(SurfacePatch::unit_sphere(), MetricFamily::Flat).is_err());
        assert!(FinslerMetric::katok(1.2).is_err());
    }

    #[test]
    fn out_of_chart_point_is_a_domain_error() {
        let m = FinslerMetric::new(
            SurfacePatch::PlaneDisc { radius: Some(1.0) },
            MetricFamily::Euclidean,
        )
        .unwrap();
        assert!(matches!(
            m.eval(0, &Vec2::new(2.0, 0.0), &Vec2::new(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let s = FinslerMetric::round_sphere();
        assert!(matches!(
            s.eval(2, &Vec2::zeros(), &Vec2::new(1.0, 0.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn metric_spec_round_trips_through_json() {
        let json = r#"{"surface":{"kind":"flat-torus","periods":[1.0,1.0]},
                       "metric":{"family":"flat"},
                       "perturbations":[{"kind":"conformal-bump","center":[0.5,0.5],"radius":0.1,"amplitude":0.01}]}"#;
        let m: FinslerMetric = serde_json::from_str(json).unwrap();
        assert!(matches!(m.family, MetricFamily::Conformal { .. }));
        let bad = r#"{"surface":{"kind":"flat-torus","periods":[1.0,1.0]},"metric":{"family":"flat"},"oops":1}"#;
        assert!(serde_json::from_str::<FinslerMetric>(bad).is_err());
    }
}

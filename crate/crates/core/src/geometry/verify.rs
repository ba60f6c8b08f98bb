//! Sampled checks of the norm axioms and a sampled `C^r` distance between metrics.

use crate::error::{Error, Result};
use crate::geometry::metric::FinslerMetric;
use crate::geometry::perturbation::{MetricPerturbation, PerturbationKind};
use crate::geometry::surface::SurfacePatch;
use crate::{Mat2, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tolerance on the relative homogeneity defect.
pub const HOMOGENEITY_TOL: f64 = 1e-10;
/// Tolerance on the relative reversibility defect of metrics flagged reversible.
pub const REVERSIBILITY_TOL: f64 = 1e-10;

/// Random sampling of base points and directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleSpec {
    pub points: usize,
    /// Directions per point (a fixed fan plus one random direction).
    pub directions: usize,
    pub seed: u64,
    /// Half-width of the sampled box on the plane.
    pub extent: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            points: 100,
            directions: 8,
            seed: 0,
            extent: 1.0,
        }
    }
}

impl SampleSpec {
    pub fn with_points(points: usize) -> Self {
        SampleSpec {
            points,
            ..Default::default()
        }
    }
}

/// A chart point drawn uniformly from the sampling region of a surface.
pub fn sample_point<R: Rng>(surface: &SurfacePatch, extent: f64, rng: &mut R) -> (u8, Vec2) {
    match *surface {
        SurfacePatch::PlaneDisc { radius } => {
            let e = radius.map_or(extent, |r| extent.min(r / std::f64::consts::SQRT_2));
            (0, Vec2::new(rng.gen_range(-e..e), rng.gen_range(-e..e)))
        }
        SurfacePatch::FlatTorus { periods } => (
            0,
            Vec2::new(
                rng.gen_range(0.0..periods[0]),
                rng.gen_range(0.0..periods[1]),
            ),
        ),
        SurfacePatch::SphereTwoCharts { radius } => {
            let chart = rng.gen_range(0..2u8);
            let r = radius * 1.4 * rng.gen::<f64>().sqrt();
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            (chart, Vec2::new(r * a.cos(), r * a.sin()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub metric: String,
    pub samples: usize,
    /// Largest `|phi(lambda v) - lambda phi(v)| / (lambda phi(v))`.
    pub homogeneity_defect: f64,
    /// Smallest value of `phi` on the Euclidean unit circle.
    pub min_norm: f64,
    /// Smallest eigenvalue of the vertical Hessian of `phi^2/2` on the Euclidean unit circle.
    pub min_hessian_eigenvalue: f64,
    /// Largest `|phi(v) - phi(-v)| / phi(v)`.
    pub reversibility_defect: f64,
    pub reversible_flag: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

fn vertical_hessian(metric: &FinslerMetric, chart: u8, q: &Vec2, v: &Vec2) -> Mat2 {
    // finite differences of phi^2/2 so the check does not reuse the closed forms
    let f = |w: Vec2| {
        let d = metric.randers_at(chart, q);
        let n = d.norm(&w);
        0.5 * n * n
    };
    let h = 1e-4;
    let e = [Vec2::new(h, 0.0), Vec2::new(0.0, h)];
    let mut m = Mat2::zeros();
    for i in 0..2 {
        for j in 0..2 {
            m[(i, j)] = (f(v + e[i] + e[j]) - f(v + e[i] - e[j]) - f(v - e[i] + e[j])
                + f(v - e[i] - e[j]))
                / (4.0 * h * h);
        }
    }
    m
}

/// Check positivity, homogeneity, quadratic convexity and (when flagged) reversibility at sampled points.
pub fn verify_metric(metric: &FinslerMetric, samples: &SampleSpec) -> VerificationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(samples.seed);
    let mut hom: f64 = 0.0;
    let mut min_norm = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut rev: f64 = 0.0;
    let mut failures = Vec::new();
    let fan = samples.directions.max(1);
    for _ in 0..samples.points {
        let (chart, q) = sample_point(&metric.surface, samples.extent, &mut rng);
        let extra: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        for k in 0..=fan {
            let a = if k == fan {
                extra
            } else {
                std::f64::consts::TAU * k as f64 / fan as f64
            };
            let v = Vec2::new(a.cos(), a.sin());
            let phi = match metric.eval(chart, &q, &v) {
                Ok(x) => x,
                Err(e) => {
                    failures.push(e.to_string());
                    continue;
                }
            };
            min_norm = min_norm.min(phi);
            for lambda in [0.5, 2.0, 7.3] {
                let scaled = metric.eval(chart, &q, &(v * lambda)).unwrap_or(f64::NAN);
                let d = (scaled - lambda * phi).abs() / (lambda * phi.abs()).max(f64::MIN_POSITIVE);
                hom = hom.max(if d.is_nan() { f64::INFINITY } else { d });
            }
            let back = metric.eval(chart, &q, &(-v)).unwrap_or(f64::NAN);
            rev = rev.max((phi - back).abs() / phi.abs().max(f64::MIN_POSITIVE));
            let eig = vertical_hessian(metric, chart, &q, &v)
                .symmetric_eigenvalues()
                .min();
            if eig < min_eig {
                min_eig = eig;
                if eig <= 0.0 {
                    failures.push(format!(
                        "vertical Hessian eigenvalue {eig:.3e} at chart {chart}, q={:?}, v={:?}",
                        q, v
                    ));
                }
            }
        }
    }
    if !(min_norm > 0.0) {
        failures.push(format!(
            "non-positive norm {min_norm:.3e} on the unit circle"
        ));
    }
    if !(hom <= HOMOGENEITY_TOL) {
        failures.push(format!("homogeneity defect {hom:.3e}"));
    }
    if metric.reversible && !(rev <= REVERSIBILITY_TOL) {
        failures.push(format!("metric flagged reversible but defect is {rev:.3e}"));
    }
    VerificationReport {
        metric: metric.name(),
        samples: samples.points,
        homogeneity_defect: hom,
        min_norm,
        min_hessian_eigenvalue: min_eig,
        reversibility_defect: rev,
        reversible_flag: metric.reversible,
        passed: failures.is_empty(),
        failures,
    }
}

/// `phi(x, v)` with domain checking.
pub fn eval_metric(metric: &FinslerMetric, chart: u8, x: &Vec2, v: &Vec2) -> Result<f64> {
    metric.eval(chart, x, v)
}

/// `(1 + h(x)) phi(x, v)` for a conformal bump `h`.
pub fn conformal_perturb(base: &FinslerMetric, bump: &MetricPerturbation) -> Result<FinslerMetric> {
    if bump.kind != PerturbationKind::ConformalBump {
        return Err(Error::Precondition(
            "conformal_perturb needs a conformal-bump perturbation".into(),
        ));
    }
    if bump.amplitude < 0.0 {
        return Err(Error::Precondition(format!(
            "amplitude must be >= 0, got {}",
            bump.amplitude
        )));
    }
    base.perturbed(bump)
}

/// Lattice used by [`cr_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrGrid {
    /// Points per side of the base-point lattice.
    pub n: usize,
    pub directions: usize,
    /// Finite-difference step in `x` and `v`.
    pub step: f64,
    /// Half-width of the lattice on the plane and sphere charts.
    pub extent: f64,
}

impl Default for CrGrid {
    fn default() -> Self {
        CrGrid {
            n: 64,
            directions: 16,
            step: 1e-2,
            extent: 1.0,
        }
    }
}

fn lattice(surface: &SurfacePatch, grid: &CrGrid) -> Vec<Vec2> {
    let n = grid.n.max(2);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = match *surface {
                SurfacePatch::FlatTorus { periods } => Vec2::new(
                    periods[0] * i as f64 / n as f64,
                    periods[1] * j as f64 / n as f64,
                ),
                _ => {
                    let u = |k: usize| grid.extent * (2.0 * k as f64 / (n - 1) as f64 - 1.0);
                    Vec2::new(u(i), u(j))
                }
            };
            out.push(p);
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Multi-indices in four variables with total order at most `r`.
fn multi_indices(r: usize) -> Vec<[usize; 4]> {
    let mut out = Vec::new();
    for a in 0..=r {
        for b in 0..=r - a {
            for c in 0..=r - a - b {
                for d in 0..=r - a - b - c {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}

/// Sampled `C^r` distance: the largest absolute difference of `phi` and of its
/// mixed central finite-difference derivatives up to order `r` in `(x, v)`,
/// over a base-point lattice and directions normalized on the unit circle of
/// either metric (which keeps the quantity symmetric).
pub fn cr_distance(m1: &FinslerMetric, m2: &FinslerMetric, r: usize, grid: &CrGrid) -> Result<f64> {
    if !m1.surface.same_as(&m2.surface) {
        return Err(Error::Domain(
            "cr_distance needs metrics on the same surface".into(),
        ));
    }
    if r > 4 {
        return Err(Error::Precondition(format!("derivative order {r} above 4")));
    }
    let h = grid.step;
    let indices = multi_indices(r);
    let mut worst: f64 = 0.0;
    let f = |z: [f64; 4]| {
        let q = Vec2::new(z[0], z[1]);
        let v = Vec2::new(z[2], z[3]);
        m2.randers_at(0, &q).norm(&v) - m1.randers_at(0, &q).norm(&v)
    };
    for q in lattice(&m1.surface, grid) {
        for k in 0..grid.directions.max(1) {
            let a = std::f64::consts::TAU * k as f64 / grid.directions.max(1) as f64;
            let dir = Vec2::new(a.cos(), a.sin());
            for m in [m1, m2] {
                let v = dir / m.randers_at(0, &q).norm(&dir);
                let base = [q.x, q.y, v.x, v.y];
                for alpha in &indices {
                    let mut acc = 0.0;
                    let mut idx = [0usize; 4];
                    loop {
                        let mut z = base;
                        let mut c = 1.0;
                        for d in 0..4 {
                            let n = alpha[d];
                            z[d] += (idx[d] as f64 - n as f64 / 2.0) * h;
                            c *= binomial(n, idx[d])
                                * if (n - idx[d]) % 2 == 1 { -1.0 } else { 1.0 };
                        }
                        acc += c * f(z);
                        let mut d = 0;
                        while d < 4 {
                            idx[d] += 1;
                            if idx[d] <= alpha[d] {
                                break;
                            }
                            idx[d] = 0;
                            d += 1;
                        }
                        if d == 4 {
                            break;
                        }
                    }
                    let order: usize = alpha.iter().sum();
                    worst = worst.max((acc / h.powi(order as i32)).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::metric::MetricFamily;

    #[test]
    fn euclidean_passes_with_zero_reversibility_defect() {
        let r = verify_metric(&FinslerMetric::euclidean(), &SampleSpec::with_points(100));
        assert!(r.passed, "{:?}", r.failures);
        assert_eq!(r.reversibility_defect, 0.0);
    }

    #[test]
    fn katok_passes_and_is_irreversible() {
        let r = verify_metric(
            &FinslerMetric::katok(0.3).unwrap(),
            &SampleSpec::with_points(100),
        );
        assert!(r.passed, "{:?}", r.failures);
        assert!(r.reversibility_defect > 0.1);
    }

    #[test]
    fn oversized_drift_fails_convexity() {
        let m = FinslerMetric::new(
            SurfacePatch::plane(),
            MetricFamily::Randers { beta: [1.5, 0.0] },
        )
        .unwrap();
        let r = verify_metric(&m, &SampleSpec::with_points(100));
        assert!(!r.passed);
        assert!(r.min_hessian_eigenvalue <= 0.0);
    }

    #[test]
    fn conformal_factor_at_center_and_far_away() {
        let flat = FinslerMetric::flat_torus();
        let pert = conformal_perturb(&flat, &MetricPerturbation::conformal([0.5, 0.5], 0.1, 0.01))
            .unwrap();
        let v = Vec2::new(0.6, -0.8);
        let c = Vec2::new(0.5, 0.5);
        assert!(
            (pert.eval(0, &c, &v).unwrap() / flat.eval(0, &c, &v).unwrap() - 1.01).abs() < 1e-15
        );
        assert_eq!(
            pert.eval(0, &Vec2::zeros(), &v).unwrap(),
            flat.eval(0, &Vec2::zeros(), &v).unwrap()
        );
        assert!(verify_metric(&pert, &SampleSpec::default()).passed);
        let zero =
            conformal_perturb(&flat, &MetricPerturbation::conformal([0.5, 0.5], 0.1, 0.0)).unwrap();
        assert_eq!(zero.eval(0, &c, &v).unwrap(), flat.eval(0, &c, &v).unwrap());
    }

    #[test]
    fn cr_distance_of_conformal_bump() {
        let flat = FinslerMetric::flat_torus();
        let a = 0.01;
        let pert =
            conformal_perturb(&flat, &MetricPerturbation::conformal([0.5, 0.5], 0.1, a)).unwrap();
        let g = CrGrid {
            n: 32,
            directions: 8,
            ..Default::default()
        };
        let d = cr_distance(&flat, &pert, 0, &g).unwrap();
        assert!((d - a).abs() < 1e-12);
        assert_eq!(cr_distance(&flat, &flat, 2, &g).unwrap(), 0.0);
        let g1 = CrGrid {
            n: 8,
            directions: 4,
            ..Default::default()
        };
        assert_eq!(
            cr_distance(&flat, &pert, 2, &g1).unwrap(),
            cr_distance(&pert, &flat, 2, &g1).unwrap()
        );
        assert!(cr_distance(&flat, &FinslerMetric::round_sphere(), 0, &g1).is_err());
    }
}

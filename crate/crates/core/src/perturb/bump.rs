//! Compactly supported area-preserving bumps of the `(s, t)` plane moving one point to another.
//!
//! The bump is the time-1 flow of `G(z) = A rho(|z - m| / delta') <J(y - x), z - m>`
//! for the plateau profile `rho`, with respect to `ds ^ dt`, where `m` is the midpoint
//! of `x` and `y` and `delta' = delta - |y - x| / 2`, so the support stays in the ball
//! of radius `delta` about `x`. On the plateau the flow is the translation by
//! `A (y - x)`; once both points lie on it the amplitude is exactly one.

use crate::error::{Error, Result};
use crate::geometry::BumpProfile;
use crate::lens::PlanarMap;
use crate::phase::ode::Stepper;
use crate::Vec2;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

/// Conservative default for the constant in `|y - x| < c delta^r eps`.
pub const DEFAULT_BUMP_CONSTANT: f64 = 0.05;
const FLOW_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymplecticBump {
    /// Centre of the support.
    pub center: Vec2,
    /// The point moved onto `target`.
    pub source: Vec2,
    pub target: Vec2,
    /// Radius of the support.
    pub delta: f64,
    pub r: u32,
    pub eps: f64,
    /// Constant used in the displacement budget.
    pub constant: f64,
    pub amplitude: f64,
    /// Period of the first coordinate, if it is an angle-like boundary parameter.
    pub period: Option<f64>,
}

fn rot(d: Vec2) -> Vec2 {
    Vec2::new(-d.y, d.x)
}

impl SymplecticBump {
    pub fn identity(center: Vec2, delta: f64) -> Self {
        SymplecticBump {
            center,
            source: center,
            target: center,
            delta,
            r: 0,
            eps: 1.0,
            constant: DEFAULT_BUMP_CONSTANT,
            amplitude: 0.0,
            period: None,
        }
    }

    fn displacement_of(&self) -> Vec2 {
        self.target - self.source
    }

    /// Offset of `z` from the centre, using the nearest periodic image.
    pub fn offset(&self, z: Vec2) -> Vec2 {
        let mut w = z - self.center;
        if let Some(p) = self.period {
            w.x -= p * (w.x / p).round();
        }
        w
    }

    pub fn contains(&self, z: Vec2) -> bool {
        self.offset(z).norm() < self.delta
    }

    /// Hamiltonian vector field `(dG/dt, -dG/ds)` at offset `w`.
    fn field(&self, amplitude: f64, w: &Vec2) -> Vec2 {
        let n = rot(self.displacement_of());
        let r = w.norm();
        let (rho, rho1, _) = BumpProfile::Plateau.eval(r / self.delta);
        let mut g = n * rho;
        if r > 0.0 && rho1 != 0.0 {
            g += w * (n.dot(w) * rho1 / (r * self.delta));
        }
        g *= amplitude;
        Vec2::new(g.y, -g.x)
    }

    fn flow_displacement(&self, amplitude: f64, z: Vec2, time: f64) -> Result<Vec2> {
        let w0 = self.offset(z);
        if amplitude == 0.0 || w0.norm() >= self.delta {
            return Ok(Vec2::zeros());
        }
        let f = |d: &Vector2<f64>| self.field(amplitude, &(w0 + d));
        Stepper::new(FLOW_TOL).integrate(&f, Vector2::zeros(), time)
    }

    /// `psi(z) - z`, integrated directly so that it keeps full relative accuracy.
    pub fn displacement(&self, z: Vec2) -> Result<Vec2> {
        self.flow_displacement(self.amplitude, z, 1.0)
    }

    pub fn apply(&self, z: Vec2) -> Result<Vec2> {
        Ok(z + self.displacement(z)?)
    }

    /// `psi^-1(z)`: the generator is autonomous, so this is its time `-1` flow.
    pub fn invert(&self, z: Vec2) -> Result<Vec2> {
        Ok(z + self.flow_displacement(self.amplitude, z, -1.0)?)
    }

    #[cfg(test)]
    fn jacobian_at(&self, z: Vec2, h: f64) -> Result<crate::Mat2> {
        let dx = (self.displacement(z + Vec2::new(h, 0.0))?
            - self.displacement(z - Vec2::new(h, 0.0))?)
            / (2.0 * h);
        let dy = (self.displacement(z + Vec2::new(0.0, h))?
            - self.displacement(z - Vec2::new(0.0, h))?)
            / (2.0 * h);
        Ok(crate::Mat2::identity() + crate::Mat2::from_columns(&[dx, dy]))
    }

    /// Derivative of the field at offset `w`: `J` times the Hessian of the generator.
    fn field_derivative(&self, amplitude: f64, w: &Vec2) -> crate::Mat2 {
        let n = rot(self.displacement_of());
        let r = w.norm();
        let (_, rho1, rho2) = BumpProfile::Plateau.eval(r / self.delta);
        let mut hess = crate::Mat2::zeros();
        if r > 0.0 && (rho1 != 0.0 || rho2 != 0.0) {
            let u = w / r;
            let nw = n.dot(w);
            let d = self.delta;
            hess += (n * u.transpose() + u * n.transpose()) * (rho1 / d);
            hess += u * u.transpose() * (nw * rho2 / (d * d));
            hess += (crate::Mat2::identity() - u * u.transpose()) * (nw * rho1 / (d * r));
        }
        let j = crate::Mat2::new(0.0, 1.0, -1.0, 0.0);
        j * hess * amplitude
    }

    /// `D psi(z)` from the variational equation along the generator flow.
    pub fn jacobian(&self, z: Vec2) -> Result<crate::Mat2> {
        let w0 = self.offset(z);
        if self.amplitude == 0.0 || w0.norm() >= self.delta {
            return Ok(crate::Mat2::identity());
        }
        let f = |y: &nalgebra::SVector<f64, 6>| {
            let w = w0 + Vec2::new(y[0], y[1]);
            let x = self.field(self.amplitude, &w);
            let m = crate::Mat2::new(y[2], y[3], y[4], y[5]);
            let dm = self.field_derivative(self.amplitude, &w) * m;
            nalgebra::SVector::<f64, 6>::from([
                x.x,
                x.y,
                dm[(0, 0)],
                dm[(0, 1)],
                dm[(1, 0)],
                dm[(1, 1)],
            ])
        };
        let y0 = nalgebra::SVector::<f64, 6>::from([0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
        let y = Stepper::new(FLOW_TOL).integrate(&f, y0, 1.0)?;
        Ok(crate::Mat2::new(y[2], y[3], y[4], y[5]))
    }

    /// Largest `|det D psi - 1|` over an `n x n` grid covering the support.
    pub fn area_defect(&self, n: usize) -> Result<f64> {
        let mut worst = 0.0f64;
        for z in support_grid(self.center, self.delta, n) {
            worst = worst.max((self.jacobian(z)?.determinant() - 1.0).abs());
        }
        Ok(worst)
    }

    /// Sampled `C^r` size of `psi - id`: the largest partial derivative of order at most
    /// `r` of either component, by finite differences on a 64 x 64 support grid.
    pub fn cr_size(&self, r: u32) -> Result<f64> {
        let n = 64;
        let grid = support_grid(self.center, self.delta, n);
        let h = 2.0 * self.delta / (n - 1) as f64;
        let mut comps = [vec![0.0; n * n], vec![0.0; n * n]];
        for (k, z) in grid.iter().enumerate() {
            let d = self.displacement(*z)?;
            comps[0][k] = d.x;
            comps[1][k] = d.y;
        }
        let mut worst = 0.0f64;
        for f in comps.iter() {
            for order in 0..=r as usize {
                for ks in 0..=order {
                    let mut a = Table {
                        n_i: n,
                        n_j: n,
                        v: f.clone(),
                    };
                    for _ in 0..ks {
                        a = a.diff(0, h);
                    }
                    for _ in 0..order - ks {
                        a = a.diff(1, h);
                    }
                    worst = worst.max(a.v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
                }
            }
        }
        Ok(worst)
    }
}

/// Row-major table used for repeated central differences.
struct Table {
    n_i: usize,
    n_j: usize,
    v: Vec<f64>,
}

impl Table {
    fn diff(&self, axis: usize, h: f64) -> Table {
        let (ni, nj) = if axis == 0 {
            (self.n_i - 2, self.n_j)
        } else {
            (self.n_i, self.n_j - 2)
        };
        let mut v = Vec::with_capacity(ni * nj);
        for i in 0..ni {
            for j in 0..nj {
                let (a, b) = if axis == 0 {
                    (self.v[(i + 2) * self.n_j + j], self.v[i * self.n_j + j])
                } else {
                    (self.v[i * self.n_j + j + 2], self.v[i * self.n_j + j])
                };
                v.push((a - b) / (2.0 * h));
            }
        }
        Table {
            n_i: ni,
            n_j: nj,
            v,
        }
    }
}

/// `n x n` points filling the square `[x - delta, x + delta]^2`.
pub fn support_grid(center: Vec2, delta: f64, n: usize) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let a = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let b = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            out.push(center + Vec2::new(a, b) * delta);
        }
    }
    out
}

impl PlanarMap for SymplecticBump {
    fn forward(&self, z: Vec2) -> Vec2 {
        self.apply(z).unwrap_or(z)
    }
    fn try_forward(&self, z: Vec2) -> Result<Vec2> {
        self.apply(z)
    }
    fn inverse(&self, z: Vec2) -> Result<Vec2> {
        self.invert(z)
    }
    fn anchor(&self) -> Vec2 {
        self.center
    }
    fn name(&self) -> String {
        format!(
            "bump(delta = {:.3e}, |y - x| = {:.3e})",
            self.delta,
            self.displacement_of().norm()
        )
    }
}

/// Bump with the default constant and a non-periodic plane.
pub fn make_bump(x: Vec2, y: Vec2, delta: f64, r: u32, eps: f64) -> Result<SymplecticBump> {
    make_bump_with(x, y, delta, r, eps, DEFAULT_BUMP_CONSTANT, None)
}

pub fn make_bump_with(
    x: Vec2,
    y: Vec2,
    delta: f64,
    r: u32,
    eps: f64,
    constant: f64,
    period: Option<f64>,
) -> Result<SymplecticBump> {
    if !(delta > 0.0 && eps > 0.0 && constant > 0.0) {
        return Err(Error::Precondition(format!(
            "bump needs delta, eps, c > 0 (got {delta}, {eps}, {constant})"
        )));
    }
    let dist = (y - x).norm();
    let budget = constant * delta.powi(r as i32) * eps;
    if dist > 0.0 && !(dist < budget) {
        return Err(Error::Precondition(format!(
            "displacement budget violated: d(y, x) = {dist:.3e} is not < c delta^r eps = {constant} * {delta:.3e}^{r} * {eps:.3e} = {budget:.3e}"
        )));
    }
    if dist == 0.0 {
        return Ok(SymplecticBump {
            center: x,
            source: x,
            target: y,
            delta,
            r,
            eps,
            constant,
            amplitude: 0.0,
            period,
        });
    }
    let radius = delta - 0.5 * dist;
    if !(radius > dist) {
        return Err(Error::Precondition(format!(
            "displacement {dist:.3e} is too large for the support radius {delta:.3e}"
        )));
    }
    let center = x + (y - x) * 0.5;
    let mut bump = SymplecticBump {
        center,
        source: x,
        target: y,
        delta: radius,
        r,
        eps,
        constant,
        amplitude: 0.0,
        period,
    };
    // Newton on the amplitude along the displacement direction
    let u = (y - x) / dist;
    let miss = |a: f64| -> Result<f64> { Ok(bump.flow_displacement(a, x, 1.0)?.dot(&u) - dist) };
    let mut a = 1.0;
    for _ in 0..30 {
        let f = miss(a)?;
        if f.abs() < 1e-14 * (1.0 + x.norm()) {
            break;
        }
        let da = 1e-6;
        let slope = (miss(a + da)? - miss(a - da)?) / (2.0 * da);
        if slope.abs() < 1e-300 {
            return Err(Error::Numeric("amplitude tuning stalled".into()));
        }
        a -= f / slope;
    }
    bump.amplitude = a;
    let hit = (bump.apply(x)? - y).norm();
    if hit > 1e-10 {
        return Err(Error::Numeric(format!(
            "bump misses its target by {hit:.3e}"
        )));
    }
    Ok(bump)
}

/// Largest constant `c` (to 2%) for which a displacement `c delta^r eps` keeps the
/// sampled `C^r` size of the bump below `eps`.
pub fn calibrate_constant(delta: f64, r: u32, eps: f64) -> Result<f64> {
    let x = Vec2::zeros();
    let dir = Vec2::new(0.3f64.cos(), 0.3f64.sin());
    let scale = delta.powi(r as i32) * eps;
    let size = |c: f64| -> Result<f64> {
        let d = (c * scale).min(0.45 * delta);
        let b = SymplecticBump {
            center: x,
            source: x,
            target: dir * d,
            delta,
            r,
            eps,
            constant: c,
            amplitude: 1.0,
            period: None,
        };
        b.cr_size(r)
    };
    let (mut lo, mut hi) = (1e-6, 1.0);
    if size(hi)? <= eps {
        return Ok(hi);
    }
    while hi / lo > 1.02 {
        let mid = (lo * hi).sqrt();
        if size(mid)? <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

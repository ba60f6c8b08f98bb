//! The boundary-pair maps `P`, `Q`, their inverses, the one-form `lambda_sigma`
//! and its integral over a fixed-first-point slice.

use super::disc::{BoundaryCovector, Direction, SimpleDisc};
use super::map::TransitionMap;
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// `(foot of alpha, foot of sigma(alpha))`.
pub fn p_map(sigma: &dyn TransitionMap, alpha: &BoundaryCovector) -> Result<(f64, f64)> {
    let (s_out, _) = sigma.apply(alpha.s, alpha.t)?;
    Ok((alpha.s, s_out))
}

/// `(foot of sigma^-1(beta), foot of beta)`.
pub fn q_map(sigma: &dyn TransitionMap, beta: &BoundaryCovector) -> Result<(f64, f64)> {
    let (s_in, _) = sigma.invert(beta.s, beta.t)?;
    Ok((s_in, beta.s))
}

/// Launch angle at `sp` whose image lands at `sq`, with the image.
pub fn solve_angle(sigma: &dyn TransitionMap, sp: f64, sq: f64) -> Result<(f64, f64, f64)> {
    let disc = sigma.disc();
    let l = disc.boundary_length();
    let sp = disc.wrap_s(sp);
    let u = (sq - sp).rem_euclid(l);
    if u == 0.0 || l - u < 1e-15 * l {
        return Err(Error::Diagonal(sp));
    }
    // exit offset in (0, L), unwrapped using the monotone dependence on the angle
    let offset = |chi: f64| -> Result<(f64, f64, f64)> {
        let t = disc.t_from_angle(sp, chi, Direction::Inward);
        let (so, to) = sigma.apply(sp, t)?;
        let mut d = (so - sp).rem_euclid(l);
        if chi > 0.5 * PI && d < 0.25 * l {
            d += l;
        } else if chi < 0.5 * PI && d > 0.75 * l {
            d -= l;
        }
        Ok((d - u, so, to))
    };
    let (mut lo, mut hi) = (0.0, PI);
    let (mut f_lo, mut f_hi) = (-u, l - u);
    let mut chi = PI * u / l;
    let mut prev: Option<(f64, f64)> = None;
    for _ in 0..80 {
        let (f, so, to) = offset(chi)?;
        if f.abs() < 1e-13 * l {
            return Ok((chi, so, to));
        }
        if f < 0.0 {
            lo = chi;
            f_lo = f;
        } else {
            hi = chi;
            f_hi = f;
        }
        let slope = match prev {
            Some((c0, f0)) if c0 != chi && f0 != f => (f - f0) / (chi - c0),
            _ => l / PI,
        };
        prev = Some((chi, f));
        let mut next = chi - f / slope;
        if !(next > lo && next < hi) || slope <= 0.0 {
            // regula falsi keeps the bracket when the secant leaves it
            next = lo - f_lo * (hi - lo) / (f_hi - f_lo);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
        }
        if (hi - lo) < 1e-15 {
            return Ok((chi, so, to));
        }
        chi = next;
    }
    Err(Error::Numeric(format!(
        "no launch angle from s = {sp} to s = {sq} found"
    )))
}

/// The inward covector at `sp` whose image is based at `sq`.
pub fn p_inv(sigma: &dyn TransitionMap, sp: f64, sq: f64) -> Result<BoundaryCovector> {
    let disc = sigma.disc();
    let (chi, _, _) = solve_angle(sigma, sp, sq)?;
    let s = disc.wrap_s(sp);
    let p = disc.covector_from_angle(s, chi, Direction::Inward);
    Ok(BoundaryCovector {
        s,
        t: p.dot(&disc.tangent(s)),
        direction: Direction::Inward,
        p,
    })
}

/// `sigma(p_inv(p, q))`.
pub fn q_inv(sigma: &dyn TransitionMap, sp: f64, sq: f64) -> Result<BoundaryCovector> {
    let disc = sigma.disc();
    let (_, so, to) = solve_angle(sigma, sp, sq)?;
    disc.boundary_covector(so, to, Direction::Outward)
}

/// Coefficients `(-t_in, t_out)` of `ds_p` and `ds_q` in `lambda_sigma` at `(p, q)`.
pub fn lambda_sigma(sigma: &dyn TransitionMap, sp: f64, sq: f64) -> Result<(f64, f64)> {
    let disc = sigma.disc();
    let (chi, _, to) = solve_angle(sigma, sp, sq)?;
    let t_in = disc.t_from_angle(disc.wrap_s(sp), chi, Direction::Inward);
    Ok((-t_in, to))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Tanh–sinh nodes and weights on `[-1, 1]` with step `h` and `k = -m..=m`.
fn tanh_sinh(h: f64, m: i32) -> Vec<(f64, f64)> {
    (-m..=m)
        .map(|k| {
            let x = k as f64 * h;
            let a = 0.5 * PI * x.sinh();
            let node = a.tanh();
            let w = h * 0.5 * PI * x.cosh() / (a.cosh() * a.cosh());
            (node, w)
        })
        .filter(|(x, _)| x.abs() < 1.0)
        .collect()
}

/// Integral of `f` over `[a, b]`: Gauss panels inside, tanh–sinh on the two end panels.
pub fn composite_quadrature(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    n_quad: usize,
) -> Result<f64> {
    let per = 8;
    let panels = (n_quad / per).max(3);
    let gl = gauss_legendre(per);
    let ts = tanh_sinh(0.2, 20);
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + k as f64 * w, a + (k + 1) as f64 * w);
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let rule = if k == 0 || k == panels - 1 { &ts } else { &gl };
        for &(x, wt) in rule {
            total += wt * half * f(mid + half * x)?;
        }
    }
    Ok(total)
}

/// Launch angles within this of tangency are not traced; the end pieces are
/// integrated from the tangential limits instead.
const GRAZING_MARGIN: f64 = 1e-4;

/// `int t_out(p, q) ds_q` over `q` in the boundary minus `p`.
pub fn consistency_integral(sigma: &dyn TransitionMap, sp: f64, n_quad: usize) -> Result<f64> {
    if n_quad < 64 {
        return Err(Error::Precondition(format!("n_quad = {n_quad} below 64")));
    }
    let coarse = slice_integral(sigma, sp, n_quad)?;
    let fine = slice_integral(sigma, sp, 2 * n_quad)?;
    if (fine - coarse).abs() > 1e-5 {
        return Err(Error::Numeric(format!(
            "quadrature refinement changed the integral by {:.3e}",
            (fine - coarse).abs()
        )));
    }
    Ok(fine)
}

fn slice_integral(sigma: &dyn TransitionMap, sp: f64, n_quad: usize) -> Result<f64> {
    let disc: &SimpleDisc = sigma.disc();
    let l = disc.boundary_length();
    let sp = disc.wrap_s(sp);
    let m = GRAZING_MARGIN * l / PI;
    let mut f = |u: f64| -> Result<f64> { Ok(solve_angle(sigma, sp, sp + u)?.2) };
    let body = composite_quadrature(&mut f, m, l - m, n_quad)?;
    // end pieces by trapezoid, with the tangential limit extrapolated linearly
    let (h1, h2) = (f(m)?, f(2.0 * m)?);
    let (t1, t2) = (f(l - m)?, f(l - 2.0 * m)?);
    let head = 0.5 * m * (2.0 * h1 - h2 + h1);
    let tail = 0.5 * m * (2.0 * t1 - t2 + t1);
    Ok(body + head + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::lens::map::{ExactLens, Postcomposed, Shear};
    use crate::Vec2;
    use std::sync::Arc;

    fn unit_lens() -> ExactLens {
        ExactLens::new(
            SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap(),
        )
    }

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let r = gauss_legendre(8);
        let s: f64 = r.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let mut f = |x: f64| Ok(x.exp());
        let v = composite_quadrature(&mut f, 0.0, 1.0, 64).unwrap();
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn euclidean_p_inverse_of_diameter() {
        let lens = unit_lens();
        let a = p_inv(&lens, PI, 0.0).unwrap();
        assert!(a.t.abs() < 1e-12);
        assert!(matches!(p_inv(&lens, 1.0, 1.0), Err(Error::Diagonal(_))));
    }

    #[test]
    fn euclidean_lambda_sigma_closed_form() {
        let lens = unit_lens();
        for psi in [-2.0f64, -0.5, 0.4, 2.9] {
            let (a, b) = lambda_sigma(&lens, PI, psi.rem_euclid(2.0 * PI)).unwrap();
            assert!((a - (psi / 2.0).sin()).abs() < 1e-9);
            assert!((b + (psi / 2.0).sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn euclidean_consistency_integral_vanishes_and_shear_does_not() {
        let lens = unit_lens();
        let v = consistency_integral(&lens, 0.7, 64).unwrap();
        assert!(v.abs() < 1e-7, "{v}");
        let sheared = Postcomposed {
            sigma: Arc::new(lens),
            psi: Arc::new(Shear { shift: 0.01 }),
        };
        let w = consistency_integral(&sheared, 0.7, 64).unwrap();
        assert!((w - 0.01 * 2.0 * PI).abs() < 1e-6, "{w}");
    }
}

//! Crossings of a level along rays from an origin.

use crate::error::{Error, Result};

/// Grid cells scanned along each ray.
pub const RAY_CELLS: usize = 400;

/// Smallest `r` with `f(r) > 0`, doubling from `r0`.
pub fn outer_bound(f: &dyn Fn(f64) -> f64, r0: f64) -> Result<f64> {
    let mut r = r0;
    for _ in 0..60 {
        if f(r) > 0.0 {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(Error::Domain(format!(
        "level unbounded along a ray (no exit before r = {r:.3e})"
    )))
}

/// All sign changes of `f` on `(0, r_max]`, each refined by bisection.
pub fn crossings(f: &dyn Fn(f64) -> f64, r_max: f64, cells: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut a = 0.0;
    let mut fa = f(a);
    for i in 1..=cells {
        let b = r_max * i as f64 / cells as f64;
        let fb = f(b);
        if fa == 0.0 && a > 0.0 {
            out.push(a);
        } else if fa * fb < 0.0 {
            out.push(bisect(f, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    out
}

fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_every_root_of_a_cubic() {
        let f = |r: f64| (r - 0.5) * (r - 1.25) * (r - 2.0);
        let roots = crossings(&f, 3.0, 400);
        assert_eq!(roots.len(), 3);
        for (x, y) in roots.iter().zip([0.5, 1.25, 2.0]) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn outer_bound_doubles() {
        let f = |r: f64| r - 5.0;
        assert_eq!(outer_bound(&f, 1.0).unwrap(), 8.0);
        assert!(outer_bound(&|_| -1.0, 1.0).is_err());
    }
}

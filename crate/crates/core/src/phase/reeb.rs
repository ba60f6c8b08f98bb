//! Reeb vector field of a contact form on an energy level, as a rescaled Hamiltonian field.

use super::hamiltonian::{hamiltonian_vector_field, Hamiltonian};
use super::PhasePoint;
use crate::error::{Error, Result};
use crate::Vec2;

/// A one-form `a . dq + b . dp` on phase space, returned as `(a, b)`.
pub type OneForm<'a> = dyn Fn(&PhasePoint) -> (Vec2, Vec2) + 'a;

/// The Liouville form `p dq`.
pub fn liouville(z: &PhasePoint) -> (Vec2, Vec2) {
    (z.p, Vec2::zeros())
}

/// The symmetric radial form `(p dq - q dp)/2`.
pub fn radial_liouville(z: &PhasePoint) -> (Vec2, Vec2) {
    (z.p * 0.5, -z.q * 0.5)
}

/// `R = X_H / lambda(X_H)`.
pub fn reeb_reparametrize(
    lambda: &OneForm<'_>,
    ham: &dyn Hamiltonian,
    z: &PhasePoint,
) -> Result<(Vec2, Vec2)> {
    let (qd, pd) = hamiltonian_vector_field(ham, z);
    let (a, b) = lambda(z);
    let l = a.dot(&qd) + b.dot(&pd);
    let scale = (qd.norm() + pd.norm()) * (a.norm() + b.norm());
    if !(l.abs() > 1e-12 * scale.max(1e-300)) {
        return Err(Error::Contact(format!(
            "lambda(X_H) = {l:.3e} vanishes at {z:?}"
        )));
    }
    Ok((qd / l, pd / l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::phase::hamiltonian::{ClassicalHamiltonian, GeodesicHamiltonian, Potential};

    /// `d lambda (R, w)` by finite differences of the one-form.
    fn dlambda(lambda: &OneForm<'_>, z: &PhasePoint, r: (Vec2, Vec2), w: (Vec2, Vec2)) -> f64 {
        let e = 1e-6;
        let shift = |v: (Vec2, Vec2), s: f64| PhasePoint {
            q: z.q + v.0 * s,
            p: z.p + v.1 * s,
            ..*z
        };
        let pair = |f: (Vec2, Vec2), v: (Vec2, Vec2)| f.0.dot(&v.0) + f.1.dot(&v.1);
        // d lambda(R, w) = R(lambda(w)) - w(lambda(R)) for constant fields
        let dr = (pair(lambda(&shift(r, e)), w) - pair(lambda(&shift(r, -e)), w)) / (2.0 * e);
        let dw = (pair(lambda(&shift(w, e)), r) - pair(lambda(&shift(w, -e)), r)) / (2.0 * e);
        dr - dw
    }

    #[test]
    fn geodesic_reeb_field_is_hamiltonian_field_on_unit_level() {
        let h = GeodesicHamiltonian::new(FinslerMetric::katok(0.3).unwrap());
        let q = Vec2::new(0.3, 0.1);
        let p = Vec2::new(0.2, 1.0);
        let p = p / h.metric.dual(0, &q, &p);
        let z = PhasePoint::new(q, p);
        let r = reeb_reparametrize(&liouville, &h, &z).unwrap();
        let (qd, pd) = hamiltonian_vector_field(&h, &z);
        assert!((r.0 - qd).norm() < 1e-12 && (r.1 - pd).norm() < 1e-12);
    }

    #[test]
    fn oscillator_reeb_field_satisfies_axioms() {
        let h = ClassicalHamiltonian::harmonic_oscillator();
        let z = PhasePoint::new(Vec2::new(0.6, 0.0), Vec2::new(0.0, 0.8));
        let r = reeb_reparametrize(&radial_liouville, &h, &z).unwrap();
        let (a, b) = radial_liouville(&z);
        assert!((a.dot(&r.0) + b.dot(&r.1) - 1.0).abs() < 1e-15);
        // d lambda(R, w) vanishes on tangent vectors to the level
        let (hq, hp) = h.gradient(&z);
        for w in [
            (Vec2::new(0.0, 1.0), Vec2::zeros()),
            (Vec2::zeros(), Vec2::new(1.0, 0.0)),
            r,
        ] {
            assert!((hq.dot(&w.0) + hp.dot(&w.1)).abs() < 1e-12);
            assert!(dlambda(&radial_liouville, &z, r, w).abs() < 1e-6);
        }
    }

    #[test]
    fn classical_liouville_pairing_is_twice_kinetic() {
        let h = ClassicalHamiltonian::new(
            FinslerMetric::flat_torus(),
            Potential::cosine(0.05, [1.0, 0.0]),
        );
        let z = PhasePoint::new(Vec2::new(0.2, 0.3), Vec2::new(0.3, -0.4));
        let (qd, _) = hamiltonian_vector_field(&h, &z);
        assert!((z.p.dot(&qd) - 2.0 * 0.125).abs() < 1e-15);
        let zero = PhasePoint::new(Vec2::new(0.2, 0.3), Vec2::zeros());
        assert!(matches!(
            reeb_reparametrize(&liouville, &h, &zero),
            Err(Error::Contact(_))
        ));
    }
}

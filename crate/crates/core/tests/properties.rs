use finsler_closing::geometry::FinslerMetric;
use finsler_closing::lens::map::euclidean_chord;
use finsler_closing::lens::{ExactLens, SimpleDisc, TransitionMap};
use finsler_closing::perturb::make_bump;
use finsler_closing::phase::{
    flow_to, legendre, legendre_inverse, GeodesicHamiltonian, Hamiltonian, PhasePoint,
};
use finsler_closing::Vec2;
use proptest::prelude::*;
use std::f64::consts::TAU;

fn metric(family: usize, b: f64) -> FinslerMetric {
    match family {
        0 => FinslerMetric::euclidean(),
        1 => FinslerMetric::round_sphere(),
        2 => FinslerMetric::randers([b, -0.5 * b]),
        _ => FinslerMetric::katok(b.abs()).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norms_are_positively_homogeneous(family in 0usize..4, b in -0.4f64..0.4, x in -0.5f64..0.5, y in -0.5f64..0.5, a in 0.0..TAU, l in 0.01f64..50.0) {
        let m = metric(family, b);
        let q = Vec2::new(x, y);
        let v = Vec2::new(a.cos(), a.sin());
        let one = m.eval(0, &q, &v).unwrap();
        let many = m.eval(0, &q, &(v * l)).unwrap();
        prop_assert!(one > 0.0);
        prop_assert!((many - l * one).abs() <= 1e-12 * l * one);
    }

    #[test]
    fn dual_norm_bounds_pairings(family in 0usize..4, b in -0.4f64..0.4, x in -0.5f64..0.5, y in -0.5f64..0.5, a in 0.0..TAU, c in 0.0..TAU) {
        let m = metric(family, b);
        let q = Vec2::new(x, y);
        let v = Vec2::new(a.cos(), a.sin());
        let alpha = Vec2::new(c.cos(), c.sin());
        // alpha(v) <= phi*(alpha) phi(v), with equality at the Legendre pair
        prop_assert!(alpha.dot(&v) <= m.dual(0, &q, &alpha) * m.eval(0, &q, &v).unwrap() + 1e-12);
        let u = v / m.eval(0, &q, &v).unwrap();
        let l = legendre(&m, 0, &q, &u).unwrap();
        prop_assert!((l.point.p.dot(&u) - 1.0).abs() <= 1e-10);
        prop_assert!((m.dual(0, &q, &l.point.p) - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn legendre_round_trips(family in 0usize..4, b in -0.4f64..0.4, x in -0.5f64..0.5, y in -0.5f64..0.5, a in 0.0..TAU) {
        let m = metric(family, b);
        let q = Vec2::new(x, y);
        let v = Vec2::new(a.cos(), a.sin());
        let u = v / m.eval(0, &q, &v).unwrap();
        let back = legendre_inverse(&m, &legendre(&m, 0, &q, &u).unwrap()).unwrap();
        prop_assert!((back - u).norm() <= 1e-8);
    }

    #[test]
    fn flat_torus_flow_is_a_translation(x in 0.0f64..1.0, y in 0.0f64..1.0, a in 0.0..TAU, t in -20.0f64..20.0) {
        let h = GeodesicHamiltonian::new(FinslerMetric::flat_torus());
        let z = PhasePoint::new(Vec2::new(x, y), Vec2::new(a.cos(), a.sin()));
        let end = flow_to(&h, &z, t, 1e-12).unwrap().to_chart(&h.surface(), 0);
        let miss = h.surface().min_image(&(end.q - z.q - z.p * t)).norm();
        prop_assert!(miss <= 1e-10 * (1.0 + t.abs()));
        prop_assert!((end.p - z.p).norm() <= 1e-13);
    }

    #[test]
    fn euclidean_lens_map_is_the_chord_map(cx in -1.0f64..1.0, cy in -1.0f64..1.0, r in 0.1f64..2.0, s in 0.0f64..1.0, t in -0.98f64..0.98) {
        let disc = SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::new(cx, cy), r).unwrap();
        let s = s * disc.boundary_length();
        let lens = ExactLens::new(disc.clone());
        let (s1, t1) = lens.apply(s, t).unwrap();
        let (s2, t2) = euclidean_chord(&disc, s, t);
        prop_assert!(disc.s_offset(s1, s2).abs() <= 1e-9 * r);
        prop_assert!((t1 - t2).abs() <= 1e-9);
        // inverse undoes the map
        let (s0, t0) = lens.invert(s1, t1).unwrap();
        prop_assert!(disc.s_offset(s0, s).abs() <= 1e-8 * r && (t0 - t).abs() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bumps_hit_targets_and_fix_the_outside(x in -1.0f64..1.0, y in -1.0f64..1.0, a in 0.0..TAU, f in 0.05f64..0.95, zr in 0.0f64..2.0, za in 0.0..TAU) {
        let (delta, eps) = (0.2, 0.05);
        let src = Vec2::new(x, y);
        // below the default budget 0.05 * delta * eps
        let dst = src + Vec2::new(a.cos(), a.sin()) * f * 0.05 * delta * eps;
        let b = make_bump(src, dst, delta, 1, eps).unwrap();
        prop_assert!((b.apply(src).unwrap() - dst).norm() <= 1e-10);
        let z = b.center + Vec2::new(za.cos(), za.sin()) * zr * b.delta;
        let w = b.apply(z).unwrap();
        if zr >= 1.0 {
            prop_assert_eq!(w, z);
        }
        prop_assert!((b.invert(w).unwrap() - z).norm() <= 1e-11);
        prop_assert!((b.jacobian(z).unwrap().determinant() - 1.0).abs() <= 1e-8);
    }
}

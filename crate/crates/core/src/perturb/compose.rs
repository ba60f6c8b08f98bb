//! Bump perturbations of transition maps and the reversible symmetrization.

use super::bump::SymplecticBump;
use crate::error::{Error, Result};
use crate::lens::{Precomposed, SimpleDisc, TransitionMap};
use crate::Vec2;
use std::sync::Arc;

/// Margin kept between a bump's support and the tangential edge of the inward domain.
const DOMAIN_MARGIN: f64 = 1e-3;

/// Check that the bump's support square lies inside the inward `(s, t)` domain of `disc`.
pub fn check_support(disc: &SimpleDisc, psi: &SymplecticBump) -> Result<()> {
    let (x, d) = (psi.center, psi.delta);
    if 2.0 * d >= disc.boundary_length() {
        return Err(Error::Domain(format!(
            "bump radius {d} wraps around the boundary"
        )));
    }
    for k in 0..=16 {
        let s = x.x - d + 2.0 * d * k as f64 / 16.0;
        let (lo, hi) = disc.t_range(disc.wrap_s(s));
        if x.y - d <= lo + DOMAIN_MARGIN || x.y + d >= hi - DOMAIN_MARGIN {
            return Err(Error::Domain(format!(
                "bump support [{:.4}, {:.4}] leaves the inward domain ({lo:.4}, {hi:.4}) at s = {s:.4}",
                x.y - d,
                x.y + d
            )));
        }
    }
    Ok(())
}

/// `sigma o psi^-1`, with the bump made periodic in `s`.
pub fn perturb_lens(sigma: Arc<dyn TransitionMap>, psi: &SymplecticBump) -> Result<Precomposed> {
    check_support(sigma.disc(), psi)?;
    let mut psi = *psi;
    psi.period = Some(sigma.disc().boundary_length());
    Ok(Precomposed {
        sigma,
        psi: Arc::new(psi),
    })
}

/// The covector sign flip `alpha -> -alpha` in boundary coordinates.
fn flip((s, t): (f64, f64)) -> (f64, f64) {
    (s, -t)
}

/// Inward region where a perturbed map differs from the original.
pub type Region = Arc<dyn Fn(f64, f64) -> Result<bool> + Send + Sync>;

/// `alpha -> -sigma_tilde^-1(-alpha)` on the mirror of the touched outward region,
/// `sigma_tilde` elsewhere.
#[derive(Clone)]
pub struct Symmetrized {
    pub sigma_tilde: Arc<dyn TransitionMap>,
    pub sigma: Arc<dyn TransitionMap>,
    pub touched: Region,
}

impl Symmetrized {
    /// Whether the inward covector lies in the mirror of `sigma(touched)`.
    pub fn in_mirror(&self, s: f64, t: f64) -> Result<bool> {
        let (s0, t0) = flip((s, t));
        let (a, b) = self.sigma.invert(s0, t0)?;
        (self.touched)(a, b)
    }
}

impl TransitionMap for Symmetrized {
    fn disc(&self) -> &SimpleDisc {
        self.sigma.disc()
    }
    fn apply(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        if self.in_mirror(s, t)? {
            let (a, b) = flip((s, t));
            Ok(flip(self.sigma_tilde.invert(a, b)?))
        } else {
            self.sigma_tilde.apply(s, t)
        }
    }
    fn invert(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let (a, b) = flip((s, t));
        Ok(flip(self.apply(a, b)?))
    }
    fn name(&self) -> String {
        format!("symmetrized({})", self.sigma_tilde.name())
    }
}

/// Symmetrize a bump perturbation `sigma_tilde = sigma o psi^-1` of a reversible map.
pub fn reversible_symmetrize(
    sigma_tilde: Arc<dyn TransitionMap>,
    sigma: Arc<dyn TransitionMap>,
    psi: &SymplecticBump,
) -> Result<Symmetrized> {
    let mut bump = *psi;
    bump.period = Some(sigma.disc().boundary_length());
    let n = 9;
    let mut samples = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            let b = -1.0 + 2.0 * j as f64 / (n - 1) as f64;
            let z = psi.center + Vec2::new(a, b) * psi.delta;
            if psi.contains(z) {
                samples.push((z.x, z.y));
            }
        }
    }
    let touched: Region = Arc::new(move |s, t| Ok(bump.contains(Vec2::new(s, t))));
    reversible_symmetrize_region(sigma_tilde, sigma, touched, &samples)
}

/// Symmetrize `sigma_tilde`, which must equal `sigma` outside `touched` and map
/// `touched` onto `sigma(touched)`. The samples of `touched` are checked against its mirror.
pub fn reversible_symmetrize_region(
    sigma_tilde: Arc<dyn TransitionMap>,
    sigma: Arc<dyn TransitionMap>,
    touched: Region,
    samples: &[(f64, f64)],
) -> Result<Symmetrized> {
    if !sigma.disc().metric.reversible {
        return Err(Error::Precondition(
            "reversible symmetrization needs a reversible metric".into(),
        ));
    }
    let out = Symmetrized {
        sigma_tilde,
        sigma,
        touched,
    };
    for &(s, t) in samples {
        if out.in_mirror(s, t)? {
            return Err(Error::Domain(format!(
                "mirror of the touched region overlaps it at ({s:.4}, {t:.4})"
            )));
        }
    }
    Ok(out)
}

/// Largest `| -m(-m(alpha)) - alpha |` over the samples.
pub fn reversibility_defect(map: &dyn TransitionMap, samples: &[(f64, f64)]) -> Result<f64> {
    let disc = map.disc();
    let mut worst = 0.0f64;
    for &(s, t) in samples {
        let once = flip(map.apply(s, t)?);
        let twice = flip(map.apply(once.0, once.1)?);
        let e = Vec2::new(disc.s_offset(twice.0, s), twice.1 - t).norm();
        worst = worst.max(e);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::lens::{defect_samples, symplectic_defect, ExactLens};
    use crate::perturb::bump::make_bump_with;

    fn setup() -> (Arc<dyn TransitionMap>, SymplecticBump) {
        let disc =
            SimpleDisc::certified(&FinslerMetric::euclidean(), 0, Vec2::zeros(), 1.0).unwrap();
        let sigma: Arc<dyn TransitionMap> = Arc::new(ExactLens::new(disc));
        let x = Vec2::new(1.0, 0.3);
        let bump = make_bump_with(x, x + Vec2::new(2e-4, 1e-4), 0.1, 0, 0.05, 0.05, None).unwrap();
        (sigma, bump)
    }

    #[test]
    fn identity_bump_leaves_map_unchanged() {
        let (sigma, _) = setup();
        let id = SymplecticBump::identity(Vec2::new(1.0, 0.3), 0.1);
        let tilde = perturb_lens(sigma.clone(), &id).unwrap();
        for (s, t) in [(1.0, 0.3), (4.0, -0.2)] {
            assert_eq!(tilde.apply(s, t).unwrap(), sigma.apply(s, t).unwrap());
        }
    }

    #[test]
    fn perturbation_is_local_and_symplectic() {
        let (sigma, bump) = setup();
        let tilde = perturb_lens(sigma.clone(), &bump).unwrap();
        assert_eq!(
            tilde.apply(3.0, 0.1).unwrap(),
            sigma.apply(3.0, 0.1).unwrap()
        );
        assert!(tilde.apply(1.0, 0.3).unwrap() != sigma.apply(1.0, 0.3).unwrap());
        let samples: Vec<(f64, f64)> = (0..6)
            .map(|k| (0.95 + 0.02 * k as f64, 0.28 + 0.01 * k as f64))
            .collect();
        assert!(symplectic_defect(&tilde, &samples) <= 1e-6);
    }

    #[test]
    fn symmetrized_map_is_reversible() {
        let (sigma, bump) = setup();
        let tilde: Arc<dyn TransitionMap> = Arc::new(perturb_lens(sigma.clone(), &bump).unwrap());
        let hat = reversible_symmetrize(tilde.clone(), sigma.clone(), &bump).unwrap();
        let mut samples = defect_samples(sigma.disc(), 4, 0.3);
        samples.extend([(1.0, 0.3), (1.03, 0.32), (0.97, 0.27)]);
        assert!(reversibility_defect(&hat, &samples).unwrap() <= 1e-6);
        assert!(reversibility_defect(&*tilde, &[(1.0, 0.3)]).unwrap() >= 1e-4);
        assert!(reversibility_defect(&*sigma, &samples).unwrap() <= 1e-9);
    }

    #[test]
    fn support_outside_domain_is_rejected() {
        let (sigma, _) = setup();
        let x = Vec2::new(1.0, 0.95);
        let b = make_bump_with(x, x, 0.1, 0, 0.05, 0.05, None).unwrap();
        assert!(matches!(perturb_lens(sigma, &b), Err(Error::Domain(_))));
    }
}

//! Bump perturbations of section-to-section maps, realized by an override on a
//! section through the middle of the orbit.

use super::bump::SymplecticBump;
use super::hybrid::HybridSystem;
use super::section::{
    planar_jacobian, planar_newton, poincare_hit, poincare_map_with, PoincareOptions, Section,
};
use crate::error::{Error, Result};
use crate::lens::PlanarMap;
use crate::phase::flow::run_flow;
use crate::phase::{hamiltonian_vector_field, FlowOptions, Hamiltonian};
use crate::{Mat2, Vec2};
use std::sync::Arc;

/// `P o psi^-1` between two sections, and the hybrid system realizing it.
#[derive(Clone)]
pub struct PerturbedPoincare {
    pub ham: Arc<dyn Hamiltonian>,
    pub from: Section,
    pub to: Section,
    pub bump: SymplecticBump,
    pub options: PoincareOptions,
    pub mid: Section,
    pub system: HybridSystem,
}

impl PerturbedPoincare {
    pub fn base(&self, w: Vec2) -> Result<Vec2> {
        poincare_map_with(&*self.ham, &self.from, &self.to, w, &self.options)
    }

    /// `P(psi^-1(w))` by direct composition.
    pub fn apply(&self, w: Vec2) -> Result<Vec2> {
        self.base(self.bump.invert(w)?)
    }
}

/// The bump transported to the middle section: `P_m o psi^-1 o P_m^-1` near the image of
/// the bump centre, the identity elsewhere.
pub struct TransportedBump {
    ham: Arc<dyn Hamiltonian>,
    from: Section,
    mid: Section,
    bump: SymplecticBump,
    options: PoincareOptions,
    anchor_image: Vec2,
    inverse_jacobian: Mat2,
    reach: f64,
}

impl TransportedBump {
    fn to_mid(&self, w: Vec2) -> Result<Vec2> {
        poincare_map_with(&*self.ham, &self.from, &self.mid, w, &self.options)
    }
}

impl PlanarMap for TransportedBump {
    fn forward(&self, w: Vec2) -> Vec2 {
        self.try_forward(w).unwrap_or(w)
    }
    fn try_forward(&self, w: Vec2) -> Result<Vec2> {
        if self.mid.offset(w, self.anchor_image).norm() > self.reach {
            return Ok(w);
        }
        let seed = self.bump.center + self.inverse_jacobian * self.mid.offset(w, self.anchor_image);
        let w0 = planar_newton(&|v| self.to_mid(v), w, seed, 1e-13)?;
        if !self.bump.contains(w0) {
            return Ok(w);
        }
        self.to_mid(self.bump.invert(w0)?)
    }
    fn inverse(&self, w: Vec2) -> Result<Vec2> {
        if self.mid.offset(w, self.anchor_image).norm() > self.reach {
            return Ok(w);
        }
        let seed = self.bump.center + self.inverse_jacobian * self.mid.offset(w, self.anchor_image);
        let w0 = planar_newton(&|v| self.to_mid(v), w, seed, 1e-13)?;
        if !self.bump.contains(w0) {
            return Ok(w);
        }
        self.to_mid(self.bump.apply(w0)?)
    }
    fn anchor(&self) -> Vec2 {
        self.anchor_image
    }
    fn name(&self) -> String {
        "transported-bump".into()
    }
}

/// Perturb the map from `from` to `to` by a bump on `from`. The override lives on a
/// section through the orbit of the bump centre at half its transit time.
pub fn perturb_poincare(
    ham: Arc<dyn Hamiltonian>,
    from: &Section,
    to: &Section,
    psi: &SymplecticBump,
    options: &PoincareOptions,
) -> Result<PerturbedPoincare> {
    let (_, transit) = poincare_hit(&*ham, from, to, psi.center, options)?;
    // the bump support must lie in the map's domain
    for k in 0..16 {
        let a = std::f64::consts::TAU * k as f64 / 16.0;
        let w = psi.center + Vec2::new(a.cos(), a.sin()) * psi.delta;
        poincare_map_with(&*ham, from, to, w, options).map_err(|e| {
            Error::Domain(format!("bump support leaves the section map's domain: {e}"))
        })?;
    }
    let z0 = from.lift(&*ham, psi.center)?;
    let opts = FlowOptions {
        tol: options.tol,
        ..Default::default()
    };
    let zm = run_flow(&*ham, &z0, 0.5 * transit, &opts, &[])?.end;
    let zm = zm.to_chart(&ham.surface(), from.chart);
    let mid = if from.spacing.is_some() {
        // on a torus the middle section is a parallel copy so that it closes up too
        Section {
            origin: zm.q,
            ..*from
        }
    } else {
        let v = hamiltonian_vector_field(&*ham, &zm).0;
        Section {
            chart: from.chart,
            origin: zm.q,
            normal: v / v.norm(),
            level: from.level,
            spacing: None,
            half_width: None,
            wrap: None,
        }
    };
    let to_mid = |w: Vec2| poincare_map_with(&*ham, from, &mid, w, options);
    let anchor_image = to_mid(psi.center)?;
    let jac = planar_jacobian(&to_mid, psi.center, 1e-5 * psi.delta.max(1e-3))?;
    let inverse_jacobian = jac
        .try_inverse()
        .ok_or_else(|| Error::Numeric("degenerate section map".into()))?;
    let reach = 1.5 * psi.delta * jac.norm();
    let transported = TransportedBump {
        ham: ham.clone(),
        from: *from,
        mid,
        bump: *psi,
        options: *options,
        anchor_image,
        inverse_jacobian,
        reach,
    };
    let mut system = HybridSystem::new(ham.clone());
    system.add_section(mid, Arc::new(transported));
    Ok(PerturbedPoincare {
        ham,
        from: *from,
        to: *to,
        bump: *psi,
        options: *options,
        mid,
        system,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::perturb::bump::make_bump_with;
    use crate::perturb::hybrid::hybrid_section_map;
    use crate::phase::{ClassicalHamiltonian, Potential};

    fn setup() -> (Arc<dyn Hamiltonian>, Section, Section) {
        let ham: Arc<dyn Hamiltonian> = Arc::new(ClassicalHamiltonian::new(
            FinslerMetric::flat_torus(),
            Potential::cosine(0.05, [1.0, 0.0]),
        ));
        let s0 = Section::new(Vec2::new(0.0, 0.1), Vec2::new(0.0, 1.0), 0.5).unwrap();
        let s1 = Section::new(Vec2::new(0.0, 0.9), Vec2::new(0.0, 1.0), 0.5).unwrap();
        (ham, s0, s1)
    }

    #[test]
    fn hybrid_realizes_the_perturbed_map() {
        let (ham, s0, s1) = setup();
        let x = Vec2::new(0.3, 0.2);
        let bump =
            make_bump_with(x, x + Vec2::new(1e-4, -5e-5), 0.05, 0, 0.05, 0.05, None).unwrap();
        let pp = perturb_poincare(ham, &s0, &s1, &bump, &PoincareOptions::default()).unwrap();
        for w in [x, x + Vec2::new(0.01, 0.02), x + Vec2::new(0.2, 0.0)] {
            let direct = pp.apply(w).unwrap();
            let hybrid = hybrid_section_map(&pp.system, &s0, &s1, w, 50.0).unwrap();
            assert!((direct - hybrid).norm() < 1e-7, "{direct:?} {hybrid:?}");
        }
        let outside = x + Vec2::new(0.2, 0.0);
        assert_eq!(pp.apply(outside).unwrap(), pp.base(outside).unwrap());
        let f = |w: Vec2| pp.apply(w);
        let det = planar_jacobian(&f, x + Vec2::new(0.01, 0.0), 1e-4)
            .unwrap()
            .determinant();
        assert!((det - 1.0).abs() < 1e-6, "{det}");
    }

    #[test]
    fn identity_bump_gives_the_base_map() {
        let (ham, s0, s1) = setup();
        let x = Vec2::new(0.3, 0.2);
        let pp = perturb_poincare(
            ham,
            &s0,
            &s1,
            &SymplecticBump::identity(x, 0.05),
            &PoincareOptions::default(),
        )
        .unwrap();
        assert_eq!(pp.apply(x).unwrap(), pp.base(x).unwrap());
    }
}

//! Transverse sections of an energy level in Darboux coordinates, and the
//! section-to-section maps of a Hamiltonian flow.
//!
//! A section is the line `<n, q - q0> = 0` of a chart crossed with the level
//! `H = h`, taken where the flow crosses it in the direction of `n`. Its
//! coordinates are `u = <e, q - q0>` and `v = <e, p>` for the unit `e` normal
//! to `n`; the symplectic form restricts to `du ^ dv`.

use crate::error::{Error, Result};
use crate::phase::flow::run_flow;
use crate::phase::{
    hamiltonian_vector_field, Event, EventDirection, FlowOptions, Hamiltonian, PhasePoint,
};
use crate::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub chart: u8,
    pub origin: Vec2,
    /// Unit normal in the chart; the flow crosses along it.
    pub normal: Vec2,
    pub level: f64,
    /// Spacing of parallel copies on a periodic surface, if any.
    pub spacing: Option<f64>,
    /// Crossings with `|u|` above this are not on the section.
    pub half_width: Option<f64>,
    /// Period of `u` when the section line closes up on a torus.
    pub wrap: Option<f64>,
}

impl Section {
    pub fn new(origin: Vec2, normal: Vec2, level: f64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !level.is_finite() {
            return Err(Error::Precondition(
                "section needs a nonzero normal and a finite level".into(),
            ));
        }
        Ok(Section {
            chart: 0,
            origin,
            normal: normal / n,
            level,
            spacing: None,
            half_width: None,
            wrap: None,
        })
    }

    pub fn periodic(mut self, spacing: f64) -> Self {
        self.spacing = Some(spacing);
        self
    }

    pub fn in_chart(mut self, chart: u8) -> Self {
        self.chart = chart;
        self
    }

    pub fn with_wrap(mut self, period: f64) -> Self {
        self.wrap = Some(period);
        self
    }

    /// Section of a torus through `q0` normal to a coordinate axis, closed up by the periods.
    pub fn axis(
        surface: &crate::geometry::SurfacePatch,
        q0: Vec2,
        axis: usize,
        sign: f64,
        level: f64,
    ) -> Result<Self> {
        let periods = surface
            .periods()
            .ok_or_else(|| Error::Unsupported("axis sections need a torus".into()))?;
        let mut normal = Vec2::zeros();
        normal[axis] = sign.signum();
        Ok(Section::new(q0, normal, level)?
            .periodic(periods[axis])
            .with_wrap(periods[1 - axis]))
    }

    pub fn with_half_width(mut self, half_width: f64) -> Self {
        self.half_width = Some(half_width);
        self
    }

    /// Whether a crossing at `z` lies on the section proper.
    pub fn accepts(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> bool {
        match self.half_width {
            Some(hw) => {
                self.coordinates(&z.to_chart(&ham.surface(), self.chart))
                    .x
                    .abs()
                    <= hw
            }
            None => true,
        }
    }

    pub fn tangent(&self) -> Vec2 {
        Vec2::new(self.normal.y, -self.normal.x)
    }

    /// Signed distance to the section line (a rising sawtooth when periodic).
    pub fn height(&self, q: &Vec2) -> f64 {
        let d = self.normal.dot(&(q - self.origin));
        match self.spacing {
            Some(w) => d - w * (d / w).round(),
            None => d,
        }
    }

    pub fn coordinates(&self, z: &PhasePoint) -> Vec2 {
        let e = self.tangent();
        let mut u = e.dot(&(z.q - self.origin));
        if let Some(w) = self.wrap {
            u -= w * (u / w).round();
        }
        Vec2::new(u, e.dot(&z.p))
    }

    /// Difference of section coordinates, with `u` taken modulo the wrap.
    pub fn offset(&self, a: Vec2, b: Vec2) -> Vec2 {
        let mut d = a - b;
        if let Some(w) = self.wrap {
            d.x -= w * (d.x / w).round();
        }
        d
    }

    /// The point of the section with coordinates `w`, crossing along the normal.
    pub fn lift(&self, ham: &dyn Hamiltonian, w: Vec2) -> Result<PhasePoint> {
        let e = self.tangent();
        let n = self.normal;
        let q = self.origin + e * w.x;
        let at = |pn: f64| PhasePoint::in_chart(self.chart, q, e * w.y + n * pn);
        let g = |pn: f64| ham.value(&at(pn)) - self.level;
        let dg = |pn: f64| ham.gradient(&at(pn)).1.dot(&n);
        // the crossing root is the larger one of a convex function of pn
        let mut pn = 1.0 + w.y.abs() + self.level.abs().sqrt();
        let mut tries = 0;
        while !(g(pn) > 0.0 && dg(pn) > 0.0) {
            pn = 2.0 * pn + 1.0;
            tries += 1;
            if tries > 60 {
                return Err(Error::Domain(format!(
                    "no crossing covector on the level at section coordinates {w:?}"
                )));
            }
        }
        for _ in 0..100 {
            let step = g(pn) / dg(pn);
            pn -= step;
            if step.abs() < 1e-15 * (1.0 + pn.abs()) {
                break;
            }
        }
        let z = at(pn);
        if !(dg(pn) > 0.0) || (ham.value(&z) - self.level).abs() > 1e-10 * (1.0 + self.level.abs())
        {
            return Err(Error::Domain(format!(
                "section not transverse at coordinates {w:?}"
            )));
        }
        Ok(z)
    }

    /// Crossing speed `dq/dt . n` at `z`; positive on the section's domain.
    pub fn transversality(&self, ham: &dyn Hamiltonian, z: &PhasePoint) -> f64 {
        hamiltonian_vector_field(ham, z).0.dot(&self.normal)
    }

    pub fn event<'a>(&'a self, ham: &'a dyn Hamiltonian) -> Event<'a> {
        let surface = ham.surface();
        let chart = self.chart;
        Event::new(
            move |z: &PhasePoint| self.height(&z.to_chart(&surface, chart).q),
            EventDirection::Rising,
            true,
        )
    }
}

/// Options for section-to-section maps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareOptions {
    pub tol: f64,
    /// Give up after this flow time.
    pub time_cap: f64,
    /// Ignore crossings before this time (for return maps).
    pub min_time: f64,
}

impl Default for PoincareOptions {
    fn default() -> Self {
        PoincareOptions {
            tol: 1e-12,
            time_cap: 100.0,
            min_time: 1e-6,
        }
    }
}

/// First hit on `to` of the orbit through `w` on `from`, with the flow time.
pub fn poincare_hit(
    ham: &dyn Hamiltonian,
    from: &Section,
    to: &Section,
    w: Vec2,
    opts: &PoincareOptions,
) -> Result<(PhasePoint, f64)> {
    let z = from.lift(ham, w)?;
    let speed = hamiltonian_vector_field(ham, &z).0.norm().max(1e-12);
    let max_step = to.spacing.map_or(f64::INFINITY, |w| 0.25 * w / speed);
    let (mut z, mut t, mut min_time) = (z, 0.0, opts.min_time);
    loop {
        let flow_opts = FlowOptions {
            tol: opts.tol,
            min_event_time: min_time,
            max_step,
            ..Default::default()
        };
        let out = run_flow(ham, &z, opts.time_cap - t, &flow_opts, &[to.event(ham)])?;
        t += out.t;
        z = out.end;
        if out.stopped_by.is_none() {
            return Err(Error::Escape(opts.time_cap));
        }
        if to.accepts(ham, &z) {
            return Ok((z.to_chart(&ham.surface(), to.chart), t));
        }
        min_time = 1e-7;
    }
}

pub fn poincare_map(ham: &dyn Hamiltonian, from: &Section, to: &Section, w: Vec2) -> Result<Vec2> {
    poincare_map_with(ham, from, to, w, &PoincareOptions::default())
}

pub fn poincare_map_with(
    ham: &dyn Hamiltonian,
    from: &Section,
    to: &Section,
    w: Vec2,
    opts: &PoincareOptions,
) -> Result<Vec2> {
    let (z, _) = poincare_hit(ham, from, to, w, opts)?;
    Ok(to.coordinates(&z))
}

/// Jacobian of a planar map by central differences with step `h`.
pub fn planar_jacobian(f: &dyn Fn(Vec2) -> Result<Vec2>, w: Vec2, h: f64) -> Result<crate::Mat2> {
    let mut j = crate::Mat2::zeros();
    for k in 0..2 {
        let mut e = Vec2::zeros();
        e[k] = h;
        j.set_column(k, &((f(w + e)? - f(w - e)?) / (2.0 * h)));
    }
    Ok(j)
}

/// Solve `f(w) = target` by Newton iteration from `w0`.
pub fn planar_newton(
    f: &dyn Fn(Vec2) -> Result<Vec2>,
    target: Vec2,
    w0: Vec2,
    tol: f64,
) -> Result<Vec2> {
    let mut w = w0;
    for _ in 0..40 {
        let r = f(w)? - target;
        if r.norm() < tol {
            return Ok(w);
        }
        let j = planar_jacobian(f, w, 1e-6)?;
        w -= j
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular Jacobian in planar Newton".into()))?
            * r;
    }
    Err(Error::Numeric(format!(
        "planar Newton did not converge near {w0:?}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{ClassicalHamiltonian, FlowBox};

    #[test]
    fn flow_box_map_between_parallel_sections_is_identity() {
        let h = FlowBox { index: 1 };
        let s0 = Section::new(Vec2::zeros(), Vec2::new(0.0, 1.0), 1.0).unwrap();
        let s1 = Section::new(Vec2::new(0.0, 1.0), Vec2::new(0.0, 1.0), 1.0).unwrap();
        for w in [Vec2::new(0.3, -0.2), Vec2::new(-1.0, 0.5)] {
            let out = poincare_map(&h, &s0, &s1, w).unwrap();
            assert!((out - w).norm() < 1e-12, "{out:?}");
        }
    }

    #[test]
    fn oscillator_quarter_turn_matches_linear_flow() {
        let h = ClassicalHamiltonian::harmonic_oscillator();
        let level = 0.5;
        let s0 = Section::new(Vec2::zeros(), Vec2::new(1.0, 0.0), level).unwrap();
        let s1 = Section::new(Vec2::zeros(), Vec2::new(0.0, 1.0), level).unwrap();
        let w = Vec2::new(0.4, 0.3);
        let (z, t) = poincare_hit(&h, &s0, &s1, w, &PoincareOptions::default()).unwrap();
        // oracle: q(t) = q0 cos t + p0 sin t with unit frequency
        let z0 = s0.lift(&h, w).unwrap();
        let q = |t: f64| z0.q * t.cos() + z0.p * t.sin();
        let mut tt = t;
        for _ in 0..50 {
            let f = q(tt).y;
            let df = -z0.q.y * tt.sin() + z0.p.y * tt.cos();
            tt -= f / df;
        }
        assert!((t - tt).abs() < 1e-9);
        assert!((z.q - q(tt)).norm() < 1e-9);
    }

    #[test]
    fn section_map_is_area_preserving() {
        let h = ClassicalHamiltonian::harmonic_oscillator();
        let s0 = Section::new(Vec2::zeros(), Vec2::new(1.0, 0.0), 0.5).unwrap();
        let s1 = Section::new(Vec2::zeros(), Vec2::new(1.0, 1.0), 0.5).unwrap();
        let f = |w: Vec2| poincare_map(&h, &s0, &s1, w);
        for w in [Vec2::new(0.2, 0.1), Vec2::new(-0.3, 0.4)] {
            let j = planar_jacobian(&f, w, 1e-4).unwrap();
            assert!((j.determinant() - 1.0).abs() < 1e-6);
        }
    }
}

//! Hamiltonian flow integration with event detection and transparent chart switching.

use super::hamiltonian::{hamiltonian_vector_field, Hamiltonian};
use super::ode::{Dense, Stepper};
use super::PhasePoint;
use crate::error::{Error, Result};
use crate::Vec2;
use nalgebra::Vector4;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventDirection {
    Rising,
    Falling,
    Either,
}

/// A scalar event function; a hit is a sign change of `func` along the flow.
pub struct Event<'a> {
    pub func: Box<dyn Fn(&PhasePoint) -> f64 + 'a>,
    pub direction: EventDirection,
    /// Stop the integration at the first hit.
    pub terminal: bool,
}

impl<'a> Event<'a> {
    pub fn new(
        func: impl Fn(&PhasePoint) -> f64 + 'a,
        direction: EventDirection,
        terminal: bool,
    ) -> Self {
        Event {
            func: Box::new(func),
            direction,
            terminal,
        }
    }

    fn triggered(&self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self.direction {
            EventDirection::Rising => rising,
            EventDirection::Falling => falling,
            EventDirection::Either => rising || falling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit {
    pub index: usize,
    /// Signed flow time of the hit.
    pub t: f64,
    pub z: PhasePoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    /// Relative and absolute per-step error tolerance.
    pub tol: f64,
    pub record: bool,
    pub max_step: f64,
    pub max_steps: usize,
    /// Sign changes before this elapsed time are ignored.
    pub min_event_time: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            tol: 1e-11,
            record: false,
            max_step: f64::INFINITY,
            max_steps: 5_000_000,
            min_event_time: 0.0,
        }
    }
}

impl FlowOptions {
    pub fn with_tol(tol: f64) -> Self {
        FlowOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub end: PhasePoint,
    /// Signed time reached.
    pub t: f64,
    pub hits: Vec<EventHit>,
    /// Index of the terminal event that stopped the run.
    pub stopped_by: Option<usize>,
    pub trajectory: Option<Trajectory>,
    pub max_energy_drift: f64,
    pub steps: usize,
}

/// Recorded orbit samples (the accepted integration steps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<PhasePoint>,
    pub energies: Vec<f64>,
    /// Order of the continuous extension used between samples when integrating.
    pub interpolation_order: u8,
    pub max_energy_drift: f64,
}

fn pack(z: &PhasePoint) -> Vector4<f64> {
    Vector4::new(z.q.x, z.q.y, z.p.x, z.p.y)
}

fn unpack(chart: u8, y: &Vector4<f64>) -> PhasePoint {
    PhasePoint {
        chart,
        q: Vec2::new(y[0], y[1]),
        p: Vec2::new(y[2], y[3]),
    }
}

fn relative_drift(h0: f64, h: f64) -> f64 {
    (h - h0).abs() / h0.abs().max(1e-300)
}

/// Integrate the flow of `ham` from `z0` for signed time `t_end`, watching `events`.
pub fn run_flow(
    ham: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_end: f64,
    opts: &FlowOptions,
    events: &[Event<'_>],
) -> Result<FlowOutcome> {
    if !t_end.is_finite() {
        return Err(Error::Precondition("flow duration must be finite".into()));
    }
    let surface = ham.surface();
    z0.validate(&surface)?;
    let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
    let span = t_end.abs();
    let stepper = Stepper {
        rtol: opts.tol,
        atol: opts.tol,
        h_max: opts.max_step,
        h_min: 1e-13,
    };
    let mut chart = z0.chart;
    let field = |chart: u8, y: &Vector4<f64>| {
        let (qd, pd) = hamiltonian_vector_field(ham, &unpack(chart, y));
        Vector4::new(qd.x, qd.y, pd.x, pd.y) * dir
    };
    let mut y = pack(z0);
    let h0 = ham.value(z0);
    let mut k1 = field(chart, &y);
    let mut h = stepper.initial_step(&y, &k1).min(span.max(1e-300));
    let mut tau = 0.0;
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.func)(z0)).collect();
    let mut hits = Vec::new();
    let mut drift: f64 = 0.0;
    let mut traj = opts.record.then(|| Trajectory {
        times: vec![0.0],
        points: vec![*z0],
        energies: vec![h0],
        interpolation_order: 4,
        max_energy_drift: 0.0,
    });
    let mut steps = 0usize;
    let mut stopped_by = None;
    while tau < span {
        if steps >= opts.max_steps {
            return Err(Error::Numeric(format!(
                "step budget {} exhausted at t = {}, last state {:?}",
                opts.max_steps,
                dir * tau,
                unpack(chart, &y)
            )));
        }
        steps += 1;
        let last = tau + h >= span;
        let hh = if last { span - tau } else { h };
        let f = |yy: &Vector4<f64>| field(chart, yy);
        let trial = stepper.step(&f, &y, &k1, hh);
        if trial.err > 1.0 {
            h = hh * Stepper::factor(trial.err);
            if h < stepper.h_min {
                return Err(Error::Numeric(format!(
                    "step size underflow at t = {}, last good state {:?}",
                    dir * tau,
                    unpack(chart, &y)
                )));
            }
            continue;
        }
        let tau_new = if last { span } else { tau + hh };
        let z_new = unpack(chart, &trial.y1);
        // events: earliest sign change inside this step
        let g_new: Vec<f64> = events.iter().map(|e| (e.func)(&z_new)).collect();
        let mut earliest: Option<(f64, usize, PhasePoint)> = None;
        let mut step_hits = Vec::new();
        if tau_new >= opts.min_event_time {
            for (i, e) in events.iter().enumerate() {
                if !e.triggered(g_prev[i], g_new[i]) {
                    continue;
                }
                let (theta, z) = locate(
                    &f,
                    &y,
                    &k1,
                    &trial.dense,
                    chart,
                    &stepper,
                    &*e.func,
                    g_prev[i],
                    g_new[i],
                );
                if tau + theta * hh < opts.min_event_time {
                    continue;
                }
                step_hits.push((theta, i, z));
                if earliest.is_none_or(|(th, _, _)| theta < th) && e.terminal {
                    earliest = Some((theta, i, z));
                }
            }
        }
        step_hits.sort_by(|a, b| a.0.total_cmp(&b.0));
        let cutoff = earliest.map_or(f64::INFINITY, |(th, _, _)| th);
        for (theta, i, z) in step_hits {
            if theta <= cutoff {
                hits.push(EventHit {
                    index: i,
                    t: dir * (tau + theta * hh),
                    z,
                });
            }
        }
        if let Some((theta, i, z)) = earliest {
            tau += theta * hh;
            y = pack(&z);
            stopped_by = Some(i);
            drift = drift.max(relative_drift(h0, ham.value(&z)));
            if let Some(tr) = traj.as_mut() {
                tr.times.push(dir * tau);
                tr.points.push(z);
                tr.energies.push(ham.value(&z));
            }
            break;
        }
        tau = tau_new;
        y = trial.y1;
        k1 = trial.k7;
        g_prev = g_new;
        let mut z = unpack(chart, &y);
        if surface.needs_rechart(&z.q) {
            chart = 1 - chart;
            z = z.to_chart(&surface, chart);
            y = pack(&z);
            k1 = field(chart, &y);
            g_prev = events.iter().map(|e| (e.func)(&z)).collect();
        }
        let e = ham.value(&z);
        drift = drift.max(relative_drift(h0, e));
        if let Some(tr) = traj.as_mut() {
            tr.times.push(dir * tau);
            tr.points.push(z);
            tr.energies.push(e);
        }
        h = (hh * Stepper::factor(trial.err)).min(stepper.h_max);
    }
    if let Some(tr) = traj.as_mut() {
        tr.max_energy_drift = drift;
    }
    Ok(FlowOutcome {
        end: unpack(chart, &y),
        t: dir * tau,
        hits,
        stopped_by,
        trajectory: traj,
        max_energy_drift: drift,
        steps,
    })
}

/// Root of an event inside an accepted step: Brent on the dense output,
/// then Newton polishing with fresh Runge–Kutta substeps.
#[allow(clippy::too_many_arguments)]
fn locate<F>(
    f: &F,
    y0: &Vector4<f64>,
    k1: &Vector4<f64>,
    dense: &Dense<4>,
    chart: u8,
    stepper: &Stepper,
    g: &dyn Fn(&PhasePoint) -> f64,
    g0: f64,
    g1: f64,
) -> (f64, PhasePoint)
where
    F: Fn(&Vector4<f64>) -> Vector4<f64>,
{
    let gd = |theta: f64| g(&unpack(chart, &dense.eval(theta)));
    let mut theta = brent(&gd, 0.0, 1.0, g0, g1, 1e-15).clamp(0.0, 1.0);
    let sub = |theta: f64| {
        if theta <= 0.0 {
            *y0
        } else {
            stepper.step(f, y0, k1, theta * dense.h).y1
        }
    };
    let mut y = sub(theta);
    let mut val = g(&unpack(chart, &y));
    for _ in 0..4 {
        if val == 0.0 {
            break;
        }
        let d = 1e-7;
        let slope = (gd((theta + d).min(1.0)) - gd((theta - d).max(0.0)))
            / ((theta + d).min(1.0) - (theta - d).max(0.0));
        if slope == 0.0 || !slope.is_finite() {
            break;
        }
        let next = (theta - val / slope).clamp(0.0, 1.0);
        if (next - theta).abs() < 1e-16 {
            break;
        }
        let y_next = sub(next);
        let v_next = g(&unpack(chart, &y_next));
        if v_next.abs() >= val.abs() {
            break;
        }
        theta = next;
        y = y_next;
        val = v_next;
    }
    (theta, unpack(chart, &y))
}

/// Brent's method for a bracketed root.
pub fn brent(
    f: &dyn Fn(f64) -> f64,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

/// Recorded orbit of the flow over signed time `t_end`, with per-step tolerance `tol`.
pub fn integrate_flow(
    ham: &dyn Hamiltonian,
    z0: &PhasePoint,
    t_end: f64,
    tol: f64,
) -> Result<Trajectory> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Precondition(format!(
            "tolerance {tol} outside [1e-13, 1e-6]"
        )));
    }
    let opts = FlowOptions {
        tol,
        record: true,
        ..Default::default()
    };
    Ok(run_flow(ham, z0, t_end, &opts, &[])?
        .trajectory
        .expect("recording requested"))
}

/// End point of the flow (no recording).
pub fn flow_to(ham: &dyn Hamiltonian, z0: &PhasePoint, t_end: f64, tol: f64) -> Result<PhasePoint> {
    Ok(run_flow(ham, z0, t_end, &FlowOptions::with_tol(tol), &[])?.end)
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, PhasePoint)> {
        Some((*self.times.last()?, *self.points.last()?))
    }

    /// Append another trajectory that starts where this one ends.
    pub fn extend_with(&mut self, other: &Trajectory) {
        let skip = usize::from(!self.is_empty() && !other.is_empty());
        self.times.extend_from_slice(&other.times[skip..]);
        self.points.extend_from_slice(&other.points[skip..]);
        self.energies.extend_from_slice(&other.energies[skip..]);
        self.max_energy_drift = self.max_energy_drift.max(other.max_energy_drift);
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        writeln!(w, "t,chart,q1,q2,p1,p2,H")?;
        for ((t, z), e) in self.times.iter().zip(&self.points).zip(&self.energies) {
            writeln!(
                w,
                "{:.16e},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t, z.chart, z.q.x, z.q.y, z.p.x, z.p.y, e
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv(r: &mut dyn BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty trajectory file".into()))??;
        if header.trim() != "t,chart,q1,q2,p1,p2,H" {
            return Err(Error::Parse(format!("unexpected header '{header}'")));
        }
        let mut tr = Trajectory {
            times: vec![],
            points: vec![],
            energies: vec![],
            interpolation_order: 4,
            max_energy_drift: 0.0,
        };
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 7 {
                return Err(Error::Parse(format!("row {}: expected 7 columns", n + 2)));
            }
            let num = |i: usize| {
                cols[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", n + 2)))
            };
            let chart = cols[1]
                .trim()
                .parse::<u8>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", n + 2)))?;
            tr.times.push(num(0)?);
            tr.points.push(PhasePoint {
                chart,
                q: Vec2::new(num(2)?, num(3)?),
                p: Vec2::new(num(4)?, num(5)?),
            });
            tr.energies.push(num(6)?);
        }
        if let Some(&h0) = tr.energies.first() {
            tr.max_energy_drift = tr
                .energies
                .iter()
                .map(|&e| relative_drift(h0, e))
                .fold(0.0, f64::max);
        }
        Ok(tr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FinslerMetric;
    use crate::phase::hamiltonian::{ClassicalHamiltonian, GeodesicHamiltonian};

    #[test]
    fn flat_torus_straight_line() {
        let h = GeodesicHamiltonian::new(FinslerMetric::flat_torus());
        let z0 = PhasePoint::new(Vec2::new(0.25, 0.5), Vec2::new(1.0, 0.0));
        let tr = integrate_flow(&h, &z0, 1.0, 1e-10).unwrap();
        let (t, z) = tr.last().unwrap();
        assert_eq!(t, 1.0);
        assert!((z.q - Vec2::new(1.25, 0.5)).norm() < 1e-12);
        assert!((z.p - z0.p).norm() < 1e-14);
    }

    #[test]
    fn harmonic_oscillator_quarter_turn_event() {
        let h = ClassicalHamiltonian::harmonic_oscillator();
        let z0 = PhasePoint::new(Vec2::new(1.0, 0.0), Vec2::new(0.0, 0.0));
        let ev = Event::new(|z: &PhasePoint| z.q.x, EventDirection::Falling, true);
        let out = run_flow(&h, &z0, 10.0, &FlowOptions::with_tol(1e-12), &[ev]).unwrap();
        assert_eq!(out.stopped_by, Some(0));
        assert!((out.t - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert!(out.end.q.x.abs() < 1e-14);
        assert!((out.end.p.x + 1.0).abs() < 1e-11);
    }

    #[test]
    fn backward_flow_undoes_forward_flow() {
        let h = GeodesicHamiltonian::new(FinslerMetric::katok(0.3).unwrap());
        let z0 = PhasePoint::new(Vec2::new(0.3, 0.2), Vec2::new(0.5, 0.9));
        let z1 = flow_to(&h, &z0, 7.0, 1e-12).unwrap();
        let z2 = flow_to(&h, &z1, -7.0, 1e-12)
            .unwrap()
            .to_chart(&h.surface(), 0);
        assert!((z2.q - z0.q).norm() < 1e-9 && (z2.p - z0.p).norm() < 1e-9);
    }

    #[test]
    fn tolerance_range_is_enforced() {
        let h = GeodesicHamiltonian::new(FinslerMetric::euclidean());
        let z0 = PhasePoint::new(Vec2::zeros(), Vec2::new(1.0, 0.0));
        assert!(integrate_flow(&h, &z0, 1.0, 1e-3).is_err());
        assert!(integrate_flow(&h, &z0, f64::INFINITY, 1e-8).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let h = GeodesicHamiltonian::new(FinslerMetric::round_sphere());
        let z0 = PhasePoint::new(Vec2::new(0.4, 0.0), Vec2::new(0.0, 0.7));
        let tr = integrate_flow(&h, &z0, 3.0, 1e-9).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(&mut std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.points, tr.points);
        assert_eq!(back.times, tr.times);
    }

    #[test]
    fn brent_finds_cosine_root() {
        let r = brent(&|x: f64| x.cos(), 0.0, 3.0, 1.0, 3f64.cos(), 1e-15);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }
}

//! Dormand–Prince 5(4) stepping for autonomous systems, with the standard
//! fourth-order dense output.

use crate::error::{Error, Result};
use nalgebra::SVector;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Dense<const N: usize> {
    pub h: f64,
    r: [SVector<f64, N>; 5],
}

impl<const N: usize> Dense<N> {
    /// State at fraction `theta` in `[0, 1]` of the step.
    pub fn eval(&self, theta: f64) -> SVector<f64, N> {
        let t1 = 1.0 - theta;
        self.r[0] + (self.r[1] + (self.r[2] + (self.r[3] + self.r[4] * t1) * theta) * t1) * theta
    }
}

/// One trial step.
#[derive(Debug, Clone, Copy)]
pub struct Trial<const N: usize> {
    pub y1: SVector<f64, N>,
    /// Derivative at the new point (first stage of the next step).
    pub k7: SVector<f64, N>,
    /// Scaled error norm; the step is acceptable when this is at most 1.
    pub err: f64,
    pub dense: Dense<N>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
}

impl Stepper {
    pub fn new(tol: f64) -> Self {
        Stepper {
            rtol: tol,
            atol: tol,
            h_max: f64::INFINITY,
            h_min: 1e-14,
        }
    }

    pub fn step<const N: usize, F>(
        &self,
        f: &F,
        y: &SVector<f64, N>,
        k1: &SVector<f64, N>,
        h: f64,
    ) -> Trial<N>
    where
        F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
    {
        let k2 = f(&(y + (k1 * A21) * h));
        let k3 = f(&(y + (k1 * A31 + k2 * A32) * h));
        let k4 = f(&(y + (k1 * A41 + k2 * A42 + k3 * A43) * h));
        let k5 = f(&(y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h));
        let k6 = f(&(y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h));
        let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let k7 = f(&y1);
        let e = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
            acc += (e[i] / sc).powi(2);
        }
        let err = (acc / N as f64).sqrt();
        let ydiff = y1 - y;
        let bspl = k1 * h - ydiff;
        let dense = Dense {
            h,
            r: [
                *y,
                ydiff,
                bspl,
                ydiff - k7 * h - bspl,
                (k1 * D1 + k3 * D3 + k4 * D4 + k5 * D5 + k6 * D6 + k7 * D7) * h,
            ],
        };
        Trial {
            y1,
            k7,
            err: if err.is_finite() { err } else { f64::INFINITY },
            dense,
        }
    }

    /// Step-size factor after a trial with the given error norm.
    pub fn factor(err: f64) -> f64 {
        if err == 0.0 {
            return 5.0;
        }
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    }

    /// Heuristic first step magnitude.
    pub fn initial_step<const N: usize>(&self, y: &SVector<f64, N>, k1: &SVector<f64, N>) -> f64 {
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..N {
            let sc = self.atol + self.rtol * y[i].abs();
            d0 += (y[i] / sc).powi(2);
            d1 += (k1[i] / sc).powi(2);
        }
        let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        let tolerance_scale = self.rtol.max(1e-16).powf(0.2);
        h.max(tolerance_scale * 1e-3).min(self.h_max)
    }

    /// Integrate an autonomous system over `[0, t_end]` (`t_end` may be negative).
    pub fn integrate<const N: usize, F>(
        &self,
        f: &F,
        y0: SVector<f64, N>,
        t_end: f64,
    ) -> Result<SVector<f64, N>>
    where
        F: Fn(&SVector<f64, N>) -> SVector<f64, N>,
    {
        let dir = if t_end < 0.0 { -1.0 } else { 1.0 };
        let g = |y: &SVector<f64, N>| f(y) * dir;
        let span = t_end.abs();
        let mut t = 0.0;
        let mut y = y0;
        let mut k1 = g(&y);
        let mut h = self.initial_step(&y, &k1).min(span);
        let mut steps = 0usize;
        while t < span {
            let last = t + h >= span;
            let hh = if last { span - t } else { h };
            let trial = self.step(&g, &y, &k1, hh);
            steps += 1;
            if steps > 10_000_000 {
                return Err(Error::Numeric("step budget exhausted".into()));
            }
            if trial.err <= 1.0 {
                t = if last { span } else { t + hh };
                y = trial.y1;
                k1 = trial.k7;
            }
            h = (hh * Self::factor(trial.err)).min(self.h_max);
            if h < self.h_min {
                return Err(Error::Numeric(format!(
                    "step size underflow at t = {t}, state {:?}",
                    y.as_slice()
                )));
            }
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;

    #[test]
    fn exponential_growth_is_accurate() {
        let s = Stepper::new(1e-12);
        let y = s
            .integrate(&|y: &SVector<f64, 1>| *y, SVector::<f64, 1>::new(1.0), 2.0)
            .unwrap();
        assert!((y[0] - 2f64.exp()).abs() < 1e-10);
        let back = s.integrate(&|y: &SVector<f64, 1>| *y, y, -2.0).unwrap();
        assert!((back[0] - 1.0).abs() < 1e-11);
    }

    #[test]
    fn dense_output_is_fourth_order() {
        // rotation y' = J y; compare the midpoint of a single step with the exact value
        let f = |y: &Vector2<f64>| Vector2::new(-y.y, y.x);
        let s = Stepper::new(1e-8);
        let y0 = Vector2::new(1.0, 0.0);
        let mut errs = vec![];
        for h in [0.2, 0.1] {
            let tr = s.step(&f, &y0, &f(&y0), h);
            let m = tr.dense.eval(0.5);
            let exact = Vector2::new((h / 2.0).cos(), (h / 2.0).sin());
            errs.push((m - exact).norm());
            assert!((tr.dense.eval(1.0) - tr.y1).norm() < 1e-15);
            assert!((tr.dense.eval(0.0) - y0).norm() < 1e-15);
        }
        assert!(errs[0] / errs[1] > 20.0, "{errs:?}");
    }
}

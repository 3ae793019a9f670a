//! Dormand–Prince 5(4) integrator with step-size control and the standard
//! fourth-order continuous extension.
//!
//! States are fixed-size arrays so the inner radial shots (three components)
//! and the outer radius equation (one component) run without allocation.

use std::ops::ControlFlow;

use crate::error::{Error, Result};

pub trait OdeSystem<const N: usize> {
    fn rhs(&mut self, t: f64, y: &[f64; N]) -> Result<[f64; N]>;

    /// Called before every step attempt (accepted or not).
    fn begin_step(&mut self) {}
}

/// Adapts a closure to [`OdeSystem`].
pub struct FnSystem<F>(pub F);

impl<const N: usize, F> OdeSystem<N> for FnSystem<F>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    fn rhs(&mut self, t: f64, y: &[f64; N]) -> Result<[f64; N]> {
        (self.0)(t, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    /// Re-run the initial step selection after landing on each stop, so the
    /// steps taken between two stops depend only on the state at the first.
    pub restart_at_stops: bool,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            initial_step: None,
            restart_at_stops: false,
        }
    }
}

/// One accepted step, carrying enough data to interpolate inside it.
#[derive(Debug, Clone, Copy)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub t1: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    pub dy0: [f64; N],
    pub dy1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> Step<N> {
    pub fn h(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Continuous extension of order four at `t` in `[t0, t1]`.
    pub fn eval(&self, t: f64) -> [f64; N] {
        let h = self.h();
        if h == 0.0 {
            return self.y0;
        }
        let s = (t - self.t0) / h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|i| {
            c[0][i] + s * (c[1][i] + s1 * (c[2][i] + s * (c[3][i] + s1 * c[4][i])))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Completed,
    Stopped,
}

#[derive(Debug, Clone, Copy)]
pub struct Outcome<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

impl Dopri5 {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..Self::default()
        }
    }

    fn error_norm<const N: usize>(&self, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
        let mut acc = 0.0;
        for i in 0..N {
            let sc = self.abs_tol + self.rel_tol * y0[i].abs().max(y1[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        (acc / N as f64).sqrt()
    }

    fn initial_step<const N: usize, S: OdeSystem<N>>(
        &self,
        sys: &mut S,
        t0: f64,
        y0: &[f64; N],
        f0: &[f64; N],
        dir: f64,
        span: f64,
    ) -> Result<f64> {
        let sc: [f64; N] = std::array::from_fn(|i| self.abs_tol + self.rel_tol * y0[i].abs());
        let norm = |v: &[f64; N]| {
            (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / N as f64).sqrt()
        };
        let d0 = norm(y0);
        let d1 = norm(f0);
        let mut h0 = if d0 < 1e-10 || d1 < 1e-10 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h0 = h0.min(self.max_step).min(span);
        let y1 = axpy(y0, dir * h0, &[(1.0, f0)]);
        sys.begin_step();
        let f1 = sys.rhs(t0 + dir * h0, &y1)?;
        let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
        let d2 = norm(&diff) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        Ok((100.0 * h0).min(h1).min(self.max_step).min(span))
    }

    /// Integrates from `t0` to `t_end` (either direction).
    ///
    /// Steps are clipped to land exactly on every time in `stops` (sorted in
    /// the direction of integration). `on_step` sees every accepted step and
    /// may stop the integration early.
    pub fn solve<const N: usize, S, F>(
        &self,
        sys: &mut S,
        t0: f64,
        y0: [f64; N],
        t_end: f64,
        stops: &[f64],
        mut on_step: F,
    ) -> Result<Outcome<N>>
    where
        S: OdeSystem<N>,
        F: FnMut(&Step<N>) -> ControlFlow<()>,
    {
        let mut outcome = Outcome {
            t: t0,
            y: y0,
            accepted: 0,
            rejected: 0,
            evaluations: 0,
            termination: Termination::Completed,
        };
        if t_end == t0 {
            return Ok(outcome);
        }
        let dir = (t_end - t0).signum();
        let span = (t_end - t0).abs();
        let mut t = t0;
        let mut y = y0;
        sys.begin_step();
        let mut k1 = sys.rhs(t, &y)?;
        outcome.evaluations += 1;
        let mut h = match self.initial_step {
            Some(h) => h.min(self.max_step).min(span),
            None => {
                outcome.evaluations += 1;
                self.initial_step(sys, t, &y, &k1, dir, span)?
            }
        };
        let mut stop_idx = 0;
        let mut last_rejected = false;

        loop {
            while stop_idx < stops.len() && dir * (stops[stop_idx] - t) <= 0.0 {
                stop_idx += 1;
            }
            let target = if stop_idx < stops.len() && dir * (stops[stop_idx] - t_end) < 0.0 {
                stops[stop_idx]
            } else {
                t_end
            };
            let remaining = (target - t).abs();
            let mut clipped = false;
            if h >= remaining {
                h = remaining;
                clipped = true;
            } else if h > 0.5 * remaining {
                // avoid leaving a sliver before the target
                h = 0.5 * remaining;
            }
            let min_h = 16.0 * f64::EPSILON * t.abs().max(span.min(1.0));
            if h < min_h {
                return Err(Error::StepUnderflow {
                    t,
                    state: y.to_vec(),
                });
            }
            if outcome.accepted + outcome.rejected >= self.max_steps {
                return Err(Error::TooManySteps {
                    t,
                    max_steps: self.max_steps,
                });
            }

            let hs = dir * h;
            sys.begin_step();
            let y2 = axpy(&y, hs, &[(A21, &k1)]);
            let k2 = sys.rhs(t + C2 * hs, &y2)?;
            let y3 = axpy(&y, hs, &[(A31, &k1), (A32, &k2)]);
            let k3 = sys.rhs(t + C3 * hs, &y3)?;
            let y4 = axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
            let k4 = sys.rhs(t + C4 * hs, &y4)?;
            let y5 = axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
            let k5 = sys.rhs(t + C5 * hs, &y5)?;
            let y6 = axpy(
                &y,
                hs,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            );
            let t_new = if clipped { target } else { t + hs };
            let k6 = sys.rhs(t + hs, &y6)?;
            let y_new = axpy(
                &y,
                hs,
                &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            );
            let k7 = sys.rhs(t_new, &y_new)?;
            outcome.evaluations += 6;

            let err: [f64; N] = std::array::from_fn(|i| {
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
            });
            let err_norm = self.error_norm(&y, &y_new, &err);
            if !err_norm.is_finite() {
                outcome.rejected += 1;
                last_rejected = true;
                h *= FAC_MIN;
                continue;
            }

            let fac = if err_norm == 0.0 {
                FAC_MAX
            } else {
                (SAFETY * err_norm.powf(-0.2)).clamp(FAC_MIN, FAC_MAX)
            };

            if err_norm <= 1.0 {
                let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
                let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - ydiff[i]);
                let cont = [
                    y,
                    ydiff,
                    bspl,
                    std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]),
                    std::array::from_fn(|i| {
                        hs * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i])
                    }),
                ];
                let step = Step {
                    t0: t,
                    t1: t_new,
                    y0: y,
                    y1: y_new,
                    dy0: k1,
                    dy1: k7,
                    cont,
                };
                outcome.accepted += 1;
                t = t_new;
                y = y_new;
                k1 = k7;
                outcome.t = t;
                outcome.y = y;
                if on_step(&step).is_break() {
                    outcome.termination = Termination::Stopped;
                    return Ok(outcome);
                }
                if clipped && target == t_end {
                    return Ok(outcome);
                }
                if clipped && self.restart_at_stops {
                    last_rejected = false;
                    outcome.evaluations += 1;
                    h = match self.initial_step {
                        Some(h0) => h0.min(self.max_step),
                        None => self.initial_step(sys, t, &y, &k1, dir, (t_end - t).abs())?,
                    };
                    continue;
                }
                let grow = if last_rejected { fac.min(1.0) } else { fac };
                last_rejected = false;
                h = (h * grow).min(self.max_step);
            } else {
                outcome.rejected += 1;
                last_rejected = true;
                h *= fac.min(1.0);
            }
        }
    }
}

//! Time integration of the radius equation `dR/dt = R·G(φ(t), R)`.
//!
//! The integrated variable is `u = ln R`, which turns the equation into
//! `du/dt = G(φ(t), e^u)`. `G` is bounded, so `u` has a bounded slope and the
//! radius can never reach zero in finite time; working in `u` also makes the
//! step-size control scale-free in `R`.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::growth::{eval_g, GrowthValue};
use crate::model::{RateModel, Supply, SupplyStats};
use crate::ode::{Dopri5, OdeSystem, Step};
use crate::radial::{Regime, ShootingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Tolerances on `ln R`; `rel_tol` is effectively the relative error in `R`.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Defaults to `ω/16`; larger values are rejected.
    pub max_step: Option<f64>,
    /// Defaults to `10⁻⁴·R0`.
    pub extinction_floor: Option<f64>,
    pub horizon: f64,
    pub stop_on_floor: bool,
    pub max_steps: usize,
    /// Relative slack allowed when checking `R(t) ≥ R0·e^{−νt/3}`.
    pub envelope_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: None,
            extinction_floor: None,
            horizon: 10.0,
            stop_on_floor: false,
            max_steps: 1_000_000,
            envelope_tol: 1e-6,
        }
    }
}

impl IntegratorConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    pub fn check(&self, omega: f64) -> Result<()> {
        for (name, v) in [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("horizon", self.horizon),
            ("envelope_tol", self.envelope_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("integrator.{name} must be positive, got {v}")));
            }
        }
        if let Some(h) = self.max_step {
            if !(h > 0.0) || h > omega / 16.0 * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "integrator.max_step = {h} must be positive and at most ω/16 = {}",
                    omega / 16.0
                )));
            }
        }
        if let Some(f) = self.extinction_floor {
            if !(f > 0.0) {
                return Err(Error::Config(format!("integrator.extinction_floor must be positive, got {f}")));
            }
        }
        Ok(())
    }

    fn max_step(&self, omega: f64) -> f64 {
        self.max_step.unwrap_or(omega / 16.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    ExtinctionFloor,
    RegimeSwitch,
    PeriodBoundary,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::ExtinctionFloor => "ExtinctionFloor",
            EventKind::RegimeSwitch => "RegimeSwitch",
            EventKind::PeriodBoundary => "PeriodBoundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// Samples at every accepted step, plus the integrator's continuous extension
/// of `ln R` on each step for dense output.
#[derive(Debug, Clone)]
pub struct GrowthTrajectory {
    pub times: Vec<f64>,
    pub radii: Vec<f64>,
    pub g_values: Vec<f64>,
    pub phi: Vec<f64>,
    pub regimes: Vec<Regime>,
    pub events: Vec<Event>,
    pub lower_envelope_ok: bool,
    /// `min_i [ln R(t_i) − ln R0 + ν(t_i − t_0)/3]`; nonnegative in exact arithmetic.
    pub lower_envelope_margin: f64,
    steps: Vec<Step<1>>,
}

impl GrowthTrajectory {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }

    pub fn final_radius(&self) -> f64 {
        *self.radii.last().expect("trajectory has samples")
    }

    /// Dense output from the fourth-order continuous extension of each step;
    /// clamps outside the integrated span and is exact at the samples.
    pub fn radius_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.radii[0];
        }
        if t >= self.times[n - 1] {
            return self.radii[n - 1];
        }
        let i = self.times.partition_point(|s| *s <= t) - 1;
        if t == self.times[i] {
            return self.radii[i];
        }
        self.steps[i].eval(t)[0].exp()
    }

    pub fn events_of(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

type MemoKey = (i64, i64);

/// Stage-level memo of `G`, cleared at the start of every step attempt.
#[derive(Default)]
struct StageMemo {
    entries: Vec<(MemoKey, GrowthValue)>,
}

const MEMO_QUANTUM: f64 = 1e-12;

fn memo_key(phi: f64, radius: f64) -> MemoKey {
    (
        (phi.ln() / MEMO_QUANTUM).round() as i64,
        (radius.ln() / MEMO_QUANTUM).round() as i64,
    )
}

impl StageMemo {
    fn get(&self, key: MemoKey) -> Option<GrowthValue> {
        self.entries.iter().find(|e| e.0 == key).map(|e| e.1)
    }
}

struct RadiusRhs<'a> {
    model: &'a RateModel,
    supply: &'a Supply,
    shooting: &'a ShootingConfig,
    memo: &'a RefCell<StageMemo>,
}

impl RadiusRhs<'_> {
    fn growth(&self, t: f64, u: f64) -> Result<GrowthValue> {
        let phi = self.supply.eval(t);
        let r = u.exp();
        let key = memo_key(phi, r);
        if let Some(v) = self.memo.borrow().get(key) {
            return Ok(v);
        }
        let v = eval_g(self.model, phi, r, self.shooting)?;
        self.memo.borrow_mut().entries.push((key, v));
        Ok(v)
    }
}

impl OdeSystem<1> for RadiusRhs<'_> {
    fn rhs(&mut self, t: f64, y: &[f64; 1]) -> Result<[f64; 1]> {
        Ok([self.growth(t, y[0])?.value])
    }

    fn begin_step(&mut self) {
        self.memo.borrow_mut().entries.clear();
    }
}

/// Integrates from `R(0) = r0` to `cfg.horizon`.
pub fn integrate(
    model: &RateModel,
    supply: &Supply,
    r0: f64,
    cfg: &IntegratorConfig,
    shooting: &ShootingConfig,
) -> Result<GrowthTrajectory> {
    integrate_from(model, supply, 0.0, r0, cfg.horizon, cfg, shooting)
}

/// Integrates from `R(t0) = r0` to `t_end`; `cfg.horizon` is ignored.
pub fn integrate_from(
    model: &RateModel,
    supply: &Supply,
    t0: f64,
    r0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    shooting: &ShootingConfig,
) -> Result<GrowthTrajectory> {
    cfg.check(supply.omega)?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::Domain(format!("initial radius must be positive, got {r0}")));
    }
    if !(t_end > t0) {
        return Err(Error::Precondition(format!("end time {t_end} must exceed start time {t0}")));
    }
    let omega = supply.omega;
    let floor = cfg.extinction_floor.unwrap_or(1e-4 * r0);
    let memo = RefCell::new(StageMemo::default());
    let mut rhs = RadiusRhs {
        model,
        supply,
        shooting,
        memo: &memo,
    };

    let first = rhs.growth(t0, r0.ln())?;
    let mut traj = GrowthTrajectory {
        times: vec![t0],
        radii: vec![r0],
        g_values: vec![first.value],
        phi: vec![supply.eval(t0)],
        regimes: vec![first.regime],
        events: Vec::new(),
        lower_envelope_ok: true,
        lower_envelope_margin: 0.0,
        steps: Vec::new(),
    };
    let mut below_floor = r0 < floor;
    if below_floor {
        traj.events.push(Event {
            time: t0,
            kind: EventKind::ExtinctionFloor,
        });
    }

    let first_period = (t0 / omega).floor() as i64 + 1;
    let stops: Vec<f64> = (first_period..)
        .map(|n| n as f64 * omega)
        .take_while(|t| *t <= t_end)
        .collect();

    let solver = Dopri5 {
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        max_step: cfg.max_step(omega),
        max_steps: cfg.max_steps,
        initial_step: None,
        // makes the numerical period map a function of R(nω) alone
        restart_at_stops: true,
    };
    let mut failure: Option<Error> = None;
    let result = solver.solve(&mut rhs, t0, [r0.ln()], t_end, &stops, |s: &Step<1>| {
        let t = s.t1;
        let phi = supply.eval(t);
        let radius = s.y1[0].exp();
        let cached = memo.borrow().get(memo_key(phi, radius));
        let gv = match cached {
            Some(v) => v,
            None => match eval_g(model, phi, radius, shooting) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return ControlFlow::Break(());
                }
            },
        };
        let prev_regime = *traj.regimes.last().expect("nonempty");
        traj.steps.push(*s);
        traj.times.push(t);
        traj.radii.push(radius);
        traj.g_values.push(gv.value);
        traj.phi.push(phi);
        traj.regimes.push(gv.regime);
        if gv.regime != prev_regime {
            traj.events.push(Event {
                time: t,
                kind: EventKind::RegimeSwitch,
            });
        }
        if stops.binary_search_by(|x| x.total_cmp(&t)).is_ok() {
            traj.events.push(Event {
                time: t,
                kind: EventKind::PeriodBoundary,
            });
        }
        if !below_floor && radius < floor {
            below_floor = true;
            traj.events.push(Event {
                time: floor_crossing(s, floor.ln()),
                kind: EventKind::ExtinctionFloor,
            });
            if cfg.stop_on_floor {
                return ControlFlow::Break(());
            }
        } else if below_floor && radius >= floor {
            below_floor = false;
        }
        ControlFlow::Continue(())
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if let Err(e) = result {
        return Err(match e {
            Error::StepUnderflow { t, state } => Error::StepUnderflow {
                t,
                state: state.iter().map(|u| u.exp()).collect(),
            },
            other => other,
        });
    }
    traj.events.sort_by(|a, b| a.time.total_cmp(&b.time));

    let (u0, nu) = (r0.ln(), model.nu);
    traj.lower_envelope_margin = traj
        .times
        .iter()
        .zip(&traj.radii)
        .map(|(t, r)| r.ln() - u0 + nu * (t - t0) / 3.0)
        .fold(f64::INFINITY, f64::min);
    traj.lower_envelope_ok = traj.lower_envelope_margin >= (1.0 - cfg.envelope_tol).ln();
    Ok(traj)
}

/// Time within the step at which `ln R` crosses `level`, by bisection on the
/// step's continuous extension.
fn floor_crossing(s: &Step<1>, level: f64) -> f64 {
    let (mut lo, mut hi) = (s.t0, s.t1);
    if s.y0[0] < level {
        return lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s.eval(mid)[0] >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// `R(nω)` for every `nω` inside the trajectory's span, starting at its first
/// sample (`n = 0` returns `R0` exactly).
pub fn period_samples(traj: &GrowthTrajectory, omega: f64) -> Vec<f64> {
    let start = traj.start();
    let mut out = vec![traj.radii[0]];
    let mut n = 1;
    loop {
        let t = start + n as f64 * omega;
        if t > traj.end() * (1.0 + 1e-14) {
            break;
        }
        match traj.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => out.push(traj.radii[i]),
            Err(_) => out.push(traj.radius_at(t)),
        }
        n += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    /// `exp((2S* − S_*)/3)`
    pub factor: f64,
    /// Largest `R(t)/(R(a)·factor)` over sample pairs with `a ≤ t ≤ a + ω`.
    pub window_worst_ratio: f64,
    pub window_ok: bool,
    /// Largest `R(t)/(R(a)·factor)` over all sample pairs `a ≤ t`; only
    /// meaningful (and only reported) when `S̄ ≤ 0`.
    pub global_worst_ratio: Option<f64>,
    pub global_ok: Option<bool>,
    pub tolerance: f64,
}

/// Checks `R(t) ≤ R(a)·exp((2S* − S_*)/3)` on the trajectory samples.
///
/// Within one period of `a` the bound holds for every supply. Over longer
/// spans it needs `S̄ ≤ 0`; with `S̄ > 0` the radius may grow by more than the
/// factor across several periods, so that part is reported only for `S̄ ≤ 0`.
pub fn envelope_bound_check(traj: &GrowthTrajectory, stats: &SupplyStats, omega: f64, tol: f64) -> EnvelopeReport {
    let factor = stats.envelope_factor();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut window_worst = 0.0f64;
    let mut running_min = f64::INFINITY;
    let mut global_worst = 0.0f64;
    for (j, (&t, &r)) in traj.times.iter().zip(&traj.radii).enumerate() {
        while window.back().is_some_and(|&k| traj.radii[k] >= r) {
            window.pop_back();
        }
        window.push_back(j);
        while window.front().is_some_and(|&k| traj.times[k] < t - omega * (1.0 + 1e-12)) {
            window.pop_front();
        }
        let wmin = traj.radii[*window.front().expect("contains j")];
        window_worst = window_worst.max(r / (wmin * factor));
        running_min = running_min.min(r);
        global_worst = global_worst.max(r / (running_min * factor));
    }
    let global = stats.s_bar <= 0.0;
    EnvelopeReport {
        factor,
        window_worst_ratio: window_worst,
        window_ok: window_worst <= 1.0 + tol,
        global_worst_ratio: global.then_some(global_worst),
        global_ok: global.then_some(global_worst <= 1.0 + tol),
        tolerance: tol,
    }
}

/// `y(t_i) = ln(R(t_i)/R_per(t_i))`.
pub fn log_ratio(traj: &GrowthTrajectory, orbit: &crate::periodic::PeriodicOrbit) -> Vec<f64> {
    traj.times
        .iter()
        .zip(&traj.radii)
        .map(|(t, r)| (r / orbit.radius_at(*t)).ln())
        .collect()
}

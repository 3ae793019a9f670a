//! Period map, periodic orbit, long-run classification and convergence study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate_from, GrowthTrajectory, IntegratorConfig};
use crate::error::{Error, Result};
use crate::growth::stationary_radius;
use crate::model::{supply_stats, RateModel, Supply, SupplyStats};
use crate::quadrature::QuadratureConfig;
use crate::radial::ShootingConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicConfig {
    /// Absolute tolerance on `|R_{n+1} − R_n|`.
    pub fp_tol: f64,
    pub max_iterations: usize,
    /// Try a damped secant step on `P(R) − R` once three monotone iterates exist.
    pub secant: bool,
    /// The secant step is shortened by this fraction so it stays on the
    /// current side of the fixed point.
    pub secant_damping: f64,
    /// Uniform samples of the orbit over one period (inclusive of both ends).
    pub orbit_samples: usize,
    /// `S̄` values within this distance of zero (and within the quadrature
    /// error) count as `S̄ = 0`.
    pub zero_tol: f64,
}

impl Default for PeriodicConfig {
    fn default() -> Self {
        Self {
            fp_tol: 1e-9,
            max_iterations: 500,
            secant: true,
            secant_damping: 1e-3,
            orbit_samples: 257,
            zero_tol: 1e-12,
        }
    }
}

/// All numerical settings for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub shooting: ShootingConfig,
    pub integrator: IntegratorConfig,
    pub quadrature: QuadratureSettings,
    pub periodic: PeriodicConfig,
}

/// Serializable mirror of [`QuadratureConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSettings {
    pub initial_panels: usize,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        Self {
            initial_panels: q.initial_panels,
            rel_tol: q.rel_tol,
            max_panels: q.max_panels,
        }
    }
}

impl From<QuadratureSettings> for QuadratureConfig {
    fn from(q: QuadratureSettings) -> Self {
        QuadratureConfig {
            initial_panels: q.initial_panels,
            rel_tol: q.rel_tol,
            max_panels: q.max_panels,
        }
    }
}

impl SolverConfig {
    pub fn check(&self, omega: f64) -> Result<()> {
        self.shooting.check()?;
        self.integrator.check(omega)?;
        let q = &self.quadrature;
        if q.initial_panels < 2 || q.max_panels < q.initial_panels || !(q.rel_tol > 0.0) {
            return Err(Error::Config(format!("invalid quadrature settings {q:?}")));
        }
        let p = &self.periodic;
        if !(p.fp_tol > 0.0) || p.max_iterations == 0 || p.orbit_samples < 2 || !(p.zero_tol >= 0.0) {
            return Err(Error::Config(format!("invalid periodic settings {p:?}")));
        }
        if !(0.0..1.0).contains(&p.secant_damping) {
            return Err(Error::Config("periodic.secant_damping must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        self.quadrature.into()
    }
}

/// `P(R0) = R(ω; R0)`.
pub fn poincare_map(model: &RateModel, supply: &Supply, r0: f64, cfg: &SolverConfig) -> Result<f64> {
    Ok(one_period(model, supply, r0, cfg)?.final_radius())
}

fn one_period(model: &RateModel, supply: &Supply, r0: f64, cfg: &SolverConfig) -> Result<GrowthTrajectory> {
    let integ = IntegratorConfig {
        stop_on_floor: false,
        ..cfg.integrator
    };
    integrate_from(model, supply, 0.0, r0, supply.omega, &integ, &cfg.shooting)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterateKind {
    Plain,
    Secant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub n: usize,
    pub radius: f64,
    /// `|P(R_n) − R_n|`
    pub residual: f64,
    pub kind: IterateKind,
}

#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub fixed_point: f64,
    pub omega: f64,
    /// Uniform `(t, R_per(t))` samples over `[0, ω]`.
    pub samples: Vec<(f64, f64)>,
    pub iteration_log: Vec<Iterate>,
    /// `R⁺`, the stationary radius at peak supply.
    pub upper_bound: f64,
    /// `|P(R^#) − R^#|`
    pub closure: f64,
    trajectory: GrowthTrajectory,
}

impl PeriodicOrbit {
    /// `R_per(t)`, extended periodically.
    pub fn radius_at(&self, t: f64) -> f64 {
        let tau = t.rem_euclid(self.omega);
        self.trajectory.radius_at(tau)
    }

    /// True if the logged radii move in one direction only.
    pub fn iterates_monotone(&self) -> bool {
        let d: Vec<f64> = self
            .iteration_log
            .windows(2)
            .map(|w| w[1].radius - w[0].radius)
            .collect();
        d.iter().all(|x| *x >= 0.0) || d.iter().all(|x| *x <= 0.0)
    }
}

/// Finds the periodic orbit by iterating the period map from `R⁺`.
pub fn find_periodic_orbit(model: &RateModel, supply: &Supply, cfg: &SolverConfig) -> Result<PeriodicOrbit> {
    find_periodic_orbit_from(model, supply, None, cfg)
}

/// As [`find_periodic_orbit`], starting from `start` instead of `R⁺`.
pub fn find_periodic_orbit_from(
    model: &RateModel,
    supply: &Supply,
    start: Option<f64>,
    cfg: &SolverConfig,
) -> Result<PeriodicOrbit> {
    cfg.check(supply.omega)?;
    let stats = supply_stats(model, supply, &cfg.quadrature())?;
    if !(stats.s_bar > 0.0) {
        return Err(Error::Precondition(format!(
            "a positive periodic orbit needs S̄ > 0, got {}",
            stats.s_bar
        )));
    }
    let upper = stationary_radius(model, supply.max_value(), &cfg.shooting)?;
    let start = start.unwrap_or(upper);
    if !(start > 0.0) {
        return Err(Error::Domain(format!("start radius must be positive, got {start}")));
    }
    let pc = &cfg.periodic;
    let map = |r: f64| poincare_map(model, supply, r, cfg);

    let mut log: Vec<Iterate> = Vec::new();
    // (R_n, P(R_n) − R_n) of the accepted iterates
    let mut hist: Vec<(f64, f64)> = Vec::new();
    let mut r = start;
    let mut res = map(r)? - r;
    let mut kind = IterateKind::Plain;
    let mut iterations = 0;
    loop {
        log.push(Iterate {
            n: log.len(),
            radius: r,
            residual: res.abs(),
            kind,
        });
        hist.push((r, res));
        if res.abs() < pc.fp_tol {
            break;
        }
        iterations += 1;
        if iterations >= pc.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                residual: res.abs(),
            });
        }

        let plain = r + res;
        let mut next = None;
        if pc.secant && hist.len() >= 3 {
            let (r1, f1) = hist[hist.len() - 2];
            let (r2, f2) = hist[hist.len() - 1];
            if f2 != f1 {
                let target = r2 - f2 * (r2 - r1) / (f2 - f1);
                let cand = r2 + (1.0 - pc.secant_damping) * (target - r2);
                // only jump further in the current direction of travel
                if cand.is_finite() && cand > 0.0 && (cand - plain) * res > 0.0 {
                    let cand_res = map(cand)? - cand;
                    if cand_res.signum() == res.signum() || cand_res.abs() < pc.fp_tol {
                        next = Some((cand, cand_res, IterateKind::Secant));
                    }
                }
            }
        }
        let (nr, nres, nkind) = match next {
            Some(x) => x,
            None => (plain, map(plain)? - plain, IterateKind::Plain),
        };
        r = nr;
        res = nres;
        kind = nkind;
    }

    let fixed_point = r + res;
    let trajectory = one_period(model, supply, fixed_point, cfg)?;
    let closure = (trajectory.final_radius() - fixed_point).abs();
    let n = pc.orbit_samples;
    let samples = (0..n)
        .map(|i| {
            let t = supply.omega * i as f64 / (n - 1) as f64;
            (t, trajectory.radius_at(t))
        })
        .collect();
    Ok(PeriodicOrbit {
        fixed_point,
        omega: supply.omega,
        samples,
        iteration_log: log,
        upper_bound: upper,
        closure,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Extinction,
    PersistentPeriodic,
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub s_bar: f64,
    pub verdict: Verdict,
    pub stats: SupplyStats,
    pub orbit: Option<PeriodicOrbit>,
}

/// Decides the sign of `S̄` against its quadrature error. With `band =
/// max(zero_tol, quad_error)`: above `band` is persistence, below `−band`
/// extinction. Inside the band, `S̄ = 0` is accepted (extinction) only when the
/// quadrature is resolved to `zero_tol`; otherwise the sign is unknown.
pub fn verdict_from_stats(stats: &SupplyStats, zero_tol: f64) -> Result<Verdict> {
    let band = zero_tol.max(stats.quad_error);
    if stats.s_bar > band {
        Ok(Verdict::PersistentPeriodic)
    } else if stats.s_bar < -band || stats.quad_error <= zero_tol {
        Ok(Verdict::Extinction)
    } else {
        Err(Error::AmbiguousClassification {
            s_bar_abs: stats.s_bar.abs(),
            quad_error: stats.quad_error,
        })
    }
}

pub fn classify(model: &RateModel, supply: &Supply, cfg: &SolverConfig) -> Result<Classification> {
    cfg.check(supply.omega)?;
    let stats = supply_stats(model, supply, &cfg.quadrature())?;
    let verdict = verdict_from_stats(&stats, cfg.periodic.zero_tol)?;
    let orbit = match verdict {
        Verdict::PersistentPeriodic => Some(find_periodic_orbit(model, supply, cfg)?),
        Verdict::Extinction => None,
    };
    Ok(Classification {
        s_bar: stats.s_bar,
        verdict,
        stats,
        orbit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub r0: f64,
    /// `max |R(t) − R_per(t)|` over each period.
    pub per_period_sup: Vec<f64>,
    /// Per-period sups never grow (beyond `10·fp_tol`) after the burn-in.
    pub monotone_decay: bool,
    pub max_radius: f64,
    /// `max R(t) ≤ max(R0, R⁺)` within the integrator tolerance.
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub fixed_point: f64,
    pub periods: usize,
    pub burn_in: usize,
    pub runs: Vec<ConvergenceRun>,
}

const SUP_SAMPLES: usize = 64;

/// Integrates from each `R0` for `periods` periods and measures the distance
/// to the orbit period by period. Runs are independent and execute in parallel.
pub fn convergence_study(
    model: &RateModel,
    supply: &Supply,
    orbit: &PeriodicOrbit,
    r0_list: &[f64],
    periods: usize,
    burn_in: usize,
    cfg: &SolverConfig,
) -> Result<ConvergenceReport> {
    cfg.check(supply.omega)?;
    let omega = supply.omega;
    let fp_tol = cfg.periodic.fp_tol;
    let slack = 1.0 + 10.0 * cfg.integrator.rel_tol;
    let integ = IntegratorConfig {
        stop_on_floor: false,
        ..cfg.integrator
    };
    let runs = r0_list
        .par_iter()
        .map(|&r0| {
            let traj = integrate_from(model, supply, 0.0, r0, periods as f64 * omega, &integ, &cfg.shooting)?;
            let per_period_sup: Vec<f64> = (0..periods)
                .map(|n| {
                    (0..=SUP_SAMPLES)
                        .map(|k| {
                            let t = (n as f64 + k as f64 / SUP_SAMPLES as f64) * omega;
                            (traj.radius_at(t) - orbit.radius_at(t)).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .collect();
            let monotone_decay = per_period_sup
                .windows(2)
                .skip(burn_in)
                .all(|w| w[1] <= w[0] + 10.0 * fp_tol);
            let max_radius = traj.radii.iter().copied().fold(0.0, f64::max);
            Ok(ConvergenceRun {
                r0,
                per_period_sup,
                monotone_decay,
                max_radius,
                bounded: max_radius <= r0.max(orbit.upper_bound) * slack,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        fixed_point: orbit.fixed_point,
        periods,
        burn_in,
        runs,
    })
}

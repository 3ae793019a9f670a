//! Stationary radial nutrient profile on a ball of radius `R`.
//!
//! `σ'' + (2/r)σ' = f(σ)H(σ − σ_D)` on `(0, R)`, `σ'(0) = 0`,
//! `σ'(R) + β(σ(R) − σ̄) = 0`.
//!
//! Solved by shooting. In the non-necrotic regime the unknown is the centre
//! value `c`; in the necrotic regime it is the interface `ρ`, where the live
//! profile `V` leaves the plateau `σ_D` with zero slope. Both shots integrate
//! the smooth equation `σ'' + (2/r)σ' = f(σ)` together with the live-region
//! growth integral `J = R⁻³∫ g(σ) r² dr`, so a single solve yields both the
//! profile and the growth functional.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::ode::{Dopri5, FnSystem, Step};
use crate::roots::{solve_with_fallback, Bisection};

const FALLBACK_POINTS: usize = 64;
const MIN_GRID_POINTS: usize = 256;
const PLATEAU_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Bracket width at which bisection on `c`, `ρ` or `R` stops.
    pub bisection_tol: f64,
    pub ode_rel_tol: f64,
    pub ode_abs_tol: f64,
    pub max_bisection_iters: usize,
    /// Startup series half-width, relative: the series covers
    /// `series_radius·max(1, R)` (further capped at `10⁻³ρ` at an interface).
    pub series_radius: f64,
    /// Largest radius searched when bracketing `R_c` or a stationary radius.
    pub max_radius: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-10,
            ode_rel_tol: 1e-10,
            ode_abs_tol: 1e-12,
            max_bisection_iters: 200,
            series_radius: 1e-6,
            max_radius: 1e4,
        }
    }
}

impl ShootingConfig {
    pub fn check(&self) -> Result<()> {
        let vals = [
            ("bisection_tol", self.bisection_tol),
            ("ode_rel_tol", self.ode_rel_tol),
            ("ode_abs_tol", self.ode_abs_tol),
            ("series_radius", self.series_radius),
            ("max_radius", self.max_radius),
        ];
        for (name, v) in vals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("shooting.{name} must be positive, got {v}")));
            }
        }
        if self.max_bisection_iters == 0 {
            return Err(Error::Config("shooting.max_bisection_iters must be positive".into()));
        }
        Ok(())
    }

    fn bisection(&self) -> Bisection {
        Bisection {
            tol: self.bisection_tol,
            max_iters: self.max_bisection_iters,
        }
    }

    fn integrator(&self) -> Dopri5 {
        Dopri5::with_tolerances(self.ode_rel_tol, self.ode_abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Uniform,
    NonNecrotic,
    Necrotic,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Uniform => "Uniform",
            Regime::NonNecrotic => "NonNecrotic",
            Regime::Necrotic => "Necrotic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub sigma_bar: f64,
    pub radius: f64,
    pub regime: Regime,
    /// Necrotic interface; 0 outside the necrotic regime.
    pub rho: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub center_value: f64,
    /// `|σ'(R) + β(σ(R) − σ̄)|` of the returned profile.
    pub robin_residual: f64,
    /// `R⁻³∫ g(σ) r² dr` over the live region, integrated with the profile.
    pub live_integral: f64,
    /// The same integral by composite Simpson on `grid`.
    pub live_integral_simpson: f64,
}

/// One outward shot: the sampled trajectory and its Robin residual at `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Shot {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `σ'(R) + β(σ(R) − σ̄)` (signed).
    pub residual: f64,
    pub live_integral: f64,
    pub live_integral_simpson: f64,
}

struct Shooter<'a> {
    model: &'a RateModel,
    cfg: &'a ShootingConfig,
    sigma_bar: f64,
    radius: f64,
}

struct ShotEnd {
    y: [f64; 3],
}

impl<'a> Shooter<'a> {
    fn series_width(&self) -> f64 {
        self.cfg.series_radius * self.radius.max(1.0)
    }

    /// State just past the centre: `σ ≈ c + f(c)r²/6`.
    fn center_start(&self, c: f64) -> (f64, [f64; 3]) {
        let r = self.series_width().min(self.radius);
        let fc = self.model.f(c);
        let j = self.model.g(c) * r.powi(3) / (3.0 * self.radius.powi(3));
        (r, [c + fc * r * r / 6.0, fc * r / 3.0, j])
    }

    /// State just past the interface: `V ≈ σ_D + a h²/2 − a h³/(3ρ)`, `a = f(σ_D)`.
    fn interface_start(&self, rho: f64) -> (f64, [f64; 3]) {
        let h = self
            .series_width()
            .min(1e-3 * rho)
            .min(self.radius - rho);
        let sd = self.model.sigma_d;
        let a = self.model.f(sd);
        let j = self.model.g(sd) * ((rho + h).powi(3) - rho.powi(3)) / (3.0 * self.radius.powi(3));
        (
            rho + h,
            [
                sd + a * h * h / 2.0 - a * h.powi(3) / (3.0 * rho),
                a * h - a * h * h / rho,
                j,
            ],
        )
    }

    fn residual(&self, y: &[f64; 3]) -> f64 {
        y[1] + self.model.beta * (y[0] - self.sigma_bar)
    }

    /// Integrates from `r0` to `R`. With `early_stop`, the shot ends as soon as
    /// `σ > σ̄` with `σ' > 0`: from then on `r²σ'` keeps growing, so the
    /// residual at `R` is certainly positive, and stopping avoids overflow for
    /// large `R`. The state at the stopping radius is returned in that case.
    fn run(
        &self,
        r0: f64,
        y0: [f64; 3],
        early_stop: bool,
        mut steps: Option<&mut Vec<Step<3>>>,
    ) -> Result<ShotEnd> {
        if r0 >= self.radius {
            return Ok(ShotEnd { y: y0 });
        }
        let model = self.model;
        let r3 = self.radius.powi(3);
        let mut sys = FnSystem(|r: f64, y: &[f64; 3]| {
            Ok([
                y[1],
                model.f(y[0]) - 2.0 * y[1] / r,
                model.g(y[0]) * r * r / r3,
            ])
        });
        let sigma_bar = self.sigma_bar;
        let out = self
            .cfg
            .integrator()
            .solve(&mut sys, r0, y0, self.radius, &[], |s: &Step<3>| {
                if let Some(v) = steps.as_deref_mut() {
                    v.push(*s);
                }
                if early_stop && s.y1[0] > sigma_bar && s.y1[1] > 0.0 {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            })?;
        Ok(ShotEnd { y: out.y })
    }

    fn center_residual(&self, c: f64) -> Result<f64> {
        let (r0, y0) = self.center_start(c);
        let end = self.run(r0, y0, true, None)?;
        Ok(self.residual(&end.y))
    }

    fn interface_residual(&self, rho: f64) -> Result<f64> {
        let (r0, y0) = self.interface_start(rho);
        let end = self.run(r0, y0, true, None)?;
        Ok(self.residual(&end.y))
    }

    /// Full recorded shot, densified to a grid suitable for quadrature.
    fn recorded(&self, origin: f64, start: (f64, [f64; 3]), origin_value: f64) -> Result<Shot> {
        let (r0, y0) = start;
        let mut steps = Vec::new();
        let end = self.run(r0, y0, false, Some(&mut steps))?;
        let r3 = self.radius.powi(3);
        let integrand = |r: f64, s: f64| self.model.g(s) * r * r / r3;

        let mut grid = vec![origin];
        let mut values = vec![origin_value];
        if r0 > origin {
            grid.push(r0);
            values.push(y0[0]);
        }
        let sub = MIN_GRID_POINTS.div_ceil(2 * steps.len().max(1)).max(1);
        let mut simpson = 0.0;
        for s in &steps {
            let n = 2 * sub;
            let h = s.h() / n as f64;
            let mut pts = Vec::with_capacity(n + 1);
            pts.push((s.t0, s.y0[0]));
            for k in 1..n {
                let r = s.t0 + k as f64 * h;
                pts.push((r, s.eval(r)[0]));
            }
            pts.push((s.t1, s.y1[0]));
            for k in (0..n).step_by(2) {
                let (a, m, b) = (pts[k], pts[k + 1], pts[k + 2]);
                simpson += (b.0 - a.0) / 6.0
                    * (integrand(a.0, a.1) + 4.0 * integrand(m.0, m.1) + integrand(b.0, b.1));
            }
            for &(r, v) in &pts[1..] {
                grid.push(r);
                values.push(v);
            }
        }
        Ok(Shot {
            grid,
            values,
            residual: self.residual(&end.y),
            live_integral: end.y[2],
            live_integral_simpson: y0[2] + simpson,
        })
    }
}

fn check_inputs(sigma_bar: f64, radius: f64) -> Result<()> {
    if !(sigma_bar > 0.0 && sigma_bar.is_finite()) {
        return Err(Error::Domain(format!("σ̄ must be positive, got {sigma_bar}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Domain(format!("R must be positive, got {radius}")));
    }
    Ok(())
}

/// Shoots from the centre with `σ(0) = c`, `σ'(0) = 0`.
pub fn shoot_from_center(
    model: &RateModel,
    c: f64,
    sigma_bar: f64,
    radius: f64,
    cfg: &ShootingConfig,
) -> Result<Shot> {
    check_inputs(sigma_bar, radius)?;
    if !(c >= model.sigma_d) {
        return Err(Error::Precondition(format!("centre value {c} below σ_D = {}", model.sigma_d)));
    }
    let sh = Shooter {
        model,
        cfg,
        sigma_bar,
        radius,
    };
    sh.recorded(0.0, sh.center_start(c), c)
}

/// Shoots from the interface with `V(ρ) = σ_D`, `V'(ρ) = 0`; samples cover `[ρ, R]`.
pub fn shoot_from_interface(
    model: &RateModel,
    rho: f64,
    sigma_bar: f64,
    radius: f64,
    cfg: &ShootingConfig,
) -> Result<Shot> {
    check_inputs(sigma_bar, radius)?;
    if !(rho > 0.0 && rho < radius) {
        return Err(Error::Precondition(format!("interface {rho} outside (0, {radius})")));
    }
    let sh = Shooter {
        model,
        cfg,
        sigma_bar,
        radius,
    };
    sh.recorded(rho, sh.interface_start(rho), model.sigma_d)
}

/// Solves the radial problem and classifies the regime.
///
/// The shot from `c = σ_D` decides the regime: its residual is increasing in
/// `c` and positive at `c = σ̄`, so a non-positive residual means a centre
/// value in `[σ_D, σ̄]` exists. A positive residual means the profile would
/// have to dip below `σ_D`, so the core is necrotic; the interface residual
/// then runs from that positive value at `ρ = 0⁺` to `β(σ_D − σ̄) < 0` at
/// `ρ = R`.
pub fn solve_profile(
    model: &RateModel,
    sigma_bar: f64,
    radius: f64,
    cfg: &ShootingConfig,
) -> Result<RadialProfile> {
    check_inputs(sigma_bar, radius)?;
    let sd = model.sigma_d;
    if sigma_bar <= sd {
        let n = MIN_GRID_POINTS;
        let grid: Vec<f64> = (0..=n).map(|i| radius * i as f64 / n as f64).collect();
        return Ok(RadialProfile {
            sigma_bar,
            radius,
            regime: Regime::Uniform,
            rho: 0.0,
            values: vec![sigma_bar; grid.len()],
            grid,
            center_value: sigma_bar,
            robin_residual: 0.0,
            live_integral: 0.0,
            live_integral_simpson: 0.0,
        });
    }

    let sh = Shooter {
        model,
        cfg,
        sigma_bar,
        radius,
    };
    let bis = cfg.bisection();
    let tie = 1e-12 * model.beta * sigma_bar;
    let f0 = sh.center_residual(sd)?;

    if f0 <= tie {
        let c = if f0.abs() <= tie {
            sd
        } else {
            let f_hi = sh.center_residual(sigma_bar)?;
            solve_with_fallback(
                &bis,
                "centre value",
                |c| sh.center_residual(c),
                sd,
                sigma_bar,
                f0,
                f_hi,
                FALLBACK_POINTS,
            )?
            .x
        };
        let shot = sh.recorded(0.0, sh.center_start(c), c)?;
        return Ok(RadialProfile {
            sigma_bar,
            radius,
            regime: Regime::NonNecrotic,
            rho: 0.0,
            grid: shot.grid,
            values: shot.values,
            center_value: c,
            robin_residual: shot.residual.abs(),
            live_integral: shot.live_integral,
            live_integral_simpson: shot.live_integral_simpson,
        });
    }

    let f_at_r = model.beta * (sd - sigma_bar);
    let rho = solve_with_fallback(
        &bis,
        "necrotic interface",
        |rho| sh.interface_residual(rho),
        0.0,
        radius,
        f0,
        f_at_r,
        FALLBACK_POINTS,
    )?
    .x;
    if !(rho > 0.0 && rho < radius) {
        return Err(Error::ConvergenceFailure {
            what: format!("necrotic interface landed on the boundary (ρ = {rho}, R = {radius})"),
            iterations: 0,
            width: 0.0,
        });
    }
    let shot = sh.recorded(rho, sh.interface_start(rho), sd)?;
    let mut grid: Vec<f64> = (0..PLATEAU_POINTS)
        .map(|i| rho * i as f64 / PLATEAU_POINTS as f64)
        .collect();
    let mut values = vec![sd; grid.len()];
    grid.extend(shot.grid);
    values.extend(shot.values);
    Ok(RadialProfile {
        sigma_bar,
        radius,
        regime: Regime::Necrotic,
        rho,
        grid,
        values,
        center_value: sd,
        robin_residual: shot.residual.abs(),
        live_integral: shot.live_integral,
        live_integral_simpson: shot.live_integral_simpson,
    })
}

/// `R_c(σ̄)`: the radius at which the shot from `c = σ_D` meets the Robin
/// condition, i.e. the largest fully non-necrotic radius.
pub fn critical_radius(model: &RateModel, sigma_bar: f64, cfg: &ShootingConfig) -> Result<f64> {
    if !(sigma_bar > model.sigma_d && sigma_bar.is_finite()) {
        return Err(Error::Precondition(format!(
            "critical radius needs σ̄ > σ_D = {}, got {sigma_bar}",
            model.sigma_d
        )));
    }
    let residual = |radius: f64| {
        Shooter {
            model,
            cfg,
            sigma_bar,
            radius,
        }
        .center_residual(model.sigma_d)
    };
    let (mut lo, mut f_lo) = (0.0, model.beta * (model.sigma_d - sigma_bar));
    let mut hi = 1.0f64.min(cfg.max_radius);
    let mut f_hi = residual(hi)?;
    while f_hi <= 0.0 {
        if hi >= cfg.max_radius {
            return Err(Error::BracketFailure {
                what: format!("critical radius exceeds max_radius = {}", cfg.max_radius),
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        lo = hi;
        f_lo = f_hi;
        hi = (2.0 * hi).min(cfg.max_radius);
        f_hi = residual(hi)?;
    }
    Ok(cfg.bisection().solve("critical radius", residual, lo, hi, f_lo, f_hi)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m() -> RateModel {
        RateModel::linear_reference()
    }

    #[test]
    fn uniform_below_threshold() {
        let p = solve_profile(&m(), 0.4, 3.0, &ShootingConfig::default()).unwrap();
        assert_eq!(p.regime, Regime::Uniform);
        assert_eq!(p.rho, 0.0);
        assert!(p.values.iter().all(|v| *v == 0.4));
        assert!(p.grid.len() > MIN_GRID_POINTS);
    }

    #[test]
    fn center_shot_linear_closed_form() {
        let s = shoot_from_center(&m(), 1.0, 1.0, 1.0, &ShootingConfig::default()).unwrap();
        let last = *s.values.last().unwrap();
        assert!((last - 1f64.sinh()).abs() < 1e-9);
        for (r, v) in s.grid.iter().zip(&s.values).skip(1) {
            assert!((v - r.sinh() / r).abs() < 1e-9 * v, "r = {r}");
        }
    }

    #[test]
    fn grid_is_strictly_increasing_and_dense() {
        let cfg = ShootingConfig::default();
        for (sb, r) in [(1.0, 1.0), (1.0, 4.0), (3.0, 0.01)] {
            let p = solve_profile(&m(), sb, r, &cfg).unwrap();
            assert!(p.grid.len() >= MIN_GRID_POINTS, "{}", p.grid.len());
            assert_eq!(p.grid[0], 0.0);
            assert!((p.grid.last().unwrap() - r).abs() < 1e-12 * r);
            assert!(p.grid.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn necrotic_plateau_and_interface() {
        let p = solve_profile(&m(), 1.0, 4.0, &ShootingConfig::default()).unwrap();
        assert_eq!(p.regime, Regime::Necrotic);
        assert!(p.rho > 0.0 && p.rho < 4.0);
        for (r, v) in p.grid.iter().zip(&p.values) {
            if *r <= p.rho {
                assert_eq!(*v, 0.5);
            } else {
                assert!(*v >= 0.5 && *v <= 1.0);
            }
        }
        assert!(p.robin_residual < 1e-8);
    }

    #[test]
    fn interface_shot_rejects_bad_rho() {
        let cfg = ShootingConfig::default();
        assert!(shoot_from_interface(&m(), 0.0, 1.0, 2.0, &cfg).is_err());
        assert!(shoot_from_interface(&m(), 2.0, 1.0, 2.0, &cfg).is_err());
    }

    #[test]
    fn critical_radius_requires_supply_above_threshold() {
        let err = critical_radius(&m(), 0.5, &ShootingConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn critical_radius_bracket_failure_reports_max_radius() {
        let cfg = ShootingConfig {
            max_radius: 0.5,
            ..ShootingConfig::default()
        };
        let err = critical_radius(&m(), 1.0, &cfg).unwrap_err();
        assert!(matches!(err, Error::BracketFailure { .. }));
    }

    #[test]
    fn large_radius_does_not_overflow() {
        let p = solve_profile(&m(), 2.0, 100.0, &ShootingConfig::default()).unwrap();
        assert_eq!(p.regime, Regime::Necrotic);
        assert!(p.values.iter().all(|v| v.is_finite()));
    }
}

//! The growth functional `G(σ̄, R)`: normalized volume growth rate of a tumor
//! of radius `R` under boundary supply `σ̄`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateModel;
use crate::radial::{solve_profile, Regime, ShootingConfig};
use crate::roots::{solve_with_fallback, Bisection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthValue {
    pub value: f64,
    pub regime: Regime,
    /// Disagreement between the integral carried by the shot and composite
    /// Simpson on the profile grid.
    pub quadrature_error: f64,
}

/// `G = R⁻³∫_ρ^R g(σ)r²dr − (ν/3)(ρ/R)³`, with `ρ = 0` when there is no
/// necrotic core and `G = −ν/3` exactly when `σ̄ ≤ σ_D`.
pub fn eval_g(model: &RateModel, sigma_bar: f64, radius: f64, cfg: &ShootingConfig) -> Result<GrowthValue> {
    if sigma_bar <= model.sigma_d && sigma_bar > 0.0 && radius > 0.0 {
        return Ok(GrowthValue {
            value: -model.nu / 3.0,
            regime: Regime::Uniform,
            quadrature_error: 0.0,
        });
    }
    let p = solve_profile(model, sigma_bar, radius, cfg)?;
    let dead = match p.regime {
        Regime::Necrotic => model.nu / 3.0 * (p.rho / radius).powi(3),
        _ => 0.0,
    };
    Ok(GrowthValue {
        value: p.live_integral - dead,
        regime: p.regime,
        quadrature_error: (p.live_integral - p.live_integral_simpson).abs(),
    })
}

/// The unique `R > 0` with `G(σ̄, R) = 0`; requires `g(σ̄) > 0`.
pub fn stationary_radius(model: &RateModel, sigma_bar: f64, cfg: &ShootingConfig) -> Result<f64> {
    const R_LO: f64 = 1e-3;
    let g = |r: f64| eval_g(model, sigma_bar, r, cfg).map(|v| v.value);
    if !(model.g(sigma_bar) > 0.0) || sigma_bar <= model.sigma_d {
        return Err(Error::BracketFailure {
            what: format!("stationary radius (g(σ̄) = {} ≤ 0, no positive root)", model.g(sigma_bar)),
            lo: 0.0,
            hi: f64::INFINITY,
            f_lo: model.g(sigma_bar.max(model.sigma_d)) / 3.0,
            f_hi: -model.nu / 3.0,
        });
    }
    let f_lo = g(R_LO)?;
    let mut hi = 1.0f64;
    let mut f_hi = g(hi)?;
    while f_hi >= 0.0 {
        if hi >= cfg.max_radius {
            return Err(Error::BracketFailure {
                what: format!("stationary radius exceeds max_radius = {}", cfg.max_radius),
                lo: R_LO,
                hi,
                f_lo,
                f_hi,
            });
        }
        hi = (2.0 * hi).min(cfg.max_radius);
        f_hi = g(hi)?;
    }
    let bis = Bisection {
        tol: cfg.bisection_tol,
        max_iters: cfg.max_bisection_iters,
    };
    Ok(solve_with_fallback(&bis, "stationary radius", g, R_LO, hi, f_lo, f_hi, 64)?.x)
}

/// Row-major table `cells[i][j] = G(sigma_bars[i], radii[j])`.
#[derive(Debug, Clone)]
pub struct GrowthTable {
    pub sigma_bars: Vec<f64>,
    pub radii: Vec<f64>,
    pub cells: Vec<Vec<Result<GrowthValue>>>,
}

impl GrowthTable {
    pub fn get(&self, i: usize, j: usize) -> Option<&GrowthValue> {
        self.cells[i][j].as_ref().ok()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.is_err()).count()
    }
}

fn strictly_increasing_positive(xs: &[f64]) -> bool {
    !xs.is_empty() && xs[0] > 0.0 && xs.windows(2).all(|w| w[1] > w[0]) && xs.iter().all(|x| x.is_finite())
}

/// Evaluates `G` on a tensor grid in parallel. Per-cell failures are kept in
/// the table rather than aborting the whole tabulation.
pub fn tabulate_g(
    model: &RateModel,
    sigma_bars: &[f64],
    radii: &[f64],
    cfg: &ShootingConfig,
) -> Result<GrowthTable> {
    if !strictly_increasing_positive(sigma_bars) || !strictly_increasing_positive(radii) {
        return Err(Error::Precondition("grids must be positive and strictly increasing".into()));
    }
    let cells = sigma_bars
        .par_iter()
        .map(|&sb| {
            radii
                .par_iter()
                .map(|&r| eval_g(model, sb, r, cfg))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(GrowthTable {
        sigma_bars: sigma_bars.to_vec(),
        radii: radii.to_vec(),
        cells,
    })
}

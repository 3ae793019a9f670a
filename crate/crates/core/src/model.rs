//! Rate functions, standing hypotheses and the periodic nutrient supply.
//!
//! The consumption rate `f`, proliferation rate `g` and supply `phi` come from
//! closed families so that scenarios stay serializable and the monotonicity
//! hypotheses can be checked by sampling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{simpson_refined, QuadratureConfig};

/// Nutrient consumption rate `f(σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConsumptionRate {
    /// `λσ`
    Linear { lambda: f64 },
    /// `λσ / (k + σ)`
    MichaelisMenten { lambda: f64, k: f64 },
    /// `λσ^p`, `p ≥ 1`
    Power { lambda: f64, p: f64 },
}

impl ConsumptionRate {
    pub fn eval(&self, sigma: f64) -> f64 {
        match *self {
            ConsumptionRate::Linear { lambda } => lambda * sigma,
            ConsumptionRate::MichaelisMenten { lambda, k } => lambda * sigma / (k + sigma),
            ConsumptionRate::Power { lambda, p } => lambda * sigma.max(0.0).powf(p),
        }
    }

    pub fn derivative(&self, sigma: f64) -> f64 {
        match *self {
            ConsumptionRate::Linear { lambda } => lambda,
            ConsumptionRate::MichaelisMenten { lambda, k } => lambda * k / (k + sigma).powi(2),
            ConsumptionRate::Power { lambda, p } => lambda * p * sigma.max(0.0).powf(p - 1.0),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ConsumptionRate::Linear { lambda } => lambda > 0.0,
            ConsumptionRate::MichaelisMenten { lambda, k } => lambda > 0.0 && k > 0.0,
            ConsumptionRate::Power { lambda, p } => lambda > 0.0 && p >= 1.0,
        };
        if ok && self.params().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid consumption rate {self:?}")))
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            ConsumptionRate::Linear { lambda } => vec![lambda],
            ConsumptionRate::MichaelisMenten { lambda, k } => vec![lambda, k],
            ConsumptionRate::Power { lambda, p } => vec![lambda, p],
        }
    }
}

/// Proliferation rate `g(σ)`, centred on the model's `sigma_tilde`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProliferationRate {
    /// `μ(σ − σ̃)`
    Affine { mu: f64 },
    /// `μk(σ − σ̃) / (k + |σ − σ̃|)`: slope `μ` at `σ̃`, saturating at `±μk`.
    SaturatingAffine { mu: f64, k: f64 },
}

impl ProliferationRate {
    pub fn eval(&self, sigma: f64, sigma_tilde: f64) -> f64 {
        let x = sigma - sigma_tilde;
        match *self {
            ProliferationRate::Affine { mu } => mu * x,
            ProliferationRate::SaturatingAffine { mu, k } => mu * k * x / (k + x.abs()),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            ProliferationRate::Affine { mu } => mu > 0.0 && mu.is_finite(),
            ProliferationRate::SaturatingAffine { mu, k } => {
                mu > 0.0 && k > 0.0 && mu.is_finite() && k.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid proliferation rate {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateModel {
    pub f: ConsumptionRate,
    pub g: ProliferationRate,
    /// Dissolution rate of necrotic cells.
    pub nu: f64,
    /// Necrosis threshold.
    pub sigma_d: f64,
    /// Robin (angiogenesis) coefficient.
    pub beta: f64,
    /// Root of `g`; must exceed `sigma_d`.
    pub sigma_tilde: f64,
}

impl RateModel {
    pub fn new(
        f: ConsumptionRate,
        g: ProliferationRate,
        nu: f64,
        sigma_d: f64,
        beta: f64,
        sigma_tilde: f64,
    ) -> Result<Self> {
        let m = Self {
            f,
            g,
            nu,
            sigma_d,
            beta,
            sigma_tilde,
        };
        m.check()?;
        Ok(m)
    }

    /// Checks parameter ranges (not the sampled hypotheses).
    pub fn check(&self) -> Result<()> {
        self.f.check()?;
        self.g.check()?;
        for (name, v) in [
            ("nu", self.nu),
            ("sigma_d", self.sigma_d),
            ("beta", self.beta),
            ("sigma_tilde", self.sigma_tilde),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.sigma_tilde <= self.sigma_d {
            return Err(Error::Config(format!(
                "sigma_tilde ({}) must exceed sigma_d ({})",
                self.sigma_tilde, self.sigma_d
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn f(&self, sigma: f64) -> f64 {
        self.f.eval(sigma)
    }

    #[inline]
    pub fn g(&self, sigma: f64) -> f64 {
        self.g.eval(sigma, self.sigma_tilde)
    }

    /// Net proliferation rate `S(σ) = g(σ)H(σ − σ_D) − ν[1 − H(σ − σ_D)]`
    /// with `H(0) = 0`, so `S(σ_D) = −ν`.
    pub fn eval_s(&self, sigma: f64) -> Result<f64> {
        if !(sigma >= 0.0) {
            return Err(Error::Domain(format!("S(σ) requires σ ≥ 0, got {sigma}")));
        }
        Ok(self.s_unchecked(sigma))
    }

    #[inline]
    pub(crate) fn s_unchecked(&self, sigma: f64) -> f64 {
        if sigma > self.sigma_d {
            self.g(sigma)
        } else {
            -self.nu
        }
    }

    /// The linear reference model `f(σ) = σ`, `g(σ) = σ − 1`, `ν = 1`,
    /// `σ_D = 0.5`, `β = 1`.
    pub fn linear_reference() -> Self {
        Self {
            f: ConsumptionRate::Linear { lambda: 1.0 },
            g: ProliferationRate::Affine { mu: 1.0 },
            nu: 1.0,
            sigma_d: 0.5,
            beta: 1.0,
            sigma_tilde: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub points_per_decade: usize,
    pub decades: usize,
    /// Upper end of the sampled interval; defaults to `10·max(σ̃, σ_D)`.
    pub upper: Option<f64>,
    /// Tolerance for the equality-type checks.
    pub tolerance: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            points_per_decade: 1000,
            decades: 6,
            upper: None,
            tolerance: 1e-12,
        }
    }
}

impl ValidationConfig {
    /// Samples up to `10·max(σ̃, φ_max)` for the given supply.
    pub fn for_supply(model: &RateModel, supply: &Supply) -> Self {
        Self {
            upper: Some(10.0 * model.sigma_tilde.max(supply.max_value())),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    A1,
    A2,
    A3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// First violating σ, if any.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, h: Hypothesis) -> &HypothesisCheck {
        self.checks
            .iter()
            .find(|c| c.hypothesis == h)
            .expect("every hypothesis is checked")
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn sample_grid(cfg: &ValidationConfig, upper: f64) -> Vec<f64> {
    let n = cfg.points_per_decade * cfg.decades;
    let lo = upper.log10() - cfg.decades as f64;
    let mut xs = Vec::with_capacity(n + 2);
    xs.push(0.0);
    for i in 0..=n {
        xs.push(10f64.powf(lo + cfg.decades as f64 * i as f64 / n as f64));
    }
    xs
}

fn first_non_increase(xs: &[f64], h: impl Fn(f64) -> f64) -> Option<f64> {
    let mut prev = h(xs[0]);
    for &x in &xs[1..] {
        let v = h(x);
        if !(v > prev) {
            return Some(x);
        }
        prev = v;
    }
    None
}

/// Checks (A1)–(A3) on a sampled grid. Failures are reported, not raised.
pub fn validate_hypotheses(model: &RateModel, cfg: &ValidationConfig) -> HypothesisReport {
    let upper = cfg
        .upper
        .unwrap_or(10.0 * model.sigma_tilde.max(model.sigma_d));
    let xs = sample_grid(cfg, upper);

    let f0 = model.f(0.0);
    let a1 = if f0.abs() > cfg.tolerance {
        HypothesisCheck {
            hypothesis: Hypothesis::A1,
            passed: false,
            witness: Some(0.0),
            detail: format!("f(0) = {f0} ≠ 0"),
        }
    } else if let Some(w) = first_non_increase(&xs, |s| model.f(s)) {
        HypothesisCheck {
            hypothesis: Hypothesis::A1,
            passed: false,
            witness: Some(w),
            detail: format!("f is not strictly increasing at σ = {w}"),
        }
    } else {
        HypothesisCheck {
            hypothesis: Hypothesis::A1,
            passed: true,
            witness: None,
            detail: "f(0) = 0 and f strictly increasing".into(),
        }
    };

    let g_root = model.g(model.sigma_tilde);
    let a2 = if let Some(w) = first_non_increase(&xs, |s| model.g(s)) {
        HypothesisCheck {
            hypothesis: Hypothesis::A2,
            passed: false,
            witness: Some(w),
            detail: format!("g is not strictly increasing at σ = {w}"),
        }
    } else if g_root.abs() > cfg.tolerance {
        HypothesisCheck {
            hypothesis: Hypothesis::A2,
            passed: false,
            witness: Some(model.sigma_tilde),
            detail: format!("g(σ̃) = {g_root} ≠ 0"),
        }
    } else if model.sigma_tilde <= model.sigma_d {
        HypothesisCheck {
            hypothesis: Hypothesis::A2,
            passed: false,
            witness: Some(model.sigma_tilde),
            detail: "σ̃ must exceed σ_D".into(),
        }
    } else {
        HypothesisCheck {
            hypothesis: Hypothesis::A2,
            passed: true,
            witness: None,
            detail: "g strictly increasing with g(σ̃) = 0, σ̃ > σ_D".into(),
        }
    };

    let margin = model.g(model.sigma_d) + model.nu;
    let a3 = HypothesisCheck {
        hypothesis: Hypothesis::A3,
        passed: margin >= -cfg.tolerance,
        witness: (margin < -cfg.tolerance).then_some(model.sigma_d),
        detail: format!("g(σ_D) + ν = {margin}"),
    };

    HypothesisReport {
        checks: vec![a1, a2, a3],
    }
}

/// Shape of the periodic external nutrient concentration `φ(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupplyShape {
    Constant { value: f64 },
    /// `mean + amplitude·sin(2πt/ω + phase)`
    Sinusoidal {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Linear interpolation through `(t, φ)` knots with `0 ≤ t < ω`, closed
    /// periodically from the last knot back to the first at `t + ω`.
    PiecewiseLinear { knots: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Supply {
    pub phi: SupplyShape,
    pub omega: f64,
}

const SUPPLY_SAMPLES: usize = 4096;

impl Supply {
    pub fn new(phi: SupplyShape, omega: f64) -> Result<Self> {
        let s = Self { phi, omega };
        s.check()?;
        Ok(s)
    }

    pub fn constant(value: f64, omega: f64) -> Result<Self> {
        Self::new(SupplyShape::Constant { value }, omega)
    }

    pub fn sinusoidal(mean: f64, amplitude: f64, phase: f64, omega: f64) -> Result<Self> {
        Self::new(
            SupplyShape::Sinusoidal {
                mean,
                amplitude,
                phase,
            },
            omega,
        )
    }

    pub fn check(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("period must be positive, got {}", self.omega)));
        }
        if let SupplyShape::PiecewiseLinear { knots } = &self.phi {
            if knots.is_empty() {
                return Err(Error::Config("piecewise-linear supply needs at least one knot".into()));
            }
            for w in knots.windows(2) {
                if !(w[1][0] > w[0][0]) {
                    return Err(Error::Config("supply knot times must be strictly increasing".into()));
                }
            }
            if knots[0][0] < 0.0 || knots[knots.len() - 1][0] >= self.omega {
                return Err(Error::Config("supply knot times must lie in [0, ω)".into()));
            }
        }
        let mut samples: Vec<f64> = (0..=SUPPLY_SAMPLES)
            .map(|i| self.eval(self.omega * i as f64 / SUPPLY_SAMPLES as f64))
            .collect();
        if let SupplyShape::PiecewiseLinear { knots } = &self.phi {
            samples.extend(knots.iter().map(|k| k[1]));
        }
        if let Some(bad) = samples.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("supply must be positive, found φ = {bad}")));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        match &self.phi {
            SupplyShape::Constant { value } => *value,
            SupplyShape::Sinusoidal {
                mean,
                amplitude,
                phase,
            } => mean + amplitude * (2.0 * PI * t / self.omega + phase).sin(),
            SupplyShape::PiecewiseLinear { knots } => {
                let tau = t.rem_euclid(self.omega);
                let n = knots.len();
                if n == 1 {
                    return knots[0][1];
                }
                let idx = knots.partition_point(|k| k[0] <= tau);
                let (a, b) = match idx {
                    0 => {
                        let last = knots[n - 1];
                        ([last[0] - self.omega, last[1]], knots[0])
                    }
                    i if i == n => {
                        let first = knots[0];
                        (knots[n - 1], [first[0] + self.omega, first[1]])
                    }
                    i => (knots[i - 1], knots[i]),
                };
                let w = (tau - a[0]) / (b[0] - a[0]);
                a[1] + w * (b[1] - a[1])
            }
        }
    }

    /// `φ* = max φ` over one period.
    pub fn max_value(&self) -> f64 {
        match &self.phi {
            SupplyShape::Constant { value } => *value,
            SupplyShape::Sinusoidal {
                mean, amplitude, ..
            } => mean + amplitude.abs(),
            SupplyShape::PiecewiseLinear { knots } => {
                knots.iter().map(|k| k[1]).fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match &self.phi {
            SupplyShape::Constant { value } => *value,
            SupplyShape::Sinusoidal {
                mean, amplitude, ..
            } => mean - amplitude.abs(),
            SupplyShape::PiecewiseLinear { knots } => {
                knots.iter().map(|k| k[1]).fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Times in `(0, ω)` where `φ` crosses `level`, located to machine precision.
    pub fn crossings(&self, level: f64) -> Vec<f64> {
        let n = SUPPLY_SAMPLES;
        let h = |t: f64| self.eval(t) - level;
        let mut out = Vec::new();
        let mut t0 = 0.0;
        let mut v0 = h(t0);
        for i in 1..=n {
            let t1 = self.omega * i as f64 / n as f64;
            let v1 = h(t1);
            if v1 == 0.0 && i < n {
                out.push(t1);
            } else if v0 != 0.0 && v1 != 0.0 && v0.signum() != v1.signum() {
                let (mut lo, mut hi, mut f_lo) = (t0, t1, v0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    let fm = h(mid);
                    if fm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if fm.signum() == f_lo.signum() {
                        lo = mid;
                        f_lo = fm;
                    } else {
                        hi = mid;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
            t0 = t1;
            v0 = v1;
        }
        out
    }

    /// Points in `[0, ω]` where `S(φ(t))` may lose smoothness or change sign.
    pub fn break_points(&self, model: &RateModel) -> Vec<f64> {
        let mut b = vec![0.0, self.omega];
        b.extend(self.crossings(model.sigma_d));
        b.extend(self.crossings(model.sigma_tilde));
        if let SupplyShape::PiecewiseLinear { knots } = &self.phi {
            b.extend(knots.iter().map(|k| k[0]).filter(|t| *t > 0.0));
        }
        b.sort_by(f64::total_cmp);
        b.dedup_by(|a, c| (*a - *c).abs() <= 4.0 * f64::EPSILON * self.omega);
        b
    }
}

/// Period average and running-integral extrema of `S(φ(t))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyStats {
    /// `S̄ = (1/ω)∫₀^ω S(φ(t)) dt`
    pub s_bar: f64,
    /// `S* = max_t ∫₀^t S(φ)`
    pub s_star: f64,
    /// `S_* = min_t ∫₀^t S(φ)`
    pub s_lower: f64,
    /// Richardson estimate of the absolute error in `ω·S̄`, `S*` and `S_*`.
    pub quad_error: f64,
    /// `(1/ω)∫₀^ω |S(φ(t))| dt`, the natural scale of `S̄`.
    pub s_abs_mean: f64,
}

impl SupplyStats {
    /// Multiplier in `R(t) ≤ R(a)·exp((2S* − S_*)/3)`.
    pub fn envelope_factor(&self) -> f64 {
        ((2.0 * self.s_star - self.s_lower) / 3.0).exp()
    }
}

/// Composite Simpson quadrature of `S(φ(t))` over one period, split at the
/// times where `φ` crosses `σ_D` or `σ̃` so every piece is smooth and `S(φ)`
/// keeps its sign. On each piece the branch of `S` is chosen from the piece
/// midpoint.
pub fn supply_stats(model: &RateModel, supply: &Supply, cfg: &QuadratureConfig) -> Result<SupplyStats> {
    let breaks = supply.break_points(model);
    let integrand = |t: f64, (lo, hi): (f64, f64)| {
        if supply.eval(0.5 * (lo + hi)) > model.sigma_d {
            model.g(supply.eval(t))
        } else {
            -model.nu
        }
    };
    let refined = simpson_refined(&integrand, &breaks, cfg)?;
    let c = &refined.result;
    let s_star = c.nodes.iter().map(|n| n.1).fold(0.0, f64::max);
    let s_lower = c.nodes.iter().map(|n| n.1).fold(0.0, f64::min);
    Ok(SupplyStats {
        s_bar: c.total / supply.omega,
        s_star,
        s_lower,
        quad_error: refined.error,
        s_abs_mean: c.abs_total / supply.omega,
    })
}

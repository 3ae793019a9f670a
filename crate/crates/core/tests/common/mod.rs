//! Closed-form solutions of the radial problem for `f(σ) = σ`, used as an
//! oracle independent of the shooting solver.
#![allow(dead_code)]

use necrosim::model::{ConsumptionRate, ProliferationRate, RateModel};

/// Parameters of the linear model `f(σ) = σ`, `g(σ) = μ(σ − σ̃)`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub mu: f64,
    pub sigma_tilde: f64,
    pub nu: f64,
    pub sigma_d: f64,
    pub beta: f64,
}

pub const REFERENCE: Linear = Linear {
    mu: 1.0,
    sigma_tilde: 1.0,
    nu: 1.0,
    sigma_d: 0.5,
    beta: 1.0,
};

/// Plain bisection to machine precision, independent of the crate's root finder.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    assert!(f_lo * f(hi) < 0.0, "oracle bracket [{lo}, {hi}] has no sign change");
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Linear {
    pub fn model(&self) -> RateModel {
        RateModel::new(
            ConsumptionRate::Linear { lambda: 1.0 },
            ProliferationRate::Affine { mu: self.mu },
            self.nu,
            self.sigma_d,
            self.beta,
            self.sigma_tilde,
        )
        .unwrap()
    }

    fn robin_factor(&self, r: f64) -> f64 {
        r.cosh() / r - r.sinh() / (r * r) + self.beta * r.sinh() / r
    }

    /// Centre value of `σ = c·sinh(r)/r` meeting the Robin condition.
    pub fn center_value(&self, sigma_bar: f64, radius: f64) -> f64 {
        self.beta * sigma_bar / self.robin_factor(radius)
    }

    pub fn nonnecrotic(&self, sigma_bar: f64, radius: f64, r: f64) -> f64 {
        let c = self.center_value(sigma_bar, radius);
        if r == 0.0 {
            c
        } else {
            c * r.sinh() / r
        }
    }

    pub fn critical_radius(&self, sigma_bar: f64) -> f64 {
        let h = |r: f64| self.sigma_d * self.robin_factor(r) - self.beta * sigma_bar;
        let mut hi = 1.0;
        while h(hi) <= 0.0 {
            hi *= 2.0;
        }
        bisect(h, 1e-9, hi)
    }

    /// Live profile leaving `σ_D` with zero slope at `ρ`:
    /// `V = σ_D(sinh(r − ρ) + ρ·cosh(r − ρ))/r`.
    pub fn necrotic_live(&self, rho: f64, r: f64) -> f64 {
        self.sigma_d * ((r - rho).sinh() + rho * (r - rho).cosh()) / r
    }

    pub fn necrotic_live_slope(&self, rho: f64, r: f64) -> f64 {
        let d = r - rho;
        let num = d.sinh() + rho * d.cosh();
        let dnum = d.cosh() + rho * d.sinh();
        self.sigma_d * (dnum / r - num / (r * r))
    }

    pub fn interface(&self, sigma_bar: f64, radius: f64) -> f64 {
        let h = |rho: f64| {
            self.necrotic_live_slope(rho, radius) + self.beta * (self.necrotic_live(rho, radius) - sigma_bar)
        };
        bisect(h, 1e-300, radius)
    }

    /// Full profile with regime detection by the critical radius.
    pub fn profile(&self, sigma_bar: f64, radius: f64, r: f64) -> f64 {
        if sigma_bar <= self.sigma_d {
            return sigma_bar;
        }
        if radius <= self.critical_radius(sigma_bar) {
            return self.nonnecrotic(sigma_bar, radius, r);
        }
        let rho = self.interface(sigma_bar, radius);
        if r <= rho {
            self.sigma_d
        } else {
            self.necrotic_live(rho, r)
        }
    }

    /// `G(σ̄, R)` from the closed-form integrals.
    pub fn growth(&self, sigma_bar: f64, radius: f64) -> f64 {
        let (mu, st, nu) = (self.mu, self.sigma_tilde, self.nu);
        if sigma_bar <= self.sigma_d {
            return -nu / 3.0;
        }
        let r3 = radius.powi(3);
        if radius <= self.critical_radius(sigma_bar) {
            let c = self.center_value(sigma_bar, radius);
            // ∫₀^R c sinh(r) r dr = c(R cosh R − sinh R)
            let int_sigma = c * (radius * radius.cosh() - radius.sinh());
            return mu * (int_sigma - st * r3 / 3.0) / r3;
        }
        let rho = self.interface(sigma_bar, radius);
        let d = radius - rho;
        let int_v = self.sigma_d * (radius * d.cosh() - d.sinh() + rho * radius * d.sinh() - rho * d.cosh());
        let live = mu * (int_v - st * (r3 - rho.powi(3)) / 3.0) / r3;
        live - nu / 3.0 * (rho / radius).powi(3)
    }

    pub fn stationary_radius(&self, sigma_bar: f64) -> f64 {
        let mut hi = 1.0;
        while self.growth(sigma_bar, hi) >= 0.0 {
            hi *= 2.0;
        }
        bisect(|r| self.growth(sigma_bar, r), 1e-3, hi)
    }
}

pub fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

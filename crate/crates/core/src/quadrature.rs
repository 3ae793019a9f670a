//! Composite Simpson quadrature on piecewise-smooth integrands.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Panel count of the first pass over the whole interval.
    pub initial_panels: usize,
    /// Relative change between successive doublings at which refinement stops.
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            initial_panels: 1 << 10,
            rel_tol: 1e-10,
            max_panels: 1 << 22,
        }
    }
}

/// Running Simpson integral over `[breaks[0], breaks[last]]`.
///
/// Each piece between consecutive break points gets a number of panels
/// proportional to its length; `nodes` holds the cumulative integral at every
/// panel boundary. The integrand receives the bounds of the piece it is
/// evaluated on, so a function with jumps at the break points can select the
/// branch belonging to that piece and stay smooth within it.
#[derive(Debug, Clone)]
pub struct CumulativeSimpson {
    pub nodes: Vec<(f64, f64)>,
    pub total: f64,
    pub abs_total: f64,
}

pub fn simpson_cumulative<F>(f: &F, breaks: &[f64], panels: usize) -> CumulativeSimpson
where
    F: Fn(f64, (f64, f64)) -> f64,
{
    let a = breaks[0];
    let b = breaks[breaks.len() - 1];
    let mut nodes = vec![(a, 0.0)];
    let mut acc = 0.0;
    let mut abs_acc = 0.0;
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let n = ((panels as f64 * (hi - lo) / (b - a)).ceil() as usize).max(1);
        let h = (hi - lo) / n as f64;
        let eval = |x: f64| f(x, (lo, hi));
        let mut left = eval(lo);
        for k in 0..n {
            let x0 = lo + k as f64 * h;
            let x2 = if k + 1 == n { hi } else { lo + (k + 1) as f64 * h };
            let mid = eval(0.5 * (x0 + x2));
            let right = eval(x2);
            let piece = (x2 - x0) / 6.0 * (left + 4.0 * mid + right);
            let abs_piece = (x2 - x0) / 6.0 * (left.abs() + 4.0 * mid.abs() + right.abs());
            acc += piece;
            abs_acc += abs_piece;
            nodes.push((x2, acc));
            left = right;
        }
    }
    CumulativeSimpson {
        nodes,
        total: acc,
        abs_total: abs_acc,
    }
}

#[derive(Debug, Clone)]
pub struct RefinedIntegral {
    pub result: CumulativeSimpson,
    /// Richardson estimate |I_n - I_{n/2}| / 15 (max over total and extrema).
    pub error: f64,
    pub panels: usize,
}

/// Doubles the panel count until total, maximum and minimum of the running
/// integral all change by less than `rel_tol` relative to ∫|f|.
pub fn simpson_refined<F>(f: &F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<RefinedIntegral>
where
    F: Fn(f64, (f64, f64)) -> f64,
{
    let summary = |c: &CumulativeSimpson| {
        let max = c.nodes.iter().map(|n| n.1).fold(f64::NEG_INFINITY, f64::max);
        let min = c.nodes.iter().map(|n| n.1).fold(f64::INFINITY, f64::min);
        [c.total, max, min]
    };
    let mut panels = cfg.initial_panels.max(2);
    let mut prev = simpson_cumulative(f, breaks, panels);
    loop {
        let next_panels = panels * 2;
        let next = simpson_cumulative(f, breaks, next_panels);
        let (p, n) = (summary(&prev), summary(&next));
        let change = p
            .iter()
            .zip(n.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.abs_total.max(f64::MIN_POSITIVE);
        if change <= cfg.rel_tol * scale {
            return Ok(RefinedIntegral {
                result: next,
                error: change / 15.0,
                panels: next_panels,
            });
        }
        if next_panels >= cfg.max_panels {
            return Err(Error::QuadratureNonConvergence {
                change,
                tolerance: cfg.rel_tol * scale,
                panels: next_panels,
            });
        }
        panels = next_panels;
        prev = next;
    }
}

/// Plain composite Simpson on uniformly spaced samples (odd count).
pub fn simpson_uniform(values: &[f64], h: f64) -> f64 {
    debug_assert!(values.len() % 2 == 1);
    let n = values.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = values[0] + values[n - 1];
    for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

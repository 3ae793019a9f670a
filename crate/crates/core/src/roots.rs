//! Bracketed scalar root finding for the shooting residuals.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Bisection {
    /// Absolute bracket width at which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub iterations: usize,
    /// Final bracket, `lo <= x <= hi`.
    pub lo: f64,
    pub hi: f64,
}

impl Bisection {
    /// Finds a root of `f` in `[lo, hi]` given the endpoint values.
    ///
    /// Endpoint values may be supplied from limits (e.g. an endpoint where the
    /// residual is known analytically). Once the bracket is narrower than
    /// `tol`, the root is placed by linear interpolation across the final
    /// bracket, which keeps the result a smooth function of the inputs.
    pub fn solve<F>(
        &self,
        what: &str,
        mut f: F,
        mut lo: f64,
        mut hi: f64,
        mut f_lo: f64,
        mut f_hi: f64,
    ) -> Result<Root>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        if f_lo == 0.0 {
            return Ok(Root { x: lo, iterations: 0, lo, hi: lo });
        }
        if f_hi == 0.0 {
            return Ok(Root { x: hi, iterations: 0, lo: hi, hi });
        }
        if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
            return Err(Error::BracketFailure {
                what: what.to_string(),
                lo,
                hi,
                f_lo,
                f_hi,
            });
        }
        for it in 0..self.max_iters {
            if hi - lo <= self.tol {
                let x = if f_hi != f_lo {
                    (lo - f_lo * (hi - lo) / (f_hi - f_lo)).clamp(lo, hi)
                } else {
                    0.5 * (lo + hi)
                };
                return Ok(Root { x, iterations: it, lo, hi });
            }
            let mid = 0.5 * (lo + hi);
            let f_mid = f(mid)?;
            if f_mid == 0.0 {
                return Ok(Root { x: mid, iterations: it + 1, lo: mid, hi: mid });
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
        }
        Err(Error::ConvergenceFailure {
            what: what.to_string(),
            iterations: self.max_iters,
            width: hi - lo,
        })
    }
}

/// Evaluates `f` on `count` equispaced interior points of `(lo, hi)` plus the
/// endpoints and returns every sub-interval across which the sign changes.
pub fn sign_scan<F>(mut f: F, lo: f64, hi: f64, f_lo: f64, f_hi: f64, count: usize) -> Result<Vec<(f64, f64, f64, f64)>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut xs = Vec::with_capacity(count + 2);
    let mut fs = Vec::with_capacity(count + 2);
    xs.push(lo);
    fs.push(f_lo);
    for k in 1..=count {
        let x = lo + (hi - lo) * k as f64 / (count + 1) as f64;
        xs.push(x);
        fs.push(f(x)?);
    }
    xs.push(hi);
    fs.push(f_hi);
    let mut out = Vec::new();
    for i in 0..xs.len() - 1 {
        let (a, b) = (fs[i], fs[i + 1]);
        if a == 0.0 || (a.signum() != b.signum() && b != 0.0) {
            out.push((xs[i], xs[i + 1], a, b));
        }
    }
    if fs[fs.len() - 1] == 0.0 {
        let n = xs.len();
        out.push((xs[n - 1], xs[n - 1], 0.0, 0.0));
    }
    Ok(out)
}

/// Bracketed solve with the sign-scan fallback: if the endpoints do not
/// bracket a root, scan `fallback_points` candidates; a single sign change is
/// refined, several are reported as [`Error::MultipleRoots`].
#[allow(clippy::too_many_arguments)]
pub fn solve_with_fallback<F>(
    bis: &Bisection,
    what: &str,
    mut f: F,
    lo: f64,
    hi: f64,
    f_lo: f64,
    f_hi: f64,
    fallback_points: usize,
) -> Result<Root>
where
    F: FnMut(f64) -> Result<f64>,
{
    match bis.solve(what, &mut f, lo, hi, f_lo, f_hi) {
        Err(Error::BracketFailure { .. }) => {
            let brackets = sign_scan(&mut f, lo, hi, f_lo, f_hi, fallback_points)?;
            match brackets.as_slice() {
                [] => Err(Error::BracketFailure {
                    what: what.to_string(),
                    lo,
                    hi,
                    f_lo,
                    f_hi,
                }),
                [(a, b, fa, fb)] => bis.solve(what, f, *a, *b, *fa, *fb),
                many => Err(Error::MultipleRoots {
                    what: what.to_string(),
                    roots: many.iter().map(|(a, b, _, _)| 0.5 * (a + b)).collect(),
                }),
            }
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bis() -> Bisection {
        Bisection { tol: 1e-12, max_iters: 200 }
    }

    #[test]
    fn finds_sqrt_two() {
        let f = |x: f64| Ok(x * x - 2.0);
        let r = bis().solve("sqrt", f, 1.0, 2.0, -1.0, 2.0).unwrap();
        assert!((r.x - std::f64::consts::SQRT_2).abs() < 1e-14);
        assert!(r.lo <= r.x && r.x <= r.hi);
    }

    #[test]
    fn decreasing_function() {
        let f = |x: f64| Ok(1.0 - x);
        let r = bis().solve("dec", f, 0.0, 3.0, 1.0, -2.0).unwrap();
        assert!((r.x - 1.0).abs() < 1e-14);
    }

    #[test]
    fn same_sign_is_bracket_failure() {
        let f = |x: f64| Ok(x * x + 1.0);
        let err = bis().solve("none", f, -1.0, 1.0, 2.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::BracketFailure { .. }));
    }

    #[test]
    fn iteration_cap() {
        let b = Bisection { tol: 1e-300, max_iters: 5 };
        let err = b.solve("cap", |x: f64| Ok(x), -1.0, 2.0, -1.0, 2.0).unwrap_err();
        assert!(matches!(err, Error::ConvergenceFailure { iterations: 5, .. }));
    }

    #[test]
    fn fallback_finds_interior_single_root() {
        // Same sign at both ends, one tangent-free double crossing would be two roots;
        // here f dips below zero once between two positive ends -> two roots.
        let f = |x: f64| Ok((x - 0.3) * (x - 0.6));
        let err = solve_with_fallback(&bis(), "dip", f, 0.0, 1.0, 0.18, 0.28, 64).unwrap_err();
        match err {
            Error::MultipleRoots { roots, .. } => {
                assert_eq!(roots.len(), 2);
                assert!((roots[0] - 0.3).abs() < 0.02 && (roots[1] - 0.6).abs() < 0.02);
            }
            e => panic!("unexpected {e:?}"),
        }
        let none = solve_with_fallback(&bis(), "none", |x: f64| Ok(x + 1.0), 0.0, 1.0, 1.0, 2.0, 64);
        assert!(matches!(none, Err(Error::BracketFailure { .. })));
    }

    #[test]
    fn scan_reports_single_crossing() {
        let brackets = sign_scan(|x: f64| Ok(x - 0.25), 0.0, 1.0, -0.25, 0.75, 64).unwrap();
        assert_eq!(brackets.len(), 1);
        let (a, b, fa, fb) = brackets[0];
        assert!(a <= 0.25 && 0.25 <= b && fa < 0.0 && fb > 0.0);
    }
}

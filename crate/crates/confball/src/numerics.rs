//! Special functions and root solvers.
//!
//! Everything downstream reduces to four functions of classical numerical
//! analysis plus one bespoke root solve:
//!
//! * `Phi(x)`, the standard normal CDF, and its inverse;
//! * the chi-squared CDF (a regularized lower incomplete gamma) and its
//!   inverse;
//! * the root of `lambda - log(lambda) = c` on the branch `lambda >= 1`,
//!   which calibrates the block-thresholding keep rule.
//!
//! `log` is the natural logarithm throughout the crate. Quantiles are
//! computed by a bracketing bisection on the corresponding CDF followed by a
//! single Newton refinement, so their accuracy contract is independent of any
//! fixed rational approximation.

use crate::error::{Error, Result};
use libm::erfc;
use statrs::function::gamma::{gamma_lr, ln_gamma};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.3989422804014326779399460599343818684758586311649;

/// The root `lambda >= 1` of `lambda - log(lambda) = c`, stored with the
/// right-hand side that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdConstant {
    /// Right-hand side of the equation.
    pub c: f64,
    /// The root on the branch `lambda >= 1`.
    pub lambda: f64,
}

/// Standard normal CDF `Phi(x)`.
///
/// Absolute error is below `1e-12` over the whole real line.
pub fn std_normal_cdf(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::invalid("x", format!("must be finite, got {x}")));
    }
    Ok(0.5 * erfc(-x / SQRT_2))
}

/// Standard normal density `phi(x)`.
pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal quantile `Phi^{-1}(p)` for `p` in `(0, 1)`.
///
/// Satisfies `|Phi(result) - p| <= 1e-11` and is antisymmetric:
/// `quantile(1 - p) = -quantile(p)` up to the same tolerance.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must be in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        // Antisymmetry by construction.
        return Ok(-std_normal_quantile(1.0 - p)?);
    }
    // p in (0, 0.5): the root lies in [-40, 0].
    let (mut lo, mut hi) = (-40.0_f64, 0.0_f64);
    for _ in 0..90 {
        let mid = 0.5 * (lo + hi);
        if std_normal_cdf(mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    // One Newton step, kept only inside the final bracket.
    let pdf = std_normal_pdf(x);
    if pdf > 0.0 {
        let refined = x - (std_normal_cdf(x)? - p) / pdf;
        if refined.is_finite() && refined > lo && refined < hi {
            x = refined;
        }
    }
    Ok(x)
}

/// Chi-squared CDF with `m` degrees of freedom: the regularized lower
/// incomplete gamma `P(m/2, x/2)`.
pub fn chi2_cdf(m: u64, x: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degrees of freedom must be >= 1"));
    }
    if !(x.is_finite() && x >= 0.0) {
        return Err(Error::invalid("x", format!("must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(gamma_lr(m as f64 / 2.0, x / 2.0))
}

fn chi2_pdf(m: u64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let a = m as f64 / 2.0;
    ((a - 1.0) * x.ln() - x / 2.0 - a * std::f64::consts::LN_2 - ln_gamma(a)).exp()
}

/// Chi-squared quantile: the `x >= 0` with `chi2_cdf(m, x) = p`, to `1e-9`.
pub fn chi2_quantile(m: u64, p: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degrees of freedom must be >= 1"));
    }
    if !(p.is_finite() && p > 0.0 && p < 1.0) {
        return Err(Error::invalid("p", format!("must be in (0, 1), got {p}")));
    }
    let mf = m as f64;
    let mut hi = mf + 20.0 * (2.0 * mf).sqrt() + 20.0;
    let mut grow = 0;
    while chi2_cdf(m, hi)? < p {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::invalid("p", "failed to bracket the quantile"));
        }
    }
    let mut lo = 0.0_f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(m, mid)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    let pdf = chi2_pdf(m, x);
    if pdf > 0.0 {
        let refined = x - (chi2_cdf(m, x)? - p) / pdf;
        if refined.is_finite() && refined > lo && refined < hi {
            x = refined;
        }
    }
    Ok(x)
}

/// Solves `lambda - log(lambda) = c` on the branch `lambda >= 1`.
///
/// The left-hand side attains its minimum value 1 at `lambda = 1`, so a real
/// root on this branch exists iff `c >= 1`. Bisection on `[1, c*e]`: the
/// residual is nonpositive at 1 and positive at the right endpoint.
pub fn solve_lambda(c: f64) -> Result<ThresholdConstant> {
    if !(c.is_finite() && c >= 1.0) {
        return Err(Error::invalid(
            "c",
            format!("lambda - log(lambda) = c has no root >= 1 for c = {c}"),
        ));
    }
    if c == 1.0 {
        return Ok(ThresholdConstant { c, lambda: 1.0 });
    }
    let residual = |lam: f64| lam - lam.ln() - c;
    let (mut lo, mut hi) = (1.0_f64, c * std::f64::consts::E);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    debug_assert!(residual(lambda).abs() <= 1e-10);
    Ok(ThresholdConstant { c, lambda })
}

/// Neumaier compensated summation.
///
/// Used wherever a squared radius is assembled from many terms, so that
/// independent re-evaluations in a different summation order agree to
/// `1e-10` relative.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

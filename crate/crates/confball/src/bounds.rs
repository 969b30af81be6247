//! Executable lower bounds and the supporting lemma machinery.
//!
//! The closed-form floors bound the expected squared radius of any ball with
//! guaranteed coverage: per level at the worst case and at zero, globally at
//! the worst case and over an inner body, and at zero for honest balls. The
//! lemma operations expose the hypercube Bayes rule and its exact risk, the
//! normal-mixture L1 bound and density ratio, the chi-squared tail bounds,
//! the block keep/drop probability bounds, the Besov tail and block-count
//! bounds, and the maximum-adaptation-range table.

use crate::blocks::threshold_constant;
use crate::error::{Error, Result};
use crate::numerics::{solve_lambda, std_normal_cdf, std_normal_quantile, ThresholdConstant};
use crate::sequence::{BesovBody, CoefficientVector};
use serde::{Deserialize, Serialize};

/// Slack parameters shared by the lower bounds: a coverage level `alpha` in
/// `(0, 1/2)`, a slack `eps > 0`, and the derived `gamma = log(1 + eps^2)`.
///
/// The admissible range of `eps` depends on the bound: the worst-case bounds
/// need `eps < (1/2)(1/2 - alpha)` while the zero/inner bounds need
/// `eps < 1/2 - alpha`; each operation enforces its own constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundParams {
    pub alpha: f64,
    pub eps: f64,
    pub gamma: f64,
}

impl LowerBoundParams {
    pub fn new(alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 0.5) {
            return Err(Error::invalid(
                "alpha",
                format!("must be in (0, 1/2), got {alpha}"),
            ));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be > 0, got {eps}")));
        }
        Ok(LowerBoundParams {
            alpha,
            eps,
            gamma: (1.0 + eps * eps).ln(),
        })
    }

    fn require_half_range(&self) -> Result<()> {
        if self.eps >= 0.5 * (0.5 - self.alpha) {
            return Err(Error::invalid(
                "eps",
                format!(
                    "must be < (1/2)(1/2 - alpha) = {}",
                    0.5 * (0.5 - self.alpha)
                ),
            ));
        }
        Ok(())
    }

    fn require_full_range(&self) -> Result<()> {
        if self.eps >= 0.5 - self.alpha {
            return Err(Error::invalid(
                "eps",
                format!("must be < 1/2 - alpha = {}", 0.5 - self.alpha),
            ));
        }
        Ok(())
    }

    /// `z_{alpha + 2 eps} = Phi^{-1}(1 - alpha - 2 eps)`.
    fn z_shifted(&self) -> Result<f64> {
        std_normal_quantile(1.0 - self.alpha - 2.0 * self.eps)
    }
}

/// Worst-case floor for a single-level ball with coverage over the body:
/// `(eps^2/(1 - alpha - eps)) min(M^2 2^{-2 beta j}, z^2_{alpha+2eps} 2^j / n)`.
pub fn lb_single_level_max(
    body: &BesovBody,
    j: u32,
    n: u64,
    params: &LowerBoundParams,
) -> Result<f64> {
    params.require_half_range()?;
    let z = params.z_shifted()?;
    let lead = params.eps * params.eps / (1.0 - params.alpha - params.eps);
    let energy_cap = body.max_level_energy(j);
    let noise_cap = z * z * 2f64.powi(j as i32) / n as f64;
    Ok(lead * energy_cap.min(noise_cap))
}

/// Floor at `theta = 0` for a single-level ball:
/// `(1/4)(1 - 2 alpha - 2 eps) min(M^2 2^{-2 beta j}, gamma^{1/2} 2^{j/2} / n)`.
pub fn lb_single_level_zero(
    body: &BesovBody,
    j: u32,
    n: u64,
    params: &LowerBoundParams,
) -> Result<f64> {
    params.require_full_range()?;
    let lead = 0.25 * (1.0 - 2.0 * params.alpha - 2.0 * params.eps);
    let energy_cap = body.max_level_energy(j);
    let noise_cap = params.gamma.sqrt() * 2f64.powf(j as f64 / 2.0) / n as f64;
    Ok(lead * energy_cap.min(noise_cap))
}

/// Worst-case floor for a full-vector ball with coverage over the body:
///
/// ```text
/// (eps^2/(1 - alpha - eps)) z^2 min(N/n, z^{-2q/(1+2 beta)} M^{2/(1+2 beta)} n^{-2 beta/(1+2 beta)})
/// ```
///
/// with `z = z_{alpha+2eps}`. The `q`-dependent exponent on `z` is used as
/// displayed; `q` must be finite here.
pub fn lb_global_max(
    body: &BesovBody,
    n_coords: u64,
    n: u64,
    params: &LowerBoundParams,
) -> Result<f64> {
    params.require_half_range()?;
    if body.q.is_infinite() {
        return Err(Error::invalid(
            "q",
            "must be finite for the global worst-case floor",
        ));
    }
    let z = params.z_shifted()?;
    let lead = params.eps * params.eps / (1.0 - params.alpha - params.eps) * z * z;
    let dim_cap = n_coords as f64 / n as f64;
    let rate_cap = z.powf(-2.0 * body.q / (1.0 + 2.0 * body.beta))
        * body.m.powf(2.0 / (1.0 + 2.0 * body.beta))
        * (n as f64).powf(-2.0 * body.beta / (1.0 + 2.0 * body.beta));
    Ok(lead * dim_cap.min(rate_cap))
}

/// The separation radius of the two-point argument over an inner body, plus
/// the implied floor on the minimum expected squared radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationBound {
    /// `b_eps`: with probability at least `1 - 2 alpha - 2 eps` the random
    /// radius exceeds this value for every `theta` in the inner body.
    pub b_eps: f64,
    /// `(1 - 2 alpha - 2 eps) b_eps^2`, the floor on `inf E(r^2)`.
    pub radius_sq_floor: f64,
}

/// The inner-body separation bound:
///
/// ```text
/// b_eps = min( 2^{-1/(2(1+4 beta)) - 1} gamma^{beta/(1+4 beta)} (M - M')^{1/(1+4 beta)} n^{-2 beta/(1+4 beta)},
///              (1/2) gamma^{1/4} N^{1/4} n^{-1/2} )
/// ```
pub fn lb_b_eps(
    body: &BesovBody,
    m_prime: f64,
    n_coords: u64,
    n: u64,
    params: &LowerBoundParams,
) -> Result<SeparationBound> {
    params.require_full_range()?;
    if !(m_prime > 0.0 && m_prime < body.m) {
        return Err(Error::invalid(
            "m_prime",
            format!("must lie in (0, M) = (0, {}), got {m_prime}", body.m),
        ));
    }
    let beta = body.beta;
    let nf = n as f64;
    let smooth = 2f64.powf(-1.0 / (2.0 * (1.0 + 4.0 * beta)) - 1.0)
        * params.gamma.powf(beta / (1.0 + 4.0 * beta))
        * (body.m - m_prime).powf(1.0 / (1.0 + 4.0 * beta))
        * nf.powf(-2.0 * beta / (1.0 + 4.0 * beta));
    let dim = 0.5 * params.gamma.powf(0.25) * (n_coords as f64).powf(0.25) / nf.sqrt();
    let b_eps = smooth.min(dim);
    Ok(SeparationBound {
        b_eps,
        radius_sq_floor: (1.0 - 2.0 * params.alpha - 2.0 * params.eps) * b_eps * b_eps,
    })
}

/// Floor at `theta = 0` for any honest ball over `R^N`:
/// `((1 - 2 alpha - 2 eps)/4) gamma^{1/2} N^{1/2} / n`.
pub fn lb_honest_zero(n_coords: u64, n: u64, params: &LowerBoundParams) -> Result<f64> {
    params.require_full_range()?;
    Ok(0.25
        * (1.0 - 2.0 * params.alpha - 2.0 * params.eps)
        * params.gamma.sqrt()
        * (n_coords as f64).sqrt()
        / n as f64)
}

/// The Bayes rule for the hypercube prior under the counting loss: `+a` when
/// the observation is nonnegative, `-a` otherwise. Ties go to `+a`.
pub fn bayes_cube_rule(y: &[f64], a: f64) -> Result<Vec<f64>> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid("a", format!("must be > 0, got {a}")));
    }
    Ok(y.iter().map(|&v| if v >= 0.0 { a } else { -a }).collect())
}

/// Exact minimax risk over the hypercube under the counting loss:
/// `Phi(-a/sigma) m`. The Bayes rule's risk is constant over vertices, so
/// this is both the Bayes and the minimax risk.
pub fn bayes_cube_risk(m: u64, a: f64, sigma: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "dimension must be >= 1"));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid("a", format!("must be > 0, got {a}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    Ok(std_normal_cdf(-a / sigma)? * m as f64)
}

/// The L1 bound implied by the chi-squared distance between the zero-mean
/// normal and the vertex mixture: `sqrt(exp(k a^4 n^2) - 1)`. When
/// `k a^4 n^2 <= log(1 + eps^2)` this is at most `eps`.
pub fn l1_mixture_bound(k: u64, a: f64, n: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "must be >= 1"));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
    }
    let exponent = k as f64 * a.powi(4) * (n as f64) * (n as f64);
    if exponent > 700.0 {
        return Err(Error::invalid(
            "a",
            format!("k a^4 n^2 = {exponent} would overflow exp"),
        ));
    }
    Ok((exponent.exp() - 1.0).sqrt())
}

/// Likelihood ratio `dP_k/dP_0` at `y` between the vertex mixture (means
/// `+-a` on the first `k` level-major coordinates) and the zero-mean law:
/// `prod_{i<=k} cosh(n a y_i) e^{-n a^2/2}`. Evaluated in log space.
pub fn mixture_density_ratio(y: &CoefficientVector, k: u64, a: f64, n: u64) -> Result<f64> {
    if k == 0 || k > y.num_coords() {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..={}, got {k}", y.num_coords()),
        ));
    }
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
    }
    let nf = n as f64;
    let mut log_ratio = -(k as f64) * nf * a * a / 2.0;
    for v in y.iter_coords().take(k as usize) {
        // log cosh(x) = |x| + log(1 + e^{-2|x|}) - log 2, stable for large x.
        let x = (nf * a * v).abs();
        log_ratio += x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2;
    }
    Ok(log_ratio.exp())
}

/// Upper tail bound for a central chi-squared with `m` degrees of freedom:
/// `P(X_m >= (1+d) m) <= (1/2) e^{-(m/2)(d - log(1+d))}` for `d > 0`.
pub fn chi2_tail_upper(m: u64, d: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degrees of freedom must be >= 1"));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("d", format!("must be > 0, got {d}")));
    }
    Ok(0.5 * (-(m as f64 / 2.0) * (d - d.ln_1p())).exp())
}

/// The polynomial-exponent corollary of the upper tail bound:
/// `(1/2) e^{-d^2 m/4 + d^3 m/6}`. Weaker than [`chi2_tail_upper`].
pub fn chi2_tail_upper_corollary(m: u64, d: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degrees of freedom must be >= 1"));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid("d", format!("must be > 0, got {d}")));
    }
    let mf = m as f64;
    Ok(0.5 * (-d * d * mf / 4.0 + d * d * d * mf / 6.0).exp())
}

/// Lower tail bound: `P(X_m <= (1-d) m) <= e^{-d^2 m / 4}` for `0 < d < 1`.
pub fn chi2_tail_lower(m: u64, d: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::invalid("m", "degrees of freedom must be >= 1"));
    }
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::invalid("d", format!("must be in (0, 1), got {d}")));
    }
    Ok((-d * d * m as f64 / 4.0).exp())
}

/// The smoothness-dependent threshold constant: the root of
/// `lambda - log lambda = 1 + 4 tau / (1 + 2 tau)`. Always lies strictly
/// between 1 and the keep-rule constant (the right side stays below 3 < 5).
pub fn tau_threshold_constant(tau: f64) -> Result<ThresholdConstant> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid("tau", format!("must be > 0, got {tau}")));
    }
    solve_lambda(1.0 + 4.0 * tau / (1.0 + 2.0 * tau))
}

/// Which keep/drop probability bound applies to a block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KeepBound {
    /// Block energy at most `(sqrt(lambda*) - sqrt(lambda_tau))^2 L sigma^2`:
    /// the keep probability is at most `(1/2) e^{-2 tau L/(1+2 tau)}`.
    SmallSignalKeep { bound: f64 },
    /// Block energy at least `4 lambda* L sigma^2`: the drop probability is
    /// at most `(1/2) e^{-2L}`.
    LargeSignalDrop { bound: f64 },
    /// Neither regime applies; no bound is available.
    NoBound,
}

/// Classifies a block by its signal energy and returns the applicable
/// keep/drop probability bound.
pub fn block_keep_probability_bound(
    tau: f64,
    block_len: usize,
    block_energy: f64,
    sigma_sq: f64,
) -> Result<KeepBound> {
    if block_len == 0 {
        return Err(Error::invalid("block_len", "must be >= 1"));
    }
    if !(block_energy.is_finite() && block_energy >= 0.0) {
        return Err(Error::invalid(
            "block_energy",
            format!("must be >= 0, got {block_energy}"),
        ));
    }
    if !(sigma_sq.is_finite() && sigma_sq > 0.0) {
        return Err(Error::invalid(
            "sigma_sq",
            format!("must be > 0, got {sigma_sq}"),
        ));
    }
    let lambda = threshold_constant();
    let lambda_tau = tau_threshold_constant(tau)?.lambda;
    let len = block_len as f64;
    let small_cap = (lambda.sqrt() - lambda_tau.sqrt()).powi(2) * len * sigma_sq;
    let large_floor = 4.0 * lambda * len * sigma_sq;
    if block_energy <= small_cap {
        Ok(KeepBound::SmallSignalKeep {
            bound: 0.5 * (-2.0 * tau / (1.0 + 2.0 * tau) * len).exp(),
        })
    } else if block_energy >= large_floor {
        Ok(KeepBound::LargeSignalDrop {
            bound: 0.5 * (-2.0 * len).exp(),
        })
    } else {
        Ok(KeepBound::NoBound)
    }
}

/// Deterministic bound on the tail energy of any member of the body:
/// `sum_{j >= m} sum_k theta_{j,k}^2 <= (1 - 2^{-2 tau})^{-1} M^2 2^{-2 tau m}`
/// with `tau` the body's smoothness.
pub fn besov_tail_bound(body: &BesovBody, m: u32) -> f64 {
    let tau = body.beta;
    body.m * body.m * 2f64.powf(-2.0 * tau * m as f64) / (1.0 - 2f64.powf(-2.0 * tau))
}

/// Bound on the number of blocks whose signal energy exceeds `a L / n` over
/// the body: `D L^{-1} M^{2/(1+2 tau)} n^{1/(1+2 tau)}` with the explicit
/// constant `D = 3 (1 - 2^{-2 tau})^{-1/(1+2 tau)} a^{-1/(1+2 tau)}`.
pub fn besov_card_bound(body: &BesovBody, a: f64, block_len: usize, n: u64) -> Result<f64> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::invalid("a", format!("must be > 0, got {a}")));
    }
    if block_len == 0 {
        return Err(Error::invalid("block_len", "must be >= 1"));
    }
    let tau = body.beta;
    let inv = 1.0 / (1.0 + 2.0 * tau);
    let d = 3.0 * (1.0 - 2f64.powf(-2.0 * tau)).powf(-inv) * a.powf(-inv);
    Ok(d / block_len as f64 * body.m.powf(2.0 * inv) * (n as f64).powf(inv))
}

/// Which row of the adaptation-range table applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationRegime {
    /// `N >= n^2`: adaptation over `[beta, 2 beta]` for every `beta`.
    LargeN,
    /// `N = n^rho`, `rho < 2`, `beta >= 1/(2 rho) - 1/4`: range `[beta, 2 beta]`.
    RhoLargeBeta,
    /// `N = n^rho`, `rho < 2`, `beta < 1/(2 rho) - 1/4`: range capped at
    /// `1/rho - 1/2`.
    RhoSmallBeta,
}

/// The maximum range of Besov smoothness over which full adaptation is
/// possible for a ball with coverage over `B^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptationRange {
    pub tau_low: f64,
    pub tau_high: f64,
    pub regime: AdaptationRegime,
}

/// The adaptation-range table, with `rho = log N / log n`.
pub fn adaptation_range(n_coords: u64, n: u64, beta: f64) -> Result<AdaptationRange> {
    if n_coords == 0 {
        return Err(Error::invalid("n_coords", "must be >= 1"));
    }
    if n < 2 {
        return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta", format!("must be > 0, got {beta}")));
    }
    let rho = (n_coords as f64).ln() / (n as f64).ln();
    if rho >= 2.0 {
        return Ok(AdaptationRange {
            tau_low: beta,
            tau_high: 2.0 * beta,
            regime: AdaptationRegime::LargeN,
        });
    }
    if beta >= 1.0 / (2.0 * rho) - 0.25 {
        Ok(AdaptationRange {
            tau_low: beta,
            tau_high: 2.0 * beta,
            regime: AdaptationRegime::RhoLargeBeta,
        })
    } else {
        Ok(AdaptationRange {
            tau_low: beta,
            tau_high: 1.0 / rho - 0.5,
            regime: AdaptationRegime::RhoSmallBeta,
        })
    }
}

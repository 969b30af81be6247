//! The three confidence-ball constructions.
//!
//! Each ball is centered on the block-thresholding estimate and its squared
//! radius is an estimate of that estimator's loss:
//!
//! * [`single_level_ball`] covers the mean vector of one resolution level
//!   (falling back to the exact chi-squared ball when the level is narrower
//!   than a block);
//! * [`adaptive_ball`] covers a Besov body `B^beta_{p,q}(M)` with expected
//!   squared radius adapting over smoothness `tau` in `[beta, 2 beta]`;
//! * [`honest_ball`] covers all of `R^N`.
//!
//! Squared radii are assembled with compensated summation and reduced in a
//! fixed order, so results are bit-stable and independent oracle evaluations
//! agree to `1e-10` relative.

use crate::blocks::{
    block_size_for, block_summaries, threshold_constant, threshold_estimate, threshold_level,
};
use crate::error::{Error, Result};
use crate::numerics::{chi2_quantile, std_normal_quantile, CompensatedSum};
use crate::sequence::{BesovBody, CoefficientVector};
use serde::{Deserialize, Serialize};

/// Which construction produced a ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    /// Covers the coefficients of resolution level `j` only.
    SingleLevel { j: u32 },
    /// Covers a Besov body with the given smoothness and radius.
    BesovAdaptive { beta: f64, m: f64 },
    /// Covers all of `R^N`.
    Honest,
}

/// Named breakdown of the squared radius. The total may be negative for the
/// adaptive construction (its tail term is a signed unbiased estimate); the
/// ball's radius clips it at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSqTerms {
    /// Data-free term fixed by `(alpha, n)` and the construction.
    pub deterministic: f64,
    /// Positive part, per level, of the centered energies of dropped blocks.
    pub dropped_excess: f64,
    /// `(2 lambda* + 8 lambda*^{1/2} - 1) / n` times the total size of kept
    /// blocks.
    pub kept_penalty: f64,
    /// Unbiased estimate of the zeroed-tail energy (adaptive construction
    /// only; zero elsewhere).
    pub unbiased_tail: f64,
}

impl RadiusSqTerms {
    /// Signed sum of the terms.
    pub fn total(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.deterministic);
        acc.add(self.dropped_excess);
        acc.add(self.kept_penalty);
        acc.add(self.unbiased_tail);
        acc.total()
    }
}

/// A confidence ball: a center, a radius, and a membership predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBall {
    pub kind: BallKind,
    pub alpha: f64,
    pub radius: f64,
    pub radius_sq_terms: RadiusSqTerms,
    pub center: CoefficientVector,
}

impl ConfidenceBall {
    /// Squared radius (after clipping at zero).
    pub fn radius_sq(&self) -> f64 {
        self.radius * self.radius
    }

    /// Closed-ball membership: `||theta - center||_2 <= radius`, restricted
    /// to level `j` for a single-level ball.
    pub fn contains(&self, theta: &CoefficientVector) -> Result<bool> {
        match self.kind {
            BallKind::SingleLevel { j } => {
                if j >= theta.num_levels() || j >= self.center.num_levels() {
                    return Err(Error::ShapeMismatch(format!(
                        "level {j} not present in both vectors"
                    )));
                }
                let sq: f64 = self
                    .center
                    .level(j)
                    .iter()
                    .zip(theta.level(j))
                    .map(|(c, t)| (c - t) * (c - t))
                    .sum();
                Ok(sq.sqrt() <= self.radius)
            }
            _ => {
                let sq = self.center.sq_distance(theta)?;
                Ok(sq.sqrt() <= self.radius)
            }
        }
    }
}

/// Largest-`J1`/`J2` level cutoffs for the adaptive construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutoffLevels {
    /// Levels `>= j1` are estimated by zero.
    pub j1: u32,
    /// Levels in `j1..j2` get the unbiased quadratic tail estimate.
    pub j2: u32,
}

/// Largest `j` with `2^j <= cap`, clamped to `[0, j_levels]`. The comparison
/// tolerates ~1e-9 relative noise so that caps like `n^{1/3}` computed by
/// `powf` still land on exact dyadic boundaries.
pub(crate) fn largest_level_below(cap: f64, j_levels: u32) -> u32 {
    let n_coords = ((1u64 << j_levels) - 1) as f64;
    if cap >= n_coords {
        // Cap inactive: no levels are cut off.
        return j_levels;
    }
    if cap < 1.0 {
        return 0;
    }
    let j = (cap.log2() + 1e-9).floor();
    (j.max(0.0) as u32).min(j_levels)
}

/// The level cutoffs `J1` and `J2`: the largest integers with
/// `2^{J1} <= min(N, M^{2/(1+2 beta)} n^{1/(1+2 beta)})` and
/// `2^{J2} <= min(N, M^{4/(1+4 beta)} n^{2/(1+4 beta)})`. When a cap is at
/// least `N` the cutoff saturates at `J` (no level is cut off).
pub fn cutoff_levels(j_levels: u32, n: u64, beta: f64, m: f64) -> CutoffLevels {
    assert!(
        beta > 0.0 && m > 0.0,
        "cutoff_levels requires beta > 0, M > 0"
    );
    let nf = n as f64;
    let cap1 = m.powf(2.0 / (1.0 + 2.0 * beta)) * nf.powf(1.0 / (1.0 + 2.0 * beta));
    let cap2 = m.powf(4.0 / (1.0 + 4.0 * beta)) * nf.powf(2.0 / (1.0 + 4.0 * beta));
    let j1 = largest_level_below(cap1, j_levels);
    let j2 = largest_level_below(cap2, j_levels).max(j1);
    CutoffLevels { j1, j2 }
}

/// The deterministic constant of the adaptive radius, assembled from the
/// five explicit terms:
///
/// ```text
/// a0 = 2^{2 beta} (1 - 2^{-2 beta})^{-1}
/// a1 = z_{alpha/4} 2^{5/2} lambda*^{1/2} (1 - 2^{-2 beta})^{1/(2+4 beta)} F
/// a2 = 2 log^{1/2}(4/alpha) F
/// a3 = z_{alpha/4} 2^{beta+1} (1 - 2^{-2 beta})^{-1/2} F
/// a4 = 2 log^{1/2}(4/alpha)
/// F  = M^{1/(1+2 beta) - 2/(1+4 beta)} n^{1/(2+4 beta) - 1/(1+4 beta)}
/// ```
///
/// The exponent of `n` in `F` is negative, so `a1 + a2 + a3 -> 0` as
/// `n -> infinity`.
pub fn c_alpha(alpha: f64, beta: f64, m: f64, n: u64) -> f64 {
    assert!(
        alpha > 0.0 && alpha < 0.5 && beta > 0.0 && m > 0.0 && n >= 2,
        "c_alpha requires 0 < alpha < 1/2, beta > 0, M > 0, n >= 2"
    );
    let z_quarter = std_normal_quantile(1.0 - alpha / 4.0).expect("alpha/4 in (0, 1)");
    let lambda = threshold_constant();
    let decay = 1.0 - 2f64.powf(-2.0 * beta);
    let nf = n as f64;
    let f = m.powf(1.0 / (1.0 + 2.0 * beta) - 2.0 / (1.0 + 4.0 * beta))
        * nf.powf(1.0 / (2.0 + 4.0 * beta) - 1.0 / (1.0 + 4.0 * beta));
    let a0 = 2f64.powf(2.0 * beta) / decay;
    let a1 = z_quarter * 2f64.powf(2.5) * lambda.sqrt() * decay.powf(1.0 / (2.0 + 4.0 * beta)) * f;
    let a2 = 2.0 * (4.0 / alpha).ln().sqrt() * f;
    let a3 = z_quarter * 2f64.powf(beta + 1.0) / decay.sqrt() * f;
    let a4 = 2.0 * (4.0 / alpha).ln().sqrt();
    a0 + a1 + a2 + a3 + a4
}

/// `2 log^{1/2}(2/alpha) + 4 lambda*^{1/2} z_{alpha/2}`, the data-free factor
/// shared by the single-level and honest radii.
fn deterministic_factor(alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must be in (0, 1), got {alpha}"),
        ));
    }
    let z_half = std_normal_quantile(1.0 - alpha / 2.0)?;
    Ok(2.0 * (2.0 / alpha).ln().sqrt() + 4.0 * threshold_constant().sqrt() * z_half)
}

fn a5() -> f64 {
    let lambda = threshold_constant();
    2.0 * lambda + 8.0 * lambda.sqrt() - 1.0
}

/// Per-level data terms of the radius: the positive part of the centered
/// dropped-block energies, and the total size of kept blocks.
fn level_data_terms(y: &CoefficientVector, j: u32, n: u64) -> Result<(f64, usize)> {
    let mut dropped = CompensatedSum::new();
    let mut kept_size = 0usize;
    for s in block_summaries(y, j, n)? {
        if s.kept {
            kept_size += s.size;
        } else {
            dropped.add(s.s2 - s.size as f64 / n as f64);
        }
    }
    Ok((dropped.total().max(0.0), kept_size))
}

/// The exact-pivot ball for level `j`: centered on the observations with
/// squared radius `chi2_quantile(2^j, 1 - alpha) / n`. Coverage is exactly
/// `1 - alpha` for every `theta`.
pub fn usual_ball(y: &CoefficientVector, j: u32, n: u64, alpha: f64) -> Result<ConfidenceBall> {
    if j >= y.num_levels() {
        return Err(Error::ShapeMismatch(format!(
            "level {j} out of range for J = {}",
            y.num_levels()
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(
            "alpha",
            format!("must be in (0, 1), got {alpha}"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
    }
    let m = 1u64 << j;
    let radius_sq = chi2_quantile(m, 1.0 - alpha)? / n as f64;
    let mut center = CoefficientVector::zeros(y.num_levels());
    center.level_mut(j).copy_from_slice(y.level(j));
    Ok(ConfidenceBall {
        kind: BallKind::SingleLevel { j },
        alpha,
        radius: radius_sq.sqrt(),
        radius_sq_terms: RadiusSqTerms {
            deterministic: radius_sq,
            dropped_excess: 0.0,
            kept_penalty: 0.0,
            unbiased_tail: 0.0,
        },
        center,
    })
}

/// The single-level ball. For levels at least one block wide
/// (`2^j >= L`) the center is the block-thresholding estimate on level `j`
/// and the squared radius is
///
/// ```text
/// [2 log^{1/2}(2/alpha) + 4 lambda*^{1/2} z_{alpha/2}] 2^{j/2} / n
///   + ( sum_i (S^2_{j,i} - size_i/n) I(S^2_{j,i} <= lambda* size_i/n) )_+
///   + (2 lambda* + 8 lambda*^{1/2} - 1) / n * sum of kept block sizes.
/// ```
///
/// Narrower levels delegate to [`usual_ball`]. Levels with `2^j > n^2` are
/// rejected: the problem is degenerate there.
pub fn single_level_ball(
    y: &CoefficientVector,
    j: u32,
    n: u64,
    alpha: f64,
) -> Result<ConfidenceBall> {
    if j >= y.num_levels() {
        return Err(Error::ShapeMismatch(format!(
            "level {j} out of range for J = {}",
            y.num_levels()
        )));
    }
    if n < 2 {
        return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
    }
    if (1u128 << j) > (n as u128) * (n as u128) {
        return Err(Error::invalid(
            "j",
            format!(
                "2^{j} exceeds n^2 = {}; no nontrivial construction applies",
                (n as u128) * (n as u128)
            ),
        ));
    }
    let width = 1u64 << j;
    if (width as usize) < block_size_for(n) {
        return usual_ball(y, j, n, alpha);
    }
    let deterministic = deterministic_factor(alpha)? * 2f64.powf(j as f64 / 2.0) / n as f64;
    let (dropped_excess, kept_size) = level_data_terms(y, j, n)?;
    let kept_penalty = a5() / n as f64 * kept_size as f64;
    let mut center = CoefficientVector::zeros(y.num_levels());
    let row = threshold_level(y, j, n)?;
    center.level_mut(j).copy_from_slice(&row);
    let terms = RadiusSqTerms {
        deterministic,
        dropped_excess,
        kept_penalty,
        unbiased_tail: 0.0,
    };
    Ok(ConfidenceBall {
        kind: BallKind::SingleLevel { j },
        alpha,
        radius: terms.total().max(0.0).sqrt(),
        radius_sq_terms: terms,
        center,
    })
}

/// The Besov-adaptive ball over `B^beta_{p,q}(M)`. The center thresholds
/// levels below `J1` and zeroes the rest; the squared radius is
///
/// ```text
/// c_alpha M^{2/(1+4 beta)} n^{-4 beta/(1+4 beta)}
///   + sum_{j < J1} ( per-level dropped positive part )
///   + (2 lambda* + 8 lambda*^{1/2} - 1) / n * kept sizes below J1
///   + sum_{j = J1}^{J2 - 1} sum_k (y_{j,k}^2 - 1/n)
/// ```
///
/// The signed tail estimate can drive the total negative near `theta = 0`;
/// the radius clips at zero (a point ball) rather than going empty.
pub fn adaptive_ball(
    y: &CoefficientVector,
    n: u64,
    alpha: f64,
    body: &BesovBody,
) -> Result<ConfidenceBall> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(
            "alpha",
            format!("must be in (0, 1/2), got {alpha}"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
    }
    let cutoffs = cutoff_levels(y.num_levels(), n, body.beta, body.m);
    let nf = n as f64;
    let deterministic = c_alpha(alpha, body.beta, body.m, n)
        * body.m.powf(2.0 / (1.0 + 4.0 * body.beta))
        * nf.powf(-4.0 * body.beta / (1.0 + 4.0 * body.beta));
    let mut dropped = CompensatedSum::new();
    let mut kept_penalty = 0.0;
    for j in 0..cutoffs.j1 {
        let (level_dropped, kept_size) = level_data_terms(y, j, n)?;
        dropped.add(level_dropped);
        kept_penalty += a5() / nf * kept_size as f64;
    }
    let mut tail = CompensatedSum::new();
    for j in cutoffs.j1..cutoffs.j2 {
        for v in y.level(j) {
            tail.add(v * v - 1.0 / nf);
        }
    }
    let terms = RadiusSqTerms {
        deterministic,
        dropped_excess: dropped.total(),
        kept_penalty,
        unbiased_tail: tail.total(),
    };
    Ok(ConfidenceBall {
        kind: BallKind::BesovAdaptive {
            beta: body.beta,
            m: body.m,
        },
        alpha,
        radius: terms.total().max(0.0).sqrt(),
        radius_sq_terms: terms,
        center: threshold_estimate(y, n, cutoffs.j1)?,
    })
}

/// The honest ball over all of `R^N`. Every level is thresholded and the
/// squared radius is
///
/// ```text
/// [2 log^{1/2}(2/alpha) + 4 lambda*^{1/2} z_{alpha/2}] N^{1/2} / n
///   + sum_j ( per-level dropped positive part )
///   + (2 lambda* + 8 lambda*^{1/2} - 1) / n * total kept sizes.
/// ```
///
/// Requires `N <= n^2`: beyond that even the trivial ball is rate-optimal
/// and the honest radius cannot shrink to zero.
pub fn honest_ball(y: &CoefficientVector, n: u64, alpha: f64) -> Result<ConfidenceBall> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 0.5) {
        return Err(Error::invalid(
            "alpha",
            format!("must be in (0, 1/2), got {alpha}"),
        ));
    }
    if n < 2 {
        return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
    }
    let n_coords = y.num_coords();
    if (n_coords as u128) > (n as u128) * (n as u128) {
        return Err(Error::invalid(
            "y",
            format!("N = {n_coords} exceeds n^2; the honest radius cannot converge"),
        ));
    }
    let nf = n as f64;
    let deterministic = deterministic_factor(alpha)? * (n_coords as f64).sqrt() / nf;
    let mut dropped = CompensatedSum::new();
    let mut kept_penalty = 0.0;
    for j in 0..y.num_levels() {
        let (level_dropped, kept_size) = level_data_terms(y, j, n)?;
        dropped.add(level_dropped);
        kept_penalty += a5() / nf * kept_size as f64;
    }
    let terms = RadiusSqTerms {
        deterministic,
        dropped_excess: dropped.total(),
        kept_penalty,
        unbiased_tail: 0.0,
    };
    Ok(ConfidenceBall {
        kind: BallKind::Honest,
        alpha,
        radius: terms.total().max(0.0).sqrt(),
        radius_sq_terms: terms,
        center: threshold_estimate(y, n, y.num_levels())?,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle values keep their evaluated digits
mod tests {
    use super::*;
    use crate::blocks::partition_level;
    use crate::sequence::NoiseModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn usual_ball_radius_closed_forms() {
        let y = CoefficientVector::zeros(4);
        // m = 2: chi2 quantile at 0.95 is -2 log(0.05).
        let ball = usual_ball(&y, 1, 100, 0.05).unwrap();
        assert_abs_diff_eq!(ball.radius_sq(), 5.991464547107982 / 100.0, epsilon = 1e-10);
        assert_eq!(ball.kind, BallKind::SingleLevel { j: 1 });
        // m = 8, alpha = 0.1, n = 100: frozen from the bisection oracle.
        let ball = usual_ball(&y, 3, 100, 0.1).unwrap();
        assert_abs_diff_eq!(
            ball.radius_sq_terms.deterministic,
            13.361566136511727 / 100.0,
            epsilon = 1e-9
        );
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
        // Center echoes the observations on the level.
        let theta = CoefficientVector::zeros(4);
        let y = NoiseModel::new(100, 3).unwrap().observe(&theta);
        let ball = usual_ball(&y, 2, 100, 0.1).unwrap();
        assert_eq!(ball.center.level(2), y.level(2));
        assert!(ball.center.level(3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_level_radius_at_zero_data() {
        // y = 0: both data terms vanish and the radius is the closed form,
        // frozen from the 50-digit evaluation.
        let y = CoefficientVector::zeros(9);
        let ball = single_level_ball(&y, 8, 1024, 0.05).unwrap();
        assert_abs_diff_eq!(ball.radius_sq(), 0.38265346607578161, epsilon = 1e-10);
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
        assert_eq!(ball.radius_sq_terms.kept_penalty, 0.0);
        assert_eq!(ball.radius_sq_terms.unbiased_tail, 0.0);
    }

    #[test]
    fn single_level_all_blocks_kept() {
        let mut y = CoefficientVector::zeros(9);
        y.level_mut(8).fill(1.0); // every block far above threshold
        let n = 1024u64;
        let ball = single_level_ball(&y, 8, n, 0.05).unwrap();
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
        assert_abs_diff_eq!(
            ball.radius_sq_terms.kept_penalty,
            a5() * 256.0 / n as f64,
            epsilon = 1e-12
        );
        // Kept blocks are copied verbatim into the center.
        assert_eq!(ball.center.level(8), y.level(8));
    }

    #[test]
    fn single_level_delegates_to_usual_below_block_width() {
        // n = 1024 gives L = 7; level 2 (width 4) is narrower.
        let theta = CoefficientVector::zeros(5);
        let y = NoiseModel::new(1024, 9).unwrap().observe(&theta);
        let ball = single_level_ball(&y, 2, 1024, 0.1).unwrap();
        let usual = usual_ball(&y, 2, 1024, 0.1).unwrap();
        assert_eq!(ball, usual);
        // Level 3 (width 8 >= 7) uses the thresholding construction.
        let ball = single_level_ball(&y, 3, 1024, 0.1).unwrap();
        assert!(ball.radius_sq_terms.deterministic > 0.0);
        assert_ne!(ball, usual_ball(&y, 3, 1024, 0.1).unwrap());
    }

    #[test]
    fn single_level_rejects_degenerate_level() {
        let y = CoefficientVector::zeros(6);
        // 2^5 = 32 > 5^2 = 25.
        assert!(single_level_ball(&y, 5, 5, 0.1).is_err());
        assert!(single_level_ball(&y, 4, 5, 0.1).is_ok()); // 16 <= 25
    }

    #[test]
    fn cutoff_levels_examples() {
        // J = 11, n = 2^10, M = 1, beta = 1/2: caps 2^5 and 2^{20/3}.
        let c = cutoff_levels(11, 1024, 0.5, 1.0);
        assert_eq!((c.j1, c.j2), (5, 6));
        // Caps at or above N leave every level uncut.
        let c = cutoff_levels(4, 1024, 0.5, 1.0);
        assert_eq!((c.j1, c.j2), (4, 4));
        // Vanishing radius cuts everything.
        let c = cutoff_levels(10, 1024, 0.5, 1e-6);
        assert_eq!((c.j1, c.j2), (0, 0));
    }

    #[test]
    fn c_alpha_frozen_value_and_limits() {
        // beta = 1/2: a0 = 2 / (1 - 1/2) = 4.
        // Frozen from the 50-digit evaluation of the five-term sum.
        assert_abs_diff_eq!(
            c_alpha(0.05, 0.5, 1.0, 1024),
            31.328261636580653,
            epsilon = 1e-9
        );
        // a1 + a2 + a3 decay like n^{-1/12} (beta = 1/2): the excess over
        // a0 + a4 halves exactly when n grows by 2^12.
        let a0 = 4.0;
        let a4 = 2.0 * (4.0_f64 / 0.05).ln().sqrt();
        let e1 = c_alpha(0.05, 0.5, 1.0, 1 << 10) - a0 - a4;
        let e2 = c_alpha(0.05, 0.5, 1.0, 1 << 22) - a0 - a4;
        assert!(e1 > 0.0 && e2 > 0.0);
        assert_abs_diff_eq!(e2 / e1, 0.5, epsilon = 1e-9);
        // Monotone decreasing in n.
        assert!(c_alpha(0.05, 0.5, 1.0, 1 << 8) > c_alpha(0.05, 0.5, 1.0, 1 << 16));
    }

    #[test]
    fn adaptive_radius_at_zero_data() {
        // y = 0: radius^2 = c_alpha M^{2/(1+4b)} n^{-4b/(1+4b)} - (2^{J2} - 2^{J1})/n.
        let y = CoefficientVector::zeros(11);
        let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
        let ball = adaptive_ball(&y, 1024, 0.05, &body).unwrap();
        assert_abs_diff_eq!(
            ball.radius_sq_terms.total(),
            0.27711825228548417,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            ball.radius_sq_terms.unbiased_tail,
            -(64.0 - 32.0) / 1024.0,
            epsilon = 1e-15
        );
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
    }

    #[test]
    fn adaptive_tail_term_empty_when_cutoffs_coincide() {
        // J = 4 < J1: no unbiased tail at all.
        let theta = CoefficientVector::zeros(4);
        let y = NoiseModel::new(1024, 21).unwrap().observe(&theta);
        let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
        let ball = adaptive_ball(&y, 1024, 0.05, &body).unwrap();
        assert_eq!(ball.radius_sq_terms.unbiased_tail, 0.0);
    }

    #[test]
    fn adaptive_negative_total_clips_radius_to_zero() {
        // At large n the tail range J1..J2 is wide enough that the unbiased
        // estimate at y = 0, -(2^{J2} - 2^{J1})/n, outweighs the
        // deterministic term; the radius clips to a point ball.
        let y = CoefficientVector::zeros(14);
        let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
        let ball = adaptive_ball(&y, 1 << 20, 0.49, &body).unwrap();
        assert!(ball.radius_sq_terms.total() < 0.0);
        assert_eq!(ball.radius, 0.0);
        assert!(ball.contains(&y).unwrap());
    }

    /// Independent re-implementation of the adaptive radius, term by term,
    /// summing blocks and levels in reverse order with its own compensation.
    #[test]
    fn adaptive_radius_matches_independent_evaluation() {
        let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
        for seed in 0..25u64 {
            let theta = body.boundary_member(11, seed);
            let n = 700 + 37 * seed;
            let y = NoiseModel::new(n, seed ^ 0xabcd).unwrap().observe(&theta);
            let ball = adaptive_ball(&y, n, 0.1, &body).unwrap();

            let nf = n as f64;
            let cut = cutoff_levels(11, n, body.beta, body.m);
            let lambda = threshold_constant();
            let block_size = block_size_for(n);
            let mut dropped_parts: Vec<f64> = Vec::new();
            let mut kept_total = 0.0_f64;
            for j in (0..cut.j1).rev() {
                let partition = partition_level(j, block_size);
                let mut level_terms: Vec<f64> = Vec::new();
                for range in partition.blocks.iter().rev() {
                    let mut s2 = 0.0;
                    let mut comp = 0.0;
                    for k in range.clone().rev() {
                        let v = y.level(j)[k] * y.level(j)[k];
                        let t = s2 + v;
                        comp += if s2.abs() >= v.abs() {
                            (s2 - t) + v
                        } else {
                            (v - t) + s2
                        };
                        s2 = t;
                    }
                    s2 += comp;
                    let size = range.len() as f64;
                    if s2 >= lambda * size / nf {
                        kept_total += size;
                    } else {
                        level_terms.push(s2 - size / nf);
                    }
                }
                let level_sum: f64 = level_terms.iter().sum();
                dropped_parts.push(level_sum.max(0.0));
            }
            let dropped: f64 = dropped_parts.iter().sum();
            let kept_penalty = (2.0 * lambda + 8.0 * lambda.sqrt() - 1.0) / nf * kept_total;
            let mut tail = 0.0;
            for j in (cut.j1..cut.j2).rev() {
                for v in y.level(j).iter().rev() {
                    tail += v * v - 1.0 / nf;
                }
            }
            let deterministic =
                c_alpha(0.1, body.beta, body.m, n) * body.m.powf(2.0 / 3.0) * nf.powf(-2.0 / 3.0);

            let t = &ball.radius_sq_terms;
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1e-12);
            assert!(
                close(t.deterministic, deterministic),
                "deterministic: {} vs {}",
                t.deterministic,
                deterministic
            );
            assert!(
                close(t.dropped_excess, dropped),
                "dropped: {} vs {}",
                t.dropped_excess,
                dropped
            );
            assert!(
                close(t.kept_penalty, kept_penalty),
                "kept: {} vs {}",
                t.kept_penalty,
                kept_penalty
            );
            assert!(
                close(t.unbiased_tail, tail),
                "tail: {} vs {}",
                t.unbiased_tail,
                tail
            );
            let total = deterministic + dropped + kept_penalty + tail;
            assert!(close(t.total(), total), "total: {} vs {}", t.total(), total);
        }
    }

    #[test]
    fn honest_radius_at_zero_data() {
        // First term exactly; frozen from the 50-digit evaluation
        // (alpha = 0.1, N = 1023, n = 1024).
        let y = CoefficientVector::zeros(10);
        let ball = honest_ball(&y, 1024, 0.1).unwrap();
        assert_abs_diff_eq!(ball.radius_sq(), 0.6493836219103667, epsilon = 1e-10);
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
        assert_eq!(ball.radius_sq_terms.kept_penalty, 0.0);
    }

    #[test]
    fn honest_all_blocks_kept() {
        let mut y = CoefficientVector::zeros(10);
        for j in 0..10 {
            y.level_mut(j).fill(2.0);
        }
        let ball = honest_ball(&y, 1024, 0.1).unwrap();
        assert_eq!(ball.radius_sq_terms.dropped_excess, 0.0);
        assert_abs_diff_eq!(
            ball.radius_sq_terms.kept_penalty,
            a5() * 1023.0 / 1024.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn honest_rejects_oversized_index_set() {
        let y = CoefficientVector::zeros(10); // N = 1023
        assert!(honest_ball(&y, 31, 0.1).is_err()); // 31^2 = 961 < 1023
        assert!(honest_ball(&y, 32, 0.1).is_ok()); // 32^2 = 1024 >= 1023
    }

    #[test]
    fn honest_single_level_degenerate_consistency() {
        // J = 1: a single level of width 1 forms one block; hand evaluation.
        let n = 16u64; // L = 3, width 1 < L, but honest always thresholds
        let lambda = threshold_constant();
        let v_keep = (2.0 * lambda / n as f64).sqrt();
        let mut y = CoefficientVector::zeros(1);
        y.level_mut(0)[0] = v_keep;
        let ball = honest_ball(&y, n, 0.1).unwrap();
        let first = deterministic_factor(0.1).unwrap() / n as f64;
        assert_abs_diff_eq!(
            ball.radius_sq_terms.total(),
            first + a5() / n as f64,
            epsilon = 1e-12
        );
        // Dropped branch: v^2 below threshold contributes (v^2 - 1/n)_+.
        let v_drop = (0.5 * lambda / n as f64).sqrt();
        y.level_mut(0)[0] = v_drop;
        let ball = honest_ball(&y, n, 0.1).unwrap();
        let expected = first + (v_drop * v_drop - 1.0 / n as f64).max(0.0);
        assert_abs_diff_eq!(ball.radius_sq_terms.total(), expected, epsilon = 1e-12);
    }

    #[test]
    fn deterministic_terms_nonincreasing_in_alpha() {
        let alphas = [0.01, 0.05, 0.1, 0.2, 0.4];
        let mut prev = f64::INFINITY;
        for &a in &alphas {
            let f = deterministic_factor(a).unwrap();
            assert!(f <= prev, "factor increased at alpha = {a}");
            prev = f;
        }
        let mut prev = f64::INFINITY;
        for &a in &alphas {
            let c = c_alpha(a, 0.5, 1.0, 1024);
            assert!(c <= prev, "c_alpha increased at alpha = {a}");
            prev = c;
        }
    }

    #[test]
    fn membership_is_a_closed_ball() {
        let center = CoefficientVector::zeros(3);
        let ball = ConfidenceBall {
            kind: BallKind::Honest,
            alpha: 0.1,
            radius: 2.0,
            radius_sq_terms: RadiusSqTerms {
                deterministic: 4.0,
                dropped_excess: 0.0,
                kept_penalty: 0.0,
                unbiased_tail: 0.0,
            },
            center,
        };
        let mut theta = CoefficientVector::zeros(3);
        assert!(ball.contains(&theta).unwrap());
        theta.level_mut(0)[0] = 2.0; // exactly on the boundary
        assert!(ball.contains(&theta).unwrap());
        theta.level_mut(0)[0] = 2.0 + 1e-9;
        assert!(!ball.contains(&theta).unwrap());
        // Shape mismatch rejected.
        assert!(ball.contains(&CoefficientVector::zeros(4)).is_err());
    }

    #[test]
    fn single_level_membership_ignores_other_levels() {
        let y = CoefficientVector::zeros(5);
        let ball = single_level_ball(&y, 3, 1024, 0.1).unwrap();
        let mut theta = CoefficientVector::zeros(5);
        theta.level_mut(4)[7] = 1e6; // outside level is irrelevant
        assert!(ball.contains(&theta).unwrap());
        theta.level_mut(3)[0] = ball.radius + 1e-6;
        assert!(!ball.contains(&theta).unwrap());
    }

    #[test]
    fn radii_are_finite_and_nonnegative() {
        let body = BesovBody::new(0.5, 2.0, 2.0, 1.0).unwrap();
        for seed in 0..50u64 {
            let theta = body.boundary_member(9, seed);
            let y = NoiseModel::new(300, seed).unwrap().observe(&theta);
            for ball in [
                single_level_ball(&y, 8, 300, 0.1).unwrap(),
                adaptive_ball(&y, 300, 0.1, &body).unwrap(),
                honest_ball(&y, 300, 0.1).unwrap(),
            ] {
                assert!(ball.radius.is_finite() && ball.radius >= 0.0);
                assert!(ball.radius_sq_terms.total().is_finite());
            }
        }
    }

    #[test]
    fn ball_json_contract() {
        let y = CoefficientVector::zeros(2);
        let ball = usual_ball(&y, 1, 100, 0.1).unwrap();
        let json = serde_json::to_value(&ball).unwrap();
        assert!(json.get("kind").is_some());
        assert!(json.get("alpha").is_some());
        assert!(json.get("radius").is_some());
        assert!(json["radius_sq_terms"].get("deterministic").is_some());
        assert_eq!(json["center"]["J"], 2);
        assert_eq!(json["kind"]["single_level"]["j"], 1);
        let back: ConfidenceBall = serde_json::from_value(json).unwrap();
        assert_eq!(back, ball);
        // Honest kind serializes as a bare string.
        let ball = honest_ball(&y, 100, 0.1).unwrap();
        let json = serde_json::to_value(&ball).unwrap();
        assert_eq!(json["kind"], "honest");
    }
}

//! The data model: dyadic coefficient vectors, Besov bodies, observation
//! sampling, and the least-favorable configurations used by the lower bounds.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Derives an independent substream seed from a base seed and a counter.
///
/// The per-replicate stream is a pure function of `(seed, index)`, so results
/// never depend on execution order or thread count.
pub fn substream_seed(seed: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(seed ^ mix(index))
}

/// A coefficient vector on the dyadic index set: level `j` holds `2^j`
/// entries, `j = 0..J-1`, for `N = 2^J - 1` coordinates in total.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    levels: Vec<Vec<f64>>,
}

impl CoefficientVector {
    /// The zero vector with `j_levels` dyadic levels.
    pub fn zeros(j_levels: u32) -> Self {
        let levels = (0..j_levels).map(|j| vec![0.0; 1 << j]).collect();
        CoefficientVector { levels }
    }

    /// Builds a vector from per-level arrays, validating the dyadic shape
    /// and that every entry is finite.
    pub fn from_levels(levels: Vec<Vec<f64>>) -> Result<Self> {
        for (j, level) in levels.iter().enumerate() {
            if level.len() != 1usize << j {
                return Err(Error::ShapeMismatch(format!(
                    "level {j} has {} entries, expected {}",
                    level.len(),
                    1usize << j
                )));
            }
            if level.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    "levels",
                    format!("non-finite entry at level {j}"),
                ));
            }
        }
        Ok(CoefficientVector { levels })
    }

    /// Number of dyadic levels `J`.
    pub fn num_levels(&self) -> u32 {
        self.levels.len() as u32
    }

    /// Total coordinate count `N = 2^J - 1`.
    pub fn num_coords(&self) -> u64 {
        (1u64 << self.levels.len()) - 1
    }

    /// The entries of level `j`.
    pub fn level(&self, j: u32) -> &[f64] {
        &self.levels[j as usize]
    }

    pub(crate) fn level_mut(&mut self, j: u32) -> &mut [f64] {
        &mut self.levels[j as usize]
    }

    /// Iterates all coordinates in level-major order:
    /// `(0,1), (1,1), (1,2), (2,1), ...`.
    pub fn iter_coords(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().flat_map(|l| l.iter().copied())
    }

    /// Squared Euclidean distance over all coordinates.
    pub fn sq_distance(&self, other: &CoefficientVector) -> Result<f64> {
        if self.num_levels() != other.num_levels() {
            return Err(Error::ShapeMismatch(format!(
                "J = {} vs J = {}",
                self.num_levels(),
                other.num_levels()
            )));
        }
        let mut sum = 0.0;
        for (a, b) in self.iter_coords().zip(other.iter_coords()) {
            let d = a - b;
            sum += d * d;
        }
        Ok(sum)
    }

    /// A hypercube vertex: level `j` holds `+-a` per the sign pattern, every
    /// other level is zero.
    pub fn hypercube(j_levels: u32, j: u32, a: f64, signs: &[bool]) -> Result<Self> {
        if j >= j_levels {
            return Err(Error::invalid(
                "j",
                format!("level {j} out of range for J = {j_levels}"),
            ));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
        }
        if signs.len() != 1usize << j {
            return Err(Error::ShapeMismatch(format!(
                "sign pattern has {} entries, level {j} needs {}",
                signs.len(),
                1usize << j
            )));
        }
        let mut theta = Self::zeros(j_levels);
        for (slot, &plus) in theta.level_mut(j).iter_mut().zip(signs) {
            *slot = if plus { a } else { -a };
        }
        Ok(theta)
    }

    /// A vertex of the set whose first `k_count` coordinates (in level-major
    /// order) are `+-a` and whose remaining coordinates are zero. The l2 norm
    /// is `a * sqrt(k_count)` for any sign pattern.
    pub fn vertex_set(j_levels: u32, k_count: u64, a: f64, signs: &[bool]) -> Result<Self> {
        let n_coords = (1u64 << j_levels) - 1;
        if k_count == 0 || k_count > n_coords {
            return Err(Error::invalid(
                "k_count",
                format!("must be in 1..={n_coords}, got {k_count}"),
            ));
        }
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::invalid("a", format!("must be >= 0, got {a}")));
        }
        if signs.len() as u64 != k_count {
            return Err(Error::ShapeMismatch(format!(
                "sign pattern has {} entries, expected {k_count}",
                signs.len()
            )));
        }
        let mut theta = Self::zeros(j_levels);
        let mut placed = 0usize;
        'outer: for j in 0..j_levels {
            for slot in theta.level_mut(j).iter_mut() {
                if placed as u64 == k_count {
                    break 'outer;
                }
                *slot = if signs[placed] { a } else { -a };
                placed += 1;
            }
        }
        Ok(theta)
    }
}

impl Serialize for CoefficientVector {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(rename = "J")]
            j_levels: u32,
            levels: &'a [Vec<f64>],
        }
        Repr {
            j_levels: self.num_levels(),
            levels: &self.levels,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CoefficientVector {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            #[serde(rename = "J")]
            j_levels: u32,
            levels: Vec<Vec<f64>>,
        }
        let repr = Repr::deserialize(deserializer)?;
        if repr.j_levels as usize != repr.levels.len() {
            return Err(serde::de::Error::custom(format!(
                "J = {} does not match {} levels",
                repr.j_levels,
                repr.levels.len()
            )));
        }
        CoefficientVector::from_levels(repr.levels).map_err(serde::de::Error::custom)
    }
}

/// The constraint set `B^beta_{p,q}(M)` on dyadic coefficients: the weighted
/// `l_q` norm over levels of the per-level `l_p` norms, with level weight
/// `2^{j s}`, `s = beta + 1/2 - 1/p`, must not exceed `M`.
///
/// `p >= 2` is required (the theory assumes it); `q` may be `f64::INFINITY`,
/// in which case the `l_q` sum over levels becomes a supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BesovBody {
    /// Smoothness `beta > 0`.
    pub beta: f64,
    /// Per-level norm exponent, finite and `>= 2`.
    pub p: f64,
    /// Across-level norm exponent, in `[1, inf]`.
    pub q: f64,
    /// Radius `M > 0`.
    pub m: f64,
}

impl BesovBody {
    pub fn new(beta: f64, p: f64, q: f64, m: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::invalid("beta", format!("must be > 0, got {beta}")));
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::invalid(
                "p",
                format!("must be finite and >= 2, got {p}"),
            ));
        }
        if q.is_nan() || q < 1.0 {
            return Err(Error::invalid(
                "q",
                format!("must be >= 1 (inf allowed), got {q}"),
            ));
        }
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("m", format!("must be > 0, got {m}")));
        }
        Ok(BesovBody { beta, p, q, m })
    }

    /// The effective smoothness exponent `s = beta + 1/2 - 1/p`.
    pub fn s(&self) -> f64 {
        self.beta + 0.5 - 1.0 / self.p
    }

    /// The Besov norm of `theta` under this body's `(beta, p, q)`.
    pub fn norm(&self, theta: &CoefficientVector) -> f64 {
        let s = self.s();
        let level_terms = (0..theta.num_levels()).map(|j| {
            let lp = theta
                .level(j)
                .iter()
                .map(|v| v.abs().powf(self.p))
                .sum::<f64>()
                .powf(1.0 / self.p);
            2f64.powf(s * j as f64) * lp
        });
        if self.q.is_infinite() {
            level_terms.fold(0.0, f64::max)
        } else {
            level_terms
                .map(|t| t.powf(self.q))
                .sum::<f64>()
                .powf(1.0 / self.q)
        }
    }

    /// Membership test: `norm(theta) <= M`.
    pub fn contains(&self, theta: &CoefficientVector) -> bool {
        self.norm(theta) <= self.m
    }

    /// The largest value `sum_k theta_{j,k}^2` can take at level `j` over
    /// this body: `M^2 2^{-2 beta j}`.
    pub fn max_level_energy(&self, j: u32) -> f64 {
        self.m * self.m * 2f64.powf(-2.0 * self.beta * j as f64)
    }

    /// Draws a member on the boundary `{norm = M}`: i.i.d. standard normal
    /// coefficients rescaled onto the boundary. Deterministic in `seed`.
    pub fn boundary_member(&self, j_levels: u32, seed: u64) -> CoefficientVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = CoefficientVector::zeros(j_levels);
        for j in 0..j_levels {
            for slot in theta.level_mut(j).iter_mut() {
                *slot = StandardNormal.sample(&mut rng);
            }
        }
        let norm = self.norm(&theta);
        if norm > 0.0 {
            let scale = self.m / norm;
            for j in 0..j_levels {
                for slot in theta.level_mut(j).iter_mut() {
                    *slot *= scale;
                }
            }
        }
        theta
    }
}

impl<'de> Deserialize<'de> for BesovBody {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            beta: f64,
            p: f64,
            q: f64,
            m: f64,
        }
        let r = Repr::deserialize(deserializer)?;
        BesovBody::new(r.beta, r.p, r.q, r.m).map_err(serde::de::Error::custom)
    }
}

/// Observation noise: scale `1/sqrt(n)` with a seeded generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Sample-size parameter, `n >= 2`.
    pub n: u64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(n: u64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("n", format!("must be >= 2, got {n}")));
        }
        Ok(NoiseModel { n, seed })
    }

    /// Samples `y_{j,k} = theta_{j,k} + n^{-1/2} z_{j,k}` with `z` i.i.d.
    /// standard normal. A pure function of `(theta, n, seed)`.
    pub fn observe(&self, theta: &CoefficientVector) -> CoefficientVector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut y = theta.clone();
        for j in 0..y.num_levels() {
            for slot in y.level_mut(j).iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *slot += scale * z;
            }
        }
        y
    }
}

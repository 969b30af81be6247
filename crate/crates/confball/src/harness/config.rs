//! Experiment configuration: the JSON schema accepted by the CLI and the
//! kind-specific validation rules. Unknown keys are rejected.

use crate::error::{Error, Result};
use crate::sequence::BesovBody;
use serde::{Deserialize, Serialize};

/// What an experiment estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Monte-Carlo coverage of a ball at a fixed mean vector.
    Coverage,
    /// Mean squared radius across an increasing list of `n`, with a fitted
    /// log-log slope.
    RadiusScan,
    /// Closed-form lower-bound floor versus the constructed ball's
    /// Monte-Carlo mean squared radius at `theta = 0`.
    LowerBoundCheck,
    /// The lemma verification suite.
    LemmaSuite,
}

/// A single `n` or a strictly increasing scan list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NSpec {
    Single(u64),
    Scan(Vec<u64>),
}

/// Which ball construction to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BallSpec {
    /// Exact chi-squared pivot ball on level `j`.
    Usual { alpha: f64, j: u32 },
    /// Thresholding ball on level `j`.
    SingleLevel { alpha: f64, j: u32 },
    /// Besov-adaptive ball for `(beta, M)`.
    Adaptive { alpha: f64, beta: f64, m: f64 },
    /// Honest ball over all of `R^N`.
    Honest { alpha: f64 },
}

impl BallSpec {
    pub fn alpha(&self) -> f64 {
        match *self {
            BallSpec::Usual { alpha, .. }
            | BallSpec::SingleLevel { alpha, .. }
            | BallSpec::Adaptive { alpha, .. }
            | BallSpec::Honest { alpha } => alpha,
        }
    }
}

/// How the true mean vector is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaSpec {
    /// The zero vector.
    Zero,
    /// All-plus hypercube at level `j` with magnitude `a`.
    Hypercube { j: u32, a: f64 },
    /// All-plus vertex configuration on the first `k` level-major
    /// coordinates with magnitude `a`.
    Vertex { k: u64, a: f64 },
    /// A fixed draw from the boundary of a Besov body, generated from its
    /// own seed.
    BoundaryRandom { body: BesovBody, seed: u64 },
    /// The least-favorable single-level hypercube for smoothness `tau` and
    /// radius `m`: level `j` with `2^j ~ m^{2/(1+2 tau)} n^{1/(1+2 tau)}`
    /// and magnitude `m 2^{-j(tau + 1/2)}`, re-resolved for each `n`.
    WorstCase { tau: f64, m: f64 },
}

/// A full experiment description. Mirrors the JSON config files; fields not
/// applicable to the chosen kind may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j_levels: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<NSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ball: Option<BallSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_spec: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<u32>,
    /// Slack for the lower-bound floors (lower_bound_check only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    /// Besov body defining the single-level lower-bound floor
    /// (lower_bound_check with a single_level ball only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_body: Option<BesovBody>,
}

impl ExperimentConfig {
    /// Parses a strict-JSON config.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("(root)", e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn require_j(&self) -> Result<u32> {
        self.j_levels
            .ok_or_else(|| Error::config("J", "required for this experiment kind".to_string()))
    }

    fn require_ball(&self) -> Result<&BallSpec> {
        self.ball
            .as_ref()
            .ok_or_else(|| Error::config("ball", "required for this experiment kind".to_string()))
    }

    fn require_theta(&self) -> Result<&ThetaSpec> {
        self.theta_spec.as_ref().ok_or_else(|| {
            Error::config(
                "theta_spec",
                "required for this experiment kind".to_string(),
            )
        })
    }

    /// The single `n` of a non-scan experiment.
    pub fn single_n(&self) -> Result<u64> {
        match &self.n {
            Some(NSpec::Single(n)) => Ok(*n),
            Some(NSpec::Scan(_)) => Err(Error::config(
                "n",
                "must be a single value, not a list".to_string(),
            )),
            None => Err(Error::config(
                "n",
                "required for this experiment kind".to_string(),
            )),
        }
    }

    /// The scan list of a radius scan.
    pub fn scan_ns(&self) -> Result<&[u64]> {
        match &self.n {
            Some(NSpec::Scan(ns)) => Ok(ns),
            Some(NSpec::Single(_)) => {
                Err(Error::config("n", "must be a list for a scan".to_string()))
            }
            None => Err(Error::config(
                "n",
                "required for this experiment kind".to_string(),
            )),
        }
    }

    fn validate_ball(&self, j_levels: u32) -> Result<()> {
        let ball = self.require_ball()?;
        let alpha = ball.alpha();
        match ball {
            BallSpec::Usual { j, .. } | BallSpec::SingleLevel { j, .. } => {
                if !(alpha > 0.0 && alpha < 1.0) {
                    return Err(Error::config(
                        "ball.alpha",
                        format!("must be in (0, 1), got {alpha}"),
                    ));
                }
                if *j >= j_levels {
                    return Err(Error::config(
                        "ball.j",
                        format!("level {j} out of range for J = {j_levels}"),
                    ));
                }
            }
            BallSpec::Adaptive { beta, m, .. } => {
                if !(alpha > 0.0 && alpha < 0.5) {
                    return Err(Error::config(
                        "ball.alpha",
                        format!("must be in (0, 1/2), got {alpha}"),
                    ));
                }
                if !(beta.is_finite() && *beta > 0.0) {
                    return Err(Error::config(
                        "ball.beta",
                        format!("must be > 0, got {beta}"),
                    ));
                }
                if !(m.is_finite() && *m > 0.0) {
                    return Err(Error::config("ball.m", format!("must be > 0, got {m}")));
                }
            }
            BallSpec::Honest { .. } => {
                if !(alpha > 0.0 && alpha < 0.5) {
                    return Err(Error::config(
                        "ball.alpha",
                        format!("must be in (0, 1/2), got {alpha}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_theta(&self, j_levels: u32) -> Result<()> {
        match self.require_theta()? {
            ThetaSpec::Zero => {}
            ThetaSpec::Hypercube { j, a } => {
                if *j >= j_levels {
                    return Err(Error::config(
                        "theta_spec.j",
                        format!("level {j} out of range for J = {j_levels}"),
                    ));
                }
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::config(
                        "theta_spec.a",
                        format!("must be >= 0, got {a}"),
                    ));
                }
            }
            ThetaSpec::Vertex { k, a } => {
                let n_coords = (1u64 << j_levels) - 1;
                if *k == 0 || *k > n_coords {
                    return Err(Error::config(
                        "theta_spec.k",
                        format!("must be in 1..={n_coords}, got {k}"),
                    ));
                }
                if !(a.is_finite() && *a >= 0.0) {
                    return Err(Error::config(
                        "theta_spec.a",
                        format!("must be >= 0, got {a}"),
                    ));
                }
            }
            ThetaSpec::BoundaryRandom { .. } => {} // the body validates itself on parse
            ThetaSpec::WorstCase { tau, m } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(Error::config(
                        "theta_spec.tau",
                        format!("must be > 0, got {tau}"),
                    ));
                }
                if !(m.is_finite() && *m > 0.0) {
                    return Err(Error::config(
                        "theta_spec.m",
                        format!("must be > 0, got {m}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Kind-specific validation; errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ExperimentKind::Coverage => {
                let j_levels = self.require_j()?;
                let n = self.single_n()?;
                if n < 2 {
                    return Err(Error::config("n", format!("must be >= 2, got {n}")));
                }
                self.validate_ball(j_levels)?;
                self.validate_theta(j_levels)?;
                match self.replicates {
                    Some(r) if r >= 100 => Ok(()),
                    Some(r) => Err(Error::config(
                        "replicates",
                        format!("coverage needs >= 100, got {r}"),
                    )),
                    None => Err(Error::config(
                        "replicates",
                        "required for coverage".to_string(),
                    )),
                }
            }
            ExperimentKind::RadiusScan => {
                let j_levels = self.require_j()?;
                let ns = self.scan_ns()?;
                if ns.len() < 4 {
                    return Err(Error::config(
                        "n",
                        format!("scan needs >= 4 values, got {}", ns.len()),
                    ));
                }
                if !ns.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::config(
                        "n",
                        "scan list must be strictly increasing".to_string(),
                    ));
                }
                if ns[0] < 2 {
                    return Err(Error::config("n", format!("must be >= 2, got {}", ns[0])));
                }
                if (ns[ns.len() - 1] as f64) < 4.0 * ns[0] as f64 {
                    return Err(Error::config(
                        "n",
                        "scan must span at least two octaves".to_string(),
                    ));
                }
                self.validate_ball(j_levels)?;
                self.validate_theta(j_levels)?;
                match self.replicates {
                    Some(r) if r >= 1 => Ok(()),
                    _ => Err(Error::config(
                        "replicates",
                        "required for a scan".to_string(),
                    )),
                }
            }
            ExperimentKind::LowerBoundCheck => {
                let j_levels = self.require_j()?;
                let n = self.single_n()?;
                if n < 2 {
                    return Err(Error::config("n", format!("must be >= 2, got {n}")));
                }
                self.validate_ball(j_levels)?;
                match self.require_theta()? {
                    ThetaSpec::Zero => {}
                    _ => {
                        return Err(Error::config(
                            "theta_spec",
                            "lower-bound floors are evaluated at theta = 0".to_string(),
                        ))
                    }
                }
                let eps = self.eps.ok_or_else(|| {
                    Error::config("eps", "required for a lower-bound check".to_string())
                })?;
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(Error::config("eps", format!("must be > 0, got {eps}")));
                }
                match self.require_ball()? {
                    BallSpec::Honest { .. } => {}
                    BallSpec::SingleLevel { .. } => {
                        if self.bound_body.is_none() {
                            return Err(Error::config(
                                "bound_body",
                                "required for a single-level lower-bound check".to_string(),
                            ));
                        }
                    }
                    _ => {
                        return Err(Error::config(
                            "ball",
                            "lower-bound checks support honest and single_level balls".to_string(),
                        ))
                    }
                }
                match self.replicates {
                    Some(r) if r >= 1 => Ok(()),
                    _ => Err(Error::config(
                        "replicates",
                        "required for a lower-bound check".to_string(),
                    )),
                }
            }
            ExperimentKind::LemmaSuite => Ok(()),
        }
    }
}

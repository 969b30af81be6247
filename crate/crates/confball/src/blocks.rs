//! Block partitioning, block energies, and the hard block-thresholding
//! estimator.
//!
//! At each level the coefficients are grouped into contiguous blocks of
//! `L = ceil(log n)` indices (natural log, floored at 1). A block is kept
//! when its observed energy `S^2 = sum y^2` reaches `lambda* size / n`, where
//! `lambda*` is the root of `lambda - log lambda = 5`; kept blocks are copied
//! verbatim into the estimate and dropped blocks are zeroed.
//!
//! Nominal blocks have size exactly `L`. When `L` does not divide
//! `2^j` the final block is ragged and the keep rule uses the actual block
//! size, preserving the per-coordinate noise calibration. Levels narrower
//! than `L` form a single block of size `2^j` under the same rule.

use crate::error::{Error, Result};
use crate::numerics::solve_lambda;
use crate::sequence::CoefficientVector;
use std::ops::Range;
use std::sync::LazyLock;

static LAMBDA_STAR: LazyLock<f64> = LazyLock::new(|| {
    solve_lambda(5.0)
        .expect("lambda - log lambda = 5 has a root above 1")
        .lambda
});

/// The block-thresholding constant `lambda*`: the root of
/// `lambda - log(lambda) = 5`, approximately 6.9368. Computed once.
pub fn threshold_constant() -> f64 {
    *LAMBDA_STAR
}

/// Contiguous disjoint blocks covering the `2^j` indices of one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// The level being partitioned.
    pub level: u32,
    /// Nominal block size `L`.
    pub block_size: usize,
    /// Half-open index ranges (0-based) over the level's entries; all have
    /// length `block_size` except possibly the last.
    pub blocks: Vec<Range<usize>>,
}

/// Observed statistics for one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSummary {
    pub level: u32,
    pub block_index: usize,
    /// Cardinality of the block (equals the nominal size except possibly for
    /// the final ragged block).
    pub size: usize,
    /// Observed block energy `S^2 = sum of y^2` over the block.
    pub s2: f64,
    /// Whether `S^2 >= lambda* size / n`.
    pub kept: bool,
}

/// Block size `L = max(1, ceil(log n))`, natural log.
///
/// The ceiling keeps `L >= log n`, which the tail bounds on false keeps
/// require (`e^{-2L} <= n^{-2}`).
pub fn block_size_for(n: u64) -> usize {
    ((n as f64).ln().ceil() as usize).max(1)
}

/// Splits level `j` into `ceil(2^j / L)` contiguous blocks.
pub fn partition_level(j: u32, block_size: usize) -> BlockPartition {
    assert!(block_size >= 1, "block size must be at least 1");
    let width = 1usize << j;
    let mut blocks = Vec::with_capacity(width.div_ceil(block_size));
    let mut start = 0;
    while start < width {
        let end = (start + block_size).min(width);
        blocks.push(start..end);
        start = end;
    }
    BlockPartition {
        level: j,
        block_size,
        blocks,
    }
}

/// Per-block energies and keep decisions for level `j` of `y` at noise
/// level `n`.
pub fn block_summaries(y: &CoefficientVector, j: u32, n: u64) -> Result<Vec<BlockSummary>> {
    if j >= y.num_levels() {
        return Err(Error::ShapeMismatch(format!(
            "level {j} out of range for J = {}",
            y.num_levels()
        )));
    }
    let lambda = threshold_constant();
    let level = y.level(j);
    let partition = partition_level(j, block_size_for(n));
    Ok(partition
        .blocks
        .iter()
        .enumerate()
        .map(|(block_index, range)| {
            let size = range.len();
            let s2: f64 = level[range.clone()].iter().map(|v| v * v).sum();
            BlockSummary {
                level: j,
                block_index,
                size,
                s2,
                kept: s2 >= lambda * size as f64 / n as f64,
            }
        })
        .collect())
}

pub(crate) fn threshold_level(y: &CoefficientVector, j: u32, n: u64) -> Result<Vec<f64>> {
    let level = y.level(j);
    let mut out = vec![0.0; level.len()];
    let partition = partition_level(j, block_size_for(n));
    for (summary, range) in block_summaries(y, j, n)?.iter().zip(&partition.blocks) {
        if summary.kept {
            out[range.clone()].copy_from_slice(&level[range.clone()]);
        }
    }
    Ok(out)
}

/// The block-thresholding estimate: for `j < max_level` each coefficient is
/// `y_{j,k}` if its block is kept and 0 otherwise; every level from
/// `max_level` on is zeroed. Pass `max_level = J` to threshold all levels.
pub fn threshold_estimate(
    y: &CoefficientVector,
    n: u64,
    max_level: u32,
) -> Result<CoefficientVector> {
    if max_level > y.num_levels() {
        return Err(Error::invalid(
            "max_level",
            format!("must be <= J = {}, got {max_level}", y.num_levels()),
        ));
    }
    let mut estimate = CoefficientVector::zeros(y.num_levels());
    for j in 0..max_level {
        let row = threshold_level(y, j, n)?;
        estimate.level_mut(j).copy_from_slice(&row);
    }
    Ok(estimate)
}

/// Squared l2 loss over all coordinates.
pub fn loss(theta_hat: &CoefficientVector, theta: &CoefficientVector) -> Result<f64> {
    theta_hat.sq_distance(theta)
}

//! One-shot mask construction: magnitude and activation-weighted (wanda)
//! scoring, ratio-targeted pruning at per-row or per-layer granularity,
//! and n:m structured pruning.

use crate::error::{Error, Result};
use crate::types::{ChannelStats, MaskPattern, SparsityMask, WeightMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneMethod {
    /// score = |W|
    Magnitude,
    /// score = |W| * l2norm of the input channel over tokens
    Wanda,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PruneTarget {
    /// Fraction of weights to remove, in [0, 1].
    Ratio(f64),
    /// Keep exactly n per aligned block of m.
    NOfM { n: u32, m: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerRow,
    PerLayer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSpec {
    pub method: PruneMethod,
    pub target: PruneTarget,
    pub granularity: Granularity,
}

impl PruneSpec {
    pub fn validate(&self) -> Result<()> {
        match self.target {
            PruneTarget::Ratio(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidSpec {
                        what: "prune spec",
                        why: format!("ratio {p} outside [0, 1]"),
                    });
                }
            }
            PruneTarget::NOfM { n, m } => {
                if m == 0 || n > m {
                    return Err(Error::InvalidSpec {
                        what: "prune spec",
                        why: format!("{n}:{m} requires 1 <= m and n <= m"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Importance scores, row-major, same shape as the weights. Stored f32,
/// products accumulated in f64.
pub fn score_weights(
    w: &WeightMatrix,
    stats: &ChannelStats,
    method: PruneMethod,
) -> Result<Vec<f32>> {
    if stats.channels() != w.cols() {
        return Err(Error::Dimension {
            context: format!(
                "stats cover {} channels, weights have {} columns",
                stats.channels(),
                w.cols()
            ),
        });
    }
    let cols = w.cols();
    let scores: Vec<f32> = w
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| match method {
            PruneMethod::Magnitude => v.abs(),
            PruneMethod::Wanda => ((v as f64).abs() * stats.l2norm[i % cols] as f64) as f32,
        })
        .collect();
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { what: "scores", index: i });
    }
    Ok(scores)
}

/// Number of weights removed per group: round(p * group_size), half away
/// from zero, pinned so sparsity accounting is identical across
/// implementations.
fn pruned_count(p: f64, group: usize) -> usize {
    (p * group as f64).round() as usize
}

/// Sorts index list ascending by (score, index); lower index prunes first
/// on ties.
fn order_by_score(indices: &mut [usize], scores: &[f32]) {
    indices.sort_unstable_by(|&i, &j| {
        scores[i]
            .partial_cmp(&scores[j])
            .expect("scores are finite")
            .then(i.cmp(&j))
    });
}

/// Removes the lowest-scoring weights at the requested ratio, per row or
/// across the whole layer.
pub fn prune_to_ratio(
    w: &WeightMatrix,
    stats: &ChannelStats,
    spec: &PruneSpec,
) -> Result<SparsityMask> {
    spec.validate()?;
    let PruneTarget::Ratio(p) = spec.target else {
        return Err(Error::InvalidSpec {
            what: "prune spec",
            why: "prune_to_ratio requires a ratio target".into(),
        });
    };
    let scores = score_weights(w, stats, spec.method)?;
    let (rows, cols) = (w.rows(), w.cols());
    let mut bits = vec![1u8; rows * cols];
    match spec.granularity {
        Granularity::PerRow => {
            let kp = pruned_count(p, cols);
            for r in 0..rows {
                let mut idx: Vec<usize> = (0..cols).collect();
                order_by_score(&mut idx, &scores[r * cols..(r + 1) * cols]);
                for &k in &idx[..kp] {
                    bits[r * cols + k] = 0;
                }
            }
        }
        Granularity::PerLayer => {
            let kp = pruned_count(p, rows * cols);
            let mut idx: Vec<usize> = (0..rows * cols).collect();
            order_by_score(&mut idx, &scores);
            for &i in &idx[..kp] {
                bits[i] = 0;
            }
        }
    }
    SparsityMask::new(rows, cols, bits, MaskPattern::Unstructured)
}

/// Keeps exactly the n largest-scoring weights in every aligned block of m
/// consecutive columns.
pub fn prune_to_nm(
    w: &WeightMatrix,
    stats: &ChannelStats,
    spec: &PruneSpec,
) -> Result<SparsityMask> {
    spec.validate()?;
    let PruneTarget::NOfM { n, m } = spec.target else {
        return Err(Error::InvalidSpec {
            what: "prune spec",
            why: "prune_to_nm requires an n:m target".into(),
        });
    };
    let (rows, cols) = (w.rows(), w.cols());
    if cols % m as usize != 0 {
        return Err(Error::BlockMismatch { cols, m });
    }
    let scores = score_weights(w, stats, spec.method)?;
    let mut bits = vec![1u8; rows * cols];
    let (n, m) = (n as usize, m as usize);
    for r in 0..rows {
        for b in 0..cols / m {
            let base = r * cols + b * m;
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_unstable_by(|&i, &j| {
                scores[base + i]
                    .partial_cmp(&scores[base + j])
                    .expect("scores are finite")
                    .then(i.cmp(&j))
            });
            for &k in &idx[..m - n] {
                bits[base + k] = 0;
            }
        }
    }
    SparsityMask::new(rows, cols, bits, MaskPattern::NOfM { n: n as u32, m: m as u32 })
}

//! Brute-force reference implementations for tests and acceptance.
//!
//! Everything here recomputes from first principles and shares no numeric
//! helper with the engine: the selection scans materialize candidate
//! lists and pick extrema by value search, error states come from a
//! direct sum over pruned weights (the engine subtracts a masked product
//! from a dense one), and the exact-mask search simply enumerates every
//! mask of the requested density. A bug copied from the engine cannot
//! hide here.

use crate::error::{Error, Result};
use crate::refine::{BlockRange, GrowCriterion, PruneCriterion, RefineConfig};
use crate::types::{ActivationMatrix, ChannelStats, RowReconState, SparsityMask, WeightMatrix};

/// Greedy row error vs the exhaustive optimum at equal density.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub row_index: usize,
    pub greedy_error: f64,
    pub exact_error: f64,
    /// greedy / exact; at least 1 - 1e-6, greedy cannot beat exhaustive
    /// search beyond rounding.
    pub gap_ratio: f64,
}

impl GapReport {
    pub fn new(row_index: usize, greedy_error: f64, exact_error: f64) -> Self {
        Self {
            row_index,
            greedy_error,
            exact_error,
            gap_ratio: greedy_error / exact_error.max(1e-12),
        }
    }
}

fn grow_score(criterion: GrowCriterion, w: f32, mean: f32, var: f32, l2: f32, floor: f64) -> f64 {
    match criterion {
        GrowCriterion::Dsnot => {
            let v = var as f64;
            (w as f64 * mean as f64) / if v > floor { v } else { floor }
        }
        GrowCriterion::WandaLike => (w as f64).abs() * l2 as f64,
    }
}

/// Unoptimized full-scan counterpart of the engine's grow selection.
pub fn oracle_grow(
    w_row: &[f32],
    mask_row: &[u8],
    stats: &ChannelStats,
    delta_mean: f64,
    config: &RefineConfig,
    block_of: Option<BlockRange>,
) -> Option<usize> {
    let (lo, hi) = match block_of {
        Some(r) => r,
        None => (0, w_row.len()),
    };
    let candidates: Vec<(usize, f64)> = (lo..hi)
        .filter(|&k| mask_row[k] == 0)
        .map(|k| {
            (
                k,
                grow_score(
                    config.grow_criterion,
                    w_row[k],
                    stats.mean[k],
                    stats.variance[k],
                    stats.l2norm[k],
                    config.variance_floor,
                ),
            )
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    let take_max = match config.grow_criterion {
        GrowCriterion::Dsnot => delta_mean > 0.0,
        GrowCriterion::WandaLike => true,
    };
    let target = candidates
        .iter()
        .map(|&(_, s)| s)
        .fold(if take_max { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, s| {
            if take_max {
                acc.max(s)
            } else {
                acc.min(s)
            }
        });
    candidates.iter().find(|&&(_, s)| s == target).map(|&(k, _)| k)
}

/// Unoptimized full-scan counterpart of the engine's prune selection.
pub fn oracle_prune(
    w_row: &[f32],
    mask_row: &[u8],
    stats: &ChannelStats,
    delta_mean: f64,
    config: &RefineConfig,
    exclude: usize,
    block_of: Option<BlockRange>,
) -> Option<usize> {
    let (lo, hi) = match block_of {
        Some(r) => r,
        None => (0, w_row.len()),
    };
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for k in lo..hi {
        if mask_row[k] != 1 || k == exclude {
            continue;
        }
        if config.prune_criterion == PruneCriterion::Dsnot {
            let product = w_row[k] as f64 * stats.mean[k] as f64;
            let passes = if delta_mean > 0.0 { product < 0.0 } else { product > 0.0 };
            if !passes {
                continue;
            }
        }
        let score = match config.prune_criterion {
            PruneCriterion::Dsnot | PruneCriterion::WandaUnsigned => {
                (w_row[k] as f64).abs() * stats.l2norm[k] as f64
            }
            PruneCriterion::ExpectedChange => {
                let v = stats.variance[k] as f64;
                (w_row[k] as f64 * stats.mean[k] as f64)
                    / if v > config.variance_floor { v } else { config.variance_floor }
            }
        };
        candidates.push((k, score));
    }
    if candidates.is_empty() {
        return None;
    }
    let take_max = match config.prune_criterion {
        PruneCriterion::Dsnot | PruneCriterion::WandaUnsigned => false,
        PruneCriterion::ExpectedChange => !(delta_mean > 0.0),
    };
    let target = candidates
        .iter()
        .map(|&(_, s)| s)
        .fold(if take_max { f64::NEG_INFINITY } else { f64::INFINITY }, |acc, s| {
            if take_max {
                acc.max(s)
            } else {
                acc.min(s)
            }
        });
    candidates.iter().find(|&&(_, s)| s == target).map(|&(k, _)| k)
}

/// From-scratch error states for every row: for each token, the triple
/// loop sums the contributions of the pruned weights directly.
pub fn oracle_recompute(
    w: &WeightMatrix,
    mask: &SparsityMask,
    a: &ActivationMatrix,
) -> Result<Vec<RowReconState>> {
    if mask.rows() != w.rows() || mask.cols() != w.cols() || a.channels() != w.cols() {
        return Err(Error::Dimension {
            context: format!(
                "recompute over weights {}x{}, mask {}x{}, activations {} channels",
                w.rows(),
                w.cols(),
                mask.rows(),
                mask.cols(),
                a.channels()
            ),
        });
    }
    let tokens = a.tokens();
    let mut out = Vec::with_capacity(w.rows());
    for r in 0..w.rows() {
        let w_row = w.row(r);
        let m_row = mask.row(r);
        let mut delta = Vec::with_capacity(tokens);
        for t in 0..tokens {
            let mut acc = 0.0f64;
            for k in 0..w.cols() {
                if m_row[k] == 0 {
                    acc += w_row[k] as f64 * a.channel(k)[t] as f64;
                }
            }
            delta.push(acc as f32);
        }
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for &d in &delta {
            sum += d as f64;
            sumsq += d as f64 * d as f64;
        }
        out.push(RowReconState {
            row_index: r,
            delta,
            delta_mean: sum / tokens as f64,
            delta_l2: sumsq.sqrt(),
        });
    }
    Ok(out)
}

/// Layer Frobenius norm of the error, from the oracle row states.
pub fn oracle_layer_error(
    w: &WeightMatrix,
    mask: &SparsityMask,
    a: &ActivationMatrix,
) -> Result<f64> {
    let states = oracle_recompute(w, mask, a)?;
    Ok(states.iter().map(|s| s.delta_l2 * s.delta_l2).sum::<f64>().sqrt())
}

const EXACT_COLS_MAX: usize = 20;

fn candidate_error(w_row: &[f32], bits: &[u8], a: &ActivationMatrix) -> f64 {
    let mut sumsq = 0.0f64;
    for t in 0..a.tokens() {
        let mut acc = 0.0f64;
        for (k, &b) in bits.iter().enumerate() {
            if b == 0 {
                acc += w_row[k] as f64 * a.channel(k)[t] as f64;
            }
        }
        let d = acc as f32 as f64;
        sumsq += d * d;
    }
    sumsq.sqrt()
}

/// Exhaustive search over every mask of exactly `nnz` ones, returning the
/// one minimizing the row's l2 error. Column 0 maps to the high bit, so
/// ascending integer enumeration visits masks in lexicographic order and
/// strict improvement keeps the lexicographically smallest tie.
pub fn oracle_exact_mask(
    w_row: &[f32],
    a: &ActivationMatrix,
    nnz: usize,
) -> Result<(Vec<u8>, f64)> {
    let cols = w_row.len();
    if cols > EXACT_COLS_MAX {
        return Err(Error::SizeLimit { cols, max: EXACT_COLS_MAX });
    }
    if a.channels() != cols {
        return Err(Error::Dimension {
            context: format!("activations have {} channels, row has {cols} weights", a.channels()),
        });
    }
    if nnz > cols {
        return Err(Error::InvalidSpec {
            what: "exact mask search",
            why: format!("nnz {nnz} exceeds {cols} columns"),
        });
    }
    let to_bits = |v: u32| -> Vec<u8> {
        (0..cols).map(|k| ((v >> (cols - 1 - k)) & 1) as u8).collect()
    };
    let mut best_bits = Vec::new();
    let mut best_err = f64::INFINITY;
    if nnz == 0 {
        let bits = vec![0u8; cols];
        let err = candidate_error(w_row, &bits, a);
        return Ok((bits, err));
    }
    // Gosper's hack walks the nnz-popcount integers in ascending order.
    let limit = 1u32 << cols;
    let mut v: u32 = (1u32 << nnz) - 1;
    while v < limit {
        let bits = to_bits(v);
        let err = candidate_error(w_row, &bits, a);
        if err < best_err {
            best_err = err;
            best_bits = bits;
        }
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    Ok((best_bits, best_err))
}

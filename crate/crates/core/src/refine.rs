//! Iterative prune-and-grow mask refinement.
//!
//! Each cycle on a row: pick a pruned weight to revive (grow), pick a kept
//! weight to remove (prune, never the one just grown), apply the swap, and
//! update the row's reconstruction error incrementally. Rows stop when
//! their error metric falls below the threshold, the cycle budget runs
//! out, or a selection has no candidate. Swaps preserve the row's nonzero
//! count exactly; under an n:m pattern the pruned weight is chosen from
//! the same m-block as the revived one, preserving block occupancy.
//!
//! Selection scores are computed in f64 with one pinned expression shape
//! (`w*mean/max(var, floor)` and `|w|*l2`) so the independent oracle scans
//! in `crate::oracle` agree bit-for-bit; ties resolve to the lowest index.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{
    check_shapes, compute_channel_stats, row_recon_state, ActivationMatrix, ChannelStats,
    MaskPattern, RowReconState, SparsityMask, WeightMatrix,
};

/// How a row's error vector is reduced to the scalar tested against the
/// stop threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationMetric {
    /// |mean(delta)|, the native scalar: selection branches on its sign.
    AbsMean,
    /// ||delta||_2 / sqrt(tokens)
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowCriterion {
    /// w*mean/max(var, floor); argmax when delta_mean > 0, argmin otherwise.
    Dsnot,
    /// |w|*l2; argmax regardless of sign.
    WandaLike,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneCriterion {
    /// Sign-filtered (w*mean opposing delta_mean), then argmin |w|*l2.
    Dsnot,
    /// argmin |w|*l2 with no sign filter.
    WandaUnsigned,
    /// Grow's formula with the extrema reversed, no sign filter.
    ExpectedChange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub max_cycles: u32,
    pub threshold: f64,
    pub termination_metric: TerminationMetric,
    pub grow_criterion: GrowCriterion,
    pub prune_criterion: PruneCriterion,
    /// Lower clamp on the variance denominator; keeps constant channels
    /// revivable with a strong score instead of dividing by zero.
    pub variance_floor: f64,
    /// Must mirror the mask's pattern; drives the same-block prune rule.
    pub pattern_constraint: MaskPattern,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_cycles: 50,
            threshold: 0.1,
            termination_metric: TerminationMetric::AbsMean,
            grow_criterion: GrowCriterion::Dsnot,
            prune_criterion: PruneCriterion::Dsnot,
            variance_floor: 1e-8,
            pattern_constraint: MaskPattern::Unstructured,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() || self.threshold < 0.0 {
            return Err(Error::InvalidSpec {
                what: "refine config",
                why: format!("threshold {} must be finite and >= 0", self.threshold),
            });
        }
        if !self.variance_floor.is_finite() || self.variance_floor <= 0.0 {
            return Err(Error::InvalidSpec {
                what: "refine config",
                why: format!("variance_floor {} must be finite and > 0", self.variance_floor),
            });
        }
        if let MaskPattern::NOfM { n, m } = self.pattern_constraint {
            if m == 0 || n > m {
                return Err(Error::InvalidSpec {
                    what: "refine config",
                    why: format!("pattern {n}:{m} requires 1 <= m and n <= m"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdMet,
    MaxCycles,
    NoGrowCandidate,
    NoPruneCandidate,
}

/// Outcome of refining one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowRefineReport {
    pub row_index: usize,
    pub cycles_used: u32,
    /// (grown index, pruned index) per completed cycle.
    pub swaps: Vec<(usize, usize)>,
    pub initial_metric: f64,
    pub final_metric: f64,
    pub stop_reason: StopReason,
}

/// Half-open column range a selection is restricted to.
pub type BlockRange = (usize, usize);

fn dsnot_score(w: f64, mean: f64, var: f64, floor: f64) -> f64 {
    (w * mean) / var.max(floor)
}

fn wanda_score(w: f64, l2: f64) -> f64 {
    w.abs() * l2
}

/// Index of the pruned weight to revive, or None when no candidate exists.
pub fn grow_index(
    w_row: &[f32],
    mask_row: &[u8],
    stats: &ChannelStats,
    delta_mean: f64,
    config: &RefineConfig,
    block_of: Option<BlockRange>,
) -> Option<usize> {
    let (lo, hi) = block_of.unwrap_or((0, w_row.len()));
    let mut best: Option<(f64, usize)> = None;
    for k in lo..hi {
        if mask_row[k] != 0 {
            continue;
        }
        let s = match config.grow_criterion {
            GrowCriterion::Dsnot => dsnot_score(
                w_row[k] as f64,
                stats.mean[k] as f64,
                stats.variance[k] as f64,
                config.variance_floor,
            ),
            GrowCriterion::WandaLike => wanda_score(w_row[k] as f64, stats.l2norm[k] as f64),
        };
        let want_max = match config.grow_criterion {
            GrowCriterion::Dsnot => delta_mean > 0.0,
            GrowCriterion::WandaLike => true,
        };
        let better = match best {
            None => true,
            Some((bs, _)) => {
                if want_max {
                    s > bs
                } else {
                    s < bs
                }
            }
        };
        if better {
            best = Some((s, k));
        }
    }
    best.map(|(_, k)| k)
}

/// Index of the kept weight to remove, or None when the (sign-filtered)
/// candidate set is empty. `exclude` is the index grown this cycle.
pub fn prune_index(
    w_row: &[f32],
    mask_row: &[u8],
    stats: &ChannelStats,
    delta_mean: f64,
    config: &RefineConfig,
    exclude: usize,
    block_of: Option<BlockRange>,
) -> Option<usize> {
    let (lo, hi) = block_of.unwrap_or((0, w_row.len()));
    let mut best: Option<(f64, usize)> = None;
    for k in lo..hi {
        if mask_row[k] != 1 || k == exclude {
            continue;
        }
        let w = w_row[k] as f64;
        let mean = stats.mean[k] as f64;
        if config.prune_criterion == PruneCriterion::Dsnot {
            let keep = if delta_mean > 0.0 { w * mean < 0.0 } else { w * mean > 0.0 };
            if !keep {
                continue;
            }
        }
        let s = match config.prune_criterion {
            PruneCriterion::Dsnot | PruneCriterion::WandaUnsigned => {
                wanda_score(w, stats.l2norm[k] as f64)
            }
            PruneCriterion::ExpectedChange => {
                dsnot_score(w, mean, stats.variance[k] as f64, config.variance_floor)
            }
        };
        // ExpectedChange transfers the grow formula with extrema reversed.
        let want_max = match config.prune_criterion {
            PruneCriterion::Dsnot | PruneCriterion::WandaUnsigned => false,
            PruneCriterion::ExpectedChange => !(delta_mean > 0.0),
        };
        let better = match best {
            None => true,
            Some((bs, _)) => {
                if want_max {
                    s > bs
                } else {
                    s < bs
                }
            }
        };
        if better {
            best = Some((s, k));
        }
    }
    best.map(|(_, k)| k)
}

/// Applies one grow/prune swap: delta gains the pruned weight's channel
/// contribution and loses the grown one's; delta_mean is updated
/// incrementally from the channel means; delta_l2 is recomputed from the
/// updated vector to avoid drift in a nonlinear statistic.
pub fn apply_swap(
    state: &mut RowReconState,
    w_row: &[f32],
    a: &ActivationMatrix,
    stats: &ChannelStats,
    mask_row: &mut [u8],
    grow: usize,
    prune: usize,
) -> Result<()> {
    if grow == prune {
        return Err(Error::SwapContract {
            why: format!("grow and prune index are both {grow}"),
        });
    }
    if mask_row[grow] != 0 {
        return Err(Error::SwapContract {
            why: format!("grow index {grow} is not currently pruned"),
        });
    }
    if mask_row[prune] != 1 {
        return Err(Error::SwapContract {
            why: format!("prune index {prune} is not currently kept"),
        });
    }
    let wi = w_row[grow] as f64;
    let wj = w_row[prune] as f64;
    let ai = a.channel(grow);
    let aj = a.channel(prune);
    let mut sumsq = 0.0f64;
    for (t, d) in state.delta.iter_mut().enumerate() {
        let nd = *d as f64 - wi * ai[t] as f64 + wj * aj[t] as f64;
        *d = nd as f32;
        let r = *d as f64;
        sumsq += r * r;
    }
    state.delta_mean =
        state.delta_mean - wi * stats.mean[grow] as f64 + wj * stats.mean[prune] as f64;
    state.delta_l2 = sumsq.sqrt();
    mask_row[grow] = 1;
    mask_row[prune] = 0;
    Ok(())
}

fn metric_of(state: &RowReconState, metric: TerminationMetric) -> f64 {
    match metric {
        TerminationMetric::AbsMean => state.delta_mean.abs(),
        TerminationMetric::L2 => state.delta_l2 / (state.delta.len() as f64).sqrt(),
    }
}

/// Block containing column i under the config's pattern, if any.
fn prune_block(config: &RefineConfig, i: usize) -> Option<BlockRange> {
    match config.pattern_constraint {
        MaskPattern::Unstructured => None,
        MaskPattern::NOfM { m, .. } => {
            let m = m as usize;
            let lo = (i / m) * m;
            Some((lo, lo + m))
        }
    }
}

/// Refines one row in place; returns the report and the final maintained
/// error state.
pub fn refine_row(
    w_row: &[f32],
    mask_row: &mut [u8],
    a: &ActivationMatrix,
    stats: &ChannelStats,
    config: &RefineConfig,
    row_index: usize,
) -> Result<(RowRefineReport, RowReconState)> {
    config.validate()?;
    let mut state = row_recon_state(w_row, mask_row, a, row_index);
    let initial_metric = metric_of(&state, config.termination_metric);
    let mut swaps = Vec::new();
    let mut stop_reason = StopReason::MaxCycles;
    for _ in 0..config.max_cycles {
        if metric_of(&state, config.termination_metric) < config.threshold {
            stop_reason = StopReason::ThresholdMet;
            break;
        }
        let Some(i) = grow_index(w_row, mask_row, stats, state.delta_mean, config, None) else {
            stop_reason = StopReason::NoGrowCandidate;
            break;
        };
        let Some(j) = prune_index(
            w_row,
            mask_row,
            stats,
            state.delta_mean,
            config,
            i,
            prune_block(config, i),
        ) else {
            stop_reason = StopReason::NoPruneCandidate;
            break;
        };
        apply_swap(&mut state, w_row, a, stats, mask_row, i, j)?;
        swaps.push((i, j));
    }
    let final_metric = metric_of(&state, config.termination_metric);
    let report = RowRefineReport {
        row_index,
        cycles_used: swaps.len() as u32,
        swaps,
        initial_metric,
        final_metric,
        stop_reason,
    };
    Ok((report, state))
}

/// Per-layer refinement outcome: one report and one final error state per
/// row, in row order.
#[derive(Debug, Clone)]
pub struct LayerRefineOutcome {
    pub reports: Vec<RowRefineReport>,
    pub states: Vec<RowReconState>,
}

impl LayerRefineOutcome {
    pub fn total_swaps(&self) -> u64 {
        self.reports.iter().map(|r| r.cycles_used as u64).sum()
    }
}

/// Refines every row of a layer in place. Rows are independent: statistics
/// are computed once, each worker owns exactly one row's mask slice and
/// state, and results are collected in row order, so the outcome is
/// bit-identical at any parallelism degree.
pub fn refine_layer(
    w: &WeightMatrix,
    mask: &mut SparsityMask,
    a: &ActivationMatrix,
    config: &RefineConfig,
) -> Result<LayerRefineOutcome> {
    config.validate()?;
    check_shapes(w, mask, a)?;
    if config.pattern_constraint != mask.pattern() {
        return Err(Error::InvalidSpec {
            what: "refine config",
            why: format!(
                "pattern constraint {:?} does not mirror mask pattern {:?}",
                config.pattern_constraint,
                mask.pattern()
            ),
        });
    }
    mask.validate()?;
    let stats = compute_channel_stats(a);
    let cols = w.cols();
    let mut results: Vec<(RowRefineReport, RowReconState)> = mask
        .bits_mut()
        .par_chunks_mut(cols)
        .enumerate()
        .map(|(r, mask_row)| refine_row(w.row(r), mask_row, a, &stats, config, r))
        .collect::<Result<_>>()?;
    mask.validate()?;
    let mut reports = Vec::with_capacity(results.len());
    let mut states = Vec::with_capacity(results.len());
    for (report, state) in results.drain(..) {
        reports.push(report);
        states.push(state);
    }
    Ok(LayerRefineOutcome { reports, states })
}

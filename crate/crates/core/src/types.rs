//! Core data types: weights, calibration activations, sparsity masks,
//! per-channel statistics, and per-row reconstruction state.
//!
//! Numeric policy: matrices and derived statistics are stored as f32;
//! every accumulation (dot products, sums of squares) runs in f64 and is
//! rounded to f32 at rest. Selection-facing scalars (`delta_mean`,
//! `delta_l2`) stay f64 because the refinement loop branches on them.

use crate::error::{Error, Result};

/// Dense layer weights W, row-major, `rows` = output channels,
/// `cols` = input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl WeightMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension {
                context: format!("weight matrix dimensions must be >= 1, got {rows}x{cols}"),
            });
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension {
                context: format!(
                    "weight matrix {rows}x{cols} needs {} values, got {}",
                    rows * cols,
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "weights", index: i });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// Calibration inputs A, channel-major: `channel(k)` is the slice of all
/// token values for input channel k.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    channels: usize,
    tokens: usize,
    values: Vec<f32>,
}

impl ActivationMatrix {
    pub fn new(channels: usize, tokens: usize, values: Vec<f32>) -> Result<Self> {
        if channels == 0 || tokens == 0 {
            return Err(Error::Dimension {
                context: format!(
                    "activation matrix dimensions must be >= 1, got {channels} channels x {tokens} tokens"
                ),
            });
        }
        if values.len() != channels * tokens {
            return Err(Error::Dimension {
                context: format!(
                    "activation matrix {channels}x{tokens} needs {} values, got {}",
                    channels * tokens,
                    values.len()
                ),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "activations", index: i });
        }
        Ok(Self { channels, tokens, values })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn channel(&self, k: usize) -> &[f32] {
        &self.values[k * self.tokens..(k + 1) * self.tokens]
    }
}

/// Sparsity structure a mask must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskPattern {
    Unstructured,
    /// At most `n` ones in every aligned block of `m` consecutive columns.
    NOfM { n: u32, m: u32 },
}

/// Binary mask M over a weight matrix; 1 keeps a weight, 0 prunes it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityMask {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    pattern: MaskPattern,
}

impl SparsityMask {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>, pattern: MaskPattern) -> Result<Self> {
        if rows == 0 || cols == 0 || bits.len() != rows * cols {
            return Err(Error::Dimension {
                context: format!(
                    "mask {rows}x{cols} needs {} bits, got {}",
                    rows * cols,
                    bits.len()
                ),
            });
        }
        let mask = Self { rows, cols, bits, pattern };
        mask.validate()?;
        Ok(mask)
    }

    pub fn all_ones(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![1; rows * cols], MaskPattern::Unstructured)
    }

    /// Checks the bit domain and, for n:m patterns, per-block occupancy.
    pub fn validate(&self) -> Result<()> {
        for (i, &b) in self.bits.iter().enumerate() {
            if b > 1 {
                return Err(Error::MaskDomain {
                    row: i / self.cols,
                    col: i % self.cols,
                    value: b,
                });
            }
        }
        if let MaskPattern::NOfM { n, m } = self.pattern {
            if m == 0 || n > m {
                return Err(Error::InvalidSpec {
                    what: "mask pattern",
                    why: format!("{n}:{m} requires 1 <= m and n <= m"),
                });
            }
            if self.cols % m as usize != 0 {
                return Err(Error::BlockMismatch { cols: self.cols, m });
            }
            for r in 0..self.rows {
                let row = self.row(r);
                for (b, block) in row.chunks_exact(m as usize).enumerate() {
                    let ones = block.iter().filter(|&&v| v == 1).count();
                    if ones > n as usize {
                        return Err(Error::PatternViolation { row: r, block: b, ones, n, m });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pattern(&self) -> MaskPattern {
        self.pattern
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub(crate) fn bits_mut(&mut self) -> &mut [u8] {
        &mut self.bits
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.bits[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.bits[r * self.cols..(r + 1) * self.cols]
    }

    /// Mutable view of all rows at once, for parallel per-row refinement.
    pub fn rows_mut(&mut self) -> std::slice::ChunksExactMut<'_, u8> {
        self.bits.chunks_exact_mut(self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn nnz_row(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&b| b == 1).count()
    }
}

/// Per-input-channel statistics over calibration tokens: mean E[A_k],
/// population variance Var(A_k), and l2 norm over tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStats {
    pub mean: Vec<f32>,
    pub variance: Vec<f32>,
    pub l2norm: Vec<f32>,
}

impl ChannelStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Per-output-row reconstruction error state: the error vector over
/// tokens, its mean, and its l2 norm, maintained incrementally by the
/// refinement loop.
#[derive(Debug, Clone, PartialEq)]
pub struct RowReconState {
    pub row_index: usize,
    pub delta: Vec<f32>,
    pub delta_mean: f64,
    pub delta_l2: f64,
}

/// Two-pass per-channel statistics: mean first, then centered squares.
/// Single-pass formulas lose precision on the outlier-heavy channels this
/// data is expected to contain.
pub fn compute_channel_stats(a: &ActivationMatrix) -> ChannelStats {
    let tokens = a.tokens() as f64;
    let mut mean = Vec::with_capacity(a.channels());
    let mut variance = Vec::with_capacity(a.channels());
    let mut l2norm = Vec::with_capacity(a.channels());
    for k in 0..a.channels() {
        let ch = a.channel(k);
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for &v in ch {
            let v = v as f64;
            sum += v;
            sumsq += v * v;
        }
        let m = sum / tokens;
        let mut centered = 0.0f64;
        for &v in ch {
            let d = v as f64 - m;
            centered += d * d;
        }
        mean.push(m as f32);
        variance.push((centered / tokens) as f32);
        l2norm.push(sumsq.sqrt() as f32);
    }
    ChannelStats { mean, variance, l2norm }
}

/// From-scratch per-row error state for one row: delta = W_r*A - (M_r .* W_r)*A.
pub(crate) fn row_recon_state(
    w_row: &[f32],
    mask_row: &[u8],
    a: &ActivationMatrix,
    row_index: usize,
) -> RowReconState {
    let tokens = a.tokens();
    let mut dense = vec![0.0f64; tokens];
    let mut masked = vec![0.0f64; tokens];
    for (k, &wv) in w_row.iter().enumerate() {
        let wv = wv as f64;
        let ch = a.channel(k);
        if mask_row[k] == 1 {
            for t in 0..tokens {
                dense[t] += wv * ch[t] as f64;
                masked[t] += wv * ch[t] as f64;
            }
        } else {
            for t in 0..tokens {
                dense[t] += wv * ch[t] as f64;
            }
        }
    }
    let delta: Vec<f32> = (0..tokens).map(|t| (dense[t] - masked[t]) as f32).collect();
    state_from_delta(row_index, delta)
}

/// Builds the state scalars from a delta vector (mean and l2 in f64).
pub(crate) fn state_from_delta(row_index: usize, delta: Vec<f32>) -> RowReconState {
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for &d in &delta {
        let d = d as f64;
        sum += d;
        sumsq += d * d;
    }
    let n = delta.len() as f64;
    RowReconState {
        row_index,
        delta,
        delta_mean: sum / n,
        delta_l2: sumsq.sqrt(),
    }
}

/// Reconstruction error of every row under the given mask.
pub fn reconstruction_error(
    w: &WeightMatrix,
    m: &SparsityMask,
    a: &ActivationMatrix,
) -> Result<Vec<RowReconState>> {
    check_shapes(w, m, a)?;
    Ok((0..w.rows())
        .map(|r| row_recon_state(w.row(r), m.row(r), a, r))
        .collect())
}

pub(crate) fn check_shapes(w: &WeightMatrix, m: &SparsityMask, a: &ActivationMatrix) -> Result<()> {
    if m.rows() != w.rows() || m.cols() != w.cols() {
        return Err(Error::Dimension {
            context: format!(
                "mask {}x{} does not match weights {}x{}",
                m.rows(),
                m.cols(),
                w.rows(),
                w.cols()
            ),
        });
    }
    if a.channels() != w.cols() {
        return Err(Error::Dimension {
            context: format!(
                "activations have {} channels, weights have {} columns",
                a.channels(),
                w.cols()
            ),
        });
    }
    Ok(())
}

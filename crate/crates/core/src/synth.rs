//! Seeded synthetic layer generator with outlier channels.
//!
//! The generator algorithm is pinned so streams reproduce across
//! implementations and languages, not just across runs of this binary:
//!
//! - Uniform stream: stateless SplitMix64. Output i (0-based) for seed s is
//!   `mix64(s + (i+1) * 0x9E3779B97F4A7C15)` with the standard finalizer
//!   (xor-shift 30, multiply 0xBF58476D1CE4E5B9, xor-shift 27, multiply
//!   0x94D049BB133111EB, xor-shift 31).
//! - Normal variates: Box-Muller on consecutive output pairs (x0, x1):
//!   u1 = ((x0 >> 11) + 1) * 2^-53 (never zero), u2 = (x1 >> 11) * 2^-53,
//!   z0 = sqrt(-2 ln u1) * cos(2 pi u2), z1 = sqrt(-2 ln u1) * sin(2 pi u2).
//! - Sub-seeds: outputs 0..2 of the master seed's stream seed the weight,
//!   activation, and outlier-subset streams respectively, so changing the
//!   outlier parameters never shifts the weight or activation draws.
//! - Outlier subset: ceil(fraction * c_in) distinct channels via partial
//!   Fisher-Yates driven by the subset stream (`output[i] % (c_in - i)`).
//!
//! Integer outputs are bit-exact everywhere; normal variates agree across
//! independent implementations to ~1e-12 relative (libm-level differences
//! in ln/cos/sin), and are bit-exact within one build.

use crate::error::{Error, Result};
use crate::types::{ActivationMatrix, WeightMatrix};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// i-th (0-based) output of the SplitMix64 stream for `seed`.
pub fn splitmix64_output(seed: u64, i: u64) -> u64 {
    mix64(seed.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// First `n` standard-normal variates of the stream for `seed`.
pub fn standard_normals(seed: u64, n: usize) -> Vec<f64> {
    let pairs = n.div_ceil(2);
    let mut out = Vec::with_capacity(pairs * 2);
    for p in 0..pairs {
        let x0 = splitmix64_output(seed, 2 * p as u64);
        let x1 = splitmix64_output(seed, 2 * p as u64 + 1);
        let u1 = ((x0 >> 11) as f64 + 1.0) * 2f64.powi(-53);
        let u2 = (x1 >> 11) as f64 * 2f64.powi(-53);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        out.push(r * th.cos());
        out.push(r * th.sin());
    }
    out.truncate(n);
    out
}

/// Parameters of a synthetic layer: dimensions, outlier structure, seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub c_out: usize,
    pub c_in: usize,
    pub tokens: usize,
    /// Fraction of input channels scaled up as outliers, in [0, 1].
    pub outlier_fraction: f64,
    /// Multiplier applied to outlier channels, >= 1.
    pub outlier_scale: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_out == 0 || self.c_in == 0 || self.tokens == 0 {
            return Err(Error::InvalidSpec {
                what: "synthetic spec",
                why: format!(
                    "dimensions must be >= 1, got {}x{} with {} tokens",
                    self.c_out, self.c_in, self.tokens
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidSpec {
                what: "synthetic spec",
                why: format!("outlier_fraction {} outside [0, 1]", self.outlier_fraction),
            });
        }
        if !self.outlier_scale.is_finite() || self.outlier_scale < 1.0 {
            return Err(Error::InvalidSpec {
                what: "synthetic spec",
                why: format!("outlier_scale {} must be finite and >= 1", self.outlier_scale),
            });
        }
        Ok(())
    }
}

/// Indices of the outlier channel subset for a spec (partial Fisher-Yates).
fn outlier_subset(c_in: usize, fraction: f64, subset_seed: u64) -> Vec<usize> {
    let n_out = (fraction * c_in as f64).ceil() as usize;
    let mut idx: Vec<usize> = (0..c_in).collect();
    for i in 0..n_out {
        let draw = splitmix64_output(subset_seed, i as u64);
        let j = i + (draw % (c_in - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(n_out);
    idx
}

/// Deterministic synthetic layer: i.i.d. standard-normal weights;
/// standard-normal activations with an outlier channel subset scaled by
/// `outlier_scale` before rounding to f32.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(WeightMatrix, ActivationMatrix)> {
    spec.validate()?;
    let seed_w = splitmix64_output(spec.seed, 0);
    let seed_a = splitmix64_output(spec.seed, 1);
    let seed_o = splitmix64_output(spec.seed, 2);

    let w: Vec<f32> = standard_normals(seed_w, spec.c_out * spec.c_in)
        .into_iter()
        .map(|v| v as f32)
        .collect();

    let mut a64 = standard_normals(seed_a, spec.c_in * spec.tokens);
    for k in outlier_subset(spec.c_in, spec.outlier_fraction, seed_o) {
        for v in &mut a64[k * spec.tokens..(k + 1) * spec.tokens] {
            *v *= spec.outlier_scale;
        }
    }
    let a: Vec<f32> = a64.into_iter().map(|v| v as f32).collect();

    Ok((
        WeightMatrix::new(spec.c_out, spec.c_in, w)?,
        ActivationMatrix::new(spec.c_in, spec.tokens, a)?,
    ))
}

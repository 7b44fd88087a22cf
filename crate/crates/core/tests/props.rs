//! Randomized properties of the numeric kernels: invariances the design
//! promises regardless of input data.

use proptest::prelude::*;

use remask::prune::{prune_to_nm, prune_to_ratio, Granularity, PruneMethod, PruneSpec, PruneTarget};
use remask::refine::{apply_swap, refine_row, RefineConfig, TerminationMetric};
use remask::types::{
    compute_channel_stats, reconstruction_error, ActivationMatrix, MaskPattern, SparsityMask,
    WeightMatrix,
};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(-10.0f32..10.0, len..=len)
}

#[derive(Debug, Clone)]
struct RowCase {
    cols: usize,
    tokens: usize,
    w: Vec<f32>,
    a: Vec<f32>,
    mask: Vec<u8>,
}

fn row_case() -> impl Strategy<Value = RowCase> {
    (2usize..=24, 1usize..=12)
        .prop_flat_map(|(cols, tokens)| {
            (
                Just(cols),
                Just(tokens),
                finite_vec(cols),
                finite_vec(cols * tokens),
                prop::collection::vec(0u8..=1, cols..=cols),
            )
        })
        .prop_map(|(cols, tokens, w, a, mask)| RowCase { cols, tokens, w, a, mask })
}

fn row_state(case: &RowCase) -> remask::types::RowReconState {
    let w = WeightMatrix::new(1, case.cols, case.w.clone()).unwrap();
    let m = SparsityMask::new(1, case.cols, case.mask.clone(), MaskPattern::Unstructured).unwrap();
    let a = ActivationMatrix::new(case.cols, case.tokens, case.a.clone()).unwrap();
    reconstruction_error(&w, &m, &a).unwrap().remove(0)
}

proptest! {
    /// Reordering tokens permutes the error vector but leaves its mean,
    /// norm, and the channel statistics unchanged up to summation order.
    #[test]
    fn token_permutation_invariance(case in row_case(), perm_seed in 0u64..1000) {
        let tokens = case.tokens;
        let mut order: Vec<usize> = (0..tokens).collect();
        // Fisher-Yates driven by a hash of the seed.
        for i in 0..tokens.saturating_sub(1) {
            let j = i + (remask::synth::splitmix64_output(perm_seed, i as u64) as usize) % (tokens - i);
            order.swap(i, j);
        }
        let mut permuted = vec![0.0f32; case.a.len()];
        for k in 0..case.cols {
            for (t, &src) in order.iter().enumerate() {
                permuted[k * tokens + t] = case.a[k * tokens + src];
            }
        }
        let base = row_state(&case);
        let perm_case = RowCase { a: permuted.clone(), ..case.clone() };
        let shuffled = row_state(&perm_case);
        let tol = 1e-6 * base.delta_l2.abs().max(1.0);
        prop_assert!((base.delta_l2 - shuffled.delta_l2).abs() <= tol);
        prop_assert!((base.delta_mean - shuffled.delta_mean).abs() <= tol);

        let sa = compute_channel_stats(&ActivationMatrix::new(case.cols, tokens, case.a.clone()).unwrap());
        let sb = compute_channel_stats(&ActivationMatrix::new(case.cols, tokens, permuted).unwrap());
        for k in 0..case.cols {
            let m_tol = 1e-6f32 * sa.mean[k].abs().max(1.0);
            prop_assert!((sa.mean[k] - sb.mean[k]).abs() <= m_tol);
            let v_tol = 1e-5f32 * sa.variance[k].abs().max(1.0);
            prop_assert!((sa.variance[k] - sb.variance[k]).abs() <= v_tol);
            prop_assert!((sa.l2norm[k] - sb.l2norm[k]).abs() <= 1e-6 * sa.l2norm[k].abs().max(1.0));
        }
    }

    /// Pruning one more kept weight adds exactly that weight's channel
    /// contribution to the error vector.
    #[test]
    fn mask_bit_linearity(case in row_case(), pick in 0usize..64) {
        let kept: Vec<usize> = (0..case.cols).filter(|&k| case.mask[k] == 1).collect();
        prop_assume!(!kept.is_empty());
        let k = kept[pick % kept.len()];
        let base = row_state(&case);
        let mut pruned_case = case.clone();
        pruned_case.mask[k] = 0;
        let pruned = row_state(&pruned_case);
        for t in 0..case.tokens {
            let want = base.delta[t] as f64 + case.w[k] as f64 * case.a[k * case.tokens + t] as f64;
            let got = pruned.delta[t] as f64;
            prop_assert!((got - want).abs() <= 1e-5 * want.abs().max(1.0), "token {t}: {got} vs {want}");
        }
    }

    /// A constant channel has exactly zero variance; a channel with a
    /// visible spread has strictly positive variance.
    #[test]
    fn variance_zero_iff_constant(v in -10.0f32..10.0, tokens in 1usize..16, bump in 0.001f32..1.0) {
        let constant = ActivationMatrix::new(1, tokens, vec![v; tokens]).unwrap();
        let s = compute_channel_stats(&constant);
        prop_assert_eq!(s.variance[0], 0.0);
        prop_assert!((s.mean[0] - v).abs() <= 1e-6 * v.abs().max(1.0));

        if tokens > 1 {
            let mut values = vec![v; tokens];
            values[0] += bump;
            let spread = ActivationMatrix::new(1, tokens, values).unwrap();
            prop_assert!(compute_channel_stats(&spread).variance[0] > 0.0);
        }
    }

    /// Ratio pruning removes the rounded count in every row (or in the
    /// whole layer for per-layer granularity).
    #[test]
    fn prune_counts_match_target(
        rows in 1usize..6,
        cols in 1usize..24,
        ratio in 0.0f64..1.0,
        seed in 0u64..500,
        per_layer in any::<bool>(),
    ) {
        let w_vals: Vec<f32> = (0..rows * cols)
            .map(|i| ((remask::synth::splitmix64_output(seed, i as u64) >> 40) as f32 / 1e6) - 8.0)
            .collect();
        let w = WeightMatrix::new(rows, cols, w_vals).unwrap();
        let stats = remask::types::ChannelStats {
            mean: vec![0.0; cols],
            variance: vec![1.0; cols],
            l2norm: (0..cols).map(|k| 1.0 + k as f32).collect(),
        };
        let spec = PruneSpec {
            method: PruneMethod::Wanda,
            target: PruneTarget::Ratio(ratio),
            granularity: if per_layer { Granularity::PerLayer } else { Granularity::PerRow },
        };
        let mask = prune_to_ratio(&w, &stats, &spec).unwrap();
        if per_layer {
            let total = rows * cols;
            let kp = (ratio * total as f64).round() as usize;
            prop_assert_eq!(mask.nnz(), total - kp);
        } else {
            let kp = (ratio * cols as f64).round() as usize;
            for r in 0..rows {
                prop_assert_eq!(mask.nnz_row(r), cols - kp);
            }
        }
    }

    /// Block pruning keeps exactly n per aligned m-block, and the result
    /// passes its own pattern validation.
    #[test]
    fn nm_blocks_are_exact(
        rows in 1usize..5,
        blocks in 1usize..6,
        n in 1u32..4,
        seed in 0u64..500,
    ) {
        let m = 4u32;
        let cols = blocks * m as usize;
        let w_vals: Vec<f32> = (0..rows * cols)
            .map(|i| ((remask::synth::splitmix64_output(seed ^ 0xabcd, i as u64) >> 40) as f32 / 1e6) - 8.0)
            .collect();
        let w = WeightMatrix::new(rows, cols, w_vals).unwrap();
        let stats = remask::types::ChannelStats {
            mean: vec![0.0; cols],
            variance: vec![1.0; cols],
            l2norm: vec![1.0; cols],
        };
        let spec = PruneSpec {
            method: PruneMethod::Magnitude,
            target: PruneTarget::NOfM { n, m },
            granularity: Granularity::PerRow,
        };
        let mask = prune_to_nm(&w, &stats, &spec).unwrap();
        mask.validate().unwrap();
        for r in 0..rows {
            for block in mask.row(r).chunks(m as usize) {
                prop_assert_eq!(block.iter().filter(|&&b| b == 1).count(), n as usize);
            }
        }
    }

    /// Refinement conserves the kept count, reports swaps consistently,
    /// and its final metric matches the returned state.
    #[test]
    fn refine_conserves_and_reports(case in row_case(), threshold in 0.0f64..2.0) {
        let a = ActivationMatrix::new(case.cols, case.tokens, case.a.clone()).unwrap();
        let stats = compute_channel_stats(&a);
        let mut config = RefineConfig::default();
        config.threshold = threshold;
        config.termination_metric = TerminationMetric::AbsMean;
        let mut bits = case.mask.clone();
        let nnz0 = bits.iter().filter(|&&b| b == 1).count();
        let (report, state) = refine_row(&case.w, &mut bits, &a, &stats, &config, 0).unwrap();
        prop_assert_eq!(bits.iter().filter(|&&b| b == 1).count(), nnz0);
        prop_assert_eq!(report.swaps.len() as u32, report.cycles_used);
        prop_assert!(report.cycles_used <= config.max_cycles);
        prop_assert_eq!(report.final_metric, state.delta_mean.abs());
        for &(i, j) in &report.swaps {
            prop_assert!(i != j);
            prop_assert!(i < case.cols && j < case.cols);
        }
    }

    /// A swap followed by its inverse restores the error state.
    #[test]
    fn swap_inverse_restores(case in row_case(), pick in 0u64..1000) {
        let kept: Vec<usize> = (0..case.cols).filter(|&k| case.mask[k] == 1).collect();
        let pruned: Vec<usize> = (0..case.cols).filter(|&k| case.mask[k] == 0).collect();
        prop_assume!(!kept.is_empty() && !pruned.is_empty());
        let i = pruned[(pick as usize) % pruned.len()];
        let j = kept[(pick as usize / 7) % kept.len()];
        let a = ActivationMatrix::new(case.cols, case.tokens, case.a.clone()).unwrap();
        let stats = compute_channel_stats(&a);
        let orig = row_state(&case);
        let mut state = orig.clone();
        let mut bits = case.mask.clone();
        apply_swap(&mut state, &case.w, &a, &stats, &mut bits, i, j).unwrap();
        apply_swap(&mut state, &case.w, &a, &stats, &mut bits, j, i).unwrap();
        prop_assert_eq!(&bits, &case.mask);
        let tol = 1e-5 * orig.delta_l2.max(1.0);
        prop_assert!((state.delta_mean - orig.delta_mean).abs() <= tol);
        prop_assert!((state.delta_l2 - orig.delta_l2).abs() <= tol);
    }

    /// Scaling every activation by a power of two scales the scores
    /// exactly and leaves the chosen mask unchanged.
    #[test]
    fn wanda_mask_invariant_to_power_of_two_scaling(
        rows in 1usize..4,
        cols in 2usize..16,
        tokens in 1usize..8,
        ratio in 0.0f64..1.0,
        shift in 0i32..4,
        seed in 0u64..500,
    ) {
        let scale = (1u32 << shift) as f32;
        let w_vals: Vec<f32> = (0..rows * cols)
            .map(|i| ((remask::synth::splitmix64_output(seed ^ 0x55, i as u64) >> 40) as f32 / 1e6) - 8.0)
            .collect();
        let a_vals: Vec<f32> = (0..cols * tokens)
            .map(|i| ((remask::synth::splitmix64_output(seed ^ 0x66, i as u64) >> 40) as f32 / 1e6) - 8.0)
            .collect();
        let w = WeightMatrix::new(rows, cols, w_vals).unwrap();
        let a1 = ActivationMatrix::new(cols, tokens, a_vals.clone()).unwrap();
        let a2 = ActivationMatrix::new(cols, tokens, a_vals.iter().map(|v| v * scale).collect()).unwrap();
        let spec = PruneSpec {
            method: PruneMethod::Wanda,
            target: PruneTarget::Ratio(ratio),
            granularity: Granularity::PerRow,
        };
        let m1 = prune_to_ratio(&w, &compute_channel_stats(&a1), &spec).unwrap();
        let m2 = prune_to_ratio(&w, &compute_channel_stats(&a2), &spec).unwrap();
        prop_assert_eq!(m1.bits(), m2.bits());
    }
}
